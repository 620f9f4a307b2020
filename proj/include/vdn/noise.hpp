#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vdn/dataset.hpp"
#include "vdn/tensor.hpp"

namespace vdn {

enum class MapKind { kGaussianBump, kConstant, kMultiBump };

std::string to_string(MapKind k);
MapKind map_kind_from_string(const std::string& s);

// Parametric family of spatially variant noise-std maps.  Coordinates are
// relative: (0,0) is the top-left pixel centre, (1,1) the bottom-right one.
//
//   gaussian-bump: base + (peak - base) * exp(-|r - c|^2 / (2 w^2))
//   multi-bump:    same profile, maximum over `bumps` seeded centres
//   constant:      peak everywhere
struct MapFamilySpec {
  MapKind kind = MapKind::kGaussianBump;
  double peak_sigma = 75.0 / 255.0;
  double base_sigma = 5.0 / 255.0;
  double center_y = 0.5;
  double center_x = 0.5;
  double width = 0.25;
  // Per-seed uniform displacement of the centre in [-jitter, jitter].
  double jitter = 0.0;
  int bumps = 3;
  std::uint64_t seed = 0;

  void validate() const;
  std::string to_json() const;
  static MapFamilySpec from_json(const std::string& text);
};

VarianceMap generate_variance_map(const MapFamilySpec& spec, const Shape& shape);

// n = N(0,1) draw (independent per channel and pixel) times M.
ImageTensor sample_noise(const VarianceMap& m, std::uint64_t seed);

// noisy = clamp(clean + sample_noise(M), 0, 1).  Each image gets its own map
// (seeded from `seed` and its index, so jittered families vary per image) and
// its own noise draw.  The stored sigma maps are the pre-clamp M.
PairedDataset make_dataset(const std::vector<ImageTensor>& cleans, const MapFamilySpec& spec,
                           std::uint64_t seed);

// Procedural piecewise-smooth test scene in [0.2, 0.8]: a colour gradient with
// a handful of soft-edged discs and rectangles and a faint sinusoidal texture.
// Used to build training/testing sets when no photographs are supplied.
ImageTensor synthetic_scene(const Shape& shape, std::uint64_t seed);
std::vector<ImageTensor> synthetic_scenes(std::size_t count, const Shape& shape, std::uint64_t seed);

}  // namespace vdn
