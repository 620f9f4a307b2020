#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "vdn/tensor.hpp"

namespace vdn {

struct ImagePair {
  ImageTensor noisy;
  ImageTensor clean;
};

struct PairedDataset {
  std::vector<ImagePair> pairs;
  // Ground-truth noise std maps, one per pair, when the data was simulated.
  std::vector<VarianceMap> sigma;
  std::vector<std::string> ids;
  std::uint64_t seed = 0;
  std::string generation_spec;  // JSON echo of the generator settings

  std::size_t size() const { return pairs.size(); }
  bool empty() const { return pairs.empty(); }
  bool has_sigma() const { return !sigma.empty(); }
  // Throws unless nonempty and every pair (and sigma map) shares one shape
  // per index.
  void validate() const;
};

// Aligned random crops: the noisy and clean patch of every output pair come
// from the same window.  With `augment`, each pair also receives one of the
// eight flip/rotation variants (applied identically to both images).
std::vector<ImagePair> crop_patches(const ImagePair& pair, std::size_t size, std::size_t count,
                                    std::uint64_t seed, bool augment = false);

// Applies dihedral transform `k` in [0,8): bit 2 transposes, bit 1 flips
// vertically, bit 0 flips horizontally.  Square tensors only when k >= 4.
Tensor dihedral(const Tensor& t, int k);

// Dataset directory layout:
//   clean/<id>.png   noisy/<id>.png   sigma/<id>.vdna   manifest
// The manifest is a text file: a "# spec <json>" line, a "# seed <n>" line,
// then one "<id> clean/<id>.png noisy/<id>.png sigma/<id>.vdna" line per pair.
// Images are written as 16-bit PNG.
void save_dataset(const PairedDataset& ds, const std::filesystem::path& dir);
PairedDataset load_dataset(const std::filesystem::path& dir);

}  // namespace vdn
