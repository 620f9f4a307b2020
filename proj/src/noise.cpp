#include "vdn/noise.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <json.hpp>
#include <random>

#include "vdn/error.hpp"
#include "vdn/rng.hpp"

namespace vdn {

std::string to_string(MapKind k) {
  switch (k) {
    case MapKind::kGaussianBump: return "gaussian-bump";
    case MapKind::kConstant: return "constant";
    case MapKind::kMultiBump: return "multi-bump";
  }
  return "?";
}

MapKind map_kind_from_string(const std::string& s) {
  if (s == "gaussian-bump") return MapKind::kGaussianBump;
  if (s == "constant") return MapKind::kConstant;
  if (s == "multi-bump") return MapKind::kMultiBump;
  throw ConfigError("unknown map kind '" + s + "'");
}

void MapFamilySpec::validate() const {
  if (!(base_sigma >= 0.0) || !(peak_sigma >= 0.0)) throw DomainError("noise sigmas must be >= 0");
  if (base_sigma > peak_sigma) throw DomainError("base_sigma must not exceed peak_sigma");
  if (kind != MapKind::kConstant && !(width > 0.0)) throw DomainError("bump width must be > 0");
  if (jitter < 0.0) throw DomainError("jitter must be >= 0");
  if (kind == MapKind::kMultiBump && bumps < 1) throw DomainError("multi-bump needs >= 1 bump");
}

std::string MapFamilySpec::to_json() const {
  nlohmann::ordered_json j;
  j["kind"] = to_string(kind);
  j["peak_sigma"] = peak_sigma;
  j["base_sigma"] = base_sigma;
  j["center"] = {center_y, center_x};
  j["width"] = width;
  j["jitter"] = jitter;
  j["bumps"] = bumps;
  j["seed"] = seed;
  return j.dump();
}

MapFamilySpec MapFamilySpec::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("noise spec: ") + e.what());
  }
  MapFamilySpec s;
  try {
    if (j.contains("kind")) s.kind = map_kind_from_string(j["kind"].get<std::string>());
    // "sigma" is shorthand for a constant level.
    if (j.contains("sigma")) s.peak_sigma = s.base_sigma = j["sigma"].get<double>();
    if (j.contains("peak_sigma")) s.peak_sigma = j["peak_sigma"].get<double>();
    if (j.contains("base_sigma")) s.base_sigma = j["base_sigma"].get<double>();
    if (j.contains("center")) {
      s.center_y = j["center"].at(0).get<double>();
      s.center_x = j["center"].at(1).get<double>();
    }
    if (j.contains("width")) s.width = j["width"].get<double>();
    if (j.contains("jitter")) s.jitter = j["jitter"].get<double>();
    if (j.contains("bumps")) s.bumps = j["bumps"].get<int>();
    if (j.contains("seed")) s.seed = j["seed"].get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("noise spec: ") + e.what());
  }
  s.validate();
  return s;
}

namespace {

double rel_coord(std::size_t i, std::size_t n) {
  return n == 1 ? 0.5 : static_cast<double>(i) / static_cast<double>(n - 1);
}

}  // namespace

VarianceMap generate_variance_map(const MapFamilySpec& spec, const Shape& shape) {
  spec.validate();
  if (!shape.valid()) throw ShapeError("variance map shape must be nonzero, got " + shape.str());

  Rng rng(derive_seed(spec.seed, "map"));
  std::uniform_real_distribution<double> jit(-spec.jitter, spec.jitter);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::vector<std::pair<double, double>> centers;
  if (spec.kind == MapKind::kGaussianBump) {
    const double dy = spec.jitter > 0 ? jit(rng) : 0.0;
    const double dx = spec.jitter > 0 ? jit(rng) : 0.0;
    centers.emplace_back(spec.center_y + dy, spec.center_x + dx);
  } else if (spec.kind == MapKind::kMultiBump) {
    for (int b = 0; b < spec.bumps; ++b) centers.emplace_back(unit(rng), unit(rng));
  }

  const double amp = spec.peak_sigma - spec.base_sigma;
  const double inv2w2 = spec.kind == MapKind::kConstant ? 0.0 : 1.0 / (2.0 * spec.width * spec.width);
  Tensor plane(Shape{1, shape.height, shape.width});
  for (std::size_t y = 0; y < shape.height; ++y) {
    const double ry = rel_coord(y, shape.height);
    for (std::size_t x = 0; x < shape.width; ++x) {
      const double rx = rel_coord(x, shape.width);
      double v = spec.peak_sigma;
      if (spec.kind != MapKind::kConstant) {
        double best = 0.0;
        for (const auto& [cy, cx] : centers) {
          const double d2 = (ry - cy) * (ry - cy) + (rx - cx) * (rx - cx);
          best = std::max(best, std::exp(-d2 * inv2w2));
        }
        v = spec.base_sigma + amp * best;
      }
      plane.at(0, y, x) = static_cast<float>(v);
    }
  }

  VarianceMap m(shape);
  for (std::size_t c = 0; c < shape.channels; ++c)
    std::copy(plane.data(), plane.data() + shape.plane(), m.channel(c));
  return m;
}

ImageTensor sample_noise(const VarianceMap& m, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  ImageTensor n(m.shape());
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (m[i] < 0.0f) throw DomainError("variance map entries must be >= 0");
    n[i] = static_cast<float>(normal(rng) * static_cast<double>(m[i]));
  }
  return n;
}

PairedDataset make_dataset(const std::vector<ImageTensor>& cleans, const MapFamilySpec& spec,
                           std::uint64_t seed) {
  if (cleans.empty()) throw ShapeError("make_dataset: no clean images");
  spec.validate();
  PairedDataset ds;
  ds.seed = seed;
  ds.generation_spec = spec.to_json();
  for (std::size_t i = 0; i < cleans.size(); ++i) {
    const ImageTensor& clean = cleans[i];
    MapFamilySpec per_image = spec;
    per_image.seed = derive_seed(seed ^ spec.seed, "map", i);
    VarianceMap m = generate_variance_map(per_image, clean.shape());
    const ImageTensor n = sample_noise(m, derive_seed(seed, "noise", i));
    ImageTensor noisy(clean.shape());
    for (std::size_t k = 0; k < clean.size(); ++k) noisy[k] = std::clamp(clean[k] + n[k], 0.0f, 1.0f);
    ds.pairs.push_back({std::move(noisy), clean});
    ds.sigma.push_back(std::move(m));
    char id[16];
    std::snprintf(id, sizeof id, "%04zu", i);
    ds.ids.emplace_back(id);
  }
  return ds;
}

ImageTensor synthetic_scene(const Shape& shape, std::uint64_t seed) {
  if (!shape.valid()) throw ShapeError("scene shape must be nonzero");
  Rng rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const std::size_t C = shape.channels, H = shape.height, W = shape.width;

  struct Blob {
    bool disc;
    double cy, cx, ry, rx;
    std::vector<double> color;
  };
  const int nblobs = 4 + static_cast<int>(u(rng) * 5);
  std::vector<Blob> blobs;
  for (int b = 0; b < nblobs; ++b) {
    Blob blob{u(rng) < 0.5, u(rng), u(rng), 0.08 + 0.22 * u(rng), 0.08 + 0.22 * u(rng), {}};
    for (std::size_t c = 0; c < C; ++c) blob.color.push_back(u(rng));
    blobs.push_back(std::move(blob));
  }
  std::vector<double> g0(C), gy(C), gx(C);
  for (std::size_t c = 0; c < C; ++c) {
    g0[c] = 0.2 + 0.6 * u(rng);
    gy[c] = 0.4 * (u(rng) - 0.5);
    gx[c] = 0.4 * (u(rng) - 0.5);
  }
  const double fy = 2.0 + 6.0 * u(rng), fx = 2.0 + 6.0 * u(rng), phase = 6.283185307179586 * u(rng);
  const double edge = 1.5 / static_cast<double>(std::max(H, W));

  ImageTensor t(shape);
  for (std::size_t y = 0; y < H; ++y) {
    const double ry = rel_coord(y, H);
    for (std::size_t x = 0; x < W; ++x) {
      const double rx = rel_coord(x, W);
      const double tex = 0.03 * std::sin(6.283185307179586 * (fy * ry + fx * rx) + phase);
      for (std::size_t c = 0; c < C; ++c) {
        double v = g0[c] + gy[c] * (ry - 0.5) + gx[c] * (rx - 0.5);
        for (const Blob& b : blobs) {
          double sd;  // signed distance, negative inside
          if (b.disc) {
            const double dy = (ry - b.cy) / b.ry, dx = (rx - b.cx) / b.rx;
            sd = (std::sqrt(dy * dy + dx * dx) - 1.0) * std::min(b.ry, b.rx);
          } else {
            sd = std::max(std::abs(ry - b.cy) - b.ry, std::abs(rx - b.cx) - b.rx);
          }
          const double w = 1.0 / (1.0 + std::exp(sd / edge));
          v = (1.0 - w) * v + w * b.color[c];
        }
        v = std::clamp(v + tex, 0.0, 1.0);
        t.at(c, y, x) = static_cast<float>(0.2 + 0.6 * v);
      }
    }
  }
  return t;
}

std::vector<ImageTensor> synthetic_scenes(std::size_t count, const Shape& shape, std::uint64_t seed) {
  std::vector<ImageTensor> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(synthetic_scene(shape, derive_seed(seed, "scene", i)));
  return out;
}

}  // namespace vdn
