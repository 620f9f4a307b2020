#include "vdn/dataset.hpp"

#include <fstream>
#include <sstream>

#include "vdn/array_io.hpp"
#include "vdn/error.hpp"
#include "vdn/image_io.hpp"
#include "vdn/rng.hpp"

namespace vdn {

void PairedDataset::validate() const {
  if (pairs.empty()) throw ShapeError("dataset is empty");
  if (!sigma.empty() && sigma.size() != pairs.size())
    throw ShapeError("dataset: sigma map count does not match pair count");
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    require_same_shape(pairs[i].noisy.shape(), pairs[i].clean.shape(), "dataset pair");
    if (!sigma.empty()) require_same_shape(pairs[i].noisy.shape(), sigma[i].shape(), "dataset sigma");
  }
}

Tensor dihedral(const Tensor& t, int k) {
  if (k == 0) return t;
  const bool transpose = k & 4, flip_v = k & 2, flip_h = k & 1;
  const std::size_t H = t.height(), W = t.width();
  if (transpose && H != W) throw ShapeError("dihedral transpose needs a square tensor");
  Tensor out(t.shape());
  for (std::size_t c = 0; c < t.channels(); ++c)
    for (std::size_t y = 0; y < H; ++y)
      for (std::size_t x = 0; x < W; ++x) {
        std::size_t sy = flip_v ? H - 1 - y : y;
        std::size_t sx = flip_h ? W - 1 - x : x;
        if (transpose) std::swap(sy, sx);
        out.at(c, y, x) = t.at(c, sy, sx);
      }
  return out;
}

std::vector<ImagePair> crop_patches(const ImagePair& pair, std::size_t size, std::size_t count,
                                    std::uint64_t seed, bool augment) {
  require_same_shape(pair.noisy.shape(), pair.clean.shape(), "crop_patches");
  const std::size_t H = pair.noisy.height(), W = pair.noisy.width();
  if (size == 0) throw DomainError("patch size must be positive");
  if (H < size || W < size)
    throw ShapeError("image " + pair.noisy.shape().str() + " smaller than patch size " +
                     std::to_string(size));
  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> ys(0, H - size), xs(0, W - size);
  std::uniform_int_distribution<int> ks(0, 7);
  std::vector<ImagePair> out;
  out.reserve(count);
  for (std::size_t n = 0; n < count; ++n) {
    const std::size_t y0 = ys(rng);
    const std::size_t x0 = xs(rng);
    ImagePair p{pair.noisy.crop(y0, x0, size, size), pair.clean.crop(y0, x0, size, size)};
    if (augment) {
      const int k = ks(rng);
      p.noisy = dihedral(p.noisy, k);
      p.clean = dihedral(p.clean, k);
    }
    out.push_back(std::move(p));
  }
  return out;
}

void save_dataset(const PairedDataset& ds, const std::filesystem::path& dir) {
  ds.validate();
  namespace fs = std::filesystem;
  fs::create_directories(dir / "clean");
  fs::create_directories(dir / "noisy");
  if (ds.has_sigma()) fs::create_directories(dir / "sigma");

  std::ofstream manifest(dir / "manifest", std::ios::trunc);
  if (!manifest) throw IoError("cannot write manifest in " + dir.string());
  manifest << "# spec " << (ds.generation_spec.empty() ? "{}" : ds.generation_spec) << "\n";
  manifest << "# seed " << ds.seed << "\n";
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const std::string id = i < ds.ids.size() ? ds.ids[i] : std::to_string(i);
    const std::string clean = "clean/" + id + ".png";
    const std::string noisy = "noisy/" + id + ".png";
    save_image(ds.pairs[i].clean, dir / clean, 16);
    save_image(ds.pairs[i].noisy, dir / noisy, 16);
    std::string sigma = "-";
    if (ds.has_sigma()) {
      sigma = "sigma/" + id + ".vdna";
      save_array(ds.sigma[i], dir / sigma);
    }
    manifest << id << ' ' << clean << ' ' << noisy << ' ' << sigma << '\n';
  }
  if (!manifest) throw IoError("manifest write failed in " + dir.string());
}

PairedDataset load_dataset(const std::filesystem::path& dir) {
  std::ifstream manifest(dir / "manifest");
  if (!manifest) throw IoError("missing dataset manifest: " + (dir / "manifest").string());
  PairedDataset ds;
  std::string line;
  while (std::getline(manifest, line)) {
    if (line.empty()) continue;
    if (line.rfind("# spec ", 0) == 0) {
      ds.generation_spec = line.substr(7);
      continue;
    }
    if (line.rfind("# seed ", 0) == 0) {
      ds.seed = std::stoull(line.substr(7));
      continue;
    }
    if (line[0] == '#') continue;
    std::istringstream ss(line);
    std::string id, clean, noisy, sigma;
    if (!(ss >> id >> clean >> noisy >> sigma))
      throw FormatError("malformed manifest line: " + line);
    ds.ids.push_back(id);
    ds.pairs.push_back({load_image(dir / noisy), load_image(dir / clean)});
    if (sigma != "-") ds.sigma.push_back(load_array(dir / sigma));
  }
  ds.validate();
  return ds;
}

}  // namespace vdn
