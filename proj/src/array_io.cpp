#include "vdn/array_io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "vdn/error.hpp"

namespace vdn {
namespace {

constexpr std::array<char, 4> kMagic = {'V', 'D', 'N', 'A'};

void put_u32(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw FormatError("array: truncated header");
  return static_cast<std::uint32_t>(b[0]) | static_cast<std::uint32_t>(b[1]) << 8 |
         static_cast<std::uint32_t>(b[2]) << 16 | static_cast<std::uint32_t>(b[3]) << 24;
}

}  // namespace

std::size_t NdArray::element_count() const {
  std::size_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

void write_array(std::ostream& out, const NdArray& a) {
  if (a.dims.empty() || a.dims.size() > 255) throw ShapeError("array: ndim must be in [1,255]");
  if (a.element_count() != a.data.size())
    throw ShapeError("array: dims describe " + std::to_string(a.element_count()) +
                     " elements but payload holds " + std::to_string(a.data.size()));
  out.write(kMagic.data(), kMagic.size());
  out.put(static_cast<char>(kArrayFormatVersion));
  out.put(static_cast<char>(a.dims.size()));
  for (auto d : a.dims) put_u32(out, d);
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(a.data.data()),
              static_cast<std::streamsize>(a.data.size() * sizeof(float)));
  } else {
    for (float f : a.data) put_u32(out, std::bit_cast<std::uint32_t>(f));
  }
  if (!out) throw IoError("array: write failed");
}

NdArray read_array(std::istream& in) {
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), magic.size())) throw FormatError("array: truncated header");
  if (magic != kMagic) throw FormatError("array: bad magic");
  const int version = in.get();
  if (version != kArrayFormatVersion)
    throw FormatError("array: unsupported version " + std::to_string(version));
  const int ndim = in.get();
  if (ndim <= 0) throw FormatError("array: ndim must be >= 1");
  NdArray a;
  a.dims.resize(static_cast<std::size_t>(ndim));
  for (auto& d : a.dims) d = get_u32(in);
  a.data.resize(a.element_count());
  if constexpr (std::endian::native == std::endian::little) {
    const auto bytes = static_cast<std::streamsize>(a.data.size() * sizeof(float));
    if (in.read(reinterpret_cast<char*>(a.data.data()), bytes).gcount() != bytes)
      throw FormatError("array: payload shorter than declared dims");
  } else {
    for (float& f : a.data) f = std::bit_cast<float>(get_u32(in));
  }
  if (in.peek() != std::char_traits<char>::eof())
    throw FormatError("array: trailing bytes after payload");
  return a;
}

void save_array(const NdArray& a, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  write_array(out, a);
  out.flush();
  if (!out) throw IoError("write failed: " + path.string());
}

NdArray load_nd_array(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path.string());
  return read_array(in);
}

NdArray to_nd(const Tensor& t) {
  NdArray a;
  a.dims = {static_cast<std::uint32_t>(t.channels()), static_cast<std::uint32_t>(t.height()),
            static_cast<std::uint32_t>(t.width())};
  a.data.assign(t.storage().begin(), t.storage().end());
  return a;
}

Tensor to_tensor(const NdArray& a) {
  Shape s;
  if (a.dims.size() == 3) {
    s = {a.dims[0], a.dims[1], a.dims[2]};
  } else if (a.dims.size() == 2) {
    s = {1, a.dims[0], a.dims[1]};
  } else {
    throw ShapeError("array: expected 2 or 3 dims for an image tensor, got " +
                     std::to_string(a.dims.size()));
  }
  return Tensor(s, a.data);
}

void save_array(const Tensor& t, const std::filesystem::path& path) { save_array(to_nd(t), path); }

Tensor load_array(const std::filesystem::path& path) { return to_tensor(load_nd_array(path)); }

}  // namespace vdn
