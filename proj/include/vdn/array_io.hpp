#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "vdn/tensor.hpp"

namespace vdn {

// On-disk array container:
//
//   offset 0  : "VDNA" magic (4 bytes)
//   offset 4  : version, uint8 (= 1)
//   offset 5  : ndim, uint8
//   offset 6  : ndim x uint32 little-endian dims
//   then      : prod(dims) x float32 little-endian payload
//
// No padding, no trailing bytes.
struct NdArray {
  std::vector<std::uint32_t> dims;
  std::vector<float> data;

  std::size_t element_count() const;
};

inline constexpr std::uint8_t kArrayFormatVersion = 1;

void write_array(std::ostream& out, const NdArray& a);
NdArray read_array(std::istream& in);

void save_array(const NdArray& a, const std::filesystem::path& path);
NdArray load_nd_array(const std::filesystem::path& path);

// Image-shaped convenience wrappers; a 3-dim file maps to (C,H,W), a 2-dim
// file to (1,H,W).
void save_array(const Tensor& t, const std::filesystem::path& path);
Tensor load_array(const std::filesystem::path& path);

NdArray to_nd(const Tensor& t);
Tensor to_tensor(const NdArray& a);

}  // namespace vdn
