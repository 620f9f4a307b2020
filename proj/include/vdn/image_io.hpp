#pragma once

#include <filesystem>

#include "vdn/tensor.hpp"

namespace vdn {

// Reads an 8- or 16-bit PNG into a (C,H,W) tensor with values scaled to
// [0,1].  Gray images give C=1, color images C=3; alpha is dropped.
ImageTensor load_image(const std::filesystem::path& path);

// Writes a 1- or 3-channel tensor as PNG.  Values are clamped to [0,1] and
// rounded to the nearest code.
void save_image(const ImageTensor& t, const std::filesystem::path& path, int bit_depth = 8);

}  // namespace vdn
