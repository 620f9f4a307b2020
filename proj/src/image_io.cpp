#include "vdn/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <memory>
#include <vector>

#include "vdn/error.hpp"

namespace vdn {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

void on_png_error(png_structp png, png_const_charp msg) {
  auto* buf = static_cast<std::string*>(png_get_error_ptr(png));
  if (buf) *buf = msg;
  png_longjmp(png, 1);
}

void on_png_warning(png_structp, png_const_charp) {}

struct Decoded {
  std::vector<png_byte> pixels;
  std::vector<png_bytep> rows;
  png_uint_32 width = 0, height = 0;
  int bit_depth = 0, color_type = 0, channels = 0;
  std::size_t rowbytes = 0;
  bool unsupported_depth = false;
};

// Kept separate so that nothing in load_image() is live across the longjmp.
bool decode_png(png_structp png, png_infop info, std::FILE* fp, Decoded& d) {
  if (setjmp(png_jmpbuf(png))) return false;
  png_init_io(png, fp);
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  d.width = png_get_image_width(png, info);
  d.height = png_get_image_height(png, info);
  d.bit_depth = png_get_bit_depth(png, info);
  d.color_type = png_get_color_type(png, info);
  // Palette indices of any depth expand to 8-bit RGB.
  if (d.color_type == PNG_COLOR_TYPE_PALETTE) {
    png_set_palette_to_rgb(png);
  } else if (d.bit_depth != 8 && d.bit_depth != 16) {
    d.unsupported_depth = true;
    return true;
  }
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (d.color_type & PNG_COLOR_MASK_ALPHA || png_get_valid(png, info, PNG_INFO_tRNS))
    png_set_strip_alpha(png);
  if (d.bit_depth == 16) png_set_swap(png);  // host little-endian 16-bit samples
  png_read_update_info(png, info);
  d.channels = png_get_channels(png, info);
  d.rowbytes = png_get_rowbytes(png, info);
  d.pixels.resize(d.rowbytes * d.height);
  d.rows.resize(d.height);
  for (png_uint_32 y = 0; y < d.height; ++y) d.rows[y] = d.pixels.data() + y * d.rowbytes;
  png_read_image(png, d.rows.data());
  png_read_end(png, nullptr);
  return true;
}

}  // namespace

ImageTensor load_image(const std::filesystem::path& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw IoError("cannot open image: " + path.string());

  unsigned char sig[8];
  if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0)
    throw FormatError("not a PNG stream: " + path.string());

  std::string err;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err, on_png_error, on_png_warning);
  if (!png) throw Error("png: out of memory");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw Error("png: out of memory");
  }

  Decoded d;
  const bool ok = decode_png(png, info, fp.get(), d);
  png_destroy_read_struct(&png, &info, nullptr);
  if (!ok) throw FormatError("corrupt PNG stream (" + err + "): " + path.string());

  if (d.unsupported_depth)
    throw FormatError("unsupported PNG bit depth " + std::to_string(d.bit_depth) + ": " + path.string());
  if (d.channels != 1 && d.channels != 3)
    throw FormatError("unsupported PNG channel layout: " + path.string());

  const int bit_depth = d.color_type == PNG_COLOR_TYPE_PALETTE ? 8 : d.bit_depth;
  const std::size_t rowbytes = d.rowbytes, height = d.height, width = d.width;
  const std::vector<png_byte>& pixels = d.pixels;
  const auto C = static_cast<std::size_t>(d.channels);
  ImageTensor t(Shape{C, height, width});
  for (std::size_t y = 0; y < height; ++y) {
    const png_byte* row = pixels.data() + y * rowbytes;
    for (std::size_t x = 0; x < width; ++x)
      for (std::size_t c = 0; c < C; ++c) {
        const std::size_t k = x * C + c;
        if (bit_depth == 16) {
          std::uint16_t v;
          std::memcpy(&v, row + 2 * k, 2);
          t.at(c, y, x) = static_cast<float>(v) / 65535.0f;
        } else {
          t.at(c, y, x) = static_cast<float>(row[k]) / 255.0f;
        }
      }
  }
  return t;
}

void save_image(const ImageTensor& t, const std::filesystem::path& path, int bit_depth) {
  if (t.channels() != 1 && t.channels() != 3)
    throw ShapeError("PNG output needs 1 or 3 channels, got " + std::to_string(t.channels()));
  if (bit_depth != 8 && bit_depth != 16) throw DomainError("PNG bit depth must be 8 or 16");

  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw IoError("cannot open for writing: " + path.string());

  const std::size_t C = t.channels(), H = t.height(), W = t.width();
  const std::size_t bytes_per_sample = bit_depth == 16 ? 2 : 1;
  const std::size_t rowbytes = W * C * bytes_per_sample;
  std::vector<png_byte> pixels(rowbytes * H);
  const double maxcode = bit_depth == 16 ? 65535.0 : 255.0;
  for (std::size_t y = 0; y < H; ++y)
    for (std::size_t x = 0; x < W; ++x)
      for (std::size_t c = 0; c < C; ++c) {
        const double v = std::clamp(static_cast<double>(t.at(c, y, x)), 0.0, 1.0);
        const auto code = static_cast<unsigned>(std::lround(v * maxcode));
        png_byte* dst = pixels.data() + y * rowbytes + (x * C + c) * bytes_per_sample;
        if (bit_depth == 16) {
          dst[0] = static_cast<png_byte>(code >> 8);  // PNG is big-endian
          dst[1] = static_cast<png_byte>(code & 0xff);
        } else {
          dst[0] = static_cast<png_byte>(code);
        }
      }

  std::string err;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err, on_png_error, on_png_warning);
  if (!png) throw Error("png: out of memory");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw Error("png: out of memory");
  }
  std::vector<png_bytep> rows(H);
  for (std::size_t y = 0; y < H; ++y) rows[y] = pixels.data() + y * rowbytes;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("PNG write failed (" + err + "): " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(W), static_cast<png_uint_32>(H), bit_depth,
               C == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace vdn
