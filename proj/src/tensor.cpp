#include "vdn/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "vdn/error.hpp"

namespace vdn {

std::string Shape::str() const {
  return "(" + std::to_string(channels) + "," + std::to_string(height) + "," +
         std::to_string(width) + ")";
}

Tensor::Tensor(Shape shape, float fill) : shape_(shape) {
  if (!shape.valid()) throw ShapeError("tensor dimensions must be >= 1, got " + shape.str());
  data_.assign(shape.size(), fill);
}

Tensor::Tensor(Shape shape, const std::vector<float>& data)
    : Tensor(shape, FloatBuffer(data.begin(), data.end())) {}

Tensor::Tensor(Shape shape, FloatBuffer data) : shape_(shape), data_(std::move(data)) {
  if (!shape.valid()) throw ShapeError("tensor dimensions must be >= 1, got " + shape.str());
  if (data_.size() != shape.size())
    throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                     " does not match shape " + shape.str());
}

bool Tensor::is_unit_range() const {
  return std::all_of(data_.begin(), data_.end(), [](float v) { return v >= 0.0f && v <= 1.0f; });
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](float v) { return std::isfinite(v); });
}

Tensor Tensor::crop(std::size_t y0, std::size_t x0, std::size_t h, std::size_t w) const {
  if (y0 + h > height() || x0 + w > width())
    throw ShapeError("crop window exceeds tensor bounds");
  Tensor out(Shape{channels(), h, w});
  for (std::size_t c = 0; c < channels(); ++c)
    for (std::size_t y = 0; y < h; ++y) {
      const float* src = &data_[(c * height() + y0 + y) * width() + x0];
      std::copy(src, src + w, &out.at(c, y, 0));
    }
  return out;
}

Tensor Tensor::clamped(float lo, float hi) const {
  Tensor out = *this;
  for (float& v : out.data_) v = std::clamp(v, lo, hi);
  return out;
}

Field Field::from(const Tensor& t) {
  Field f;
  f.shape = t.shape();
  f.data.assign(t.storage().begin(), t.storage().end());
  return f;
}

Tensor Field::to_tensor() const {
  FloatBuffer v(data.begin(), data.end());
  return Tensor(shape, std::move(v));
}

void require_same_shape(const Shape& a, const Shape& b, const char* what) {
  if (!(a == b))
    throw ShapeError(std::string(what) + ": shape mismatch " + a.str() + " vs " + b.str());
}

std::ptrdiff_t reflect_index(std::ptrdiff_t i, std::ptrdiff_t n) {
  if (n == 1) return 0;
  const std::ptrdiff_t period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

Tensor pad_to_multiple(const Tensor& t, std::size_t divisor) {
  if (divisor == 0) throw DomainError("padding divisor must be positive");
  const std::size_t h = (t.height() + divisor - 1) / divisor * divisor;
  const std::size_t w = (t.width() + divisor - 1) / divisor * divisor;
  if (h == t.height() && w == t.width()) return t;
  Tensor out(Shape{t.channels(), h, w});
  const auto th = static_cast<std::ptrdiff_t>(t.height());
  const auto tw = static_cast<std::ptrdiff_t>(t.width());
  for (std::size_t c = 0; c < t.channels(); ++c)
    for (std::size_t y = 0; y < h; ++y) {
      const auto sy = static_cast<std::size_t>(reflect_index(static_cast<std::ptrdiff_t>(y), th));
      for (std::size_t x = 0; x < w; ++x) {
        const auto sx = static_cast<std::size_t>(reflect_index(static_cast<std::ptrdiff_t>(x), tw));
        out.at(c, y, x) = t.at(c, sy, sx);
      }
    }
  return out;
}

}  // namespace vdn
