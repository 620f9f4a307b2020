#pragma once

#include <cstddef>
#include <new>
#include <span>
#include <string>
#include <vector>

namespace vdn {

// Cache-line aligned storage.  Eigen's vectorised reductions peel a
// different number of leading elements depending on the address, so every
// buffer that reaches Eigen must share one alignment for runs to repeat
// bit for bit.
template <class T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};

  AlignedAllocator() = default;
  template <class U>
  AlignedAllocator(const AlignedAllocator<U>&) {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) { ::operator delete(p, kAlign); }
  template <class U>
  bool operator==(const AlignedAllocator<U>&) const { return true; }
};

using FloatBuffer = std::vector<float, AlignedAllocator<float>>;

struct Shape {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;

  std::size_t plane() const { return height * width; }
  std::size_t size() const { return channels * height * width; }
  bool valid() const { return channels >= 1 && height >= 1 && width >= 1; }
  bool operator==(const Shape&) const = default;
  std::string str() const;
};

// Dense channels x height x width float array, row-major.  Holds images,
// variance maps and network activations alike.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, float fill = 0.0f);
  Tensor(Shape shape, const std::vector<float>& data);
  Tensor(Shape shape, FloatBuffer data);

  const Shape& shape() const { return shape_; }
  std::size_t channels() const { return shape_.channels; }
  std::size_t height() const { return shape_.height; }
  std::size_t width() const { return shape_.width; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  float& at(std::size_t c, std::size_t y, std::size_t x) {
    return data_[(c * shape_.height + y) * shape_.width + x];
  }
  float at(std::size_t c, std::size_t y, std::size_t x) const {
    return data_[(c * shape_.height + y) * shape_.width + x];
  }
  float& operator[](std::size_t i) { return data_[i]; }
  float operator[](std::size_t i) const { return data_[i]; }

  float* data() { return data_.data(); }
  const float* data() const { return data_.data(); }
  float* channel(std::size_t c) { return data_.data() + c * shape_.plane(); }
  const float* channel(std::size_t c) const { return data_.data() + c * shape_.plane(); }

  std::span<float> values() { return data_; }
  std::span<const float> values() const { return data_; }
  FloatBuffer& storage() { return data_; }
  const FloatBuffer& storage() const { return data_; }

  // True when every element lies in [0,1].
  bool is_unit_range() const;
  bool all_finite() const;

  // Copy of the window [y0, y0+h) x [x0, x0+w) over all channels.
  Tensor crop(std::size_t y0, std::size_t x0, std::size_t h, std::size_t w) const;
  Tensor clamped(float lo, float hi) const;

  bool operator==(const Tensor&) const = default;

 private:
  Shape shape_;
  FloatBuffer data_;
};

using ImageTensor = Tensor;
// Per-pixel noise standard deviations, same shape as the image.
using VarianceMap = Tensor;

// Double-precision image-shaped field; used wherever loss math runs.
struct Field {
  Shape shape;
  std::vector<double> data;

  Field() = default;
  explicit Field(Shape s, double fill = 0.0) : shape(s), data(s.size(), fill) {}
  static Field from(const Tensor& t);
  Tensor to_tensor() const;
  std::size_t size() const { return data.size(); }
  double& operator[](std::size_t i) { return data[i]; }
  double operator[](std::size_t i) const { return data[i]; }
};

void require_same_shape(const Shape& a, const Shape& b, const char* what);

// Reflect (mirror without repeating the edge sample) an index into [0, n).
// Works for offsets larger than n by folding repeatedly.
std::ptrdiff_t reflect_index(std::ptrdiff_t i, std::ptrdiff_t n);

// Reflect-pad on the bottom and right edges so that height and width become
// multiples of `divisor`.
Tensor pad_to_multiple(const Tensor& t, std::size_t divisor);

}  // namespace vdn
