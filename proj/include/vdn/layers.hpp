#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "vdn/rng.hpp"
#include "vdn/tensor.hpp"

namespace vdn {

// A named trainable tensor with its gradient accumulator.
struct ParamTensor {
  std::string name;
  std::vector<std::uint32_t> dims;
  FloatBuffer value;
  FloatBuffer grad;

  std::size_t size() const { return value.size(); }
};

class ParamStore {
 public:
  std::size_t add(std::string name, std::vector<std::uint32_t> dims);

  ParamTensor& operator[](std::size_t i) { return tensors_[i]; }
  const ParamTensor& operator[](std::size_t i) const { return tensors_[i]; }
  std::vector<ParamTensor>& tensors() { return tensors_; }
  const std::vector<ParamTensor>& tensors() const { return tensors_; }

  std::size_t parameter_count() const;
  void zero_grad();
  // FNV-1a over the raw bytes of every value; a cheap identity check.
  std::uint64_t checksum() const;

 private:
  std::vector<ParamTensor> tensors_;
};

namespace nn {

inline float softplus(float x) {
  // log(1 + e^x) without overflow for large x or underflow for very negative x.
  return x > 0.0f ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}
inline float sigmoid(float x) {
  if (x >= 0.0f) return 1.0f / (1.0f + std::exp(-x));
  const float e = std::exp(x);
  return e / (1.0f + e);
}
// Inverse of softplus: the pre-activation that yields `y` > 0.
inline double softplus_inverse(double y) { return y > 30.0 ? y : std::log(std::expm1(y)); }

// k x k convolution, stride 1, zero "same" padding.
// weight dims [out, in, k, k], bias [out].
struct Conv2d {
  std::size_t weight = 0;
  std::size_t bias = 0;
  int in = 0;
  int out = 0;
  int k = 3;
};

// 2x2 stride-2 transposed convolution (exact 2x upsampling).
// weight dims [in, out, 2, 2], bias [out].
struct ConvTranspose2x2 {
  std::size_t weight = 0;
  std::size_t bias = 0;
  int in = 0;
  int out = 0;
};

Conv2d make_conv(ParamStore& ps, const std::string& name, int in, int out, int k = 3);
ConvTranspose2x2 make_conv_transpose(ParamStore& ps, const std::string& name, int in, int out);

// He (fan-in) normal initialisation of the weights; zero biases.
void he_init(ParamStore& ps, const Conv2d& layer, Rng& rng);
void he_init(ParamStore& ps, const ConvTranspose2x2& layer, Rng& rng);

Tensor conv_forward(const ParamStore& ps, const Conv2d& layer, const Tensor& in);
// Accumulates weight/bias gradients; returns d(in) when `need_input_grad`.
Tensor conv_backward(ParamStore& ps, const Conv2d& layer, const Tensor& in, const Tensor& d_out,
                     bool need_input_grad = true);

Tensor conv_transpose_forward(const ParamStore& ps, const ConvTranspose2x2& layer, const Tensor& in);
Tensor conv_transpose_backward(ParamStore& ps, const ConvTranspose2x2& layer, const Tensor& in,
                               const Tensor& d_out);

void relu_inplace(Tensor& t);
// Zeroes d_out where the ReLU output was not positive.
void relu_backward(const Tensor& out, Tensor& d_out);

Tensor avg_pool2(const Tensor& in);
Tensor avg_pool2_backward(const Tensor& d_out);

Tensor concat_channels(const Tensor& a, const Tensor& b);
std::pair<Tensor, Tensor> split_channels(const Tensor& t, std::size_t first);

}  // namespace nn
}  // namespace vdn
