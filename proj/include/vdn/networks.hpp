#pragma once

#include <cstdint>
#include <vector>

#include "vdn/layers.hpp"
#include "vdn/prior.hpp"
#include "vdn/tensor.hpp"

namespace vdn {

// U-Net predicting the Gaussian posterior of the clean image.  `depth`
// encoder levels of [Conv+ReLU]x2 with 2x2 average pooling between them,
// depth-1 decoder levels of 2x2 transposed conv, skip concatenation and
// [Conv+ReLU]x2.  Channel count doubles per level.  A 3x3 head emits the
// mean residual and the raw variance for every input channel.
struct DNetConfig {
  int depth = 4;
  int base_channels = 64;
  int in_channels = 3;
  // Initial posterior variance m^2 (set through the head bias).
  double m_sq_init = kSyntheticEpsilon0Sq;

  void validate() const;
  std::size_t divisor() const { return std::size_t{1} << (depth - 1); }
};

// Plain conv stack predicting the inverse-Gamma posterior of the noise
// variance: `layers` 3x3 convolutions, ReLU between them.
struct SNetConfig {
  int layers = 5;
  int channels = 64;
  int in_channels = 3;
  // Initial (alpha, beta), set through the head bias.  The defaults put the
  // posterior on the p = 7 prior with a 25/255 noise level.
  double alpha_init = prior_alpha0(kDefaultWindow);
  double beta_init = (prior_alpha0(kDefaultWindow) + 1.0) * (25.0 / 255.0) * (25.0 / 255.0);

  void validate() const;
};

// Reduced sizes that train on a laptop CPU in minutes.
DNetConfig desk_dnet_config();
SNetConfig desk_snet_config();

class DNet {
 public:
  struct Output {
    Tensor mu;
    Tensor m_sq;
  };
  // Activations kept by forward() for backward().
  struct Cache {
    Tensor input;
    std::vector<Tensor> enc_in, enc_a, enc_b;
    std::vector<Tensor> up_in, cat, dec_a, dec_b;
    Tensor head_in;
    Tensor m_raw;
  };

  explicit DNet(DNetConfig config);

  const DNetConfig& config() const { return config_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  std::size_t parameter_count() const { return params_.parameter_count(); }

  // He initialisation; the head weights are zeroed so that mu == y and
  // m^2 == m_sq_init at initialisation.
  void init(std::uint64_t seed);

  // Input height and width must be multiples of config().divisor().
  Output forward(const Tensor& y, Cache* cache = nullptr) const;
  // Accumulates parameter gradients for d(loss)/d(mu) and d(loss)/d(m^2).
  void backward(const Cache& cache, const Tensor& d_mu, const Tensor& d_m_sq);

  // Arbitrary sizes: reflect-pads to the divisor, runs forward, crops back.
  Output infer(const Tensor& y) const;

 private:
  struct Level {
    nn::Conv2d conv1, conv2;
  };
  struct UpLevel {
    nn::ConvTranspose2x2 up;
    nn::Conv2d conv1, conv2;
  };

  DNetConfig config_;
  ParamStore params_;
  std::vector<Level> enc_;
  std::vector<UpLevel> dec_;  // dec_[l] produces level l
  nn::Conv2d head_;
};

class SNet {
 public:
  struct Output {
    Tensor alpha;
    Tensor beta;
  };
  struct Cache {
    std::vector<Tensor> inputs;  // input of every conv
    Tensor raw;
  };

  explicit SNet(SNetConfig config);

  const SNetConfig& config() const { return config_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  std::size_t parameter_count() const { return params_.parameter_count(); }
  std::size_t conv_layer_count() const { return convs_.size(); }

  // He initialisation; head weights zeroed, biases set to alpha_init/beta_init.
  void init(std::uint64_t seed);

  Output forward(const Tensor& y, Cache* cache = nullptr) const;
  void backward(const Cache& cache, const Tensor& d_alpha, const Tensor& d_beta);

 private:
  SNetConfig config_;
  ParamStore params_;
  std::vector<nn::Conv2d> convs_;
};

std::size_t count_params(const DNetConfig& config);
std::size_t count_params(const SNetConfig& config);

}  // namespace vdn
