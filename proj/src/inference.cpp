#include "vdn/inference.hpp"

#include <algorithm>
#include <cmath>

#include "vdn/error.hpp"
#include "vdn/prior.hpp"

namespace vdn {
namespace {

void require_channels(const ImageTensor& y, const Model& model) {
  if (static_cast<int>(y.channels()) != model.in_channels())
    throw ShapeError("image has " + std::to_string(y.channels()) + " channels, checkpoint expects " +
                     std::to_string(model.in_channels()));
}

}  // namespace

ImageTensor denoise(const ImageTensor& y, const Model& model) {
  require_channels(y, model);
  return model.dnet.infer(y).mu.clamped(0.0f, 1.0f);
}

Field sigma_sq_from_posterior(const Tensor& alpha, const Tensor& beta) {
  require_same_shape(alpha.shape(), beta.shape(), "sigma_sq_from_posterior");
  Field out(alpha.shape());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double a = std::max(static_cast<double>(alpha[i]), kAlphaFloor);
    const double b = std::max(static_cast<double>(beta[i]), kPositiveFloor);
    out[i] = inverse_gamma_mode(a, b);
  }
  return out;
}

VarianceMap estimate_sigma_map(const ImageTensor& y, const Model& model) {
  require_channels(y, model);
  const SNet::Output s = model.snet.forward(y);
  const Field var = sigma_sq_from_posterior(s.alpha, s.beta);
  VarianceMap m(y.shape());
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = static_cast<float>(std::sqrt(var[i]));
  return m;
}

}  // namespace vdn
