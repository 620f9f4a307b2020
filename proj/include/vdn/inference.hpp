#pragma once

#include "vdn/train.hpp"

namespace vdn {

// Posterior mean of the clean image, clamped to [0,1].  Any input size.
ImageTensor denoise(const ImageTensor& y, const Model& model);

// Per-pixel noise std from the inverse-Gamma posterior mode,
// sigma = sqrt(beta / (alpha + 1)), with the objective's floors applied.
VarianceMap estimate_sigma_map(const ImageTensor& y, const Model& model);

// sigma^2 = beta / (alpha + 1), elementwise.
Field sigma_sq_from_posterior(const Tensor& alpha, const Tensor& beta);

}  // namespace vdn
