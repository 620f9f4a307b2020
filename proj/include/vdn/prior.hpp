#pragma once

#include <vector>

#include "vdn/tensor.hpp"

namespace vdn {

inline constexpr double kDefaultXiFloor = 1e-8;
inline constexpr double kSyntheticEpsilon0Sq = 5e-5;
inline constexpr double kRealNoiseEpsilon0Sq = 1e-6;
inline constexpr int kDefaultWindow = 7;

// Prior hyperparameters for one image:
//   z_i       ~ N(x_i, epsilon0_sq)
//   sigma_i^2 ~ IG(p^2/2 - 1, p^2 xi_i / 2)
struct PriorSpec {
  double epsilon0_sq = kSyntheticEpsilon0Sq;
  int p = kDefaultWindow;
  Field xi;
  double xi_floor = kDefaultXiFloor;

  void validate() const;
};

// Inverse-Gamma prior parameters: scalar shape broadcast over pixels and a
// per-pixel scale.
struct SigmaPrior {
  double alpha0 = 0.0;
  Field beta0;
};

void validate_window(int p);

// Normalised p x p Gaussian weights (std p/6), row-major, summing to 1.
std::vector<double> gaussian_window(int p);

// xi = GaussianFilter((noisy - clean)^2) with a p x p window, reflect padding,
// floored at xi_floor.  Channels are filtered independently.
Field compute_xi(const ImageTensor& noisy, const ImageTensor& clean, int p,
                 double xi_floor = kDefaultXiFloor);

// Same filter applied to an arbitrary squared-residual field.
Field filter_variance(const Field& sq_residual, int p, double xi_floor = kDefaultXiFloor);

SigmaPrior prior_sigma_params(const PriorSpec& spec);

inline double prior_alpha0(int p) { return 0.5 * p * p - 1.0; }

// Mode of IG(alpha, beta).
inline double inverse_gamma_mode(double alpha, double beta) { return beta / (alpha + 1.0); }

}  // namespace vdn
