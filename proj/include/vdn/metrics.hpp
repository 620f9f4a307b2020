#pragma once

#include <limits>
#include <string>
#include <vector>

#include "vdn/tensor.hpp"

namespace vdn {

inline constexpr double kPsnrIdentical = std::numeric_limits<double>::infinity();

// 10 log10(1 / MSE) on [0,1] floats, no 8-bit quantisation.  Identical
// images give +inf.
double psnr(const ImageTensor& a, const ImageTensor& b);

// SSIM settings: 7x7 Gaussian window with sd 1.5, constants (0.01)^2 and
// (0.03)^2 for unit dynamic range, population statistics, mean over all
// valid (unpadded) window positions, then over channels.
inline constexpr int kSsimWindow = 7;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;

double ssim(const ImageTensor& a, const ImageTensor& b);

struct SigmaScore {
  double pearson_r = 0.0;
  double rmse = 0.0;
  // False when either map is constant and r is undefined (r is then NaN).
  bool r_defined = true;
};

SigmaScore score_sigma_map(const VarianceMap& pred, const VarianceMap& truth);

struct ImageScore {
  std::string id;
  std::string protocol;
  std::string setting;  // test case, noise level or sweep value
  double psnr = 0.0;
  double ssim = 0.0;
  double noisy_psnr = 0.0;
  SigmaScore sigma;
  bool has_sigma = false;
};

struct EvalReport {
  std::vector<ImageScore> images;
  double mean_psnr = 0.0;
  double mean_ssim = 0.0;
  double mean_noisy_psnr = 0.0;
  double mean_pearson_r = 0.0;
  double mean_sigma_rmse = 0.0;

  // Recomputes the aggregates from `images`.  Identical-image PSNRs are
  // excluded from the PSNR mean.
  void summarize();
};

}  // namespace vdn
