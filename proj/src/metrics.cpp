#include "vdn/metrics.hpp"

#include <cmath>

#include "vdn/error.hpp"

namespace vdn {

double psnr(const ImageTensor& a, const ImageTensor& b) {
  require_same_shape(a.shape(), b.shape(), "psnr");
  if (a.empty()) throw ShapeError("psnr: empty image");
  double sq = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - b[i];
    sq += d * d;
  }
  if (sq == 0.0) return kPsnrIdentical;
  return -10.0 * std::log10(sq / static_cast<double>(a.size()));
}

namespace {

std::vector<double> ssim_kernel() {
  std::vector<double> k(kSsimWindow);
  const int r = kSsimWindow / 2;
  double sum = 0.0;
  for (int i = 0; i < kSsimWindow; ++i) {
    k[i] = std::exp(-0.5 * (i - r) * (i - r) / (kSsimSigma * kSsimSigma));
    sum += k[i];
  }
  for (double& v : k) v /= sum;
  return k;
}

// Valid-mode separable filtering of an h x w plane.
std::vector<double> filter_valid(const std::vector<double>& src, std::size_t h, std::size_t w,
                                 const std::vector<double>& k) {
  const std::size_t n = k.size();
  const std::size_t ow = w - n + 1, oh = h - n + 1;
  std::vector<double> tmp(h * ow, 0.0);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < ow; ++x) {
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += k[j] * src[y * w + x + j];
      tmp[y * ow + x] = s;
    }
  std::vector<double> out(oh * ow, 0.0);
  for (std::size_t y = 0; y < oh; ++y)
    for (std::size_t x = 0; x < ow; ++x) {
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += k[j] * tmp[(y + j) * ow + x];
      out[y * ow + x] = s;
    }
  return out;
}

}  // namespace

double ssim(const ImageTensor& a, const ImageTensor& b) {
  require_same_shape(a.shape(), b.shape(), "ssim");
  const std::size_t h = a.height(), w = a.width();
  if (h < static_cast<std::size_t>(kSsimWindow) || w < static_cast<std::size_t>(kSsimWindow))
    throw ShapeError("ssim: image " + a.shape().str() + " is smaller than the 7x7 window");
  const auto k = ssim_kernel();
  double total = 0.0;
  for (std::size_t c = 0; c < a.channels(); ++c) {
    std::vector<double> pa(h * w), pb(h * w), aa(h * w), bb(h * w), ab(h * w);
    for (std::size_t i = 0; i < h * w; ++i) {
      pa[i] = a.channel(c)[i];
      pb[i] = b.channel(c)[i];
      aa[i] = pa[i] * pa[i];
      bb[i] = pb[i] * pb[i];
      ab[i] = pa[i] * pb[i];
    }
    const auto mu_a = filter_valid(pa, h, w, k), mu_b = filter_valid(pb, h, w, k);
    const auto e_aa = filter_valid(aa, h, w, k), e_bb = filter_valid(bb, h, w, k);
    const auto e_ab = filter_valid(ab, h, w, k);
    double sum = 0.0;
    for (std::size_t i = 0; i < mu_a.size(); ++i) {
      const double va = e_aa[i] - mu_a[i] * mu_a[i];
      const double vb = e_bb[i] - mu_b[i] * mu_b[i];
      const double cov = e_ab[i] - mu_a[i] * mu_b[i];
      sum += ((2 * mu_a[i] * mu_b[i] + kSsimC1) * (2 * cov + kSsimC2)) /
             ((mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + kSsimC1) * (va + vb + kSsimC2));
    }
    total += sum / static_cast<double>(mu_a.size());
  }
  return total / static_cast<double>(a.channels());
}

SigmaScore score_sigma_map(const VarianceMap& pred, const VarianceMap& truth) {
  require_same_shape(pred.shape(), truth.shape(), "score_sigma_map");
  if (pred.empty()) throw ShapeError("score_sigma_map: empty map");
  const double n = static_cast<double>(pred.size());
  double mp = 0.0, mt = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    mp += pred[i];
    mt += truth[i];
  }
  mp /= n;
  mt /= n;
  double spp = 0.0, stt = 0.0, spt = 0.0, sq = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double dp = pred[i] - mp, dt = truth[i] - mt;
    spp += dp * dp;
    stt += dt * dt;
    spt += dp * dt;
    const double e = static_cast<double>(pred[i]) - truth[i];
    sq += e * e;
  }
  SigmaScore s;
  s.rmse = std::sqrt(sq / n);
  if (spp == 0.0 || stt == 0.0) {
    s.r_defined = false;
    s.pearson_r = std::nan("");
  } else {
    s.pearson_r = spt / std::sqrt(spp * stt);
  }
  return s;
}

void EvalReport::summarize() {
  mean_psnr = mean_ssim = mean_noisy_psnr = mean_pearson_r = mean_sigma_rmse = 0.0;
  std::size_t np = 0, nn = 0, nr = 0, ns = 0;
  for (const ImageScore& s : images) {
    if (std::isfinite(s.psnr)) {
      mean_psnr += s.psnr;
      ++np;
    }
    if (std::isfinite(s.noisy_psnr)) {
      mean_noisy_psnr += s.noisy_psnr;
      ++nn;
    }
    mean_ssim += s.ssim;
    if (s.has_sigma) {
      mean_sigma_rmse += s.sigma.rmse;
      ++ns;
      if (s.sigma.r_defined) {
        mean_pearson_r += s.sigma.pearson_r;
        ++nr;
      }
    }
  }
  auto div = [](double& v, std::size_t n) { v = n ? v / static_cast<double>(n) : std::nan(""); };
  div(mean_psnr, np);
  div(mean_noisy_psnr, nn);
  div(mean_ssim, images.size());
  div(mean_pearson_r, nr);
  div(mean_sigma_rmse, ns);
}

}  // namespace vdn
