#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "test_util.hpp"
#include "vdn/error.hpp"
#include "vdn/experiment.hpp"
#include "vdn/image_io.hpp"
#include "vdn/metrics.hpp"

using namespace vdn;
using testutil::TempDir;

namespace {

// SSIM evaluated window by window from the defining local statistics.
double ssim_oracle(const Tensor& a, const Tensor& b) {
  const int r = 3;
  double w[7][7], total = 0;
  for (int i = -r; i <= r; ++i)
    for (int j = -r; j <= r; ++j) total += w[i + r][j + r] = std::exp(-(i * i + j * j) / (2 * 1.5 * 1.5));
  double sum = 0;
  for (std::size_t c = 0; c < a.channels(); ++c) {
    double chan = 0;
    std::size_t n = 0;
    for (std::size_t y = r; y + r < a.height(); ++y)
      for (std::size_t x = r; x + r < a.width(); ++x) {
        double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
        for (int i = -r; i <= r; ++i)
          for (int j = -r; j <= r; ++j) {
            const double k = w[i + r][j + r] / total;
            const double va = a.at(c, y + i, x + j), vb = b.at(c, y + i, x + j);
            ma += k * va;
            mb += k * vb;
            saa += k * va * va;
            sbb += k * vb * vb;
            sab += k * va * vb;
          }
        const double va = saa - ma * ma, vb = sbb - mb * mb, cov = sab - ma * mb;
        const double c1 = 1e-4, c2 = 9e-4;
        chan += (2 * ma * mb + c1) * (2 * cov + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
        ++n;
      }
    sum += chan / static_cast<double>(n);
  }
  return sum / static_cast<double>(a.channels());
}

std::vector<double> as_vector(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

std::vector<std::string> read_lines(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::size_t count_fields(const std::string& line) { return static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1; }

ExperimentConfig tiny_experiment() {
  ExperimentConfig c;
  c.channels = 1;
  c.train_images = 3;
  c.train_size = 32;
  c.test_images = 2;
  c.test_size = 32;
  c.seed = 5;
  c.train.epochs = 1;
  c.train.patch_size = 16;
  c.train.batch_size = 2;
  c.train.patches_per_epoch = 4;
  c.train.d_depth = 2;
  c.train.d_base_channels = 4;
  c.train.s_layers = 2;
  c.train.s_channels = 4;
  return c;
}

}  // namespace

TEST(Psnr, Examples) {
  const Tensor a = testutil::random_tensor(Shape{3, 8, 8}, 1, 0.2f, 0.8f);
  EXPECT_EQ(psnr(a, a), kPsnrIdentical);
  Tensor b(Shape{1, 4, 4}, 0.5f), c(Shape{1, 4, 4}, 0.6f);
  EXPECT_NEAR(psnr(b, c), 20.0, 1e-5);
  EXPECT_THROW(psnr(b, a), ShapeError);
}

TEST(Ssim, SelfSimilarityAndSymmetry) {
  const Tensor a = testutil::random_tensor(Shape{3, 20, 18}, 2);
  const Tensor b = testutil::random_tensor(Shape{3, 20, 18}, 3);
  EXPECT_NEAR(ssim(a, a), 1.0, 1e-12);
  EXPECT_NEAR(ssim(a, b), ssim(b, a), 1e-12);
  EXPECT_LT(ssim(a, b), 0.5);
  EXPECT_THROW(ssim(Tensor(Shape{1, 6, 6}), Tensor(Shape{1, 6, 6})), ShapeError);
  EXPECT_THROW(ssim(a, Tensor(Shape{3, 20, 17})), ShapeError);
}

TEST(Ssim, MatchesLocalStatisticsOracle) {
  const Tensor a = testutil::random_tensor(Shape{1, 16, 16}, 4);
  Tensor b = a;
  std::mt19937_64 rng(5);
  std::normal_distribution<float> n(0.0f, 0.1f);
  for (float& v : b.storage()) v = std::clamp(v + n(rng), 0.0f, 1.0f);
  EXPECT_NEAR(ssim(a, b), ssim_oracle(a, b), 1e-8);
  const Tensor c = testutil::random_tensor(Shape{2, 16, 16}, 6), d = testutil::random_tensor(Shape{2, 16, 16}, 7);
  EXPECT_NEAR(ssim(c, d), ssim_oracle(c, d), 1e-8);
}

TEST(Ssim, DecreasesWithNoiseLevel) {
  for (std::uint64_t img = 0; img < 10; ++img) {
    const Tensor clean = synthetic_scene(Shape{1, 48, 48}, img);
    std::mt19937_64 rng(100 + img);
    std::normal_distribution<float> n;
    std::vector<float> base(clean.size());
    for (float& v : base) v = n(rng);
    double prev = 1.0;
    for (double sigma : {5.0, 15.0, 25.0, 50.0}) {
      Tensor noisy = clean;
      for (std::size_t i = 0; i < noisy.size(); ++i)
        noisy[i] = std::clamp(clean[i] + static_cast<float>(sigma / 255.0) * base[i], 0.0f, 1.0f);
      const double s = ssim(clean, noisy);
      EXPECT_LT(s, prev) << "image " << img << " sigma " << sigma;
      prev = s;
    }
  }
}

TEST(SigmaScore, PearsonExamples) {
  Tensor t(Shape{1, 2, 3}, std::vector<float>{1, 2, 3, 4, 5, 6});
  Tensor lin = t, neg = t;
  for (float& v : lin.storage()) v = 2 * v + 1;
  for (float& v : neg.storage()) v = -v;
  EXPECT_NEAR(score_sigma_map(lin, t).pearson_r, 1.0, 1e-12);
  EXPECT_NEAR(score_sigma_map(neg, t).pearson_r, -1.0, 1e-12);
  EXPECT_NEAR(score_sigma_map(t, t).rmse, 0.0, 1e-12);
  const SigmaScore flat = score_sigma_map(Tensor(t.shape(), 0.1f), t);
  EXPECT_FALSE(flat.r_defined);
  EXPECT_TRUE(std::isnan(flat.pearson_r));
  EXPECT_THROW(score_sigma_map(t, Tensor(Shape{1, 3, 2})), ShapeError);
}

TEST(SigmaScore, AgreesWithOracleAndPermutationNull) {
  const Tensor a = testutil::random_tensor(Shape{1, 64, 64}, 8), b = testutil::random_tensor(Shape{1, 64, 64}, 9);
  Tensor c = a;
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = 0.7f * a[i] + 0.3f * b[i];
  EXPECT_NEAR(score_sigma_map(c, a).pearson_r, oracle::pearson(as_vector(c), as_vector(a)), 1e-10);
  // Independent maps: |r| within 4 / sqrt(n).
  EXPECT_LT(std::abs(score_sigma_map(a, b).pearson_r), 4.0 / 64.0);
}

TEST(EvalReport, SummaryExcludesInfinitePsnr) {
  EvalReport r;
  ImageScore s1;
  s1.psnr = 30;
  s1.ssim = 0.9;
  s1.noisy_psnr = 20;
  ImageScore s2 = s1;
  s2.psnr = kPsnrIdentical;
  s2.ssim = 0.7;
  r.images = {s1, s2};
  r.summarize();
  EXPECT_DOUBLE_EQ(r.mean_psnr, 30.0);
  EXPECT_DOUBLE_EQ(r.mean_ssim, 0.8);
}

TEST(ResidualSigma, ConstantResidualGivesItsMagnitude) {
  Tensor clean(Shape{1, 12, 12}, 0.5f), noisy(Shape{1, 12, 12}, 0.625f);
  const VarianceMap s = residual_sigma_map(noisy, clean, 7);
  for (float v : s.values()) EXPECT_NEAR(v, 0.125f, 1e-6f);
}

TEST(Protocol, NamesRoundTrip) {
  for (Protocol p : {Protocol::kCases, Protocol::kAwgn, Protocol::kEpsSweep, Protocol::kPSweep, Protocol::kMseBaseline})
    EXPECT_EQ(protocol_from_string(to_string(p)), p);
  EXPECT_THROW(protocol_from_string("bsd68"), ConfigError);
}

TEST(Families, HeldOutCasesDifferFromTraining) {
  const auto cases = test_case_families();
  ASSERT_EQ(cases.size(), 3u);
  const Shape s{1, 32, 32};
  const VarianceMap train = generate_variance_map(train_family(), s);
  for (const auto& f : cases) EXPECT_FALSE(generate_variance_map(f, s) == train);
}

TEST(RunExperiment, CasesWritesOneRowPerImageAndSetting) {
  TempDir dir;
  const ExperimentConfig cfg = tiny_experiment();
  const ExperimentResult res = run_experiment(Protocol::kCases, cfg, {}, dir.path());
  ASSERT_EQ(res.reports.size(), 3u);
  const auto report = read_lines(dir / "report.csv");
  ASSERT_EQ(report.size(), 1 + cfg.test_images * 3);
  EXPECT_EQ(report[0], "protocol,setting,id,psnr,ssim,noisy_psnr,pearson_r,sigma_rmse");
  const auto table = read_lines(dir / "table_cases.csv");
  ASSERT_GE(table.size(), 3u);
  EXPECT_EQ(count_fields(table[0]), 4u);
  EXPECT_TRUE(std::filesystem::exists(dir / "heatmap_case1.png"));
  const ImageTensor heat = load_image(dir / "heatmap_case1.png");
  EXPECT_EQ(heat.width(), 2 * cfg.test_size + 4);
}

TEST(RunExperiment, EpsSweepTableShape) {
  TempDir dir;
  ExperimentConfig cfg = tiny_experiment();
  cfg.sweep_epochs = 1;
  const ExperimentResult res = run_experiment(Protocol::kEpsSweep, cfg, {}, dir.path());
  EXPECT_EQ(res.reports.size(), kEpsGrid.size() + 1);
  const auto table = read_lines(dir / "table_eps-sweep.csv");
  ASSERT_GE(table.size(), 4u);
  for (const auto& line : table) EXPECT_EQ(count_fields(line), kEpsGrid.size() + 2) << line;
  EXPECT_NE(table[0].find("MSE"), std::string::npos);
}

TEST(RunExperiment, SuppliedTestSetReplacesCases) {
  TempDir dir;
  const ExperimentConfig cfg = tiny_experiment();
  ExperimentInputs in;
  in.test_set = synthetic_test_set(cfg, train_family(), 9);
  const ExperimentResult res = run_experiment(Protocol::kCases, cfg, std::move(in), dir.path());
  ASSERT_EQ(res.reports.size(), 1u);
  EXPECT_EQ(res.reports[0].images.front().setting, "data");
}
