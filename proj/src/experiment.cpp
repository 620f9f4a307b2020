#include "vdn/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>

#include "vdn/error.hpp"
#include "vdn/image_io.hpp"
#include "vdn/inference.hpp"
#include "vdn/prior.hpp"
#include "vdn/rng.hpp"

namespace vdn {

std::string to_string(Protocol p) {
  switch (p) {
    case Protocol::kCases: return "cases";
    case Protocol::kAwgn: return "awgn";
    case Protocol::kEpsSweep: return "eps-sweep";
    case Protocol::kPSweep: return "p-sweep";
    case Protocol::kMseBaseline: return "mse-baseline";
  }
  return "?";
}

Protocol protocol_from_string(const std::string& s) {
  for (Protocol p : {Protocol::kCases, Protocol::kAwgn, Protocol::kEpsSweep, Protocol::kPSweep,
                     Protocol::kMseBaseline})
    if (to_string(p) == s) return p;
  throw ConfigError("unknown protocol '" + s + "' (cases, awgn, eps-sweep, p-sweep, mse-baseline)");
}

MapFamilySpec train_family() {
  MapFamilySpec s;
  s.kind = MapKind::kGaussianBump;
  s.peak_sigma = 75.0 / 255.0;
  s.base_sigma = 5.0 / 255.0;
  s.width = 0.25;
  s.jitter = 0.25;
  return s;
}

std::vector<MapFamilySpec> test_case_families() {
  MapFamilySpec c1;
  c1.center_y = 0.25;
  c1.center_x = 0.75;
  c1.width = 0.2;

  MapFamilySpec c2;
  c2.kind = MapKind::kMultiBump;
  c2.peak_sigma = 60.0 / 255.0;
  c2.width = 0.15;
  c2.bumps = 3;
  c2.seed = 2;

  MapFamilySpec c3;
  c3.peak_sigma = 50.0 / 255.0;
  c3.base_sigma = 10.0 / 255.0;
  c3.width = 0.45;
  return {c1, c2, c3};
}

namespace {

// Published full-scale numbers, reported as context only.
const std::vector<double> kRefCases{29.02, 28.67, 28.46};  // BSD68
const std::vector<double> kRefAwgn{33.90, 31.35, 28.19};   // BSD68
const std::vector<double> kRefEpsPsnr{38.89, 39.20, 39.28, 39.05, 39.03, 39.01};
const std::vector<double> kRefEpsSsim{0.9046, 0.9079, 0.9086, 0.9064, 0.9063, 0.9061};
const std::vector<double> kRefPPsnr{39.26, 39.28, 39.26, 39.24, 39.24};
const std::vector<double> kRefPSsim{0.9089, 0.9086, 0.9086, 0.9079, 0.9079};

std::string fmt(double v, const char* f = "%.4f") {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string eps_label(double e) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.0e", e);
  return buf;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

void write_table(const std::filesystem::path& path, const std::vector<std::string>& header,
                 const std::vector<std::vector<std::string>>& rows) {
  std::ofstream out = open_out(path);
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << '\n';
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i) out << (i ? "," : "") << r[i];
    out << '\n';
  }
}

PairedDataset concat(const std::vector<PairedDataset>& parts) {
  PairedDataset all;
  for (const auto& p : parts) {
    all.pairs.insert(all.pairs.end(), p.pairs.begin(), p.pairs.end());
    all.sigma.insert(all.sigma.end(), p.sigma.begin(), p.sigma.end());
    all.ids.insert(all.ids.end(), p.ids.begin(), p.ids.end());
  }
  return all;
}

Model train_model(const TrainConfig& cfg, int channels, const PairedDataset& data,
                  const std::filesystem::path& dir) {
  Model m(cfg, channels);
  TrainOptions opts;
  opts.out_dir = dir;
  train(m, data, opts);
  return m;
}

std::vector<std::string> psnr_row(const std::string& name, const std::vector<EvalReport>& reps, bool noisy) {
  std::vector<std::string> row{name};
  for (const auto& r : reps) row.push_back(fmt(noisy ? r.mean_noisy_psnr : r.mean_psnr, "%.2f"));
  return row;
}

std::vector<std::string> ref_row(const std::string& name, const std::vector<double>& v, const char* f) {
  std::vector<std::string> row{name};
  for (double x : v) row.push_back(fmt(x, f));
  return row;
}

}  // namespace

VarianceMap residual_sigma_map(const ImageTensor& noisy, const ImageTensor& denoised, int p) {
  require_same_shape(noisy.shape(), denoised.shape(), "residual_sigma_map");
  Field sq(noisy.shape());
  for (std::size_t i = 0; i < sq.size(); ++i) {
    const double d = static_cast<double>(noisy[i]) - denoised[i];
    sq[i] = d * d;
  }
  const Field xi = filter_variance(sq, p);
  VarianceMap m(noisy.shape());
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = static_cast<float>(std::sqrt(xi[i]));
  return m;
}

EvalReport evaluate_model(const Model& model, const PairedDataset& data, const std::string& protocol,
                          const std::string& setting, bool xi_sigma) {
  data.validate();
  EvalReport rep;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const ImagePair& pair = data.pairs[i];
    const ImageTensor den = denoise(pair.noisy, model);
    ImageScore s;
    s.id = i < data.ids.size() ? data.ids[i] : std::to_string(i);
    s.protocol = protocol;
    s.setting = setting;
    s.psnr = psnr(den, pair.clean);
    s.ssim = ssim(den, pair.clean);
    s.noisy_psnr = psnr(pair.noisy, pair.clean);
    if (data.has_sigma()) {
      const VarianceMap pred =
          xi_sigma ? residual_sigma_map(pair.noisy, den, model.config.p) : estimate_sigma_map(pair.noisy, model);
      s.sigma = score_sigma_map(pred, data.sigma[i]);
      s.has_sigma = true;
    }
    rep.images.push_back(std::move(s));
  }
  rep.summarize();
  return rep;
}

PairedDataset synthetic_train_set(const ExperimentConfig& cfg) {
  const Shape shape{static_cast<std::size_t>(cfg.channels), cfg.train_size, cfg.train_size};
  const auto cleans = synthetic_scenes(cfg.train_images, shape, derive_seed(cfg.seed, "train-scenes"));
  return make_dataset(cleans, train_family(), derive_seed(cfg.seed, "train-noise"));
}

PairedDataset synthetic_test_set(const ExperimentConfig& cfg, const MapFamilySpec& family, std::uint64_t salt) {
  const Shape shape{static_cast<std::size_t>(cfg.channels), cfg.test_size, cfg.test_size};
  // Test scenes are shared across settings so that columns are comparable.
  const auto cleans = synthetic_scenes(cfg.test_images, shape, derive_seed(cfg.seed, "test-scenes"));
  return make_dataset(cleans, family, derive_seed(cfg.seed, "test-noise", salt));
}

void write_report_csv(const std::vector<EvalReport>& reports, const std::filesystem::path& path) {
  std::ofstream out = open_out(path);
  out << "protocol,setting,id,psnr,ssim,noisy_psnr,pearson_r,sigma_rmse\n";
  for (const auto& r : reports)
    for (const auto& s : r.images)
      out << s.protocol << ',' << s.setting << ',' << s.id << ',' << fmt(s.psnr, "%.6f") << ','
          << fmt(s.ssim, "%.6f") << ',' << fmt(s.noisy_psnr, "%.6f") << ','
          << (s.has_sigma ? fmt(s.sigma.pearson_r, "%.6f") : "") << ','
          << (s.has_sigma ? fmt(s.sigma.rmse, "%.6f") : "") << '\n';
}

void save_sigma_heatmap(const VarianceMap& truth, const VarianceMap& pred, const std::filesystem::path& path) {
  require_same_shape(truth.shape(), pred.shape(), "save_sigma_heatmap");
  const std::size_t h = truth.height(), w = truth.width();
  float peak = 0.0f;
  for (std::size_t i = 0; i < h * w; ++i) peak = std::max({peak, truth[i], pred[i]});
  if (peak <= 0.0f) peak = 1.0f;
  const std::size_t gap = 4;
  ImageTensor img(Shape{1, h, 2 * w + gap}, 1.0f);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      img.at(0, y, x) = truth.at(0, y, x) / peak;
      img.at(0, y, w + gap + x) = pred.at(0, y, x) / peak;
    }
  save_image(img, path, 8);
}

ExperimentResult run_experiment(Protocol protocol, const ExperimentConfig& cfg, ExperimentInputs inputs,
                                const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  cfg.train.validate();
  fs::create_directories(out_dir);
  ExperimentResult res;
  const std::string name = to_string(protocol);

  auto train_set = [&]() -> const PairedDataset& {
    if (!inputs.train_set) inputs.train_set = synthetic_train_set(cfg);
    return *inputs.train_set;
  };
  auto model = [&]() -> const Model& {
    if (!inputs.model) inputs.model = train_model(cfg.train, cfg.channels, train_set(), out_dir / "train");
    return *inputs.model;
  };
  // Pooled held-out data for the sweeps and the baseline comparison.
  auto pooled_test = [&]() {
    if (inputs.test_set) return *inputs.test_set;
    std::vector<PairedDataset> parts;
    const auto fams = test_case_families();
    for (std::size_t k = 0; k < fams.size(); ++k) {
      PairedDataset d = synthetic_test_set(cfg, fams[k], k + 1);
      for (auto& id : d.ids) id = "case" + std::to_string(k + 1) + "_" + id;
      parts.push_back(std::move(d));
    }
    return concat(parts);
  };
  auto emit_heatmap = [&](const Model& m, const PairedDataset& d, const std::string& tag) {
    if (!d.has_sigma()) return;
    const fs::path p = out_dir / ("heatmap_" + tag + ".png");
    save_sigma_heatmap(d.sigma.front(), estimate_sigma_map(d.pairs.front().noisy, m), p);
    res.artifacts.push_back(p);
  };

  const fs::path table = out_dir / ("table_" + name + ".csv");
  switch (protocol) {
    case Protocol::kCases: {
      const Model& m = model();
      std::vector<std::string> header{"method"};
      if (inputs.test_set) {
        res.reports.push_back(evaluate_model(m, *inputs.test_set, name, "data"));
        emit_heatmap(m, *inputs.test_set, "data");
        header.push_back("data");
      } else {
        const auto fams = test_case_families();
        for (std::size_t k = 0; k < fams.size(); ++k) {
          const std::string tag = "case" + std::to_string(k + 1);
          const PairedDataset d = synthetic_test_set(cfg, fams[k], k + 1);
          res.reports.push_back(evaluate_model(m, d, name, tag));
          emit_heatmap(m, d, tag);
          header.push_back("Case " + std::to_string(k + 1));
        }
      }
      std::vector<std::vector<std::string>> rows{psnr_row("Noisy", res.reports, true),
                                                 psnr_row("VDN (desk)", res.reports, false)};
      std::vector<std::string> ssim_row{"VDN (desk) SSIM"}, r_row{"VDN (desk) sigma Pearson r"};
      for (const auto& r : res.reports) {
        ssim_row.push_back(fmt(r.mean_ssim));
        r_row.push_back(fmt(r.mean_pearson_r));
      }
      rows.push_back(ssim_row);
      rows.push_back(r_row);
      if (!inputs.test_set) rows.push_back(ref_row("VDN reference (full scale BSD68)", kRefCases, "%.2f"));
      write_table(table, header, rows);
      break;
    }
    case Protocol::kAwgn: {
      const Model& m = model();
      std::vector<std::string> header{"method"};
      for (std::size_t k = 0; k < kAwgnLevels.size(); ++k) {
        MapFamilySpec fam;
        fam.kind = MapKind::kConstant;
        fam.peak_sigma = kAwgnLevels[k];
        const std::string tag = "sigma" + fmt(kAwgnLevels[k] * 255.0, "%.0f");
        PairedDataset d = synthetic_test_set(cfg, fam, 100 + k);
        res.reports.push_back(evaluate_model(m, d, name, tag));
        header.push_back("sigma=" + fmt(kAwgnLevels[k] * 255.0, "%.0f"));
      }
      std::vector<std::vector<std::string>> rows{psnr_row("Noisy", res.reports, true),
                                                 psnr_row("VDN (desk)", res.reports, false)};
      rows.push_back(ref_row("VDN reference (full scale BSD68)", kRefAwgn, "%.2f"));
      write_table(table, header, rows);
      break;
    }
    case Protocol::kEpsSweep:
    case Protocol::kPSweep: {
      const PairedDataset test = pooled_test();
      TrainConfig base = cfg.train;
      if (cfg.sweep_epochs > 0) base.epochs = cfg.sweep_epochs;
      base.checkpoint_every = 0;
      std::vector<std::pair<std::string, TrainConfig>> runs;
      std::vector<std::string> header;
      if (protocol == Protocol::kEpsSweep) {
        header.push_back("epsilon0_sq");
        for (double e : kEpsGrid) {
          TrainConfig c = base;
          c.epsilon0_sq = e;
          runs.emplace_back(eps_label(e), c);
        }
        TrainConfig c = base;
        c.loss = LossKind::kMse;
        runs.emplace_back("MSE", c);
      } else {
        header.push_back("p");
        for (int p : kPGrid) {
          TrainConfig c = base;
          c.p = p;
          c.epsilon0_sq = kPSweepEpsilon0Sq;
          runs.emplace_back(std::to_string(p), c);
        }
      }
      std::vector<std::string> psnr{"PSNR"}, ssim_r{"SSIM"}, sig{"sigma Pearson r"};
      for (const auto& [label, c] : runs) {
        header.push_back(label);
        const Model m = train_model(c, cfg.channels, train_set(), out_dir / ("run_" + label));
        res.reports.push_back(evaluate_model(m, test, name, label, c.loss == LossKind::kMse));
        const EvalReport& r = res.reports.back();
        psnr.push_back(fmt(r.mean_psnr, "%.2f"));
        ssim_r.push_back(fmt(r.mean_ssim));
        sig.push_back(fmt(r.mean_pearson_r));
      }
      std::vector<std::vector<std::string>> rows{psnr, ssim_r, sig};
      if (protocol == Protocol::kEpsSweep) {
        rows.push_back(ref_row("reference PSNR (full scale)", kRefEpsPsnr, "%.2f"));
        rows.push_back(ref_row("reference SSIM (full scale)", kRefEpsSsim, "%.4f"));
      } else {
        rows.push_back(ref_row("reference PSNR (full scale)", kRefPPsnr, "%.2f"));
        rows.push_back(ref_row("reference SSIM (full scale)", kRefPSsim, "%.4f"));
      }
      write_table(table, header, rows);
      break;
    }
    case Protocol::kMseBaseline: {
      const PairedDataset test = pooled_test();
      const Model& vdn = model();
      TrainConfig c = cfg.train;
      c.loss = LossKind::kMse;
      c.checkpoint_every = 0;
      const Model mse = train_model(c, cfg.channels, train_set(), out_dir / "train_mse");
      res.reports.push_back(evaluate_model(vdn, test, name, "VDN"));
      res.reports.push_back(evaluate_model(mse, test, name, "MSE", true));
      std::vector<std::vector<std::string>> rows;
      for (const auto& r : res.reports)
        rows.push_back({r.images.front().setting, fmt(r.mean_psnr, "%.2f"), fmt(r.mean_ssim),
                        fmt(r.mean_pearson_r), fmt(r.mean_sigma_rmse, "%.5f")});
      write_table(table, {"method", "PSNR", "SSIM", "sigma Pearson r", "sigma RMSE"}, rows);
      emit_heatmap(vdn, test, "vdn");
      break;
    }
  }
  res.artifacts.push_back(table);
  const fs::path report = out_dir / "report.csv";
  write_report_csv(res.reports, report);
  res.artifacts.push_back(report);
  return res;
}

}  // namespace vdn
