#include "vdn/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <sstream>

#include "vdn/array_io.hpp"
#include "vdn/error.hpp"
#include "vdn/experiment.hpp"
#include "vdn/image_io.hpp"
#include "vdn/inference.hpp"
#include "vdn/noise.hpp"
#include "vdn/objective.hpp"
#include "vdn/rng.hpp"
#include "vdn/train.hpp"

#ifndef VDN_VERSION
#define VDN_VERSION "unknown"
#endif

namespace vdn {
namespace fs = std::filesystem;

const char* code_version() { return VDN_VERSION; }

std::string RunManifest::to_json_line() const {
  nlohmann::ordered_json j;
  j["command"] = command;
  j["argv"] = argv;
  nlohmann::ordered_json cfg;
  if (!config.empty()) cfg = nlohmann::ordered_json::parse(config);
  j["config"] = cfg;
  j["seed"] = seed;
  j["code_version"] = code_version;
  j["started"] = started;
  j["finished"] = finished;
  j["artifacts"] = artifacts;
  return j.dump();
}

void append_manifest(const RunManifest& m, const fs::path& dir) {
  fs::create_directories(dir);
  std::ofstream out(dir / kManifestFile, std::ios::app);
  if (!out) throw IoError("cannot append run manifest in " + dir.string());
  out << m.to_json_line() << '\n';
}

std::vector<RunManifest> read_manifests(const fs::path& dir) {
  std::ifstream in(dir / kManifestFile);
  if (!in) throw IoError("no run manifest in " + dir.string());
  std::vector<RunManifest> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::ordered_json::parse(line);
      RunManifest m;
      m.command = j.at("command").get<std::string>();
      m.argv = j.at("argv").get<std::vector<std::string>>();
      m.config = j.at("config").is_null() ? "" : j.at("config").dump();
      m.seed = j.at("seed").get<std::uint64_t>();
      m.code_version = j.at("code_version").get<std::string>();
      m.started = j.at("started").get<std::string>();
      m.finished = j.at("finished").get<std::string>();
      m.artifacts = j.at("artifacts").get<std::vector<std::string>>();
      out.push_back(std::move(m));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("bad run manifest line: ") + e.what());
    }
  }
  return out;
}

namespace {

std::string now_utc() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  std::string q;
  for (char c : s) {
    if (c == '"' || c == '\\') q += '\\';
    q += c;
  }
  return q;
}

void report_error(std::ostream& err, int code, const std::string& kind, const std::string& msg) {
  err << "error: code=" << code << " kind=" << kind << " message=\"" << one_line(msg) << "\"\n";
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw IoError("cannot read " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path default_out(const std::string& command) {
  const char* root = std::getenv(kOutRootEnv);
  return fs::path(root && *root ? root : "runs") / command;
}

// --set key=value overrides; the value is parsed as JSON when possible.
TrainConfig build_config(const std::string& config_path, const std::vector<std::string>& sets,
                         const nlohmann::json& flags) {
  nlohmann::json j = nlohmann::json::object();
  if (!config_path.empty()) {
    try {
      j = nlohmann::json::parse(read_text(config_path));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config must be a flat JSON object");
  }
  for (const std::string& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects key=value, got '" + s + "'");
    const std::string key = s.substr(0, eq), val = s.substr(eq + 1);
    try {
      j[key] = nlohmann::json::parse(val);
    } catch (const nlohmann::json::exception&) {
      j[key] = val;
    }
  }
  for (auto it = flags.begin(); it != flags.end(); ++it) j[it.key()] = it.value();
  return TrainConfig::from_json(j.dump());
}

struct Common {
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out;
  std::string config;
};

void add_common(CLI::App* app, Common& c, const std::string& out_help) {
  app->add_option("--seed", c.seed, "Root random seed")->each([&c](const std::string&) { c.seed_set = true; });
  app->add_option("--out", c.out, out_help);
  app->add_option("--config", c.config, "Flat JSON config file");
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Variational denoising: simulate data, train, denoise, estimate noise, evaluate", "vdn"};
  app.require_subcommand(1);
  app.set_version_flag("--version", code_version());

  Common common;
  RunManifest manifest;
  manifest.code_version = code_version();
  manifest.argv = args;
  manifest.started = now_utc();
  fs::path run_dir;
  std::function<void()> action;

  // simulate
  auto* sim = app.add_subcommand("simulate", "Generate a paired noisy/clean dataset");
  add_common(sim, common, "Dataset directory");
  std::string spec_path, clean_dir;
  std::size_t sim_count = 16, sim_size = 128;
  int sim_channels = 3;
  sim->add_option("--spec", spec_path, "Noise-map family JSON");
  sim->add_option("--clean", clean_dir, "Directory of clean PNGs (default: synthetic scenes)");
  sim->add_option("--count", sim_count, "Synthetic scene count")->check(CLI::PositiveNumber);
  sim->add_option("--size", sim_size, "Synthetic scene side length")->check(CLI::PositiveNumber);
  sim->add_option("--channels", sim_channels, "Synthetic scene channels")->check(CLI::IsMember({1, 3}));
  sim->callback([&] {
    action = [&] {
      MapFamilySpec spec;
      if (!spec_path.empty()) spec = MapFamilySpec::from_json(read_text(spec_path));
      spec.validate();
      std::vector<ImageTensor> cleans;
      if (!clean_dir.empty()) {
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(clean_dir))
          if (e.path().extension() == ".png") files.push_back(e.path());
        std::sort(files.begin(), files.end());
        if (files.empty()) throw IoError("no PNG files in " + clean_dir);
        for (const auto& f : files) cleans.push_back(load_image(f));
      } else {
        cleans = synthetic_scenes(sim_count, Shape{static_cast<std::size_t>(sim_channels), sim_size, sim_size},
                                  derive_seed(common.seed, "scenes"));
      }
      const PairedDataset ds = make_dataset(cleans, spec, common.seed);
      run_dir = common.out.empty() ? default_out("simulate") : fs::path(common.out);
      save_dataset(ds, run_dir);
      manifest.config = spec.to_json();
      manifest.seed = common.seed;
      manifest.artifacts.push_back((run_dir / "manifest").string());
      out << "wrote " << ds.size() << " pairs to " << run_dir.string() << '\n';
    };
  });

  // train
  auto* tr = app.add_subcommand("train", "Train D-Net and S-Net on a dataset directory");
  add_common(tr, common, "Run directory for log.csv and checkpoints");
  std::string data_dir, resume;
  std::vector<std::string> sets;
  int epochs = 0, max_epochs = -1, p = 0;
  double lr = 0.0, eps0 = 0.0;
  std::string loss;
  tr->add_option("--data", data_dir, "Dataset directory (default: synthetic training set)");
  tr->add_option("--resume", resume, "Checkpoint to continue from");
  tr->add_option("--set", sets, "Config override key=value (repeatable)");
  tr->add_option("--epochs", epochs, "Total epochs");
  tr->add_option("--max-epochs", max_epochs, "Stop after this many epochs in this invocation");
  tr->add_option("--lr", lr, "Initial learning rate");
  tr->add_option("--epsilon0-sq", eps0, "Prior variance of the clean image");
  tr->add_option("--p", p, "Window size of the variance prior");
  tr->add_option("--loss", loss, "elbo or mse")->check(CLI::IsMember({"elbo", "mse"}));
  tr->callback([&] {
    action = [&] {
      nlohmann::json flags = nlohmann::json::object();
      if (epochs) flags["epochs"] = epochs;
      if (lr > 0) flags["lr_init"] = lr;
      if (eps0 > 0) flags["epsilon0_sq"] = eps0;
      if (p) flags["p"] = p;
      if (!loss.empty()) flags["loss"] = loss;
      if (common.seed_set) flags["seed"] = common.seed;
      run_dir = common.out.empty() ? default_out("train") : fs::path(common.out);
      std::optional<Model> model;
      if (!resume.empty()) {
        // The checkpoint carries its config; only the epoch budget may change.
        flags.erase("epochs");
        if (!flags.empty() || !sets.empty() || !common.config.empty())
          throw ConfigError("--resume accepts only --epochs and --max-epochs");
        model.emplace(load_checkpoint(resume));
        if (epochs) {
          model->config.epochs = epochs;
          model->config.validate();
        }
      }
      const TrainConfig cfg = model ? model->config : build_config(common.config, sets, flags);
      PairedDataset ds;
      if (!data_dir.empty()) {
        ds = load_dataset(data_dir);
      } else {
        ExperimentConfig ec;
        ec.seed = cfg.seed;
        ds = synthetic_train_set(ec);
      }
      const int channels = static_cast<int>(ds.pairs.front().noisy.channels());
      if (!model) model.emplace(cfg, channels);
      TrainOptions opts;
      opts.out_dir = run_dir;
      opts.max_epochs = max_epochs;
      const auto rows = train(*model, ds, opts);
      manifest.config = model->config.to_json();
      manifest.seed = model->config.seed;
      manifest.artifacts = {(run_dir / "log.csv").string(), (run_dir / "ckpt_last").string()};
      out << "trained " << rows.size() << " steps; epoch " << model->next_epoch << "/" << model->config.epochs;
      if (!rows.empty()) out << "; last loss " << rows.back().loss.total;
      out << '\n';
    };
  });

  // denoise / estimate-noise
  auto* dn = app.add_subcommand("denoise", "Denoise a PNG or every PNG in a directory");
  auto* en = app.add_subcommand("estimate-noise", "Predict the per-pixel noise std map of one PNG");
  std::string ckpt, input;
  int bit_depth = 8;
  for (auto* sc : {dn, en}) {
    add_common(sc, common, sc == dn ? "Output directory, or output PNG for a single input" : "Output .vdna map or .png heatmap");
    sc->add_option("--ckpt", ckpt, "Checkpoint directory or manifest.json")->required();
    sc->add_option("--in,--input", input, sc == dn ? "Noisy PNG or directory of PNGs" : "Noisy PNG")->required();
  }
  dn->add_option("--bit-depth", bit_depth, "Output PNG bit depth")->check(CLI::IsMember({8, 16}));
  dn->callback([&] {
    action = [&] {
      const Model m = load_checkpoint(ckpt);
      std::vector<fs::path> inputs;
      if (fs::is_directory(input)) {
        for (const auto& e : fs::directory_iterator(input))
          if (e.path().extension() == ".png") inputs.push_back(e.path());
        std::sort(inputs.begin(), inputs.end());
        if (inputs.empty()) throw IoError("no PNG files in " + input);
      } else {
        inputs.push_back(input);
      }
      fs::path dst = common.out.empty() ? default_out("denoise") : fs::path(common.out);
      const bool single_file = inputs.size() == 1 && !fs::is_directory(input) && dst.extension() == ".png";
      run_dir = single_file ? (dst.has_parent_path() ? dst.parent_path() : fs::path(".")) : dst;
      fs::create_directories(run_dir);
      for (const auto& f : inputs) {
        const fs::path o = single_file ? dst : run_dir / f.filename();
        save_image(denoise(load_image(f), m), o, bit_depth);
        manifest.artifacts.push_back(o.string());
      }
      manifest.config = m.config.to_json();
      manifest.seed = m.config.seed;
      out << "denoised " << inputs.size() << " image(s) into " << run_dir.string() << '\n';
    };
  });
  en->callback([&] {
    action = [&] {
      const Model m = load_checkpoint(ckpt);
      const VarianceMap s = estimate_sigma_map(load_image(input), m);
      const fs::path dst = common.out.empty() ? default_out("estimate-noise") / "sigma.vdna" : fs::path(common.out);
      if (dst.has_parent_path()) fs::create_directories(dst.parent_path());
      if (dst.extension() == ".png") {
        // Heatmap scaled to the map maximum.
        const float peak = *std::max_element(s.storage().begin(), s.storage().end());
        ImageTensor img = s;
        for (float& v : img.storage()) v = peak > 0 ? v / peak : 0.0f;
        save_image(img, dst, 8);
      } else {
        save_array(s, dst);
      }
      manifest.artifacts.push_back(dst.string());
      run_dir = dst.has_parent_path() ? dst.parent_path() : fs::path(".");
      manifest.config = m.config.to_json();
      manifest.seed = m.config.seed;
      out << "wrote " << dst.string() << '\n';
    };
  });

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "Run an evaluation protocol and write CSV tables");
  add_common(ev, common, "Report CSV path, or a directory");
  std::string protocol, train_dir;
  std::size_t train_images = 32, test_images = 6;
  int sweep_epochs = 0;
  std::vector<std::string> ev_sets;
  ev->add_option("--protocol", protocol, "cases, awgn, eps-sweep, p-sweep or mse-baseline")->required();
  ev->add_option("--ckpt", ckpt, "Trained checkpoint (cases, awgn, mse-baseline)");
  ev->add_option("--data", data_dir, "Test dataset directory (default: generated test cases)");
  ev->add_option("--train-data", train_dir, "Training dataset for models the protocol trains");
  ev->add_option("--train-images", train_images, "Synthetic training scenes")->check(CLI::PositiveNumber);
  ev->add_option("--test-images", test_images, "Synthetic test scenes per setting")->check(CLI::PositiveNumber);
  ev->add_option("--sweep-epochs", sweep_epochs, "Epochs per sweep model (default: config epochs)");
  ev->add_option("--set", ev_sets, "Training config override key=value (repeatable)");
  ev->callback([&] {
    action = [&] {
      const Protocol proto = protocol_from_string(protocol);
      ExperimentConfig ec;
      nlohmann::json flags = nlohmann::json::object();
      if (common.seed_set) flags["seed"] = common.seed;
      ec.train = build_config(common.config, ev_sets, flags);
      ec.seed = ec.train.seed;
      ec.train_images = train_images;
      ec.test_images = test_images;
      ec.sweep_epochs = sweep_epochs;
      ExperimentInputs in;
      if (!ckpt.empty()) {
        in.model.emplace(load_checkpoint(ckpt));
        ec.channels = in.model->in_channels();
      }
      if (!data_dir.empty()) in.test_set = load_dataset(data_dir);
      if (!train_dir.empty()) in.train_set = load_dataset(train_dir);
      if (in.test_set) ec.channels = static_cast<int>(in.test_set->pairs.front().noisy.channels());
      fs::path report = common.out.empty() ? default_out("evaluate") / to_string(proto) : fs::path(common.out);
      if (report.extension() == ".csv") {
        run_dir = report.has_parent_path() ? report.parent_path() : fs::path(".");
      } else {
        run_dir = report;
        report = run_dir / "report.csv";
      }
      const ExperimentResult r = run_experiment(proto, ec, std::move(in), run_dir);
      if (report != run_dir / "report.csv") fs::copy_file(run_dir / "report.csv", report, fs::copy_options::overwrite_existing);
      manifest.config = ec.train.to_json();
      manifest.seed = ec.seed;
      for (const auto& a : r.artifacts) manifest.artifacts.push_back(a.string());
      if (report != run_dir / "report.csv") manifest.artifacts.push_back(report.string());
      for (const auto& rep : r.reports)
        if (!rep.images.empty())
          out << to_string(proto) << ' ' << rep.images.front().setting << ": psnr " << rep.mean_psnr
              << " (noisy " << rep.mean_noisy_psnr << ") ssim " << rep.mean_ssim << " sigma r "
              << rep.mean_pearson_r << '\n';
    };
  });

  // check-elbo
  auto* ce = app.add_subcommand("check-elbo", "Audit the closed-form bound against Monte Carlo");
  add_common(ce, common, "Output CSV path");
  std::size_t trials = 20, samples = 100000;
  ce->add_option("--trials", trials, "Random parameter draws")->check(CLI::PositiveNumber);
  ce->add_option("--samples", samples, "Monte Carlo samples per trial")->check(CLI::Range(2, 100000000));
  ce->callback([&] {
    action = [&] {
      const auto rows = audit_elbo(trials, samples, Shape{1, 8, 8}, common.seed);
      const fs::path dst = common.out.empty() ? default_out("check-elbo") / "elbo_check.csv" : fs::path(common.out);
      if (dst.has_parent_path()) fs::create_directories(dst.parent_path());
      std::ofstream f(dst, std::ios::trunc);
      if (!f) throw IoError("cannot write " + dst.string());
      f << "trial,analytic,mc_mean,mc_stderr,z_score\n";
      double worst = 0.0;
      for (const auto& r : rows) {
        char buf[256];
        std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.6f\n", r.trial, r.analytic, r.mc_mean,
                      r.mc_stderr, r.z_score);
        f << buf;
        worst = std::max(worst, std::abs(r.z_score));
      }
      if (!f) throw IoError("write failed: " + dst.string());
      run_dir = dst.has_parent_path() ? dst.parent_path() : fs::path(".");
      manifest.seed = common.seed;
      manifest.artifacts.push_back(dst.string());
      out << "wrote " << rows.size() << " trials to " << dst.string() << "; max |z| " << worst << '\n';
    };
  });

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      std::ostringstream help;
      app.exit(e, help, help);
      out << help.str();
      return kExitOk;
    }
    std::string msg = e.what();
    if (app.get_subcommands().empty() && !args.empty() && !args.front().starts_with("-"))
      msg = "unknown subcommand '" + args.front() + "'";
    report_error(err, kExitUsage, "usage", msg);
    const CLI::App* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    err << sub->help();
    return kExitUsage;
  }

  try {
    manifest.command = app.get_subcommands().front()->get_name();
    action();
    manifest.finished = now_utc();
    append_manifest(manifest, run_dir);
  } catch (const ConfigError& e) {
    report_error(err, kExitConfig, e.kind(), e.what());
    return kExitConfig;
  } catch (const Error& e) {
    report_error(err, kExitRuntime, e.kind(), e.what());
    return kExitRuntime;
  } catch (const std::exception& e) {
    report_error(err, kExitRuntime, "internal", e.what());
    return kExitRuntime;
  }
  return kExitOk;
}

int dispatch(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return dispatch(args, std::cout, std::cerr);
}

}  // namespace vdn
