#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "test_util.hpp"
#include "vdn/cli.hpp"
#include "vdn/dataset.hpp"
#include "vdn/image_io.hpp"
#include "vdn/array_io.hpp"

using namespace vdn;
using testutil::TempDir;

namespace {

struct CliRun {
  int code;
  std::string out, err;
};

CliRun run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = dispatch(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> csv_lines(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

}  // namespace

TEST(Cli, UsageErrorsExitTwo) {
  CliRun r = run({"bogus"});
  EXPECT_EQ(r.code, kExitUsage);
  EXPECT_NE(r.err.find("error: code=2 kind=usage"), std::string::npos);
  EXPECT_NE(r.err.find("unknown subcommand 'bogus'"), std::string::npos);
  EXPECT_EQ(run({}).code, kExitUsage);
  EXPECT_EQ(run({"denoise", "--in", "x.png"}).code, kExitUsage);  // --ckpt missing
  EXPECT_EQ(run({"evaluate"}).code, kExitUsage);
  EXPECT_EQ(run({"train", "--loss", "l2"}).code, kExitUsage);
}

TEST(Cli, HelpAndVersionExitZero) {
  CliRun h = run({"--help"});
  EXPECT_EQ(h.code, kExitOk);
  EXPECT_NE(h.out.find("check-elbo"), std::string::npos);
  CliRun v = run({"--version"});
  EXPECT_EQ(v.code, kExitOk);
  EXPECT_NE(v.out.find(code_version()), std::string::npos);
}

TEST(Cli, ConfigErrorsExitThree) {
  TempDir dir;
  {
    std::ofstream f(dir / "bad.json");
    f << R"({"epochz": 3})";
  }
  CliRun r = run({"train", "--config", (dir / "bad.json").string(), "--out", (dir / "run").string()});
  EXPECT_EQ(r.code, kExitConfig);
  EXPECT_NE(r.err.find("kind=config"), std::string::npos);
  EXPECT_EQ(run({"train", "--set", "p=4", "--out", (dir / "run").string()}).code, kExitConfig);
  EXPECT_EQ(run({"train", "--set", "novalue", "--out", (dir / "run").string()}).code, kExitConfig);
  EXPECT_EQ(run({"evaluate", "--protocol", "bsd68", "--out", (dir / "ev").string()}).code, kExitConfig);
}

TEST(Cli, RuntimeErrorsExitOne) {
  TempDir dir;
  CliRun r = run({"denoise", "--ckpt", (dir / "missing").string(), "--in", (dir / "x.png").string(), "--out",
               (dir / "o").string()});
  EXPECT_EQ(r.code, kExitRuntime);
  EXPECT_EQ(r.err.rfind("error: code=1", 0), 0u);
}

TEST(Cli, SimulateWritesDatasetAndManifest) {
  TempDir dir;
  {
    std::ofstream f(dir / "spec.json");
    f << R"({"kind":"constant","sigma":0.1})";
  }
  CliRun r = run({"simulate", "--spec", (dir / "spec.json").string(), "--count", "3", "--size", "24", "--channels",
               "1", "--seed", "9", "--out", (dir / "ds").string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  for (const char* sub : {"clean", "noisy", "sigma"}) EXPECT_TRUE(std::filesystem::is_directory(dir / "ds" / sub));
  EXPECT_TRUE(std::filesystem::exists(dir / "ds" / "manifest"));
  const PairedDataset ds = load_dataset(dir / "ds");
  ASSERT_EQ(ds.size(), 3u);
  EXPECT_EQ(ds.pairs[0].noisy.shape(), (Shape{1, 24, 24}));
  EXPECT_FLOAT_EQ(ds.sigma[0][0], 0.1f);

  const auto ms = read_manifests(dir / "ds");
  ASSERT_EQ(ms.size(), 1u);
  EXPECT_EQ(ms[0].command, "simulate");
  EXPECT_EQ(ms[0].seed, 9u);
  EXPECT_EQ(ms[0].code_version, code_version());
  EXPECT_FALSE(ms[0].started.empty());
  EXPECT_FALSE(ms[0].finished.empty());
  EXPECT_NE(ms[0].config.find("constant"), std::string::npos);
}

TEST(Cli, ManifestLinesRoundTrip) {
  TempDir dir;
  RunManifest m;
  m.command = "train";
  m.argv = {"train", "--set", "p=\"5\""};
  m.config = R"({"p":5,"note":"a \"quoted\" value"})";
  m.seed = 123;
  m.code_version = "0.1.0";
  m.started = "2026-01-01T00:00:00Z";
  m.finished = "2026-01-01T00:01:00Z";
  m.artifacts = {"a/b.csv"};
  append_manifest(m, dir.path());
  append_manifest(m, dir.path());
  const auto back = read_manifests(dir.path());
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].argv, m.argv);
  EXPECT_EQ(back[1].config, m.config);
  EXPECT_EQ(back[1].artifacts, m.artifacts);
  EXPECT_EQ(back[1].to_json_line(), m.to_json_line());
}

TEST(Cli, TrainDenoiseEstimateEndToEnd) {
  TempDir dir;
  ASSERT_EQ(run({"simulate", "--count", "2", "--size", "32", "--channels", "1", "--out", (dir / "ds").string()}).code,
            kExitOk);
  {
    std::ofstream f(dir / "cfg.json");
    f << R"({"epochs":2,"patch_size":16,"batch_size":2,"patches_per_epoch":4,"d_depth":2,"d_base_channels":4,)"
      << R"("s_layers":2,"s_channels":4})";
  }
  const std::string run_dir = (dir / "run").string();
  CliRun t = run({"train", "--data", (dir / "ds").string(), "--config", (dir / "cfg.json").string(), "--max-epochs",
               "1", "--seed", "3", "--out", run_dir});
  ASSERT_EQ(t.code, kExitOk) << t.err;
  EXPECT_TRUE(std::filesystem::exists(dir / "run" / "ckpt_last" / "manifest.json"));
  CliRun resumed = run({"train", "--data", (dir / "ds").string(), "--resume", (dir / "run" / "ckpt_last").string(),
                     "--out", run_dir});
  ASSERT_EQ(resumed.code, kExitOk) << resumed.err;
  EXPECT_EQ(csv_lines(dir / "run" / "log.csv").size(), 1u + 4u);
  EXPECT_EQ(run({"train", "--data", (dir / "ds").string(), "--resume", (dir / "run" / "ckpt_last").string(),
                 "--lr", "0.1", "--out", run_dir})
                .code,
            kExitConfig);

  const std::string ckpt = (dir / "run" / "ckpt_last").string();
  CliRun d = run({"denoise", "--ckpt", ckpt, "--in", (dir / "ds" / "noisy").string(), "--out", (dir / "den").string()});
  ASSERT_EQ(d.code, kExitOk) << d.err;
  const ImageTensor out = load_image(dir / "den" / "0000.png");
  EXPECT_EQ(out.shape(), (Shape{1, 32, 32}));

  CliRun e = run({"estimate-noise", "--ckpt", ckpt, "--in", (dir / "ds" / "noisy" / "0001.png").string(), "--out",
               (dir / "sigma.vdna").string()});
  ASSERT_EQ(e.code, kExitOk) << e.err;
  const Tensor s = load_array(dir / "sigma.vdna");
  EXPECT_EQ(s.shape(), (Shape{1, 32, 32}));
  for (float v : s.values()) EXPECT_GT(v, 0.0f);
  EXPECT_EQ(run({"estimate-noise", "--ckpt", ckpt, "--in", (dir / "ds" / "noisy" / "0001.png").string(), "--out",
                 (dir / "sigma.png").string()})
                .code,
            kExitOk);
  EXPECT_TRUE(std::filesystem::exists(dir / "sigma.png"));

  const auto ms = read_manifests(dir / "run");
  ASSERT_EQ(ms.size(), 2u);
  EXPECT_EQ(ms[0].command, "train");
  EXPECT_EQ(ms[0].seed, 3u);
}

TEST(Cli, CheckElboWritesAuditCsv) {
  TempDir dir;
  const std::string csv = (dir / "elbo.csv").string();
  CliRun r = run({"check-elbo", "--trials", "20", "--samples", "20000", "--seed", "4", "--out", csv});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto lines = csv_lines(csv);
  ASSERT_EQ(lines.size(), 21u);
  EXPECT_EQ(lines[0], "trial,analytic,mc_mean,mc_stderr,z_score");
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const double z = std::stod(lines[i].substr(lines[i].rfind(',') + 1));
    EXPECT_LT(std::abs(z), 3.0) << lines[i];
  }
  // Same seed, same numbers.
  const std::string csv2 = (dir / "again" / "elbo.csv").string();
  ASSERT_EQ(run({"check-elbo", "--trials", "20", "--samples", "20000", "--seed", "4", "--out", csv2}).code, kExitOk);
  EXPECT_EQ(slurp(csv), slurp(csv2));
  EXPECT_EQ(read_manifests(dir.path()).size(), 1u);
}

TEST(Cli, EvaluateCasesWithCheckpoint) {
  TempDir dir;
  {
    std::ofstream f(dir / "cfg.json");
    f << R"({"epochs":1,"patch_size":16,"batch_size":2,"patches_per_epoch":2,"d_depth":2,"d_base_channels":4,)"
      << R"("s_layers":2,"s_channels":4})";
  }
  ASSERT_EQ(run({"simulate", "--count", "2", "--size", "32", "--out", (dir / "ds").string()}).code, kExitOk);
  ASSERT_EQ(run({"train", "--data", (dir / "ds").string(), "--config", (dir / "cfg.json").string(), "--out",
                 (dir / "run").string()})
                .code,
            kExitOk);
  CliRun r = run({"evaluate", "--protocol", "cases", "--ckpt", (dir / "run" / "ckpt_last").string(), "--test-images",
               "1", "--out", (dir / "eval" / "scores.csv").string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(csv_lines(dir / "eval" / "scores.csv").size(), 1u + 3u);
  EXPECT_TRUE(std::filesystem::exists(dir / "eval" / "table_cases.csv"));
}
