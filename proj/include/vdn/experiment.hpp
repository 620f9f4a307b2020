#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "vdn/metrics.hpp"
#include "vdn/noise.hpp"
#include "vdn/train.hpp"

namespace vdn {

enum class Protocol { kCases, kAwgn, kEpsSweep, kPSweep, kMseBaseline };

std::string to_string(Protocol p);
Protocol protocol_from_string(const std::string& s);

// Training map family and the three held-out test families.
MapFamilySpec train_family();
std::vector<MapFamilySpec> test_case_families();

inline const std::vector<double> kEpsGrid{1e-4, 1e-5, 1e-6, 1e-7, 1e-8};
inline const std::vector<int> kPGrid{5, 7, 11, 15, 19};
inline const std::vector<double> kAwgnLevels{15.0 / 255.0, 25.0 / 255.0, 50.0 / 255.0};
// Fixed prior variance used by the p sweep.
inline constexpr double kPSweepEpsilon0Sq = 1e-6;

struct ExperimentConfig {
  TrainConfig train = desk_train_config();
  int channels = 3;
  std::size_t train_images = 32;
  std::size_t train_size = 128;
  std::size_t test_images = 6;
  std::size_t test_size = 128;
  // Epochs for each model trained by the two sweeps; <= 0 uses train.epochs.
  int sweep_epochs = 0;
  std::uint64_t seed = 0;
};

struct ExperimentInputs {
  // Model for cases / awgn; trained from `train_set` when absent.
  std::optional<Model> model;
  // Defaults to synthetic scenes under train_family().
  std::optional<PairedDataset> train_set;
  // Replaces the protocol's generated test sets (one setting, "data").
  std::optional<PairedDataset> test_set;
};

struct ExperimentResult {
  std::vector<EvalReport> reports;  // one per setting
  std::vector<std::filesystem::path> artifacts;
};

// Scores every pair of `data`.  VDN sigma maps come from the S-Net; with
// `xi_sigma` they come instead from the local-variance heuristic applied to
// the denoising residual (for models without a noise estimate).
EvalReport evaluate_model(const Model& model, const PairedDataset& data, const std::string& protocol,
                          const std::string& setting, bool xi_sigma = false);

// sqrt of the p x p Gaussian-filtered squared residual (y - denoised)^2.
VarianceMap residual_sigma_map(const ImageTensor& noisy, const ImageTensor& denoised, int p);

PairedDataset synthetic_train_set(const ExperimentConfig& cfg);
PairedDataset synthetic_test_set(const ExperimentConfig& cfg, const MapFamilySpec& family,
                                 std::uint64_t salt);

// Runs a protocol end to end and writes report.csv, table_<protocol>.csv and
// heatmap PNGs under `out_dir`.
ExperimentResult run_experiment(Protocol protocol, const ExperimentConfig& cfg, ExperimentInputs inputs,
                                const std::filesystem::path& out_dir);

void write_report_csv(const std::vector<EvalReport>& reports, const std::filesystem::path& path);

// Side-by-side [truth | prediction] of channel 0, both scaled by their joint
// maximum, as an 8-bit grey PNG.
void save_sigma_heatmap(const VarianceMap& truth, const VarianceMap& pred, const std::filesystem::path& path);

}  // namespace vdn
