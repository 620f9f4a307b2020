#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "vdn/dataset.hpp"
#include "vdn/networks.hpp"
#include "vdn/objective.hpp"

namespace vdn {

enum class LossKind { kElbo, kMse };

// Every field is a key of the flat JSON config file.  Defaults follow the
// full-scale recipe; desk_train_config() gives the laptop-sized preset.
struct TrainConfig {
  int epochs = 80;
  int patches_per_epoch = 64 * 5000;
  int patch_size = 128;
  int batch_size = 64;
  double lr_init = 2e-4;
  int lr_halve_every = 10;
  double lr_floor = 1e-6;
  double epsilon0_sq = kSyntheticEpsilon0Sq;
  int p = kDefaultWindow;
  std::uint64_t seed = 0;

  LossKind loss = LossKind::kElbo;
  bool augment = false;
  double grad_clip = 100.0;
  double xi_floor = kDefaultXiFloor;
  int checkpoint_every = 1;  // epochs; 0 keeps only the final checkpoint
  int d_depth = 4;
  int d_base_channels = 64;
  int s_layers = 5;
  int s_channels = 64;
  // Noise level the S-Net head starts at.
  double sigma_init = 25.0 / 255.0;

  void validate() const;
  int steps_per_epoch() const { return patches_per_epoch / batch_size; }
  DNetConfig dnet_config(int in_channels) const;
  SNetConfig snet_config(int in_channels) const;

  std::string to_json() const;
  static TrainConfig from_json(const std::string& text);
  bool operator==(const TrainConfig&) const = default;
};

TrainConfig desk_train_config();

// lr = max(lr_floor, lr_init * 0.5^floor(epoch / lr_halve_every))
double lr_at(int epoch, const TrainConfig& cfg);

// Adam with the canonical moment decays and epsilon.
class Adam {
 public:
  struct Slot {
    FloatBuffer m;
    FloatBuffer v;
  };

  explicit Adam(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : beta1_(beta1), beta2_(beta2), eps_(eps) {}

  // Slots are created on first use and must keep matching `params` order.
  void step(const std::vector<ParamTensor*>& params, double lr);

  std::uint64_t steps() const { return t_; }
  void set_steps(std::uint64_t t) { t_ = t; }
  std::vector<Slot>& slots() { return slots_; }
  const std::vector<Slot>& slots() const { return slots_; }

 private:
  double beta1_, beta2_, eps_;
  std::uint64_t t_ = 0;
  std::vector<Slot> slots_;
};

// Scales all gradients so their joint L2 norm is at most `max_norm`; returns
// the norm before clipping.
double clip_grad_norm(const std::vector<ParamTensor*>& params, double max_norm);

// Both inference networks plus everything needed to resume training.
struct Model {
  TrainConfig config;
  DNet dnet;
  SNet snet;
  Adam adam;
  int next_epoch = 0;
  std::uint64_t global_step = 0;

  Model(const TrainConfig& cfg, int in_channels);
  int in_channels() const { return dnet.config().in_channels; }
  // D-Net parameters first, then S-Net.
  std::vector<ParamTensor*> parameters();
  void zero_grad();
};

// Checkpoint layout: a directory holding manifest.json plus one VDNA array
// per tensor (dnet.*, snet.*, and Adam moments adam_m.* / adam_v.*).
void save_checkpoint(const Model& model, const std::filesystem::path& dir);
// Accepts the checkpoint directory or its manifest.json.
Model load_checkpoint(const std::filesystem::path& path);

struct LogRow {
  int epoch = 0;
  std::uint64_t step = 0;
  double lr = 0.0;
  LossBreakdown loss;
};

inline constexpr const char* kLogHeader = "epoch,step,lr,neg_lik,kl_z,kl_sigma,total";
std::string format_log_row(const LogRow& row);

// Patch batch for global step `step`: image indices and crop windows are a
// pure function of (seed, step), so a resumed run sees the same data.
std::vector<ImagePair> sample_batch(const PairedDataset& ds, const TrainConfig& cfg, std::uint64_t step);

// Per-image posterior from network outputs.
VariationalPosterior make_posterior(const DNet::Output& d, const SNet::Output& s);

struct StepResult {
  LossBreakdown loss;  // batch mean
  double grad_norm = 0.0;
};

// Forward + backward over a batch; gradients (batch mean) are left in the
// parameter accumulators.  Throws NonFiniteError on a non-finite loss.
StepResult compute_gradients(Model& model, const std::vector<ImagePair>& batch);

struct TrainOptions {
  // Run directory for log.csv and checkpoints; empty disables file output.
  std::filesystem::path out_dir;
  // Stop after this many epochs in this call (resume later); -1 runs to cfg.epochs.
  int max_epochs = -1;
  std::function<void(const LogRow&)> on_step;
};

// Trains `model` in place from model.next_epoch up to the configured epoch
// count and returns every step's log row.
std::vector<LogRow> train(Model& model, const PairedDataset& dataset, const TrainOptions& opts = {});

}  // namespace vdn
