#include "vdn/train.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "vdn/array_io.hpp"
#include "vdn/error.hpp"
#include "vdn/prior.hpp"
#include "vdn/rng.hpp"

namespace vdn {

double lr_at(int epoch, const TrainConfig& cfg) {
  if (epoch < 0) throw DomainError("epoch must be >= 0");
  const int halvings = epoch / cfg.lr_halve_every;
  return std::max(cfg.lr_floor, cfg.lr_init * std::pow(0.5, halvings));
}

void Adam::step(const std::vector<ParamTensor*>& params, double lr) {
  if (slots_.empty()) {
    for (const ParamTensor* p : params) slots_.push_back({FloatBuffer(p->size(), 0.0f), FloatBuffer(p->size(), 0.0f)});
  }
  if (slots_.size() != params.size()) throw ShapeError("Adam: parameter list changed between steps");
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    ParamTensor& p = *params[k];
    Slot& s = slots_[k];
    if (s.m.size() != p.size()) throw ShapeError("Adam: slot size mismatch for " + p.name);
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double g = p.grad[i];
      const double m = beta1_ * s.m[i] + (1.0 - beta1_) * g;
      const double v = beta2_ * s.v[i] + (1.0 - beta2_) * g * g;
      s.m[i] = static_cast<float>(m);
      s.v[i] = static_cast<float>(v);
      const double update = lr * (m / bc1) / (std::sqrt(v / bc2) + eps_);
      p.value[i] = static_cast<float>(p.value[i] - update);
    }
  }
}

double clip_grad_norm(const std::vector<ParamTensor*>& params, double max_norm) {
  double sq = 0.0;
  for (const ParamTensor* p : params)
    for (float g : p->grad) sq += static_cast<double>(g) * g;
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const auto scale = static_cast<float>(max_norm / norm);
    for (ParamTensor* p : params)
      for (float& g : p->grad) g *= scale;
  }
  return norm;
}

Model::Model(const TrainConfig& cfg, int in_channels)
    : config(cfg), dnet(cfg.dnet_config(in_channels)), snet(cfg.snet_config(in_channels)) {
  config.validate();
  dnet.init(derive_seed(cfg.seed, "init", 0));
  snet.init(derive_seed(cfg.seed, "init", 1));
}

std::vector<ParamTensor*> Model::parameters() {
  std::vector<ParamTensor*> out;
  for (auto& t : dnet.params().tensors()) out.push_back(&t);
  for (auto& t : snet.params().tensors()) out.push_back(&t);
  return out;
}

void Model::zero_grad() {
  dnet.params().zero_grad();
  snet.params().zero_grad();
}

std::string format_log_row(const LogRow& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%d,%llu,%.9g,%.17g,%.17g,%.17g,%.17g", r.epoch,
                static_cast<unsigned long long>(r.step), r.lr, r.loss.neg_likelihood_term, r.loss.kl_z,
                r.loss.kl_sigma, r.loss.total);
  return buf;
}

std::vector<ImagePair> sample_batch(const PairedDataset& ds, const TrainConfig& cfg, std::uint64_t step) {
  if (ds.empty()) throw ShapeError("training dataset is empty");
  Rng rng(derive_seed(cfg.seed, "data", step));
  std::uniform_int_distribution<std::size_t> pick(0, ds.size() - 1);
  std::vector<ImagePair> batch;
  batch.reserve(static_cast<std::size_t>(cfg.batch_size));
  for (int b = 0; b < cfg.batch_size; ++b) {
    const std::size_t idx = pick(rng);
    auto patch = crop_patches(ds.pairs[idx], static_cast<std::size_t>(cfg.patch_size), 1, rng(), cfg.augment);
    batch.push_back(std::move(patch.front()));
  }
  return batch;
}

VariationalPosterior make_posterior(const DNet::Output& d, const SNet::Output& s) {
  VariationalPosterior q;
  q.mu = Field::from(d.mu);
  q.m_sq = Field::from(d.m_sq);
  q.alpha = Field::from(s.alpha);
  q.beta = Field::from(s.beta);
  return q;
}

namespace {

Tensor to_float(const Field& f, double scale) {
  Tensor t(f.shape);
  for (std::size_t i = 0; i < f.size(); ++i) t[i] = static_cast<float>(f[i] * scale);
  return t;
}

bool finite(const LossBreakdown& l) {
  return std::isfinite(l.neg_likelihood_term) && std::isfinite(l.kl_z) && std::isfinite(l.kl_sigma) &&
         std::isfinite(l.total);
}

}  // namespace

StepResult compute_gradients(Model& model, const std::vector<ImagePair>& batch) {
  if (batch.empty()) throw ShapeError("empty batch");
  model.zero_grad();
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  const TrainConfig& cfg = model.config;
  StepResult res;
  for (const ImagePair& pair : batch) {
    const Field y = Field::from(pair.noisy);
    const Field x = Field::from(pair.clean);
    DNet::Cache dc;
    const DNet::Output d = model.dnet.forward(pair.noisy, &dc);
    if (!d.mu.all_finite() || !d.m_sq.all_finite()) throw NonFiniteError("non-finite D-Net output");
    if (cfg.loss == LossKind::kMse) {
      Field g;
      const double mse = mse_loss(Field::from(d.mu), x, &g);
      LossBreakdown l;
      l.total = mse;
      if (!finite(l)) throw NonFiniteError("non-finite MSE loss");
      res.loss += l.scaled(inv_b);
      model.dnet.backward(dc, to_float(g, inv_b), Tensor(pair.noisy.shape()));
      continue;
    }
    SNet::Cache sc;
    const SNet::Output s = model.snet.forward(pair.noisy, &sc);
    if (!s.alpha.all_finite() || !s.beta.all_finite()) throw NonFiniteError("non-finite S-Net output");
    PriorSpec prior;
    prior.epsilon0_sq = cfg.epsilon0_sq;
    prior.p = cfg.p;
    prior.xi_floor = cfg.xi_floor;
    prior.xi = compute_xi(pair.noisy, pair.clean, cfg.p, cfg.xi_floor);
    PosteriorGrad g;
    const LossBreakdown l = negative_elbo(make_posterior(d, s), y, x, prior, &g);
    if (!finite(l)) throw NonFiniteError("non-finite loss");
    res.loss += l.scaled(inv_b);
    model.dnet.backward(dc, to_float(g.mu, inv_b), to_float(g.m_sq, inv_b));
    model.snet.backward(sc, to_float(g.alpha, inv_b), to_float(g.beta, inv_b));
  }
  return res;
}

namespace {

void dump_batch(const std::filesystem::path& dir, const std::vector<ImagePair>& batch) {
  std::filesystem::create_directories(dir);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    save_array(batch[i].noisy, dir / ("noisy_" + std::to_string(i) + ".vdna"));
    save_array(batch[i].clean, dir / ("clean_" + std::to_string(i) + ".vdna"));
  }
}

}  // namespace

std::vector<LogRow> train(Model& model, const PairedDataset& dataset, const TrainOptions& opts) {
  dataset.validate();
  const TrainConfig& cfg = model.config;
  cfg.validate();
  const int channels = static_cast<int>(dataset.pairs.front().noisy.channels());
  if (channels != model.in_channels())
    throw ShapeError("dataset has " + std::to_string(channels) + " channels, model expects " +
                     std::to_string(model.in_channels()));

  std::ofstream log;
  if (!opts.out_dir.empty()) {
    std::filesystem::create_directories(opts.out_dir);
    const auto log_path = opts.out_dir / "log.csv";
    const bool fresh = model.global_step == 0 || !std::filesystem::exists(log_path);
    log.open(log_path, fresh ? std::ios::trunc : std::ios::app);
    if (!log) throw IoError("cannot open training log " + log_path.string());
    if (fresh) log << kLogHeader << '\n';
  }

  const int end_epoch =
      opts.max_epochs < 0 ? cfg.epochs : std::min(cfg.epochs, model.next_epoch + opts.max_epochs);
  const auto steps = static_cast<std::uint64_t>(cfg.steps_per_epoch());
  std::vector<LogRow> rows;
  for (int epoch = model.next_epoch; epoch < end_epoch; ++epoch) {
    const double lr = lr_at(epoch, cfg);
    for (std::uint64_t s = 0; s < steps; ++s) {
      const std::uint64_t step = model.global_step;
      const auto batch = sample_batch(dataset, cfg, step);
      StepResult r;
      try {
        r = compute_gradients(model, batch);
      } catch (const NonFiniteError& e) {
        if (!opts.out_dir.empty()) dump_batch(opts.out_dir / ("nonfinite_step_" + std::to_string(step)), batch);
        throw NonFiniteError(std::string(e.what()) + " at epoch " + std::to_string(epoch) + ", step " +
                             std::to_string(step));
      }
      auto params = model.parameters();
      clip_grad_norm(params, cfg.grad_clip);
      model.adam.step(params, lr);
      ++model.global_step;

      LogRow row{epoch, step, lr, r.loss};
      if (log.is_open()) log << format_log_row(row) << '\n';
      if (opts.on_step) opts.on_step(row);
      rows.push_back(row);
    }
    model.next_epoch = epoch + 1;
    if (!opts.out_dir.empty()) {
      log.flush();
      const bool last = model.next_epoch == end_epoch;
      if (last || (cfg.checkpoint_every > 0 && model.next_epoch % cfg.checkpoint_every == 0)) {
        char name[32];
        std::snprintf(name, sizeof name, "ckpt_epoch_%03d", model.next_epoch);
        save_checkpoint(model, opts.out_dir / name);
        save_checkpoint(model, opts.out_dir / "ckpt_last");
      }
    }
  }
  return rows;
}

}  // namespace vdn
