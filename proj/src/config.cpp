#include <json.hpp>

#include "vdn/error.hpp"
#include "vdn/train.hpp"

namespace vdn {

void TrainConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError("invalid config: " + m); };
  if (epochs < 1) fail("epochs must be >= 1");
  if (patches_per_epoch < 1) fail("patches_per_epoch must be >= 1");
  if (patch_size < 1) fail("patch_size must be >= 1");
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (patches_per_epoch < batch_size) fail("patches_per_epoch must be >= batch_size");
  if (!(lr_init > 0.0)) fail("lr_init must be > 0");
  if (!(lr_floor > 0.0) || lr_floor > lr_init) fail("lr_floor must be in (0, lr_init]");
  if (lr_halve_every < 1) fail("lr_halve_every must be >= 1");
  if (!(epsilon0_sq > 0.0)) fail("epsilon0_sq must be > 0");
  if (p < 3 || p % 2 == 0) fail("p must be odd and >= 3");
  if (!(grad_clip > 0.0)) fail("grad_clip must be > 0");
  if (!(xi_floor > 0.0)) fail("xi_floor must be > 0");
  if (checkpoint_every < 0) fail("checkpoint_every must be >= 0");
  if (d_depth < 1 || d_base_channels < 1) fail("D-Net depth and width must be >= 1");
  if (s_layers < 2 || s_channels < 1) fail("S-Net needs >= 2 layers and >= 1 channel");
  if (!(sigma_init > 0.0)) fail("sigma_init must be > 0");
  const int divisor = 1 << (d_depth - 1);
  if (patch_size % divisor != 0)
    fail("patch_size must be a multiple of 2^(d_depth-1) = " + std::to_string(divisor));
}

DNetConfig TrainConfig::dnet_config(int in_channels) const {
  DNetConfig c;
  c.depth = d_depth;
  c.base_channels = d_base_channels;
  c.in_channels = in_channels;
  c.m_sq_init = epsilon0_sq;
  return c;
}

SNetConfig TrainConfig::snet_config(int in_channels) const {
  SNetConfig c;
  c.layers = s_layers;
  c.channels = s_channels;
  c.in_channels = in_channels;
  c.alpha_init = prior_alpha0(p);
  c.beta_init = (c.alpha_init + 1.0) * sigma_init * sigma_init;
  return c;
}

TrainConfig desk_train_config() {
  TrainConfig c;
  c.epochs = 30;
  c.patches_per_epoch = 8 * 50;
  c.patch_size = 64;
  c.batch_size = 8;
  c.lr_halve_every = 5;
  const DNetConfig d = desk_dnet_config();
  const SNetConfig s = desk_snet_config();
  c.d_depth = d.depth;
  c.d_base_channels = d.base_channels;
  c.s_layers = s.layers;
  c.s_channels = s.channels;
  return c;
}

std::string TrainConfig::to_json() const {
  nlohmann::ordered_json j;
  j["epochs"] = epochs;
  j["patches_per_epoch"] = patches_per_epoch;
  j["patch_size"] = patch_size;
  j["batch_size"] = batch_size;
  j["lr_init"] = lr_init;
  j["lr_halve_every"] = lr_halve_every;
  j["lr_floor"] = lr_floor;
  j["epsilon0_sq"] = epsilon0_sq;
  j["p"] = p;
  j["seed"] = seed;
  j["loss"] = loss == LossKind::kElbo ? "elbo" : "mse";
  j["augment"] = augment;
  j["grad_clip"] = grad_clip;
  j["xi_floor"] = xi_floor;
  j["checkpoint_every"] = checkpoint_every;
  j["d_depth"] = d_depth;
  j["d_base_channels"] = d_base_channels;
  j["s_layers"] = s_layers;
  j["s_channels"] = s_channels;
  j["sigma_init"] = sigma_init;
  return j.dump(2);
}

TrainConfig TrainConfig::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a flat JSON object");
  // Keys absent from the file keep the desk preset values.
  TrainConfig c = desk_train_config();
  try {
    for (auto it = j.begin(); it != j.end(); ++it) {
      const std::string& k = it.key();
      const auto& v = it.value();
      if (k == "epochs") c.epochs = v.get<int>();
      else if (k == "patches_per_epoch") c.patches_per_epoch = v.get<int>();
      else if (k == "patch_size") c.patch_size = v.get<int>();
      else if (k == "batch_size") c.batch_size = v.get<int>();
      else if (k == "lr_init") c.lr_init = v.get<double>();
      else if (k == "lr_halve_every") c.lr_halve_every = v.get<int>();
      else if (k == "lr_floor") c.lr_floor = v.get<double>();
      else if (k == "epsilon0_sq") c.epsilon0_sq = v.get<double>();
      else if (k == "p") c.p = v.get<int>();
      else if (k == "seed") c.seed = v.get<std::uint64_t>();
      else if (k == "loss") {
        const auto s = v.get<std::string>();
        if (s == "elbo") c.loss = LossKind::kElbo;
        else if (s == "mse") c.loss = LossKind::kMse;
        else throw ConfigError("loss must be \"elbo\" or \"mse\"");
      }
      else if (k == "augment") c.augment = v.get<bool>();
      else if (k == "grad_clip") c.grad_clip = v.get<double>();
      else if (k == "xi_floor") c.xi_floor = v.get<double>();
      else if (k == "checkpoint_every") c.checkpoint_every = v.get<int>();
      else if (k == "d_depth") c.d_depth = v.get<int>();
      else if (k == "d_base_channels") c.d_base_channels = v.get<int>();
      else if (k == "s_layers") c.s_layers = v.get<int>();
      else if (k == "s_channels") c.s_channels = v.get<int>();
      else if (k == "sigma_init") c.sigma_init = v.get<double>();
      else throw ConfigError("unknown config key '" + k + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config value has the wrong type: ") + e.what());
  }
  c.validate();
  return c;
}

}  // namespace vdn
