// Copyright 2026 The cinn Authors
// SPDX-License-Identifier: Apache-2.0

#include "cinn/training/config.hpp"

#include "cinn/json_util.hpp"

namespace cinn::training {

void TrainConfig::validate() const {
  auto need = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(std::string("train config: ") + what);
  };
  need(sigma_noise >= 0, "sigma_noise must be >= 0");
  need(tau >= 0, "tau must be >= 0");
  need(lr > 0, "lr must be > 0");
  need(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1, "Adam betas must lie in [0, 1)");
  need(adam_eps > 0, "adam_eps must be > 0");
  need(lr_decay > 0 && lr_decay <= 1, "lr_decay must lie in (0, 1]");
  need(plateau_window >= 1, "plateau_window must be >= 1");
  need(plateau_patience >= 1, "plateau_patience must be >= 1");
  need(batch_size >= 1, "batch_size must be >= 1");
  need(clamp_alpha > 0, "clamp_alpha must be > 0");
  need(precision == "float32" || precision == "float64", "precision must be float32 or float64");
}

void to_json(nlohmann::json& j, const Ablations& a) {
  j = nlohmann::json{{"noise", a.noise}, {"clamp", a.clamp}, {"permute", a.permute}, {"haar", a.haar}, {"init", a.init}};
}

void from_json(const nlohmann::json& j, Ablations& a) {
  const std::string where = "ablations";
  reject_unknown_keys(j, {"noise", "clamp", "permute", "haar", "init"}, where);
  read_optional(j, "noise", a.noise, where);
  read_optional(j, "clamp", a.clamp, where);
  read_optional(j, "permute", a.permute, where);
  read_optional(j, "haar", a.haar, where);
  read_optional(j, "init", a.init, where);
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"sigma_noise", c.sigma_noise},
                     {"tau", c.tau},
                     {"lr", c.lr},
                     {"beta1", c.beta1},
                     {"beta2", c.beta2},
                     {"adam_eps", c.adam_eps},
                     {"lr_decay", c.lr_decay},
                     {"plateau_window", c.plateau_window},
                     {"plateau_patience", c.plateau_patience},
                     {"batch_size", c.batch_size},
                     {"max_steps", c.max_steps},
                     {"clamp_alpha", c.clamp_alpha},
                     {"seed", c.seed},
                     {"freeze_h_steps", c.freeze_h_steps},
                     {"precision", c.precision},
                     {"checkpoint_every", c.checkpoint_every},
                     {"ablations", c.ablations}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  const std::string where = "train";
  reject_unknown_keys(j,
                      {"sigma_noise", "tau", "lr", "beta1", "beta2", "adam_eps", "lr_decay", "plateau_window",
                       "plateau_patience", "batch_size", "max_steps", "clamp_alpha", "seed", "freeze_h_steps",
                       "precision", "checkpoint_every", "ablations"},
                      where);
  read_optional(j, "sigma_noise", c.sigma_noise, where);
  read_optional(j, "tau", c.tau, where);
  read_optional(j, "lr", c.lr, where);
  read_optional(j, "beta1", c.beta1, where);
  read_optional(j, "beta2", c.beta2, where);
  read_optional(j, "adam_eps", c.adam_eps, where);
  read_optional(j, "lr_decay", c.lr_decay, where);
  read_optional(j, "plateau_window", c.plateau_window, where);
  read_optional(j, "plateau_patience", c.plateau_patience, where);
  read_optional(j, "batch_size", c.batch_size, where);
  read_optional(j, "max_steps", c.max_steps, where);
  read_optional(j, "clamp_alpha", c.clamp_alpha, where);
  read_optional(j, "seed", c.seed, where);
  read_optional(j, "freeze_h_steps", c.freeze_h_steps, where);
  read_optional(j, "precision", c.precision, where);
  read_optional(j, "checkpoint_every", c.checkpoint_every, where);
  if (j.contains("ablations")) c.ablations = j.at("ablations").get<Ablations>();
}

ModelSpec apply_ablations(ModelSpec spec, const TrainConfig& cfg) {
  std::vector<flow::NodeSpec> nodes;
  for (flow::NodeSpec& n : spec.graph.nodes) {
    switch (n.type) {
      case flow::NodeType::kCoupling:
        n.coupling.alpha = cfg.clamp_alpha;
        n.coupling.clamp = cfg.ablations.clamp;
        break;
      case flow::NodeType::kMix:
        if (!cfg.ablations.permute) continue;
        break;
      case flow::NodeType::kHaar:
        n.wavelet = cfg.ablations.haar;
        break;
      case flow::NodeType::kSplit:
        break;
    }
    nodes.push_back(n);
  }
  spec.graph.nodes = std::move(nodes);
  return spec;
}

}  // namespace cinn::training
