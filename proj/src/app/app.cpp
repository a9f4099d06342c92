// Copyright 2026 The cinn Authors
// SPDX-License-Identifier: Apache-2.0

#include "cinn/app/app.hpp"

#include <cstdlib>
#include <fstream>

#include "cinn/json_util.hpp"

#ifndef CINN_DEFAULT_DATA_ROOT
#define CINN_DEFAULT_DATA_ROOT "data"
#endif

namespace cinn::app {

namespace {

constexpr std::size_t kMnistClasses = 10;
constexpr std::size_t kMnistSide = 28;

training::ModelSpec fc_model(std::size_t dim, std::size_t classes, const Architecture& a) {
  training::ModelSpec m;
  m.graph.input_shape = {dim};
  for (std::size_t i = 0; i < a.blocks; ++i) {
    m.graph.nodes.push_back(flow::NodeSpec::make_coupling(flow::fc_coupling(dim, classes, a.hidden, a.hidden_layers)));
    m.graph.nodes.push_back(flow::NodeSpec::mix(1000 + i));
  }
  m.conditioning = conditioning::passthrough_spec({classes}, a.blocks);
  return m;
}

// Three resolution stages on ab [2, s, s]: each starts with a Haar
// downsampling, runs `blocks` conditional couplings with mixing, and all but
// the last emit half their channels. The conditioning encoder maps L [1, 2s,
// 2s] to [w, s/2, s/2]; stage k's head adds k stride-2 convolutions.
training::ModelSpec toyshapes_model(const Architecture& a) {
  const std::size_t s = a.image_size, w = a.cond_width;
  if (s % 8 != 0) throw ConfigError("toyshapes image_size must be a multiple of 8");
  training::ModelSpec m;
  m.graph.input_shape = {2, s, s};
  std::size_t ch = 2, side = s;
  std::uint64_t mix_seed = 2000;
  for (int stage = 0; stage < 3; ++stage) {
    m.graph.nodes.push_back(flow::NodeSpec::haar());
    ch *= 4;
    side /= 2;
    for (std::size_t b = 0; b < a.blocks; ++b) {
      m.graph.nodes.push_back(
          flow::NodeSpec::make_coupling(flow::conv_coupling(ch, w, side, side, a.hidden, a.hidden_layers)));
      m.graph.nodes.push_back(flow::NodeSpec::mix(mix_seed++));
    }
    if (stage < 2) {
      m.graph.nodes.push_back(flow::NodeSpec::split(ch / 2));
      ch /= 2;
    }
  }
  m.conditioning.input_shape = {1, 2 * s, 2 * s};
  m.conditioning.encoder = {LayerSpec::conv(1, w, 3, 2), LayerSpec::leaky_relu(0.1), LayerSpec::conv(w, w, 3, 1),
                            LayerSpec::leaky_relu(0.1), LayerSpec::conv(w, w, 3, 2), LayerSpec::leaky_relu(0.1),
                            LayerSpec::conv(w, w, 3, 1)};
  for (std::size_t stage = 0; stage < 3; ++stage)
    for (std::size_t b = 0; b < a.blocks; ++b) m.conditioning.heads.push_back(conditioning::strided_head(w, stage, 0.1));
  return m;
}

Dataset mnist_dataset(const RunConfig& cfg, Split split) {
  const std::string root = resolve_data_root(cfg) + "/mnist/";
  auto all = datasets::load_mnist_idx(root + "train-images-idx3-ubyte", root + "train-labels-idx1-ubyte");
  const std::size_t n = all.images.dim(0);
  std::size_t begin = 0, end = n;
  if (split == Split::kTrain) {
    if (cfg.data.train_items > 0) end = std::min(n, cfg.data.train_items);
  } else {
    begin = n - std::min(n, cfg.data.eval_items);
  }
  Dataset d;
  d.x = take_rows(all.images, begin, end).reshaped({end - begin, kMnistSide * kMnistSide});
  d.labels.assign(all.labels.begin() + static_cast<std::ptrdiff_t>(begin),
                  all.labels.begin() + static_cast<std::ptrdiff_t>(end));
  d.c = conditioning::one_hot_batch<float>(std::span<const int>(d.labels), kMnistClasses);
  d.x_norm = all.norm;
  return d;
}

Dataset synth_dataset(const RunConfig& cfg, Split split) {
  const auto density = datasets::gaussian_task();
  const std::size_t n = split == Split::kTrain ? (cfg.data.train_items ? cfg.data.train_items : 10000) : cfg.data.eval_items;
  auto s = datasets::synth_conditional(density, n, split == Split::kTrain ? cfg.data.seed : cfg.data.seed + 1);
  Dataset d;
  d.x = s.x.cast<float>();
  d.labels = s.labels;
  d.c = conditioning::one_hot_batch<float>(std::span<const int>(d.labels), static_cast<int>(density.n_conditions()));
  d.x_norm = {{0.0}, {1.0}};
  return d;
}

Dataset toyshapes_dataset(const RunConfig& cfg, Split split) {
  const std::size_t n = split == Split::kTrain ? cfg.data.train_items : cfg.data.eval_items;
  auto b = datasets::synth_colored_shapes(n, cfg.arch.image_size, split == Split::kTrain ? cfg.data.seed : cfg.data.seed + 1);
  Dataset d;
  d.x = std::move(b.ab);
  d.c = std::move(b.L);
  d.mask = std::move(b.shape_mask);
  d.x_norm = b.ab_norm;
  return d;
}

template <typename T>
Tensor<T> cast(const Tensor<float>& t) {
  if constexpr (std::is_same_v<T, float>) {
    return t;
  } else {
    return t.template cast<T>();
  }
}

}  // namespace

const std::vector<std::string>& task_names() {
  static const std::vector<std::string> names{"mnist", "synth", "toyshapes"};
  return names;
}

void RunConfig::validate() const {
  if (std::find(task_names().begin(), task_names().end(), task) == task_names().end())
    throw ConfigError("unknown task '" + task + "' (expected mnist, synth or toyshapes)");
  train.validate();
  if (arch.blocks == 0) throw ConfigError("arch.blocks must be >= 1");
  if (arch.hidden == 0) throw ConfigError("arch.hidden must be >= 1");
  if (arch.cond_width == 0) throw ConfigError("arch.cond_width must be >= 1");
  if (task == "toyshapes" && (arch.image_size == 0 || arch.image_size % 8 != 0))
    throw ConfigError("arch.image_size must be a positive multiple of 8");
  if (task == "toyshapes" && data.train_items == 0) throw ConfigError("toyshapes needs data.train_items > 0");
  if (data.eval_items == 0) throw ConfigError("data.eval_items must be >= 1");
}

RunConfig preset(const std::string& task) {
  RunConfig r;
  r.task = task;
  r.output_dir = "runs/" + task;
  if (task == "mnist") {
    r.arch = {24, 512, 1, 16, 16};
    r.train.max_steps = 10000;
    r.data.eval_items = 1000;
  } else if (task == "synth") {
    r.arch = {8, 64, 2, 16, 16};
    r.train.sigma_noise = 0.01;
    r.train.batch_size = 256;
    r.train.max_steps = 5000;
    r.data.eval_items = 20000;
  } else if (task == "toyshapes") {
    r.arch = {2, 32, 1, 16, 16};
    r.train.sigma_noise = 0.05;
    r.train.batch_size = 32;
    r.train.max_steps = 2000;
    r.data.train_items = 4096;
    r.data.eval_items = 256;
  } else {
    throw ConfigError("unknown preset '" + task + "' (expected mnist, synth or toyshapes)");
  }
  return r;
}

void to_json(nlohmann::json& j, const Architecture& a) {
  j = {{"blocks", a.blocks},
       {"hidden", a.hidden},
       {"hidden_layers", a.hidden_layers},
       {"cond_width", a.cond_width},
       {"image_size", a.image_size}};
}

void to_json(nlohmann::json& j, const DataConfig& d) {
  j = {{"root", d.root}, {"train_items", d.train_items}, {"eval_items", d.eval_items}, {"seed", d.seed}};
}

void to_json(nlohmann::json& j, const RunConfig& r) {
  j = {{"task", r.task}, {"arch", r.arch}, {"train", r.train}, {"data", r.data}, {"output_dir", r.output_dir}};
}

RunConfig run_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("run config must be a JSON object");
  reject_unknown_keys(j, {"task", "arch", "train", "data", "output_dir"}, "run config");
  if (!j.contains("task")) throw ConfigError("run config needs a \"task\" (mnist, synth or toyshapes)");
  RunConfig r = preset(j.at("task").get<std::string>());
  if (j.contains("arch")) {
    const auto& a = j.at("arch");
    reject_unknown_keys(a, {"blocks", "hidden", "hidden_layers", "cond_width", "image_size"}, "arch");
    read_optional(a, "blocks", r.arch.blocks, "arch");
    read_optional(a, "hidden", r.arch.hidden, "arch");
    read_optional(a, "hidden_layers", r.arch.hidden_layers, "arch");
    read_optional(a, "cond_width", r.arch.cond_width, "arch");
    read_optional(a, "image_size", r.arch.image_size, "arch");
  }
  if (j.contains("train")) {
    // Overlay onto the preset: merge the preset's values with the given keys.
    nlohmann::json merged = r.train;
    for (const auto& [k, v] : j.at("train").items()) {
      if (k == "ablations" && v.is_object() && merged.contains(k)) {
        for (const auto& [ak, av] : v.items()) merged[k][ak] = av;
      } else {
        merged[k] = v;
      }
    }
    try {
      r.train = merged.get<training::TrainConfig>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("train: ") + e.what());
    }
  }
  if (j.contains("data")) {
    const auto& d = j.at("data");
    reject_unknown_keys(d, {"root", "train_items", "eval_items", "seed"}, "data");
    read_optional(d, "root", r.data.root, "data");
    read_optional(d, "train_items", r.data.train_items, "data");
    read_optional(d, "eval_items", r.data.eval_items, "data");
    read_optional(d, "seed", r.data.seed, "data");
  }
  read_optional(j, "output_dir", r.output_dir, "run config");
  r.validate();
  return r;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return run_config_from_json(j);
}

std::string resolve_data_root(const RunConfig& cfg) {
  if (!cfg.data.root.empty()) return cfg.data.root;
  if (const char* env = std::getenv(kDataRootEnv); env && *env) return env;
  return CINN_DEFAULT_DATA_ROOT;
}

training::ModelSpec build_model_spec(const RunConfig& cfg) {
  cfg.validate();
  training::ModelSpec m;
  datasets::Normalization norm;
  std::size_t classes = 0;
  if (cfg.task == "mnist") {
    m = fc_model(kMnistSide * kMnistSide, kMnistClasses, cfg.arch);
    norm = {{0.5}, {1.0}};
    classes = kMnistClasses;
    m.meta["image_shape"] = {1, kMnistSide, kMnistSide};
  } else if (cfg.task == "synth") {
    classes = datasets::gaussian_task().n_conditions();
    m = fc_model(2, classes, cfg.arch);
    norm = {{0.0}, {1.0}};
  } else {
    m = toyshapes_model(cfg.arch);
    norm = {{0.0}, {128.0}};
    m.meta["image_shape"] = {2, cfg.arch.image_size, cfg.arch.image_size};
    m.meta["cond_norm"] = datasets::Normalization{{50.0}, {50.0}};
  }
  m.meta["task"] = cfg.task;
  m.meta["classes"] = classes;
  m.meta["x_norm"] = norm;
  return training::apply_ablations(std::move(m), cfg.train);
}

Dataset load_dataset(const RunConfig& cfg, Split split) {
  cfg.validate();
  if (cfg.task == "mnist") return mnist_dataset(cfg, split);
  if (cfg.task == "synth") return synth_dataset(cfg, split);
  return toyshapes_dataset(cfg, split);
}

Tensor<float> label_conditions(const RunConfig& cfg, std::span<const int> labels) {
  if (cfg.task == "mnist") return conditioning::one_hot_batch<float>(labels, kMnistClasses);
  if (cfg.task == "synth")
    return conditioning::one_hot_batch<float>(labels, static_cast<int>(datasets::gaussian_task().n_conditions()));
  throw ConfigError("task " + cfg.task + " has no class-label conditions");
}

template <typename T>
training::Batch<T> DatasetSource<T>::next(std::size_t batch_size, Rng& rng) {
  if (data_.size() == 0) throw DataError("empty training set");
  std::uniform_int_distribution<std::size_t> pick(0, data_.size() - 1);
  std::vector<std::size_t> idx(batch_size);
  for (auto& i : idx) i = pick(rng);
  std::span<const std::size_t> s(idx);
  return {cast<T>(gather_rows(data_.x, s)), cast<T>(gather_rows(data_.c, s))};
}

template <typename T>
training::Batch<T> SynthSource<T>::next(std::size_t batch_size, Rng& rng) {
  auto s = density_.sample(batch_size, rng);
  training::Batch<T> b{s.x.template cast<T>(), Tensor<T>({batch_size, density_.n_conditions()})};
  for (std::size_t i = 0; i < batch_size; ++i) b.c[i * density_.n_conditions() + s.labels[i]] = T(1);
  return b;
}

template <typename T>
std::unique_ptr<training::DataSource<T>> make_train_source(const RunConfig& cfg) {
  if (cfg.task == "synth") return std::make_unique<SynthSource<T>>(datasets::gaussian_task());
  return std::make_unique<DatasetSource<T>>(load_dataset(cfg, Split::kTrain));
}

template class DatasetSource<float>;
template class DatasetSource<double>;
template class SynthSource<float>;
template class SynthSource<double>;
template std::unique_ptr<training::DataSource<float>> make_train_source(const RunConfig&);
template std::unique_ptr<training::DataSource<double>> make_train_source(const RunConfig&);

}  // namespace cinn::app
