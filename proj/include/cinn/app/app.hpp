// Copyright 2026 The cinn Authors
// SPDX-License-Identifier: Apache-2.0
//
// Task presets, run configuration and data plumbing shared by the command
// line tool and the acceptance suite.

#pragma once

#include <memory>
#include <string>
#include <vector>

#include "cinn/datasets/datasets.hpp"
#include "cinn/training/trainer.hpp"

namespace cinn::app {

inline constexpr const char* kDataRootEnv = "CINN_DATA_ROOT";

struct Architecture {
  std::size_t blocks = 24;         // mnist/synth: coupling blocks; toyshapes: per resolution stage
  std::size_t hidden = 512;        // subnetwork width (channels for conv subnetworks)
  std::size_t hidden_layers = 1;
  std::size_t cond_width = 16;     // toyshapes: conditioning feature channels
  std::size_t image_size = 16;     // toyshapes: ab side; L is twice that

  friend bool operator==(const Architecture&, const Architecture&) = default;
};

struct DataConfig {
  std::string root;                // empty: $CINN_DATA_ROOT, then the build default
  std::size_t train_items = 0;     // mnist subset / toyshapes corpus size; 0 = all (mnist)
  std::size_t eval_items = 1000;
  std::uint64_t seed = 1;          // synthetic corpora

  friend bool operator==(const DataConfig&, const DataConfig&) = default;
};

struct RunConfig {
  std::string task;  // mnist | synth | toyshapes
  Architecture arch;
  training::TrainConfig train;
  DataConfig data;
  std::string output_dir;

  // Throws ConfigError for unknown tasks and inconsistent values.
  void validate() const;
  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

const std::vector<std::string>& task_names();
// Throws ConfigError for unknown names.
RunConfig preset(const std::string& task);

void to_json(nlohmann::json& j, const Architecture& a);
void to_json(nlohmann::json& j, const DataConfig& d);
void to_json(nlohmann::json& j, const RunConfig& r);
// "task" selects the preset; every other section overrides it key by key.
// Unknown keys anywhere raise ConfigError.
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path);

// Flag > config > $CINN_DATA_ROOT > compiled default.
std::string resolve_data_root(const RunConfig& cfg);

// Architecture for the task with ablations applied. meta records the task,
// class count and normalization.
training::ModelSpec build_model_spec(const RunConfig& cfg);

// An in-memory evaluation or training set for a task. x matches the model
// input ([N, ...input_shape]); c is the condition batch; labels are class
// indices (mnist, synth) and empty for toyshapes.
struct Dataset {
  Tensor<float> x;
  Tensor<float> c;
  std::vector<int> labels;
  Tensor<float> mask;  // toyshapes: shape pixels of the target
  datasets::Normalization x_norm;
  std::size_t size() const { return x.ndim() ? x.dim(0) : 0; }
};

enum class Split { kTrain, kEval };
Dataset load_dataset(const RunConfig& cfg, Split split);

// Draws random rows of a fixed dataset.
template <typename T>
class DatasetSource : public training::DataSource<T> {
 public:
  explicit DatasetSource(Dataset data) : data_(std::move(data)) {}
  training::Batch<T> next(std::size_t batch_size, Rng& rng) override;

 private:
  Dataset data_;
};

// Fresh exact samples from the synthetic density at every step.
template <typename T>
class SynthSource : public training::DataSource<T> {
 public:
  explicit SynthSource(datasets::SyntheticCondDensity density) : density_(std::move(density)) {}
  training::Batch<T> next(std::size_t batch_size, Rng& rng) override;

 private:
  datasets::SyntheticCondDensity density_;
};

template <typename T>
std::unique_ptr<training::DataSource<T>> make_train_source(const RunConfig& cfg);

// Condition batch for explicit class labels (mnist, synth).
Tensor<float> label_conditions(const RunConfig& cfg, std::span<const int> labels);

}  // namespace cinn::app
