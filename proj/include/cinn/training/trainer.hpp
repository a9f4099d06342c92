// Copyright 2026 The cinn Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <deque>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cinn/numerics/adam.hpp"
#include "cinn/training/config.hpp"
#include "cinn/training/model.hpp"

namespace cinn::training {

template <typename T>
struct Batch {
  Tensor<T> x;  // [N, ...input_shape]
  Tensor<T> c;  // [N, ...condition shape]
};

template <typename T>
class DataSource {
 public:
  virtual ~DataSource() = default;
  virtual Batch<T> next(std::size_t batch_size, Rng& rng) = 0;
};

struct StepStats {
  std::size_t step = 0;  // 1-based index of the step just taken
  double lr = 0;
  double loss = 0;         // full objective including weight decay
  double nll = 0;          // batch mean of ||z||^2/2 - logdet
  double nll_per_dim = 0;  // nll / D
};

enum class FitStatus { kCompleted, kDiverged };

struct FitResult {
  FitStatus status = FitStatus::kCompleted;
  std::size_t steps = 0;
  std::optional<double> initial_loss;
  std::optional<double> final_loss;
  std::string message;
};

struct FitOptions {
  std::string log_path;         // CSV (step, lr, loss, nll_per_dim); empty disables
  std::string checkpoint_path;  // empty disables
  std::function<void(const StepStats&)> on_step;
};

template <typename T>
class Trainer {
 public:
  Trainer(Model<T>& model, TrainConfig cfg);

  // One optimization step on a fresh noisy copy of the batch. A non-finite
  // loss or gradient throws NumericError before any parameter changes.
  StepStats step(const Batch<T>& batch);

  // Runs until max_steps. Divergence stops the run with kDiverged; the last
  // checkpoint written (if any) is left in place.
  FitResult fit(DataSource<T>& data, const FitOptions& opts = {});

  Model<T>& model() { return model_; }
  const TrainConfig& config() const { return cfg_; }
  std::size_t steps_done() const { return step_; }
  double lr() const { return adam_.config().lr; }
  Rng& rng() { return rng_; }
  Adam<T>& optimizer() { return adam_; }

  // Plateau schedule state.
  struct Schedule {
    std::vector<double> window;  // losses since the last evaluation
    double best = 0;
    bool has_best = false;
    std::size_t bad_evals = 0;
  };
  const Schedule& schedule() const { return schedule_; }

  nlohmann::json state_json() const;
  void restore_state(const nlohmann::json& state);

 private:
  void update_schedule(double loss);

  Model<T>& model_;
  TrainConfig cfg_;
  Adam<T> adam_;
  Rng rng_;
  std::size_t step_ = 0;
  Schedule schedule_;
};

// Checkpoint layout (little endian):
//   "CINN" | u32 version | u64 header length | header JSON (UTF-8)
//   u32 tensor count | per tensor: u32 name length, name, u32 rank,
//   u64 extents..., float32 values
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointData {
  nlohmann::json header;
  std::vector<std::pair<std::string, Tensor<float>>> tensors;

  const Tensor<float>& tensor(const std::string& name) const;
  bool has(const std::string& name) const;
};

// Writes atomically (temp file + rename). Raises IoError on write failure.
template <typename T>
void save_checkpoint(const std::string& path, Trainer<T>& trainer);
// Model-only checkpoint (no optimizer state).
template <typename T>
void save_model(const std::string& path, Model<T>& model, const TrainConfig& cfg);

void write_checkpoint(const std::string& path, const CheckpointData& data);
// Throws CheckpointError with kind kNotFound, kVersionMismatch or
// kCorruptHeader.
CheckpointData read_checkpoint(const std::string& path);

// Copies parameters and buffers; kShapeMismatch when a tensor is missing or
// has the wrong shape.
template <typename T>
void load_parameters(const CheckpointData& data, Model<T>& model);

// Parameters, buffers, optimizer moments, schedule, step counter and RNG.
template <typename T>
void restore_trainer(const CheckpointData& data, Trainer<T>& trainer);

ModelSpec model_spec_from(const CheckpointData& data);
TrainConfig train_config_from(const CheckpointData& data);

}  // namespace cinn::training
