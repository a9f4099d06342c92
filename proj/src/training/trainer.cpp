// Copyright 2026 The cinn Authors
// SPDX-License-Identifier: Apache-2.0

#include "cinn/training/trainer.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "cinn/training/loss.hpp"

namespace cinn::training {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <typename T>
Trainer<T>::Trainer(Model<T>& model, TrainConfig cfg)
    : model_(model),
      cfg_(std::move(cfg)),
      adam_(AdamConfig{cfg_.lr, cfg_.beta1, cfg_.beta2, cfg_.adam_eps}),
      rng_(derive_rng(cfg_.seed, 1)) {
  cfg_.validate();
}

template <typename T>
StepStats Trainer<T>::step(const Batch<T>& batch) {
  const bool frozen = step_ < cfg_.freeze_h_steps;
  model_.conditioning().set_mode(frozen ? conditioning::EncoderMode::kFrozen : conditioning::EncoderMode::kJoint);

  const Tensor<T> x = add_noise(batch.x, static_cast<T>(cfg_.effective_sigma()), rng_);
  std::vector<Parameter<T>*> params = model_.parameters();
  Tape<T> tape;
  Var<T> cv = batch.c.ndim() == 0 ? Var<T>{} : tape.constant(batch.c);
  auto out = model_.forward(tape, tape.constant(x), cv, true);
  Var<T> nll = nll_loss<T>(out.parts, out.logdet);
  Var<T> loss = total_loss<T>(nll, params, static_cast<T>(cfg_.tau));

  for (Parameter<T>* p : params) p->zero_grad();
  tape.backward(loss);
  for (Parameter<T>* p : params) {
    if (p->trainable && !p->grad.all_finite()) throw NumericError("non-finite gradient for " + p->name);
  }
  adam_.step(params);
  model_.conditioning().invalidate();
  ++step_;

  StepStats s;
  s.step = step_;
  s.lr = adam_.config().lr;
  s.loss = static_cast<double>(loss.value().item());
  s.nll = static_cast<double>(nll.value().item());
  s.nll_per_dim = s.nll / static_cast<double>(model_.dim());
  update_schedule(s.loss);
  return s;
}

template <typename T>
void Trainer<T>::update_schedule(double loss) {
  schedule_.window.push_back(loss);
  if (schedule_.window.size() < cfg_.plateau_window) return;
  double mean = 0;
  for (double v : schedule_.window) mean += v;
  mean /= static_cast<double>(schedule_.window.size());
  schedule_.window.clear();
  if (!schedule_.has_best || mean < schedule_.best) {
    schedule_.best = mean;
    schedule_.has_best = true;
    schedule_.bad_evals = 0;
  } else if (++schedule_.bad_evals >= cfg_.plateau_patience) {
    adam_.set_lr(adam_.config().lr * cfg_.lr_decay);
    schedule_.bad_evals = 0;
  }
}

template <typename T>
FitResult Trainer<T>::fit(DataSource<T>& data, const FitOptions& opts) {
  FitResult result;
  std::ofstream log;
  if (!opts.log_path.empty()) {
    const bool fresh = step_ == 0 || !std::filesystem::exists(opts.log_path);
    log.open(opts.log_path, fresh ? std::ios::trunc : std::ios::app);
    if (!log) throw IoError("cannot open loss log " + opts.log_path);
    if (fresh) log << "step,lr,loss,nll_per_dim\n";
    log << std::setprecision(10);
  }
  while (step_ < cfg_.max_steps) {
    StepStats s;
    try {
      s = step(data.next(cfg_.batch_size, rng_));
    } catch (const NumericError& e) {
      result.status = FitStatus::kDiverged;
      result.message = e.what();
      break;
    }
    if (!result.initial_loss) result.initial_loss = s.loss;
    result.final_loss = s.loss;
    if (log) log << s.step << ',' << s.lr << ',' << s.loss << ',' << s.nll_per_dim << '\n';
    if (opts.on_step) opts.on_step(s);
    if (!opts.checkpoint_path.empty() && cfg_.checkpoint_every && step_ % cfg_.checkpoint_every == 0) {
      save_checkpoint(opts.checkpoint_path, *this);
    }
  }
  result.steps = step_;
  if (log) log.flush();
  if (result.status == FitStatus::kCompleted && !opts.checkpoint_path.empty()) save_checkpoint(opts.checkpoint_path, *this);
  return result;
}

template <typename T>
nlohmann::json Trainer<T>::state_json() const {
  std::vector<std::uint64_t> ts;
  for (const AdamState<T>& s : adam_.states()) ts.push_back(s.t);
  return nlohmann::json{{"step", step_},
                        {"lr", adam_.config().lr},
                        {"rng", rng_state(rng_)},
                        {"adam_t", ts},
                        {"schedule",
                         {{"window", schedule_.window},
                          {"best", schedule_.best},
                          {"has_best", schedule_.has_best},
                          {"bad_evals", schedule_.bad_evals}}}};
}

template <typename T>
void Trainer<T>::restore_state(const nlohmann::json& state) {
  step_ = state.at("step");
  adam_.set_lr(state.at("lr").get<double>());
  set_rng_state(rng_, state.at("rng").get<std::string>());
  const auto ts = state.at("adam_t").get<std::vector<std::uint64_t>>();
  adam_.states().resize(std::max(adam_.states().size(), ts.size()));
  for (std::size_t i = 0; i < ts.size(); ++i) adam_.states()[i].t = ts[i];
  const auto& sched = state.at("schedule");
  schedule_.window = sched.at("window").get<std::vector<double>>();
  schedule_.best = sched.at("best");
  schedule_.has_best = sched.at("has_best");
  schedule_.bad_evals = sched.at("bad_evals");
}

// ---- checkpoint I/O --------------------------------------------------------

namespace {

template <typename V>
void put(std::string& out, V v) {
  char bytes[sizeof v];
  std::memcpy(bytes, &v, sizeof v);
  out.append(bytes, sizeof v);
}

class Reader {
 public:
  explicit Reader(std::string data) : data_(std::move(data)) {}

  template <typename V>
  V get(const char* what) {
    V v;
    need(sizeof v, what);
    std::memcpy(&v, data_.data() + pos_, sizeof v);
    pos_ += sizeof v;
    return v;
  }
  std::string bytes(std::size_t n, const char* what) {
    need(n, what);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == data_.size(); }

 private:
  void need(std::size_t n, const char* what) {
    if (data_.size() - pos_ < n) {
      throw CheckpointError(CheckpointError::Kind::kCorruptHeader, std::string("checkpoint truncated while reading ") + what);
    }
  }
  std::string data_;
  std::size_t pos_ = 0;
};

template <typename T>
Tensor<float> to_float(const Tensor<T>& t) {
  return t.template cast<float>();
}

template <typename T>
CheckpointData model_tensors(Model<T>& model) {
  CheckpointData d;
  for (Parameter<T>* p : model.parameters()) d.tensors.emplace_back("param/" + p->name, to_float(p->value));
  for (auto& [name, t] : model.buffers()) d.tensors.emplace_back("buffer/" + name, to_float(*t));
  return d;
}

template <typename T>
std::string precision_name() {
  return sizeof(T) == sizeof(float) ? "float32" : "float64";
}

}  // namespace

const Tensor<float>& CheckpointData::tensor(const std::string& name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return t;
  throw CheckpointError(CheckpointError::Kind::kShapeMismatch, "checkpoint has no tensor '" + name + "'");
}

bool CheckpointData::has(const std::string& name) const {
  for (const auto& entry : tensors)
    if (entry.first == name) return true;
  return false;
}

void write_checkpoint(const std::string& path, const CheckpointData& data) {
  std::string out = "CINN";
  put<std::uint32_t>(out, kCheckpointVersion);
  const std::string header = data.header.dump();
  put<std::uint64_t>(out, header.size());
  out += header;
  put<std::uint32_t>(out, static_cast<std::uint32_t>(data.tensors.size()));
  for (const auto& [name, t] : data.tensors) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.ndim()));
    for (std::size_t d : t.shape()) put<std::uint64_t>(out, d);
    out.append(reinterpret_cast<const char*>(t.ptr()), t.size() * sizeof(float));
  }

  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open " + tmp + " for writing");
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    f.flush();
    if (!f) throw IoError("failed writing " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move " + tmp + " to " + path + ": " + ec.message());
}

CheckpointData read_checkpoint(const std::string& path) {
  using Kind = CheckpointError::Kind;
  std::ifstream f(path, std::ios::binary);
  if (!std::filesystem::is_regular_file(path) || !f) throw CheckpointError(Kind::kNotFound, "checkpoint not found: " + path);
  std::ostringstream buf;
  buf << f.rdbuf();
  Reader r(buf.str());
  if (r.bytes(4, "magic") != "CINN") throw CheckpointError(Kind::kCorruptHeader, "bad magic bytes in " + path);
  const auto version = r.get<std::uint32_t>("version");
  if (version != kCheckpointVersion) {
    throw CheckpointError(Kind::kVersionMismatch, "checkpoint format version " + std::to_string(version) +
                                                      ", expected " + std::to_string(kCheckpointVersion));
  }
  const auto header_len = r.get<std::uint64_t>("header length");
  CheckpointData d;
  try {
    d.header = nlohmann::json::parse(r.bytes(header_len, "header"));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(Kind::kCorruptHeader, std::string("unreadable checkpoint header: ") + e.what());
  }
  if (!d.header.is_object() || !d.header.contains("model")) {
    throw CheckpointError(Kind::kCorruptHeader, "checkpoint header lacks a model description");
  }
  const auto count = r.get<std::uint32_t>("tensor count");
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.bytes(r.get<std::uint32_t>("name length"), "tensor name");
    const auto rank = r.get<std::uint32_t>("rank");
    Shape shape(rank);
    for (auto& e : shape) e = r.get<std::uint64_t>("extent");
    Tensor<float> t(shape);
    const std::string raw = r.bytes(t.size() * sizeof(float), "tensor values");
    std::memcpy(t.ptr(), raw.data(), raw.size());
    d.tensors.emplace_back(std::move(name), std::move(t));
  }
  if (!r.done()) throw CheckpointError(Kind::kCorruptHeader, "trailing bytes after checkpoint payload");
  return d;
}

template <typename T>
void save_model(const std::string& path, Model<T>& model, const TrainConfig& cfg) {
  CheckpointData d = model_tensors(model);
  d.header = {{"model", model.spec()}, {"config", cfg}, {"precision", precision_name<T>()}, {"state", nullptr}};
  write_checkpoint(path, d);
}

template <typename T>
void save_checkpoint(const std::string& path, Trainer<T>& trainer) {
  CheckpointData d = model_tensors(trainer.model());
  std::vector<Parameter<T>*> params = trainer.model().parameters();
  const auto& states = trainer.optimizer().states();
  for (std::size_t i = 0; i < params.size() && i < states.size(); ++i) {
    if (states[i].m.shape() != params[i]->value.shape()) continue;
    d.tensors.emplace_back("adam_m/" + params[i]->name, to_float(states[i].m));
    d.tensors.emplace_back("adam_v/" + params[i]->name, to_float(states[i].v));
  }
  d.header = {{"model", trainer.model().spec()},
              {"config", trainer.config()},
              {"precision", precision_name<T>()},
              {"state", trainer.state_json()}};
  write_checkpoint(path, d);
}

template <typename T>
void load_parameters(const CheckpointData& data, Model<T>& model) {
  auto copy_into = [&](const std::string& name, Tensor<T>& dst) {
    const Tensor<float>& src = data.tensor(name);
    if (src.shape() != dst.shape()) {
      throw CheckpointError(CheckpointError::Kind::kShapeMismatch, "tensor '" + name + "' has shape " +
                                                                       shape_str(src.shape()) + ", model expects " +
                                                                       shape_str(dst.shape()));
    }
    dst = src.template cast<T>();
  };
  for (Parameter<T>* p : model.parameters()) copy_into("param/" + p->name, p->value);
  for (auto& [name, t] : model.buffers()) copy_into("buffer/" + name, *t);
  model.conditioning().invalidate();
}

template <typename T>
void restore_trainer(const CheckpointData& data, Trainer<T>& trainer) {
  load_parameters(data, trainer.model());
  const nlohmann::json& state = data.header.at("state");
  if (state.is_null()) throw CheckpointError(CheckpointError::Kind::kCorruptHeader, "checkpoint holds no training state");
  std::vector<Parameter<T>*> params = trainer.model().parameters();
  auto& states = trainer.optimizer().states();
  states.assign(params.size(), AdamState<T>{});
  for (std::size_t i = 0; i < params.size(); ++i) {
    const std::string m = "adam_m/" + params[i]->name, v = "adam_v/" + params[i]->name;
    if (!data.has(m)) continue;
    states[i].m = data.tensor(m).template cast<T>();
    states[i].v = data.tensor(v).template cast<T>();
    if (states[i].m.shape() != params[i]->value.shape()) {
      throw CheckpointError(CheckpointError::Kind::kShapeMismatch, "optimizer state shape mismatch for " + params[i]->name);
    }
  }
  try {
    trainer.restore_state(state);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(CheckpointError::Kind::kCorruptHeader, std::string("bad training state: ") + e.what());
  }
}

ModelSpec model_spec_from(const CheckpointData& data) {
  try {
    return data.header.at("model").get<ModelSpec>();
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(CheckpointError::Kind::kCorruptHeader, std::string("bad model description: ") + e.what());
  }
}

TrainConfig train_config_from(const CheckpointData& data) {
  try {
    return data.header.at("config").get<TrainConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(CheckpointError::Kind::kCorruptHeader, std::string("bad training config: ") + e.what());
  }
}

#define CINN_INSTANTIATE(T)                                                     \
  template class Trainer<T>;                                                    \
  template void save_checkpoint<T>(const std::string&, Trainer<T>&);            \
  template void save_model<T>(const std::string&, Model<T>&, const TrainConfig&); \
  template void load_parameters<T>(const CheckpointData&, Model<T>&);          \
  template void restore_trainer<T>(const CheckpointData&, Trainer<T>&);
CINN_INSTANTIATE(float)
CINN_INSTANTIATE(double)
#undef CINN_INSTANTIATE

}  // namespace cinn::training
