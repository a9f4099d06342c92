// Copyright 2026 The cinn Authors
// SPDX-License-Identifier: Apache-2.0

#include "cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "cinn/app/app.hpp"
#include "cinn/evaluation/evaluation.hpp"

namespace cinn::cli {

namespace fs = std::filesystem;
using app::RunConfig;
using nlohmann::json;

namespace {

class DivergedError : public Error {
 public:
  using Error::Error;
};

// ---- small helpers ---------------------------------------------------------

std::vector<int> parse_int_list(const std::string& s, const char* what) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t used = 0;
    int v = 0;
    try {
      v = std::stoi(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size()) throw ConfigError(std::string("bad ") + what + " entry '" + item + "'");
    out.push_back(v);
  }
  return out;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir + ": " + ec.message());
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path);
  f << text;
  if (!f) throw IoError("short write to " + path);
}

// Row-major 8-bit canvas for sample sheets.
struct Canvas {
  std::size_t w, h;
  int ch;
  std::vector<std::uint8_t> px;
  Canvas(std::size_t w_, std::size_t h_, int ch_) : w(w_), h(h_), ch(ch_), px(w_ * h_ * ch_, 255) {}
  void set(std::size_t x, std::size_t y, const datasets::Color& rgb) {
    for (int c = 0; c < ch; ++c)
      px[(y * w + x) * ch + c] = static_cast<std::uint8_t>(std::lround(std::clamp(rgb[c], 0.0, 1.0) * 255));
  }
  void save(const std::string& path) const { datasets::write_png(path, px, w, h, ch); }
};

constexpr std::size_t kPad = 2;

// Renders item i of an image-task batch into a tile at (ox, oy).
// mnist: x [N, 784] normalized gray. toyshapes: x = ab [N, 2, s, s], c = L.
void draw_item(Canvas& cv, std::size_t ox, std::size_t oy, const std::string& task, const Tensor<float>& x,
               const Tensor<float>& c, std::size_t i) {
  if (task == "mnist") {
    for (std::size_t y = 0; y < 28; ++y)
      for (std::size_t xx = 0; xx < 28; ++xx) {
        const double v = x[i * 784 + y * 28 + xx] + 0.5;
        cv.set(ox + xx, oy + y, {v, v, v});
      }
    return;
  }
  const std::size_t s = x.dim(2), hs = c.dim(2);
  for (std::size_t y = 0; y < hs; ++y)
    for (std::size_t xx = 0; xx < hs; ++xx) {
      const std::size_t ay = y * s / hs, ax = xx * s / hs;
      const double L = c[(i * hs + y) * hs + xx] * 50.0 + 50.0;
      const double a = x[((i * 2) * s + ay) * s + ax] * 128.0, b = x[((i * 2 + 1) * s + ay) * s + ax] * 128.0;
      cv.set(ox + xx, oy + y, datasets::lab_to_rgb({L, a, b}));
    }
}

std::size_t tile_side(const std::string& task, const Tensor<float>& c) { return task == "mnist" ? 28 : c.dim(2); }

// Sheet with `rows` x `cols` items, item (r, j) at index r * cols + j.
void save_sheet(const std::string& path, const std::string& task, const Tensor<float>& x, const Tensor<float>& c,
                std::size_t rows, std::size_t cols) {
  const std::size_t t = tile_side(task, c);
  Canvas cv(cols * (t + kPad) + kPad, rows * (t + kPad) + kPad, task == "mnist" ? 1 : 3);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < cols; ++j)
      draw_item(cv, kPad + j * (t + kPad), kPad + r * (t + kPad), task, x, c, r * cols + j);
  cv.save(path);
}

void save_single(const std::string& path, const std::string& task, const Tensor<float>& x, const Tensor<float>& c,
                 std::size_t i) {
  const std::size_t t = tile_side(task, c);
  Canvas cv(t, t, task == "mnist" ? 1 : 3);
  draw_item(cv, 0, 0, task, x, c, i);
  cv.save(path);
}

// ---- checkpoint loading ----------------------------------------------------

struct Loaded {
  training::CheckpointData data;
  training::ModelSpec spec;
  training::TrainConfig train;
  RunConfig run;
};

Loaded open_checkpoint(const std::string& path, const std::string& data_root) {
  Loaded l;
  l.data = training::read_checkpoint(path);
  l.spec = training::model_spec_from(l.data);
  l.train = training::train_config_from(l.data);
  if (!l.spec.meta.contains("run"))
    throw CheckpointError(CheckpointError::Kind::kCorruptHeader, "checkpoint has no run configuration");
  try {
    l.run = app::run_config_from_json(l.spec.meta.at("run"));
  } catch (const ConfigError& e) {
    throw CheckpointError(CheckpointError::Kind::kCorruptHeader, std::string("bad run configuration: ") + e.what());
  }
  if (!data_root.empty()) l.run.data.root = data_root;
  return l;
}

template <typename T>
std::unique_ptr<training::Model<T>> make_model(const Loaded& l) {
  auto m = std::make_unique<training::Model<T>>(l.spec);
  training::load_parameters(l.data, *m);
  return m;
}

template <typename T>
Tensor<T> to(const Tensor<float>& t) {
  if constexpr (std::is_same_v<T, float>) return t;
  else return t.template cast<T>();
}

Tensor<float> to_float(const Tensor<float>& t) { return t; }
Tensor<float> to_float(const Tensor<double>& t) { return t.cast<float>(); }

// Runs fn<float> or fn<double> according to the checkpoint precision.
template <typename F>
int dispatch(const std::string& precision, F&& fn) {
  if (precision == "float64") return fn.template operator()<double>();
  return fn.template operator()<float>();
}

json run_header(const RunConfig& cfg) {
  json h;
  h["config"] = cfg;
  h["version"] = "cinn 1.0";
  return h;
}

// ---- commands --------------------------------------------------------------

struct TrainArgs {
  std::string config, preset, out, data_root, resume, precision;
  std::optional<std::size_t> steps, batch, blocks, hidden, items, checkpoint_every, freeze_h;
  std::optional<double> lr, sigma, tau;
  std::optional<std::uint64_t> seed;
  bool no_clamp = false, no_noise = false, no_permute = false, no_haar = false, no_init = false;
};

RunConfig effective_config(const TrainArgs& a) {
  if (a.config.empty() == a.preset.empty()) throw ConfigError("give exactly one of --config or --preset");
  RunConfig cfg = a.config.empty() ? app::preset(a.preset) : app::load_run_config(a.config);
  if (a.steps) cfg.train.max_steps = *a.steps;
  if (a.batch) cfg.train.batch_size = *a.batch;
  if (a.lr) cfg.train.lr = *a.lr;
  if (a.sigma) cfg.train.sigma_noise = *a.sigma;
  if (a.tau) cfg.train.tau = *a.tau;
  if (a.seed) cfg.train.seed = *a.seed;
  if (a.checkpoint_every) cfg.train.checkpoint_every = *a.checkpoint_every;
  if (a.freeze_h) cfg.train.freeze_h_steps = *a.freeze_h;
  if (!a.precision.empty()) cfg.train.precision = a.precision;
  if (a.blocks) cfg.arch.blocks = *a.blocks;
  if (a.hidden) cfg.arch.hidden = *a.hidden;
  if (a.items) cfg.data.train_items = *a.items;
  if (!a.data_root.empty()) cfg.data.root = a.data_root;
  if (!a.out.empty()) cfg.output_dir = a.out;
  if (a.no_clamp) cfg.train.ablations.clamp = false;
  if (a.no_noise) cfg.train.ablations.noise = false;
  if (a.no_permute) cfg.train.ablations.permute = false;
  if (a.no_haar) cfg.train.ablations.haar = false;
  if (a.no_init) cfg.train.ablations.init = false;
  cfg.validate();
  return cfg;
}

int cmd_train(const TrainArgs& a, std::ostream& out) {
  const RunConfig cfg = effective_config(a);
  training::ModelSpec spec = app::build_model_spec(cfg);
  spec.meta["run"] = cfg;
  ensure_dir(cfg.output_dir);
  const json effective = cfg;
  write_text(cfg.output_dir + "/effective_config.json", effective.dump(2) + "\n");
  out << "effective config:\n" << effective.dump(2) << "\n";

  return dispatch(cfg.train.precision, [&]<typename T>() {
    training::Model<T> model(spec);
    Rng init_rng = derive_rng(cfg.train.seed, 0);
    model.initialize(init_rng, cfg.train.ablations.init);
    training::Trainer<T> trainer(model, cfg.train);
    if (!a.resume.empty()) {
      const auto data = training::read_checkpoint(a.resume);
      training::restore_trainer(data, trainer);
      out << "resumed at step " << trainer.steps_done() << "\n";
    }
    auto source = app::make_train_source<T>(cfg);
    training::FitOptions opts;
    opts.log_path = cfg.output_dir + "/loss.csv";
    opts.checkpoint_path = cfg.output_dir + "/model.ckpt";
    const std::size_t every = std::max<std::size_t>(1, cfg.train.max_steps / 20);
    opts.on_step = [&](const training::StepStats& s) {
      if (s.step % every == 0 || s.step == cfg.train.max_steps)
        out << "step " << s.step << " lr " << s.lr << " loss " << s.loss << " nll/dim " << s.nll_per_dim << "\n";
    };
    const auto result = trainer.fit(*source, opts);
    if (result.status == training::FitStatus::kDiverged) {
      out << "diverged after " << result.steps << " steps: " << result.message << "\n";
      throw DivergedError("training diverged: " + result.message);
    }
    out << "wrote " << opts.checkpoint_path << " (checksum " << model.checksum() << ")\n";
    return kOk;
  });
}

struct SampleArgs {
  std::string checkpoint, cond, out = "samples", data_root;
  std::size_t n = 1, cond_items = 4;
  double beta = 1.0;
  std::uint64_t seed = 0;
  bool shared_z = false;
};

// Condition batch for sampling: labels for class tasks, the first
// `cond_items` evaluation L images for toyshapes.
Tensor<float> sample_conditions(const RunConfig& run, const std::string& cond, std::size_t cond_items,
                                std::vector<int>* labels) {
  if (run.task == "toyshapes") {
    RunConfig r = run;
    r.data.eval_items = cond_items;
    return app::load_dataset(r, app::Split::kEval).c;
  }
  const std::size_t classes = run.task == "mnist" ? 10 : datasets::gaussian_task().n_conditions();
  std::vector<int> l = parse_int_list(cond, "condition");
  if (cond.empty())
    for (std::size_t k = 0; k < classes; ++k) l.push_back(static_cast<int>(k));
  for (int v : l)
    if (v < 0 || static_cast<std::size_t>(v) >= classes)
      throw ConfigError("condition " + std::to_string(v) + " out of range for task " + run.task);
  if (l.empty()) throw ConfigError("empty condition list");
  *labels = l;
  return app::label_conditions(run, l);
}

int cmd_sample(const SampleArgs& a, std::ostream& out) {
  if (a.beta < 0) throw ConfigError("--beta must be >= 0");
  const Loaded l = open_checkpoint(a.checkpoint, a.data_root);
  std::vector<int> labels;
  const Tensor<float> c = sample_conditions(l.run, a.cond, a.cond_items, &labels);
  if (a.n == 0) {
    out << "n = 0: nothing to sample\n";
    return kOk;
  }
  return dispatch(l.train.precision, [&]<typename T>() {
    auto model = make_model<T>(l);
    const std::size_t cols = c.dim(0), rows = a.n;
    Rng rng(a.seed);
    Tensor<float> x;
    if (a.shared_z) {
      x = to_float(evaluation::sample_grid(*model, to<T>(c), rows, a.beta, rng));
    } else {
      std::vector<std::size_t> idx;
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < cols; ++j) idx.push_back(j);
      x = to_float(evaluation::temperature_sample(*model, to<T>(gather_rows(c, std::span<const std::size_t>(idx))),
                                                  a.beta, rng));
    }
    std::vector<std::size_t> cidx;
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t j = 0; j < cols; ++j) cidx.push_back(j);
    const Tensor<float> cc = gather_rows(c, std::span<const std::size_t>(cidx));

    ensure_dir(a.out);
    datasets::write_f32(a.out + "/samples.f32", x.data());
    json header = run_header(l.run);
    header["command"] = "sample";
    header["shape"] = x.shape();
    header["rows"] = rows;
    header["cols"] = cols;
    header["beta"] = a.beta;
    header["seed"] = a.seed;
    header["shared_z"] = a.shared_z;
    header["labels"] = labels;
    header["model_checksum"] = model->checksum();
    write_text(a.out + "/samples.json", header.dump(2) + "\n");
    if (l.run.task == "synth") {
      std::ofstream csv(a.out + "/samples.csv");
      csv << "row,condition,x0,x1\n";
      for (std::size_t i = 0; i < x.dim(0); ++i)
        csv << i / cols << ',' << labels[i % cols] << ',' << x[2 * i] << ',' << x[2 * i + 1] << '\n';
      if (!csv) throw IoError("cannot write samples.csv");
    } else {
      save_sheet(a.out + "/samples.png", l.run.task, x, cc, rows, cols);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < cols; ++j)
          save_single(a.out + "/sample_" + std::to_string(r) + "_" + std::to_string(j) + ".png", l.run.task, x, cc,
                      r * cols + j);
    }
    out << "wrote " << x.dim(0) << " samples to " << a.out << "\n";
    return kOk;
  });
}

struct EncodeArgs {
  std::string checkpoint, out = "latents", data_root, split = "eval";
  std::size_t items = 100;
};

app::Dataset dataset_for(RunConfig run, const std::string& split, std::size_t items) {
  if (split != "train" && split != "eval") throw ConfigError("--split must be train or eval");
  if (items == 0) throw ConfigError("--items must be >= 1");
  if (split == "train") {
    run.data.train_items = items;
    return app::load_dataset(run, app::Split::kTrain);
  }
  run.data.eval_items = items;
  return app::load_dataset(run, app::Split::kEval);
}

int cmd_encode(const EncodeArgs& a, std::ostream& out) {
  const Loaded l = open_checkpoint(a.checkpoint, a.data_root);
  const app::Dataset d = dataset_for(l.run, a.split, a.items);
  return dispatch(l.train.precision, [&]<typename T>() {
    auto model = make_model<T>(l);
    Tensor<T> logdet;
    const Tensor<float> z = to_float(model->encode(to<T>(d.x), to<T>(d.c), &logdet).flatten());
    ensure_dir(a.out);
    datasets::write_f32(a.out + "/latents.f32", z.data());
    json header = run_header(l.run);
    header["command"] = "encode";
    header["shape"] = z.shape();
    header["split"] = a.split;
    header["labels"] = d.labels;
    header["model_checksum"] = model->checksum();
    write_text(a.out + "/latents.json", header.dump(2) + "\n");
    out << "encoded " << z.dim(0) << " items (D = " << z.dim(1) << ") to " << a.out << "\n";
    return kOk;
  });
}

struct TransferArgs {
  std::string checkpoint, targets, out = "transfer", data_root;
  std::size_t index = 0;
};

int cmd_transfer(const TransferArgs& a, std::ostream& out) {
  const Loaded l = open_checkpoint(a.checkpoint, a.data_root);
  const bool image_cond = l.run.task == "toyshapes";
  const std::size_t pool = image_cond ? std::max<std::size_t>(a.index + 1, 16) : a.index + 1;
  const app::Dataset d = dataset_for(l.run, "eval", pool);
  if (a.index >= d.size()) throw DataError("--index beyond the evaluation set");
  std::vector<int> targets = parse_int_list(a.targets, "target");
  if (a.targets.empty()) {
    const int n = image_cond ? static_cast<int>(d.size()) : static_cast<int>(d.c.dim(1));
    for (int k = 0; k < n; ++k) targets.push_back(k);
  }
  std::vector<std::size_t> src(targets.size(), a.index);
  Tensor<float> c_hat;
  if (image_cond) {
    std::vector<std::size_t> t;
    for (int v : targets) {
      if (v < 0 || static_cast<std::size_t>(v) >= d.size()) throw ConfigError("target item out of range");
      t.push_back(static_cast<std::size_t>(v));
    }
    c_hat = gather_rows(d.c, std::span<const std::size_t>(t));
  } else {
    for (int v : targets)
      if (v < 0 || static_cast<std::size_t>(v) >= d.c.dim(1)) throw ConfigError("target class out of range");
    c_hat = app::label_conditions(l.run, targets);
  }
  const Tensor<float> x = gather_rows(d.x, std::span<const std::size_t>(src));
  const Tensor<float> c = gather_rows(d.c, std::span<const std::size_t>(src));
  return dispatch(l.train.precision, [&]<typename T>() {
    auto model = make_model<T>(l);
    const Tensor<float> xh = to_float(evaluation::style_transfer(*model, to<T>(x), to<T>(c), to<T>(c_hat)));
    ensure_dir(a.out);
    datasets::write_f32(a.out + "/transfer.f32", xh.data());
    json header = run_header(l.run);
    header["command"] = "transfer";
    header["index"] = a.index;
    header["targets"] = targets;
    header["shape"] = xh.shape();
    write_text(a.out + "/transfer.json", header.dump(2) + "\n");
    if (l.run.task != "synth") {
      for (std::size_t i = 0; i < targets.size(); ++i)
        save_single(a.out + "/transfer_" + std::to_string(targets[i]) + ".png", l.run.task, xh, c_hat, i);
      save_single(a.out + "/input.png", l.run.task, x, c, 0);
    }
    out << "wrote " << targets.size() << " transfers to " << a.out << "\n";
    return kOk;
  });
}

struct EvalArgs {
  std::string checkpoint, metrics, out = "report.json", data_root;
  std::size_t k = 8, items = 0;
  std::uint64_t seed = 0;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  const Loaded l = open_checkpoint(a.checkpoint, a.data_root);
  const bool colorization = l.run.task == "toyshapes";
  std::vector<std::string> metrics;
  {
    std::stringstream ss(a.metrics.empty() ? (colorization ? "nll,mse,variance" : "nll") : a.metrics);
    std::string m;
    while (std::getline(ss, m, ','))
      if (!m.empty()) metrics.push_back(m);
  }
  for (const auto& m : metrics) {
    if (m != "nll" && m != "mse" && m != "variance") throw ConfigError("unknown metric '" + m + "'");
    if (m != "nll" && !colorization)
      throw UnsupportedMetricError("metric '" + m + "' needs a colorization task; " + l.run.task + " has no ground-truth ambiguity protocol");
  }
  if (a.k == 0) throw ConfigError("-k must be >= 1");
  const auto has = [&](const char* m) { return std::find(metrics.begin(), metrics.end(), m) != metrics.end(); };
  if (has("variance") && a.k < 2) throw ConfigError("variance needs -k >= 2");
  RunConfig run = l.run;
  if (a.items) run.data.eval_items = a.items;
  const app::Dataset d = app::load_dataset(run, app::Split::kEval);

  return dispatch(l.train.precision, [&]<typename T>() {
    auto model = make_model<T>(l);
    evaluation::EvalReport report;
    report.seed = a.seed;
    report.model_checksum = model->checksum();
    report.n_samples = d.size();
    report.k = a.k;
    report.units = colorization ? "normalized ab (ab / 128)" : "normalized data units";
    if (has("nll")) {
      const auto s = evaluation::evaluate_likelihood(*model, to<T>(d.x), to<T>(d.c));
      report.nll_per_dim = s.nll_per_dim;
      report.bits_per_dim = s.bits_per_dim;
    }
    if (has("mse") || has("variance")) {
      std::vector<Tensor<T>> samples;
      Rng rng(a.seed);
      for (std::size_t k = 0; k < a.k; ++k) samples.push_back(evaluation::temperature_sample(*model, to<T>(d.c), 1.0, rng));
      if (has("mse")) report.best_of_k_mse = evaluation::best_of_k_mse<T>(to<T>(d.x), samples);
      if (has("variance")) {
        const auto v = evaluation::sample_variance<T>(samples);
        report.pixel_variance = v.value;
        report.no_diversity = v.no_diversity;
      }
    }
    json j = evaluation::to_json(report);
    j["metrics"] = metrics;
    j["config"] = run;
    ensure_dir(fs::path(a.out).parent_path().empty() ? "." : fs::path(a.out).parent_path().string());
    write_text(a.out, j.dump(2) + "\n");
    out << j.dump(2) << "\n";
    return kOk;
  });
}

struct PcaArgs {
  std::string checkpoint, out = "pca", data_root;
  std::size_t items = 1000, components = 4, steps = 7;
  double range = 2.0;
};

int cmd_pca(const PcaArgs& a, std::ostream& out) {
  if (a.components == 0 || a.steps < 2) throw ConfigError("--components >= 1 and --steps >= 2 required");
  const Loaded l = open_checkpoint(a.checkpoint, a.data_root);
  const app::Dataset d = dataset_for(l.run, "eval", a.items);
  return dispatch(l.train.precision, [&]<typename T>() {
    auto model = make_model<T>(l);
    // Latents of clean data: no noise augmentation at this point.
    const Tensor<double> z = model->encode(to<T>(d.x), to<T>(d.c)).flatten().template cast<double>();
    const evaluation::Pca pca = evaluation::latent_pca(z);
    const std::size_t k = std::min(a.components, pca.components.size());
    ensure_dir(a.out);
    json j = run_header(l.run);
    j["command"] = "pca";
    j["explained_variance"] = std::vector<double>(pca.explained_variance.begin(), pca.explained_variance.begin() + k);
    j["total_variance"] = pca.total_variance;
    j["items"] = d.size();
    // Walk each component from -range to +range standard deviations around
    // the first item's code, decoded under the first item's condition.
    const Tensor<double> base = pca.project(take_rows(z, 0, 1), k);
    Tensor<double> coeffs({k * a.steps, k});
    for (std::size_t c = 0; c < k; ++c)
      for (std::size_t s = 0; s < a.steps; ++s) {
        for (std::size_t q = 0; q < k; ++q) coeffs[(c * a.steps + s) * k + q] = base[q];
        const double t = -a.range + 2 * a.range * static_cast<double>(s) / static_cast<double>(a.steps - 1);
        coeffs[(c * a.steps + s) * k + c] += t * std::sqrt(pca.explained_variance[c]);
      }
    // Components beyond k keep the first item's residual.
    Tensor<double> walk = pca.reconstruct(coeffs);
    const Tensor<double> residual = [&] {
      Tensor<double> r = take_rows(z, 0, 1);
      const Tensor<double> back = pca.reconstruct(base);
      for (std::size_t i = 0; i < r.size(); ++i) r[i] -= back[i];
      return r;
    }();
    const std::size_t dim = z.dim(1);
    for (std::size_t i = 0; i < walk.dim(0); ++i)
      for (std::size_t q = 0; q < dim; ++q) walk[i * dim + q] += residual[q];
    std::vector<std::size_t> first(walk.dim(0), 0);
    const Tensor<float> cc = gather_rows(d.c, std::span<const std::size_t>(first));
    const Tensor<float> x = to_float(model->decode_flat(to<T>(walk.cast<float>()), to<T>(cc)));
    datasets::write_f32(a.out + "/pca_walk.f32", x.data());
    write_text(a.out + "/pca.json", j.dump(2) + "\n");
    if (l.run.task != "synth") save_sheet(a.out + "/pca_walk.png", l.run.task, x, cc, k, a.steps);
    out << "PCA over " << d.size() << " latents; explained variance of first " << k << ": "
        << json(j["explained_variance"]).dump() << "\n";
    return kOk;
  });
}

struct ExportArgs {
  std::string config, preset, out = "corpus", data_root;
  std::size_t items = 100;
};

int cmd_export(const ExportArgs& a, std::ostream& out) {
  if (a.config.empty() == a.preset.empty()) throw ConfigError("give exactly one of --config or --preset");
  RunConfig cfg = a.config.empty() ? app::preset(a.preset) : app::load_run_config(a.config);
  if (!a.data_root.empty()) cfg.data.root = a.data_root;
  if (a.items == 0) throw ConfigError("--items must be >= 1");
  if (cfg.task == "toyshapes") {
    datasets::export_colorization(a.out, datasets::synth_colored_shapes(a.items, cfg.arch.image_size, cfg.data.seed));
  } else if (cfg.task == "mnist") {
    const std::string root = app::resolve_data_root(cfg) + "/mnist/";
    datasets::export_mnist(a.out, datasets::load_mnist_idx(root + "train-images-idx3-ubyte",
                                                           root + "train-labels-idx1-ubyte", a.items));
  } else {
    ensure_dir(a.out);
    const auto s = datasets::synth_conditional(datasets::gaussian_task(), a.items, cfg.data.seed);
    std::ofstream csv(a.out + "/samples.csv");
    csv << "condition,x0,x1,log_p\n";
    for (std::size_t i = 0; i < a.items; ++i)
      csv << s.labels[i] << ',' << s.x[2 * i] << ',' << s.x[2 * i + 1] << ',' << s.log_p[i] << '\n';
    if (!csv) throw IoError("cannot write samples.csv");
  }
  out << "exported " << a.items << " " << cfg.task << " items to " << a.out << "\n";
  return kOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App cli{"cinn: conditional invertible networks", "cinn"};
  cli.require_subcommand(1);
  std::string data_root;
  cli.add_option("--data-root", data_root, std::string("Data directory (overrides $") + app::kDataRootEnv + ")");

  TrainArgs ta;
  auto* train = cli.add_subcommand("train", "Train a model");
  train->add_option("--config", ta.config, "JSON run configuration")->check(CLI::ExistingFile);
  train->add_option("--preset", ta.preset, "mnist | synth | toyshapes");
  train->add_option("--out", ta.out, "Output directory");
  train->add_option("--resume", ta.resume, "Checkpoint to resume from");
  train->add_option("--precision", ta.precision, "float32 | float64");
  train->add_option("--steps", ta.steps);
  train->add_option("--batch", ta.batch);
  train->add_option("--lr", ta.lr);
  train->add_option("--sigma", ta.sigma, "Input noise std");
  train->add_option("--tau", ta.tau, "Weight decay");
  train->add_option("--seed", ta.seed);
  train->add_option("--blocks", ta.blocks);
  train->add_option("--hidden", ta.hidden);
  train->add_option("--items", ta.items, "Training items");
  train->add_option("--checkpoint-every", ta.checkpoint_every);
  train->add_option("--freeze-h", ta.freeze_h, "Steps with the conditioning encoder frozen");
  train->add_flag("--no-clamp", ta.no_clamp);
  train->add_flag("--no-noise", ta.no_noise);
  train->add_flag("--no-permute", ta.no_permute);
  train->add_flag("--no-haar", ta.no_haar);
  train->add_flag("--no-init", ta.no_init);

  SampleArgs sa;
  auto* sample = cli.add_subcommand("sample", "Draw conditional samples");
  sample->add_option("--checkpoint", sa.checkpoint)->required();
  sample->add_option("--cond", sa.cond, "Comma-separated class labels (default: all)");
  sample->add_option("--cond-items", sa.cond_items, "toyshapes: evaluation L images to condition on");
  sample->add_option("-n", sa.n, "Samples per condition");
  sample->add_option("--beta", sa.beta, "Latent temperature");
  sample->add_option("--seed", sa.seed);
  sample->add_flag("--shared-z", sa.shared_z, "Reuse each latent across all conditions");
  sample->add_option("--out", sa.out);

  EncodeArgs ea;
  auto* encode = cli.add_subcommand("encode", "Map data to latent codes");
  encode->add_option("--checkpoint", ea.checkpoint)->required();
  encode->add_option("--items", ea.items);
  encode->add_option("--split", ea.split, "train | eval");
  encode->add_option("--out", ea.out);

  TransferArgs xa;
  auto* transfer = cli.add_subcommand("transfer", "Re-decode an item's latent under other conditions");
  transfer->add_option("--checkpoint", xa.checkpoint)->required();
  transfer->add_option("--index", xa.index, "Evaluation item");
  transfer->add_option("--targets", xa.targets, "Target classes (or toyshapes items)");
  transfer->add_option("--out", xa.out);

  EvalArgs va;
  auto* eval = cli.add_subcommand("eval", "Likelihood and diversity metrics");
  eval->add_option("--checkpoint", va.checkpoint)->required();
  eval->add_option("-k", va.k, "Samples per item");
  eval->add_option("--seed", va.seed);
  eval->add_option("--items", va.items);
  eval->add_option("--metrics", va.metrics, "nll,mse,variance");
  eval->add_option("--out", va.out);

  PcaArgs pa;
  auto* pca = cli.add_subcommand("pca", "Principal axes of the latent space");
  pca->add_option("--checkpoint", pa.checkpoint)->required();
  pca->add_option("--items", pa.items);
  pca->add_option("--components", pa.components);
  pca->add_option("--steps", pa.steps);
  pca->add_option("--range", pa.range, "Walk extent in standard deviations");
  pca->add_option("--out", pa.out);

  ExportArgs xp;
  auto* exp = cli.add_subcommand("export", "Write a corpus as PNG files plus manifest.csv");
  exp->add_option("--config", xp.config)->check(CLI::ExistingFile);
  exp->add_option("--preset", xp.preset);
  exp->add_option("--items", xp.items);
  exp->add_option("--out", xp.out);

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    cli.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << cli.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kConfig;
  }

  try {
    if (train->parsed()) {
      if (ta.data_root.empty()) ta.data_root = data_root;
      return cmd_train(ta, out);
    }
    if (sample->parsed()) {
      sa.data_root = data_root;
      return cmd_sample(sa, out);
    }
    if (encode->parsed()) {
      ea.data_root = data_root;
      return cmd_encode(ea, out);
    }
    if (transfer->parsed()) {
      xa.data_root = data_root;
      return cmd_transfer(xa, out);
    }
    if (eval->parsed()) {
      va.data_root = data_root;
      return cmd_eval(va, out);
    }
    if (pca->parsed()) {
      pa.data_root = data_root;
      return cmd_pca(pa, out);
    }
    xp.data_root = data_root;
    return cmd_export(xp, out);
  } catch (const DivergedError& e) {
    err << "error: " << e.what() << "\n";
    return kDiverged;
  } catch (const CheckpointError& e) {
    err << "error: " << (e.kind() == CheckpointError::Kind::kNotFound ? "checkpoint not found: " : "") << e.what() << "\n";
    return kIo;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const UnsupportedMetricError& e) {
    err << "unsupported metric: " << e.what() << "\n";
    return kConfig;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kData;
  } catch (const IoError& e) {
    err << "io error: " << e.what() << "\n";
    return kIo;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return kDiverged;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kData;
  }
}

}  // namespace cinn::cli
