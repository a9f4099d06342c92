// Copyright 2026 The cinn Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cinn/training/loss.hpp"
#include "cinn/training/trainer.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace cinn;
using namespace cinn::training;

namespace {

// Small conditional vector model: D features, one-hot condition.
ModelSpec vector_model(std::size_t d, std::size_t classes, std::size_t blocks, std::size_t hidden = 16) {
  ModelSpec m;
  m.graph.input_shape = {d};
  for (std::size_t i = 0; i < blocks; ++i) {
    m.graph.nodes.push_back(flow::NodeSpec::make_coupling(flow::fc_coupling(d, classes, hidden, 1)));
    m.graph.nodes.push_back(flow::NodeSpec::mix(10 + i));
  }
  m.conditioning = conditioning::passthrough_spec({classes}, blocks);
  return m;
}

template <typename T>
class FnSource : public DataSource<T> {
 public:
  explicit FnSource(std::function<Batch<T>(std::size_t, Rng&)> fn) : fn_(std::move(fn)) {}
  Batch<T> next(std::size_t n, Rng& rng) override { return fn_(n, rng); }

 private:
  std::function<Batch<T>(std::size_t, Rng&)> fn_;
};

// x = 0.5 * label + N(0, 0.3^2) per coordinate.
template <typename T>
Batch<T> shifted_gaussians(std::size_t n, std::size_t d, Rng& rng) {
  Batch<T> b{Tensor<T>(Shape{n, d}), Tensor<T>(Shape{n, 2})};
  std::normal_distribution<double> normal(0, 0.3);
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(rng() % 2);
    b.c[i * 2 + label] = 1;
    for (std::size_t k = 0; k < d; ++k) b.x[i * d + k] = static_cast<T>(0.5 * label + normal(rng));
  }
  return b;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("cinn_test_" + name)).string();
}

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

}  // namespace

TEST_CASE("nll_loss arithmetic") {
  Tape<double> tape(false);
  std::vector<Var<double>> zero{tape.constant(Tensor<double>(Shape{1, 3}))};
  CHECK(nll_loss<double>(zero, tape.constant(Tensor<double>(Shape{1}))).value().item() == 0.0);
  // ||z||^2 = 2 split over two parts, logdet 0.5.
  std::vector<Var<double>> parts{tape.constant(Tensor<double>(Shape{1, 1}, {1.0})),
                                 tape.constant(Tensor<double>(Shape{1, 2}, {0.0, -1.0}))};
  CHECK(nll_loss<double>(parts, tape.constant(Tensor<double>(Shape{1}, {0.5}))).value().item() ==
        doctest::Approx(0.5));
}

TEST_CASE("identity flow on standard normal data has expected loss D/2") {
  const std::size_t d = 4, n = 100000;
  Model<double> model(vector_model(d, 2, 2));
  Rng rng(1);
  model.initialize(rng);
  Tensor<double> x = normal_tensor<double>({n, d}, rng);
  Tensor<double> c(Shape{n, 2});
  for (std::size_t i = 0; i < n; ++i) c[i * 2] = 1;
  Tape<double> tape(false);
  auto out = model.forward(tape, tape.constant(x), tape.constant(c), false);
  const double loss = nll_loss<double>(out.parts, out.logdet).value().item();
  // Var(||x||^2 / 2) = D / 2 for standard normal x.
  const double se = std::sqrt(d / 2.0 / n);
  CHECK(std::abs(loss - d / 2.0) < 3 * se);
}

TEST_CASE("total_loss adds tau * ||theta||^2 over trainable parameters") {
  Parameter<double> theta("theta", Shape{1});
  theta.value[0] = 2.0;
  Parameter<double> frozen("frozen", Shape{1});
  frozen.value[0] = 5.0;
  frozen.trainable = false;
  std::vector<Parameter<double>*> params{&theta, &frozen};
  Tape<double> tape;
  Var<double> nll = tape.constant(Tensor<double>::scalar(0.0));
  CHECK(total_loss<double>(nll, params, 0.1).value().item() == doctest::Approx(0.4));
  Var<double> nll2 = tape.constant(Tensor<double>::scalar(1.25));
  CHECK(total_loss<double>(nll2, params, 0.0).value().item() == 1.25);
  CHECK_THROWS_AS(total_loss<double>(nll2, params, -1.0), ConfigError);

  // d/dtheta (nll + tau theta^2) = 2 tau theta.
  theta.zero_grad();
  Tape<double> t2;
  t2.backward(total_loss<double>(t2.constant(Tensor<double>::scalar(0.0)), params, 0.1));
  CHECK(theta.grad[0] == doctest::Approx(0.4));
  Tensor<double> numeric = finite_difference_gradient<double>(
      [&](const Tensor<double>& v) {
        theta.value = v;
        Tape<double> t(false);
        return total_loss<double>(t.constant(Tensor<double>::scalar(0.0)), params, 0.1).value().item();
      },
      Tensor<double>(Shape{1}, {2.0}), 1e-5);
  CHECK(numeric[0] == doctest::Approx(0.4).epsilon(1e-8));
}

TEST_CASE("add_noise statistics") {
  Rng rng(2);
  Tensor<float> x = testing::random_tensor<float>({1000}, rng);
  CHECK(add_noise(x, 0.0f, rng) == x);
  Tensor<double> zeros(Shape{1000000});
  Tensor<double> noisy = add_noise(zeros, 0.05, rng);
  double ss = 0;
  for (double v : noisy.data()) ss += v * v;
  CHECK(std::sqrt(ss / zeros.size()) == doctest::Approx(0.05).epsilon(0.01));
  CHECK_THROWS_AS(add_noise(x, -1.0f, rng), ConfigError);
}

TEST_CASE("initialization is seeded and starts from the identity") {
  Model<float> a(vector_model(6, 2, 3)), b(vector_model(6, 2, 3));
  Rng ra(7), rb(7);
  a.initialize(ra);
  b.initialize(rb);
  CHECK(a.checksum() == b.checksum());
  Rng rng(8);
  auto x = testing::random_tensor<float>({5, 6}, rng);
  Tensor<float> c(Shape{5, 2});
  Tensor<float> logdet;
  auto z = a.encode(x, c, &logdet);
  for (float v : logdet.data()) CHECK(v == 0.0f);
  CHECK(std::sqrt(squared_norm(z.flatten())) == doctest::Approx(std::sqrt(squared_norm(x))).epsilon(1e-5));
}

TEST_CASE("first training step sees the identity-transform loss") {
  Model<float> model(vector_model(8, 2, 2));
  Rng rng(3);
  model.initialize(rng);
  TrainConfig cfg;
  cfg.sigma_noise = 0.1;
  Trainer<float> trainer(model, cfg);
  Batch<float> batch = shifted_gaussians<float>(32, 8, rng);
  Rng replay = trainer.rng();
  Tensor<float> noisy = add_noise(batch.x, 0.1f, replay);
  StepStats s = trainer.step(batch);
  CHECK(s.nll == doctest::Approx(squared_norm(noisy) / 2 / 32).epsilon(1e-5));
  CHECK(s.loss > s.nll);  // weight decay on the nonzero hidden layers
}

TEST_CASE("full objective gradient matches finite differences") {
  Model<double> model(vector_model(6, 2, 2, 8));
  Rng rng(4);
  model.initialize(rng, false);
  Batch<double> batch = shifted_gaussians<double>(5, 6, rng);
  const double tau = 1e-2;
  auto objective = [&](Tape<double>& tape) {
    auto params = model.parameters();
    auto out = model.forward(tape, tape.constant(batch.x), tape.constant(batch.c), true);
    return total_loss<double>(nll_loss<double>(out.parts, out.logdet), params, tau);
  };
  for (auto* p : model.parameters()) p->zero_grad();
  Tape<double> tape;
  tape.backward(objective(tape));
  for (Parameter<double>* p : model.parameters()) {
    Tensor<double> saved = p->value;
    Tensor<double> numeric = finite_difference_gradient<double>(
        [&](const Tensor<double>& v) {
          p->value = v;
          Tape<double> t(false);
          return objective(t).value().item();
        },
        saved, 1e-5);
    p->value = saved;
    INFO(p->name);
    CHECK(max_relative_error(p->grad, numeric) < 1e-4);
  }
}

TEST_CASE("training on a conditional task lowers the loss and is deterministic") {
  auto run = [](std::size_t steps) {
    Model<float> model(vector_model(2, 2, 3));
    Rng rng(5);
    model.initialize(rng);
    TrainConfig cfg;
    cfg.max_steps = steps;
    cfg.batch_size = 64;
    cfg.sigma_noise = 0;
    Trainer<float> trainer(model, cfg);
    FnSource<float> src([](std::size_t n, Rng& r) { return shifted_gaussians<float>(n, 2, r); });
    FitResult r = trainer.fit(src);
    return std::pair{r, model.checksum()};
  };
  auto [a, ca] = run(300);
  auto [b, cb] = run(300);
  CHECK(a.status == FitStatus::kCompleted);
  CHECK(ca == cb);
  CHECK(*a.final_loss == *b.final_loss);
  // Data variance 0.09 gives entropy 0.5 log(2 pi e 0.09) ~ 0.215 nats per dim.
  CHECK(*a.final_loss < *a.initial_loss - 0.3);
}

TEST_CASE("plateau schedule decays the learning rate") {
  Model<float> model(vector_model(2, 2, 1));
  Rng rng(6);
  model.initialize(rng);
  TrainConfig cfg;
  cfg.plateau_window = 2;
  cfg.plateau_patience = 1;
  cfg.lr_decay = 0.5;
  cfg.max_steps = 6;
  cfg.sigma_noise = 0;
  Trainer<float> trainer(model, cfg);
  // Growing inputs make every window worse than the last.
  std::size_t calls = 0;
  FnSource<float> src([&](std::size_t n, Rng&) {
    Batch<float> b{Tensor<float>(Shape{n, 2}, float(1 + calls)), Tensor<float>(Shape{n, 2})};
    ++calls;
    return b;
  });
  std::vector<double> lrs;
  FitOptions opts;
  opts.on_step = [&](const StepStats& s) { lrs.push_back(s.lr); };
  trainer.fit(src, opts);
  // Evaluations after steps 2, 4, 6; the first sets the baseline. Each
  // recorded rate is the one the step used.
  CHECK(lrs == std::vector<double>{1e-3, 1e-3, 1e-3, 1e-3, 5e-4, 5e-4});
  CHECK(trainer.lr() == 2.5e-4);
}

TEST_CASE("non-finite loss stops training with a diverged status and keeps the checkpoint") {
  Model<float> model(vector_model(2, 2, 1));
  Rng rng(7);
  model.initialize(rng);
  TrainConfig cfg;
  cfg.max_steps = 10;
  cfg.checkpoint_every = 2;
  Trainer<float> trainer(model, cfg);
  std::size_t calls = 0;
  FnSource<float> src([&](std::size_t n, Rng& r) {
    Batch<float> b = shifted_gaussians<float>(n, 2, r);
    if (++calls == 4) b.x[0] = std::numeric_limits<float>::infinity();
    return b;
  });
  const std::string ckpt = temp_path("diverge.ckpt"), log = temp_path("diverge.csv");
  std::filesystem::remove(ckpt);
  FitResult r = trainer.fit(src, {log, ckpt, nullptr});
  CHECK(r.status == FitStatus::kDiverged);
  CHECK(r.steps == 3);
  REQUIRE(std::filesystem::exists(ckpt));
  CHECK(read_checkpoint(ckpt).header.at("state").at("step") == 2);
  std::ifstream f(log);
  std::string header;
  std::getline(f, header);
  CHECK(header == "step,lr,loss,nll_per_dim");
}

TEST_CASE("checkpoints round-trip bit-identically and resume the same trajectory") {
  const std::string p1 = temp_path("a.ckpt"), p2 = temp_path("b.ckpt");
  auto make = [] {
    auto m = std::make_unique<Model<float>>(vector_model(4, 2, 2));
    Rng rng(9);
    m->initialize(rng);
    return m;
  };
  TrainConfig cfg;
  cfg.plateau_window = 3;
  FnSource<float> src([](std::size_t n, Rng& r) { return shifted_gaussians<float>(n, 4, r); });

  auto m1 = make();
  Trainer<float> t1(*m1, cfg);
  for (int i = 0; i < 5; ++i) t1.step(src.next(cfg.batch_size, t1.rng()));
  save_checkpoint(p1, t1);

  CheckpointData data = read_checkpoint(p1);
  auto m2 = std::make_unique<Model<float>>(model_spec_from(data));
  Trainer<float> t2(*m2, train_config_from(data));
  restore_trainer(data, t2);
  save_checkpoint(p2, t2);
  CHECK(slurp(p1) == slurp(p2));

  const StepStats a = t1.step(src.next(cfg.batch_size, t1.rng()));
  const StepStats b = t2.step(src.next(cfg.batch_size, t2.rng()));
  CHECK(a.loss == b.loss);
  CHECK(m1->checksum() == m2->checksum());
}

TEST_CASE("checkpoint errors are distinct") {
  using Kind = CheckpointError::Kind;
  auto kind_of = [](const std::function<void()>& fn) {
    try {
      fn();
    } catch (const CheckpointError& e) {
      return static_cast<int>(e.kind());
    }
    return -1;
  };
  CHECK(kind_of([] { read_checkpoint(temp_path("missing.ckpt")); }) == int(Kind::kNotFound));

  Model<float> model(vector_model(4, 2, 1));
  Rng rng(1);
  model.initialize(rng);
  const std::string path = temp_path("err.ckpt");
  save_model(path, model, TrainConfig{});
  const std::string good = slurp(path);

  auto write = [&](std::string bytes) {
    std::ofstream(path, std::ios::binary) << bytes;
  };
  std::string bad = good;
  bad[0] = 'X';
  write(bad);
  CHECK(kind_of([&] { read_checkpoint(path); }) == int(Kind::kCorruptHeader));

  bad = good;
  bad[4] = 9;
  write(bad);
  CHECK(kind_of([&] { read_checkpoint(path); }) == int(Kind::kVersionMismatch));

  bad = good;
  bad[16] = '#';
  write(bad);
  CHECK(kind_of([&] { read_checkpoint(path); }) == int(Kind::kCorruptHeader));

  write(good.substr(0, good.size() - 3));
  CHECK(kind_of([&] { read_checkpoint(path); }) == int(Kind::kCorruptHeader));

  write(good);
  CheckpointData data = read_checkpoint(path);
  Model<float> wider(vector_model(4, 2, 1, 32));
  CHECK(kind_of([&] { load_parameters(data, wider); }) == int(Kind::kShapeMismatch));
  Model<float> same(model_spec_from(data));
  load_parameters(data, same);
  CHECK(same.checksum() == model.checksum());
}

TEST_CASE("train config JSON rejects unknown keys and ablations rewrite the graph") {
  TrainConfig cfg;
  cfg.ablations.clamp = false;
  nlohmann::json j = cfg;
  CHECK(j.get<TrainConfig>() == cfg);
  j["lerning_rate"] = 1;
  CHECK_THROWS_AS(j.get<TrainConfig>(), ConfigError);
  CHECK_THROWS_AS(nlohmann::json({{"batch_size", "big"}}).get<TrainConfig>(), ConfigError);
  TrainConfig bad;
  bad.batch_size = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);

  ModelSpec spec = vector_model(4, 2, 2);
  cfg.ablations.permute = false;
  cfg.clamp_alpha = 2.5;
  ModelSpec out = apply_ablations(spec, cfg);
  CHECK(out.graph.nodes.size() == 2);
  for (auto& n : out.graph.nodes) {
    CHECK(n.type == flow::NodeType::kCoupling);
    CHECK_FALSE(n.coupling.clamp);
    CHECK(n.coupling.alpha == 2.5);
  }
}
