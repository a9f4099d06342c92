// Copyright 2026 The cinn Authors
// SPDX-License-Identifier: Apache-2.0

#include "cinn/evaluation/evaluation.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <numbers>
#include <numeric>

#include "cinn/numerics/adam.hpp"
#include "cinn/numerics/ops.hpp"

namespace cinn::evaluation {

namespace {

std::size_t row_size(const Tensor<double>& t) { return t.dim(0) ? t.size() / t.dim(0) : 0; }

template <typename T>
void check_same(const Tensor<T>& a, const Tensor<T>& b, const char* what) {
  if (a.shape() != b.shape())
    throw DimensionError(std::string(what) + ": shape " + shape_str(b.shape()) + " does not match " +
                         shape_str(a.shape()));
}

}  // namespace

double nll_full_nats(double z_sqnorm, double logdet, std::size_t dim) {
  if (dim == 0) throw ContractError("likelihood needs D >= 1");
  return 0.5 * z_sqnorm + 0.5 * static_cast<double>(dim) * std::log(2 * std::numbers::pi) - logdet;
}

double bits_per_dim(double z_sqnorm, double logdet, std::size_t dim) {
  return nll_full_nats(z_sqnorm, logdet, dim) / (static_cast<double>(dim) * std::numbers::ln2);
}

template <typename T>
LikelihoodStats likelihood_stats(const Tensor<T>& z, const Tensor<T>& logdet) {
  if (z.ndim() != 2 || logdet.ndim() != 1 || logdet.dim(0) != z.dim(0))
    throw DimensionError("likelihood_stats expects z [N, D] and logdet [N]");
  const std::size_t n = z.dim(0), d = z.dim(1);
  if (n == 0) throw ContractError("likelihood_stats on an empty batch");
  double total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double sq = 0;
    for (std::size_t j = 0; j < d; ++j) sq += static_cast<double>(z[i * d + j]) * z[i * d + j];
    total += nll_full_nats(sq, logdet[i], d);
  }
  LikelihoodStats s;
  s.n = n;
  s.nll_per_dim = total / static_cast<double>(n * d);
  s.bits_per_dim = s.nll_per_dim / std::numbers::ln2;
  return s;
}

template <typename T>
LikelihoodStats evaluate_likelihood(training::Model<T>& model, const Tensor<T>& x, const Tensor<T>& c,
                                    std::size_t batch_size) {
  const std::size_t n = x.dim(0), d = model.dim();
  if (batch_size == 0) throw ContractError("batch_size must be positive");
  double total = 0;
  for (std::size_t b = 0; b < n; b += batch_size) {
    const std::size_t e = std::min(n, b + batch_size);
    Tensor<T> logdet;
    const Tensor<T> cb = c.ndim() == 0 ? c : take_rows(c, b, e);
    const Tensor<T> z = model.encode(take_rows(x, b, e), cb, &logdet).flatten();
    total += likelihood_stats(z, logdet).nll_per_dim * static_cast<double>((e - b) * d);
  }
  LikelihoodStats s;
  s.n = n;
  s.nll_per_dim = total / static_cast<double>(n * d);
  s.bits_per_dim = s.nll_per_dim / std::numbers::ln2;
  return s;
}

template <typename T>
double best_of_k_mse(const Tensor<T>& truth, std::span<const Tensor<T>> samples) {
  if (samples.empty()) throw ContractError("best_of_k_mse needs at least one sample");
  if (truth.ndim() == 0 || truth.dim(0) == 0) throw ContractError("best_of_k_mse on an empty evaluation set");
  for (const auto& s : samples) check_same(truth, s, "best_of_k_mse");
  const std::size_t n = truth.dim(0), row = truth.size() / n;
  double total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& s : samples) {
      double mse = 0;
      for (std::size_t j = i * row; j < (i + 1) * row; ++j) mse += std::pow(static_cast<double>(s[j]) - truth[j], 2);
      best = std::min(best, mse / static_cast<double>(row));
    }
    total += best;
  }
  return total / static_cast<double>(n);
}

template <typename T>
VarianceResult sample_variance(std::span<const Tensor<T>> samples, const Tensor<T>* mask) {
  if (samples.size() < 2) throw ContractError("sample_variance needs k >= 2 samples");
  for (const auto& s : samples) check_same(samples[0], s, "sample_variance");
  const Tensor<T>& first = samples[0];
  const std::size_t total = first.size();
  // Mask broadcast: same shape, or a single channel over [N, C, ...].
  std::size_t channels = 1, inner = total;
  if (mask) {
    if (mask->shape() == first.shape()) {
      channels = 1;
    } else if (first.ndim() >= 2 && mask->ndim() == first.ndim() && mask->dim(0) == first.dim(0) && mask->dim(1) == 1 &&
               mask->size() * first.dim(1) == total) {
      channels = first.dim(1);
    } else {
      throw DimensionError("sample_variance mask shape " + shape_str(mask->shape()) + " does not fit " +
                           shape_str(first.shape()));
    }
    inner = total / (first.dim(0) * channels);
  }
  const double k = static_cast<double>(samples.size());
  double sum = 0, weight = 0;
  for (std::size_t j = 0; j < total; ++j) {
    double w = 1;
    if (mask) {
      const std::size_t n = j / (channels * inner), pix = j % inner;
      w = channels == 1 ? (*mask)[j] : (*mask)[n * inner + pix];
    }
    if (w == 0) continue;
    double mean = 0;
    for (const auto& s : samples) mean += s[j];
    mean /= k;
    double var = 0;
    for (const auto& s : samples) var += std::pow(static_cast<double>(s[j]) - mean, 2);
    sum += w * var / k;
    weight += w;
  }
  if (weight == 0) throw ContractError("sample_variance mask selects no elements");
  VarianceResult r;
  r.value = sum / weight;
  r.no_diversity = r.value == 0.0;
  return r;
}

Tensor<double> Pca::project(const Tensor<double>& z, std::size_t k) const {
  if (z.ndim() != 2 || z.dim(1) != dim()) throw DimensionError("PCA projection expects [N, D]");
  if (k > components.size()) throw DimensionError("PCA projection asks for more components than available");
  const std::size_t n = z.dim(0), d = dim();
  Tensor<double> out({n, k});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < k; ++c) {
      double s = 0;
      for (std::size_t j = 0; j < d; ++j) s += (z[i * d + j] - mean[j]) * components[c][j];
      out[i * k + c] = s;
    }
  return out;
}

Tensor<double> Pca::reconstruct(const Tensor<double>& coeffs) const {
  if (coeffs.ndim() != 2 || coeffs.dim(1) > components.size()) throw DimensionError("PCA reconstruct expects [N, k]");
  const std::size_t n = coeffs.dim(0), k = coeffs.dim(1), d = dim();
  Tensor<double> out({n, d});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      double s = mean[j];
      for (std::size_t c = 0; c < k; ++c) s += coeffs[i * k + c] * components[c][j];
      out[i * d + j] = s;
    }
  return out;
}

Pca latent_pca(const Tensor<double>& latents) {
  if (latents.ndim() != 2) throw DimensionError("latent_pca expects [N, D]");
  const std::size_t n = latents.dim(0), d = row_size(latents);
  if (n < 2) throw DegenerateDataError("latent_pca needs at least two latent vectors");
  Eigen::MatrixXd m(n, d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) m(i, j) = latents[i * d + j];
  const Eigen::RowVectorXd mu = m.colwise().mean();
  m.rowwise() -= mu;
  const Eigen::MatrixXd cov = (m.transpose() * m) / static_cast<double>(n - 1);
  Pca p;
  p.total_variance = cov.trace();
  if (!(p.total_variance > 0)) throw DegenerateDataError("latent vectors have zero variance");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) throw NumericError("PCA eigendecomposition failed");
  p.mean.assign(mu.data(), mu.data() + d);
  for (std::size_t c = d; c-- > 0;) {  // eigenvalues come ascending
    p.explained_variance.push_back(std::max(0.0, eig.eigenvalues()[c]));
    const Eigen::VectorXd v = eig.eigenvectors().col(c);
    p.components.emplace_back(v.data(), v.data() + d);
  }
  return p;
}

template <typename T>
Tensor<T> rescale_latent(const Tensor<T>& z, double beta) {
  if (beta < 0) throw ConfigError("temperature beta must be >= 0");
  if (z.ndim() != 2) throw DimensionError("rescale_latent expects [N, D]");
  const std::size_t n = z.dim(0), d = z.dim(1);
  Tensor<T> out(z.shape());
  const double target = beta * std::sqrt(static_cast<double>(d));
  for (std::size_t i = 0; i < n; ++i) {
    double norm = 0;
    for (std::size_t j = 0; j < d; ++j) norm += static_cast<double>(z[i * d + j]) * z[i * d + j];
    norm = std::sqrt(norm);
    if (beta == 0) continue;
    if (norm == 0) throw DegenerateDataError("cannot rescale a zero latent vector");
    for (std::size_t j = 0; j < d; ++j) out[i * d + j] = static_cast<T>(z[i * d + j] * (target / norm));
  }
  return out;
}

template <typename T>
Tensor<T> temperature_sample(training::Model<T>& model, const Tensor<T>& c, double beta, Rng& rng) {
  if (beta < 0) throw ConfigError("temperature beta must be >= 0");
  if (c.ndim() == 0) throw ContractError("temperature_sample needs a batch of conditions");
  Tensor<T> z = normal_tensor<T>({c.dim(0), model.dim()}, rng);
  return model.decode_flat(rescale_latent(z, beta), c);
}

template <typename T>
Tensor<T> sample_grid(training::Model<T>& model, const Tensor<T>& c, std::size_t rows, double beta, Rng& rng) {
  if (c.ndim() == 0) throw ContractError("sample_grid needs a batch of conditions");
  const std::size_t cols = c.dim(0), d = model.dim();
  const Tensor<T> z = rescale_latent(normal_tensor<T>({rows, d}, rng), beta);
  std::vector<std::size_t> z_idx, c_idx;
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < cols; ++j) {
      z_idx.push_back(r);
      c_idx.push_back(j);
    }
  return model.decode_flat(gather_rows(z, std::span<const std::size_t>(z_idx)),
                           gather_rows(c, std::span<const std::size_t>(c_idx)));
}

template <typename T>
Tensor<T> style_transfer(training::Model<T>& model, const Tensor<T>& x, const Tensor<T>& c, const Tensor<T>& c_hat) {
  if (c.shape() != c_hat.shape()) throw DimensionError("style_transfer: target condition shape differs");
  return model.decode(model.encode(x, c), c_hat);
}

template <typename T>
double mean_saturation(const Tensor<T>& ab) {
  if (ab.ndim() < 2 || ab.dim(1) != 2) throw DimensionError("mean_saturation expects [N, 2, ...]");
  const std::size_t n = ab.dim(0), plane = ab.size() / (2 * n);
  double s = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t p = 0; p < plane; ++p) {
      const double a = ab[(2 * i) * plane + p], b = ab[(2 * i + 1) * plane + p];
      s += std::sqrt(a * a + b * b);
    }
  return s / static_cast<double>(n * plane);
}

nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json j{{"nll_per_dim", r.nll_per_dim},
                   {"bits_per_dim", r.bits_per_dim},
                   {"best_of_k_mse", nullptr},
                   {"pixel_variance", nullptr},
                   {"no_diversity", r.no_diversity},
                   {"k", r.k},
                   {"n_samples", r.n_samples},
                   {"seed", r.seed},
                   {"model_checksum", r.model_checksum},
                   {"units", r.units}};
  if (r.best_of_k_mse) j["best_of_k_mse"] = *r.best_of_k_mse;
  if (r.pixel_variance) j["pixel_variance"] = *r.pixel_variance;
  return j;
}

DigitClassifier::DigitClassifier(std::size_t input_dim, std::size_t hidden, std::size_t classes)
    : input_dim_(input_dim),
      net_("classifier", {LayerSpec::flatten(), LayerSpec::linear(input_dim, hidden), LayerSpec::leaky_relu(0.1),
                          LayerSpec::linear(hidden, classes)}) {}

void DigitClassifier::initialize(Rng& rng) { net_.initialize(rng, false); }

double DigitClassifier::train(const Tensor<float>& images, std::span<const int> labels, std::size_t epochs,
                              std::size_t batch_size, double lr, Rng& rng) {
  const std::size_t n = images.dim(0);
  if (labels.size() != n) throw DimensionError("classifier: label count does not match images");
  if (images.size() != n * input_dim_) throw DimensionError("classifier: image size does not match input_dim");
  AdamConfig cfg;
  cfg.lr = lr;
  Adam<float> adam(cfg);
  auto params = net_.parameters();
  std::vector<std::size_t> order(n);
  double epoch_loss = 0;
  for (std::size_t e = 0; e < epochs; ++e) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    epoch_loss = 0;
    for (std::size_t b = 0; b < n; b += batch_size) {
      const std::size_t m = std::min(n, b + batch_size) - b;
      std::span<const std::size_t> idx(order.data() + b, m);
      std::vector<int> y(m);
      for (std::size_t i = 0; i < m; ++i) y[i] = labels[idx[i]];
      Tape<float> tape;
      Var<float> loss = ops::softmax_cross_entropy(net_.forward(tape, tape.constant(gather_rows(images, idx)), true),
                                                   std::span<const int>(y));
      for (auto* p : params) p->zero_grad();
      tape.backward(loss);
      adam.step(params);
      epoch_loss += loss.value().item() * static_cast<double>(m);
    }
    epoch_loss /= static_cast<double>(n);
  }
  return epoch_loss;
}

std::vector<int> DigitClassifier::predict(const Tensor<float>& images) {
  const std::size_t n = images.dim(0);
  std::vector<int> out;
  out.reserve(n);
  for (std::size_t b = 0; b < n; b += 512) {
    const std::size_t e = std::min(n, b + 512);
    Tape<float> tape(false);
    const Tensor<float> logits = net_.forward(tape, tape.constant(take_rows(images, b, e)), false).value();
    const std::size_t k = logits.dim(1);
    for (std::size_t i = 0; i < e - b; ++i) {
      const float* row = logits.ptr() + i * k;
      out.push_back(static_cast<int>(std::max_element(row, row + k) - row));
    }
  }
  return out;
}

double DigitClassifier::accuracy(const Tensor<float>& images, std::span<const int> labels) {
  const auto pred = predict(images);
  if (pred.size() != labels.size()) throw DimensionError("classifier: label count does not match images");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hit += pred[i] == labels[i];
  return pred.empty() ? 0.0 : static_cast<double>(hit) / static_cast<double>(pred.size());
}

#define CINN_EVAL_INSTANTIATE(T)                                                                                    \
  template LikelihoodStats likelihood_stats(const Tensor<T>&, const Tensor<T>&);                                    \
  template LikelihoodStats evaluate_likelihood(training::Model<T>&, const Tensor<T>&, const Tensor<T>&,             \
                                               std::size_t);                                                        \
  template double best_of_k_mse(const Tensor<T>&, std::span<const Tensor<T>>);                                     \
  template VarianceResult sample_variance(std::span<const Tensor<T>>, const Tensor<T>*);                           \
  template Tensor<T> rescale_latent(const Tensor<T>&, double);                                                     \
  template Tensor<T> temperature_sample(training::Model<T>&, const Tensor<T>&, double, Rng&);                       \
  template Tensor<T> sample_grid(training::Model<T>&, const Tensor<T>&, std::size_t, double, Rng&);                \
  template Tensor<T> style_transfer(training::Model<T>&, const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);    \
  template double mean_saturation(const Tensor<T>&);

CINN_EVAL_INSTANTIATE(float)
CINN_EVAL_INSTANTIATE(double)

}  // namespace cinn::evaluation
