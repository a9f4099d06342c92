// Copyright 2026 The cinn Authors
// SPDX-License-Identifier: Apache-2.0
//
// Likelihood metrics, sample-diversity metrics and latent-space tools.

#pragma once

#include <optional>
#include <span>
#include <vector>

#include "cinn/training/model.hpp"

namespace cinn::evaluation {

// Full negative log-likelihood under a standard-normal latent, including the
// (D/2) ln 2pi constant the training loss leaves out.
double nll_full_nats(double z_sqnorm, double logdet, std::size_t dim);
double bits_per_dim(double z_sqnorm, double logdet, std::size_t dim);

struct LikelihoodStats {
  double nll_per_dim = 0;  // nats, mean over samples, constant included
  double bits_per_dim = 0;
  std::size_t n = 0;
};

// z: [N, D] flattened latent codes, logdet: [N].
template <typename T>
LikelihoodStats likelihood_stats(const Tensor<T>& z, const Tensor<T>& logdet);

// Encodes x in chunks of batch_size (no noise) and reports the likelihood.
template <typename T>
LikelihoodStats evaluate_likelihood(training::Model<T>& model, const Tensor<T>& x, const Tensor<T>& c,
                                    std::size_t batch_size = 256);

// Mean over items of the smallest per-item MSE among the samples. Every
// sample has the ground truth's shape [N, ...]. Throws ContractError when
// samples is empty.
template <typename T>
double best_of_k_mse(const Tensor<T>& truth, std::span<const Tensor<T>> samples);

struct VarianceResult {
  double value = 0;
  bool no_diversity = false;  // exactly zero: the sampler ignores z
};

// Population variance across the k samples per element, averaged. mask, when
// given, is [N, 1, ...] or the sample shape and selects the elements averaged.
// Throws ContractError for k < 2.
template <typename T>
VarianceResult sample_variance(std::span<const Tensor<T>> samples, const Tensor<T>* mask = nullptr);

struct Pca {
  std::vector<double> mean;                // D
  std::vector<std::vector<double>> components;  // rows, sorted by variance
  std::vector<double> explained_variance;  // sample variance along each row
  double total_variance = 0;

  std::size_t dim() const { return mean.size(); }
  // [N, D] -> [N, k] coefficients on the first k components.
  Tensor<double> project(const Tensor<double>& z, std::size_t k) const;
  // [N, k] -> [N, D].
  Tensor<double> reconstruct(const Tensor<double>& coeffs) const;
};

// latents: [N, D]. DegenerateDataError when the data has no variance.
Pca latent_pca(const Tensor<double>& latents);

// Rescales each row of z [N, D] to norm beta * sqrt(D); beta = 0 gives zeros.
template <typename T>
Tensor<T> rescale_latent(const Tensor<T>& z, double beta);

// Draws z ~ N(0, I) per condition row, rescales to norm beta * sqrt(D) and
// decodes. ConfigError for beta < 0.
template <typename T>
Tensor<T> temperature_sample(training::Model<T>& model, const Tensor<T>& c, double beta, Rng& rng);

// Rows = latent draws, columns = conditions: item (r * C + j) decodes z_r
// under condition j. c is [C, ...].
template <typename T>
Tensor<T> sample_grid(training::Model<T>& model, const Tensor<T>& c, std::size_t rows, double beta, Rng& rng);

// g(f(x; c); c_hat).
template <typename T>
Tensor<T> style_transfer(training::Model<T>& model, const Tensor<T>& x, const Tensor<T>& c, const Tensor<T>& c_hat);

// Mean chroma sqrt(a^2 + b^2) over pixels of ab [N, 2, H, W].
template <typename T>
double mean_saturation(const Tensor<T>& ab);

struct EvalReport {
  double nll_per_dim = 0;
  double bits_per_dim = 0;
  std::optional<double> best_of_k_mse;
  std::optional<double> pixel_variance;
  bool no_diversity = false;
  std::size_t k = 0;
  std::size_t n_samples = 0;
  std::uint64_t seed = 0;
  std::uint64_t model_checksum = 0;
  std::string units;  // e.g. "normalized ab (ab / 128)"
};

nlohmann::json to_json(const EvalReport& r);

// Small MLP digit classifier used to check that conditional samples carry
// their class.
class DigitClassifier {
 public:
  DigitClassifier(std::size_t input_dim, std::size_t hidden, std::size_t classes);

  void initialize(Rng& rng);
  // images: [N, ...] flattened internally. Returns the final epoch's mean loss.
  double train(const Tensor<float>& images, std::span<const int> labels, std::size_t epochs, std::size_t batch_size,
               double lr, Rng& rng);
  std::vector<int> predict(const Tensor<float>& images);
  double accuracy(const Tensor<float>& images, std::span<const int> labels);

 private:
  std::size_t input_dim_;
  Sequential<float> net_;
};

}  // namespace cinn::evaluation
