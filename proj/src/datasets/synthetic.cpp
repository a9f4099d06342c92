// Copyright 2026 The cinn Authors
// SPDX-License-Identifier: Apache-2.0

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numbers>

#include "cinn/datasets/datasets.hpp"

namespace cinn::datasets {

namespace {

Eigen::MatrixXd as_matrix(const GaussianComponent& g, std::size_t d) {
  Eigen::MatrixXd m(d, d);
  for (std::size_t r = 0; r < d; ++r)
    for (std::size_t c = 0; c < d; ++c) m(r, c) = g.cov[r * d + c];
  return m;
}

Eigen::LLT<Eigen::MatrixXd> factor(const GaussianComponent& g, std::size_t d) {
  Eigen::LLT<Eigen::MatrixXd> llt(as_matrix(g, d));
  if (llt.info() != Eigen::Success) throw ConfigError("component covariance is not positive definite");
  return llt;
}

double gaussian_log_prob(const GaussianComponent& g, std::size_t d, std::span<const double> x) {
  auto llt = factor(g, d);
  Eigen::VectorXd diff(d);
  for (std::size_t i = 0; i < d; ++i) diff[i] = x[i] - g.mean[i];
  const Eigen::VectorXd y = llt.matrixL().solve(diff);
  double log_det = 0;
  for (std::size_t i = 0; i < d; ++i) log_det += 2 * std::log(llt.matrixL()(i, i));
  return -0.5 * y.squaredNorm() - 0.5 * log_det - 0.5 * static_cast<double>(d) * std::log(2 * std::numbers::pi);
}

GaussianComponent component(double w, std::vector<double> mean, std::vector<double> cov) {
  return {w, std::move(mean), std::move(cov)};
}

}  // namespace

void SyntheticCondDensity::validate() const {
  if (dim == 0) throw ConfigError("synthetic density needs dim >= 1");
  if (conditions.empty()) throw ConfigError("synthetic density needs at least one condition");
  for (const auto& comps : conditions) {
    if (comps.empty()) throw ConfigError("condition without components");
    double total = 0;
    for (const auto& g : comps) {
      if (g.mean.size() != dim || g.cov.size() != dim * dim) throw ConfigError("component size does not match dim");
      if (!(g.weight > 0)) throw ConfigError("component weights must be positive");
      total += g.weight;
      factor(g, dim);
    }
    if (std::abs(total - 1) > 1e-9) throw ConfigError("component weights must sum to 1");
  }
}

double SyntheticCondDensity::log_prob(std::span<const double> x, int condition) const {
  if (condition < 0 || static_cast<std::size_t>(condition) >= conditions.size())
    throw DimensionError("condition index out of range");
  if (x.size() != dim) throw DimensionError("point dimension does not match density");
  // log-sum-exp over components
  std::vector<double> terms;
  for (const auto& g : conditions[condition]) terms.push_back(std::log(g.weight) + gaussian_log_prob(g, dim, x));
  const double m = *std::max_element(terms.begin(), terms.end());
  double s = 0;
  for (double t : terms) s += std::exp(t - m);
  return m + std::log(s);
}

std::vector<double> SyntheticCondDensity::mean(int condition) const {
  std::vector<double> out(dim, 0.0);
  for (const auto& g : conditions.at(condition))
    for (std::size_t i = 0; i < dim; ++i) out[i] += g.weight * g.mean[i];
  return out;
}

double SyntheticCondDensity::entropy(int condition) const {
  const auto& comps = conditions.at(condition);
  if (comps.size() != 1) throw ContractError("closed-form entropy needs a single-component condition");
  auto llt = factor(comps[0], dim);
  double log_det = 0;
  for (std::size_t i = 0; i < dim; ++i) log_det += 2 * std::log(llt.matrixL()(i, i));
  return 0.5 * static_cast<double>(dim) * (1 + std::log(2 * std::numbers::pi)) + 0.5 * log_det;
}

SyntheticCondDensity::Sample SyntheticCondDensity::sample(std::size_t n, Rng& rng, int condition) const {
  validate();
  if (condition >= static_cast<int>(conditions.size())) throw DimensionError("condition index out of range");
  std::vector<std::vector<double>> weights;
  for (const auto& comps : conditions) {
    weights.emplace_back();
    for (const auto& g : comps) weights.back().push_back(g.weight);
  }
  Sample s;
  s.x = Tensor<double>({n, dim});
  s.labels.resize(n);
  s.components.resize(n);
  s.log_p.resize(n);
  std::normal_distribution<double> normal;
  for (std::size_t i = 0; i < n; ++i) {
    const int c = condition >= 0
                      ? condition
                      : std::uniform_int_distribution<int>(0, static_cast<int>(conditions.size()) - 1)(rng);
    const int k = std::discrete_distribution<int>(weights[c].begin(), weights[c].end())(rng);
    const auto& g = conditions[c][k];
    const Eigen::MatrixXd L = factor(g, dim).matrixL();
    Eigen::VectorXd z(dim);
    for (std::size_t j = 0; j < dim; ++j) z[j] = normal(rng);
    const Eigen::VectorXd y = L * z;
    for (std::size_t j = 0; j < dim; ++j) s.x[i * dim + j] = g.mean[j] + y[j];
    s.labels[i] = c;
    s.components[i] = k;
    s.log_p[i] = log_prob(std::span<const double>(s.x.ptr() + i * dim, dim), c);
  }
  return s;
}

SyntheticCondDensity::Sample synth_conditional(const SyntheticCondDensity& density, std::size_t n,
                                               std::uint64_t seed, int condition) {
  Rng rng(seed);
  return density.sample(n, rng, condition);
}

SyntheticCondDensity gaussian_task() {
  SyntheticCondDensity d;
  d.dim = 2;
  d.conditions = {
      {component(1, {2.0, 0.0}, {0.25, 0.0, 0.0, 1.0})},
      {component(1, {-2.0, 0.0}, {1.0, 0.6, 0.6, 1.0})},
      {component(1, {0.0, 2.0}, {0.5, 0.0, 0.0, 0.5})},
      {component(1, {0.0, -2.0}, {0.3, -0.2, -0.2, 0.6})},
  };
  d.validate();
  return d;
}

SyntheticCondDensity bimodal_task() {
  SyntheticCondDensity d;
  d.dim = 2;
  const std::vector<double> tight{0.25, 0.0, 0.0, 0.25};
  d.conditions = {
      {component(0.5, {-3.0, 0.0}, tight), component(0.5, {3.0, 0.0}, tight)},
      {component(0.3, {0.0, -3.0}, tight), component(0.7, {0.0, 3.0}, tight)},
  };
  d.validate();
  return d;
}

}  // namespace cinn::datasets
