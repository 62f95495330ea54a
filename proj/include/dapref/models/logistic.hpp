#pragma once

#include <cstdint>
#include <string>

#include <Eigen/Core>

#include "dapref/chain.hpp"

namespace dapref::models {

struct LogisticData {
  Eigen::MatrixXd X;  // n x p, row-major semantics: one observation per row
  Eigen::VectorXd y;  // labels in {0, 1}

  Eigen::Index rows() const noexcept { return X.rows(); }
  Eigen::Index cols() const noexcept { return X.cols(); }
};

struct LogisticModel {
  LogisticData data;
  /// Artificial arithmetic operations burned per likelihood term.
  std::uint64_t cost_c = 0;
  /// Fraction of the observations placed in the cheap block.
  double split_r = 0.05;
  /// Standard deviation of the diffuse N(0, s^2 I) prior.
  double prior_sd = 10.0;

  /// Number of observations in the cheap block, in [1, n-1].
  Eigen::Index cheap_rows() const;
};

enum class DataRange { cheap, expensive, all };

/// sum_i y_i eta_i - log(1 + exp(eta_i)) over the range, eta_i = x_i' beta.
double logistic_loglik(const LogisticModel& model, const Eigen::VectorXd& beta, DataRange range);

/// Keeps the optimiser from discarding the injected work.
void burn_operations(std::uint64_t ops) noexcept;

/// Standard-normal covariates and Bernoulli labels from the logistic link.
LogisticData simulate_logistic(Eigen::Index n, Eigen::Index p, const Eigen::VectorXd& beta_true,
                               std::uint64_t seed);

/// Header row, a `label` column with values 0/1, every other column numeric.
LogisticData load_logistic_csv(const std::string& path);

struct MleFit {
  Eigen::VectorXd beta;
  /// Inverse observed information at beta.
  Eigen::MatrixXd covariance;
};

/// Newton-Raphson maximum likelihood on the first `rows` observations
/// (all when rows <= 0); the covariance is rescaled to the full sample size.
MleFit logistic_mle(const LogisticData& data, Eigen::Index rows = 0);

/// Cheap factor: prior plus the first r observations. Expensive factor: the
/// remaining n - r observations. The expensive ratio estimate scales the
/// cheap likelihood log ratio by (n - r) / r.
FactorizedTarget logistic_target(const LogisticModel& model);

} // namespace dapref::models
