#pragma once

#include <utility>

#include "dapref/chain.hpp"

namespace dapref::models {

/// x ~ N(mu, 1), mu ~ N(0, sigma_mu^2).
struct NormalNormalModel {
  double x = 3.0;
  double sigma_mu = 10.0;
};

/// Closed-form posterior (mean, variance).
std::pair<double, double> nn_posterior_params(const NormalNormalModel& model);

/// Two factors: likelihood ratio first (cheap), prior ratio second.
FactorizedTarget normal_normal_target(const NormalNormalModel& model);

} // namespace dapref::models
