#include "dapref/models/normal_normal.hpp"

#include <stdexcept>

namespace dapref::models {

std::pair<double, double> nn_posterior_params(const NormalNormalModel& model) {
  if (!(model.sigma_mu > 0.0)) throw std::invalid_argument("sigma_mu must be positive");
  const double precision = 1.0 + 1.0 / (model.sigma_mu * model.sigma_mu);
  return {model.x / precision, 1.0 / precision};
}

FactorizedTarget normal_normal_target(const NormalNormalModel& model) {
  if (!(model.sigma_mu > 0.0)) throw std::invalid_argument("sigma_mu must be positive");
  const double x = model.x;
  const double prior_var = model.sigma_mu * model.sigma_mu;

  FactorizedTarget target;
  target.dimension = 1;
  target.factors.push_back({"likelihood", CostTier::cheap, [x](const ParamVector& mu) {
                              const double r = x - mu(0);
                              return -0.5 * r * r;
                            }});
  target.factors.push_back({"prior", CostTier::expensive, [prior_var](const ParamVector& mu) {
                              return -0.5 * mu(0) * mu(0) / prior_var;
                            }});
  target.reference_log_density = [x, prior_var](const ParamVector& mu) {
    const double m = mu(0);
    return -0.5 * ((x - m) * (x - m) + m * m / prior_var);
  };
  return target;
}

} // namespace dapref::models
