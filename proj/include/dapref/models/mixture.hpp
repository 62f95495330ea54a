#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "dapref/chain.hpp"

namespace dapref::models {

/// Gaussian mixture parameters: weights on the simplex, means, scales.
struct MixtureParams {
  Eigen::VectorXd weights;
  Eigen::VectorXd means;
  Eigen::VectorXd sds;

  Eigen::Index components() const noexcept { return weights.size(); }
  bool valid() const;
};

/// Composite Gauss-Legendre rule (16-point panels) on
/// [min mu - half_width * max sd, max mu + half_width * max sd].
struct Quadrature {
  std::size_t nodes = 512;
  double half_width = 10.0;
};

/// How the second argument of N(m, s) in the data-generating mixture is read.
enum class ScaleConvention { variance, standard_deviation };

/// 0.10 N(-10, 2) + 0.65 N(0, 5) + 0.25 N(15, 5).
MixtureParams reference_mixture(ScaleConvention convention = ScaleConvention::variance);

/// log sum_i w_i N(x; mu_i, sd_i^2); -inf when the parameters are invalid.
double mixture_logpdf(const MixtureParams& psi, double x);

/// Score of the log density in the free parameterisation
/// (w_1..w_{k-1}, mu_1..mu_k, sd_1..sd_k), with w_k = 1 - sum of the others.
Eigen::VectorXd mixture_score(const MixtureParams& psi, double x);

/// Fisher information E[s s'] by quadrature, (3k-1) x (3k-1). Throws
/// std::runtime_error on non-finite entries or an eigenvalue below -1e-8.
Eigen::MatrixXd fisher_info(const MixtureParams& psi, const Quadrature& quadrature = {});

/// 0.5 log det I(psi), eigenvalues floored at 1e-12; -inf when the Fisher
/// information cannot be computed.
double jeffreys_logprior(const MixtureParams& psi, const Quadrature& quadrature = {});

/// Unconstrained coordinates: log(w_i / w_k) for i < k, raw means, log sds.
MixtureParams unpack_mixture(const Eigen::VectorXd& phi, Eigen::Index components);
Eigen::VectorXd pack_mixture(const MixtureParams& psi);
/// log |d psi / d phi| = sum_i log w_i + sum_i log sd_i.
double mixture_log_jacobian(const MixtureParams& psi);

struct MixtureSample {
  std::vector<double> values;
  std::vector<int> components;
};

/// Ancestral sampling: component by weight, then a Gaussian draw.
MixtureSample simulate_mixture(std::size_t n, std::uint64_t seed,
                               const MixtureParams& psi = reference_mixture());

struct MixtureModel {
  std::vector<double> data;
  Eigen::Index components = 3;
  Quadrature quadrature;
  /// Fraction of observations moved next to the Jeffreys prior.
  double split_r = 0.02;

  /// floor(split_r * n); must be >= 1.
  std::size_t head_size() const;
};

/// Target on the unconstrained coordinates. Factor 1 (cheap): likelihood
/// of observations head+1..n plus the log Jacobian. Factor 2 (expensive):
/// likelihood of the first head observations plus the Jeffreys log prior.
FactorizedTarget mixture_da_factors(const MixtureModel& model);

} // namespace dapref::models
