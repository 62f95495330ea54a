#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "dapref/random_schedule.hpp"

namespace dapref {

using ParamVector = Eigen::VectorXd;

/// A factor value that is NaN or +inf inside the support. Aborts the run.
class EvaluationError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

enum class CostTier { cheap, expensive };

/// One multiplicative piece of the target. The acceptance-ratio factor is
/// rho(current, proposed) = exp(log_term(proposed) - log_term(current)).
/// log_term returns -inf where the piece vanishes.
struct Factor {
  std::string id;
  CostTier cost = CostTier::cheap;
  std::function<double(const ParamVector&)> log_term;

  double log_ratio(const ParamVector& current, const ParamVector& proposed) const;
};

/// Ordered factorization of the target density. Cheap factors come first.
struct FactorizedTarget {
  std::size_t dimension = 0;
  std::vector<Factor> factors;
  /// Points outside the support are rejected before any factor runs.
  /// Empty means the whole space.
  std::function<bool(const ParamVector&)> in_support;
  /// Unfactored log density used to cross-check the factorization.
  std::function<double(const ParamVector&)> reference_log_density;
  /// Optional plug-in estimate of the expensive block's log ratio, built
  /// from the cheap block's log ratio (cur, prop, cheap_log_ratio).
  std::function<double(const ParamVector&, const ParamVector&, double)> expensive_ratio_estimate;

  std::size_t size() const noexcept { return factors.size(); }
  std::size_t cheap_count() const noexcept;
  bool supports(const ParamVector& x) const { return !in_support || in_support(x); }
  double reference_log_ratio(const ParamVector& current, const ParamVector& proposed) const;

  /// Throws std::invalid_argument on an empty list, a missing evaluator,
  /// or a cheap factor placed after an expensive one.
  void validate() const;
};

/// Evaluates factor k at x and rejects NaN / +inf. -inf is allowed.
double evaluate_factor(const FactorizedTarget& target, std::size_t k, const ParamVector& x);

/// A parameter value together with the cached per-factor log terms.
/// Entries that have not been computed hold NaN.
struct EvaluatedState {
  ParamVector x;
  std::vector<double> terms;
};

EvaluatedState evaluate_state(const FactorizedTarget& target, const ParamVector& x);

/// Symmetric Gaussian random walk, proposal = state + L * innovation with
/// L the lower Cholesky factor of the covariance.
class ProposalKernel {
public:
  explicit ProposalKernel(Eigen::MatrixXd covariance);
  static ProposalKernel isotropic(std::size_t dimension, double scale);

  ParamVector propose(const ParamVector& state, const Eigen::VectorXd& innovation) const;

  const Eigen::MatrixXd& covariance() const noexcept { return covariance_; }
  const Eigen::MatrixXd& cholesky_factor() const noexcept { return lower_; }
  std::size_t dimension() const noexcept { return static_cast<std::size_t>(covariance_.rows()); }
  /// The only kernel implemented is symmetric; its q-ratio is exactly 1.
  bool symmetric() const noexcept { return true; }
  double log_q_ratio(const ParamVector&, const ParamVector&) const noexcept { return 0.0; }

private:
  Eigen::MatrixXd covariance_;
  Eigen::MatrixXd lower_;
};

inline ParamVector propose(const ParamVector& state, const ProposalKernel& kernel,
                           const Eigen::VectorXd& innovation) {
  return kernel.propose(state, innovation);
}

/// Sum over factors of (proposed - current), in factor-list order.
double mh_log_ratio(std::span<const double> current_terms, std::span<const double> proposed_terms);

/// True when log(u) < log_ratio, i.e. u < min(rho, 1).
inline bool passes(double uniform, double log_ratio) noexcept {
  return std::log(uniform) < log_ratio;
}

struct StepResult {
  EvaluatedState next;
  bool accepted = false;
  /// Number of factors evaluated at the proposal (0 when outside the support).
  int stage = 0;
};

/// Plain Metropolis-Hastings transition at absolute time t, driven by
/// innovation(t) and uniform(t, 0).
StepResult standard_mh_step(const EvaluatedState& state, const FactorizedTarget& target,
                            const ProposalKernel& kernel, std::int64_t t,
                            const RandomnessSchedule& schedule);

struct StepMeta {
  bool accepted = false;
  int stage = 0;
  std::int64_t tour = -1;
};

struct ChainTrace {
  std::vector<ParamVector> states;
  std::vector<StepMeta> meta;

  std::size_t size() const noexcept { return states.size(); }
  double acceptance_rate() const;
  /// Column j of the sampled states.
  std::vector<double> coordinate(std::size_t j) const;
};

} // namespace dapref
