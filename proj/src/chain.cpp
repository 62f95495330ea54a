#include "dapref/chain.hpp"

#include <cmath>
#include <limits>

namespace dapref {

double Factor::log_ratio(const ParamVector& current, const ParamVector& proposed) const {
  return log_term(proposed) - log_term(current);
}

std::size_t FactorizedTarget::cheap_count() const noexcept {
  std::size_t n = 0;
  while (n < factors.size() && factors[n].cost == CostTier::cheap) ++n;
  return n;
}

double FactorizedTarget::reference_log_ratio(const ParamVector& current,
                                             const ParamVector& proposed) const {
  return reference_log_density(proposed) - reference_log_density(current);
}

void FactorizedTarget::validate() const {
  if (factors.empty()) throw std::invalid_argument("target has no factors");
  if (dimension == 0) throw std::invalid_argument("target dimension must be positive");
  bool seen_expensive = false;
  for (const auto& f : factors) {
    if (!f.log_term) throw std::invalid_argument("factor '" + f.id + "' has no evaluator");
    if (f.cost == CostTier::expensive) {
      seen_expensive = true;
    } else if (seen_expensive) {
      throw std::invalid_argument("cheap factor '" + f.id + "' follows an expensive factor");
    }
  }
}

double evaluate_factor(const FactorizedTarget& target, std::size_t k, const ParamVector& x) {
  const double v = target.factors[k].log_term(x);
  if (std::isnan(v) || v == std::numeric_limits<double>::infinity()) {
    throw EvaluationError("factor '" + target.factors[k].id + "' returned a non-finite value");
  }
  return v;
}

EvaluatedState evaluate_state(const FactorizedTarget& target, const ParamVector& x) {
  EvaluatedState s{x, std::vector<double>(target.size())};
  for (std::size_t k = 0; k < target.size(); ++k) s.terms[k] = evaluate_factor(target, k, x);
  return s;
}

ProposalKernel::ProposalKernel(Eigen::MatrixXd covariance) : covariance_(std::move(covariance)) {
  if (covariance_.rows() == 0 || covariance_.rows() != covariance_.cols()) {
    throw std::invalid_argument("proposal covariance must be square and non-empty");
  }
  if ((covariance_ - covariance_.transpose()).cwiseAbs().maxCoeff() >
      1e-12 * std::max(1.0, covariance_.cwiseAbs().maxCoeff())) {
    throw std::invalid_argument("proposal covariance is not symmetric");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(covariance_);
  if (llt.info() != Eigen::Success) {
    throw std::invalid_argument("proposal covariance is not positive definite");
  }
  lower_ = llt.matrixL();
}

ProposalKernel ProposalKernel::isotropic(std::size_t dimension, double scale) {
  const auto d = static_cast<Eigen::Index>(dimension);
  return ProposalKernel(Eigen::MatrixXd::Identity(d, d) * (scale * scale));
}

ParamVector ProposalKernel::propose(const ParamVector& state,
                                    const Eigen::VectorXd& innovation) const {
  if (state.size() != covariance_.rows() || innovation.size() != covariance_.rows()) {
    throw std::invalid_argument("proposal dimension mismatch");
  }
  // Explicit loop keeps the summation order fixed.
  ParamVector out = state;
  const Eigen::Index d = state.size();
  for (Eigen::Index i = 0; i < d; ++i) {
    double step = 0.0;
    for (Eigen::Index j = 0; j <= i; ++j) step += lower_(i, j) * innovation(j);
    out(i) += step;
  }
  return out;
}

double mh_log_ratio(std::span<const double> current_terms, std::span<const double> proposed_terms) {
  double sum = 0.0;
  for (std::size_t k = 0; k < current_terms.size(); ++k) {
    sum += proposed_terms[k] - current_terms[k];
  }
  return sum;
}

StepResult standard_mh_step(const EvaluatedState& state, const FactorizedTarget& target,
                            const ProposalKernel& kernel, std::int64_t t,
                            const RandomnessSchedule& schedule) {
  ParamVector proposal = kernel.propose(state.x, schedule.innovation(t));
  if (!target.supports(proposal)) return {state, false, 0};
  EvaluatedState candidate = evaluate_state(target, proposal);
  const double lr = mh_log_ratio(state.terms, candidate.terms);
  const int stage = static_cast<int>(target.size());
  if (passes(schedule.uniform(t, 0), lr)) return {std::move(candidate), true, stage};
  return {state, false, stage};
}

double ChainTrace::acceptance_rate() const {
  if (meta.empty()) return 0.0;
  std::size_t n = 0;
  for (const auto& m : meta) n += m.accepted ? 1 : 0;
  return static_cast<double>(n) / static_cast<double>(meta.size());
}

std::vector<double> ChainTrace::coordinate(std::size_t j) const {
  std::vector<double> out;
  out.reserve(states.size());
  for (const auto& s : states) out.push_back(s(static_cast<Eigen::Index>(j)));
  return out;
}

} // namespace dapref
