#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "dapref/chain.hpp"

namespace dapref {

/// Result of a sequential per-factor accept/reject.
struct DaOutcome {
  bool accepted = false;
  /// 1-based index of the last stage compared against its uniform.
  int stages_evaluated = 0;
  /// log rho_k for every stage actually evaluated, in stage order.
  std::vector<double> log_ratios;
};

/// Core delayed-acceptance loop. stage_log_ratio(s) is called lazily for
/// s = 0, 1, ... and compared against uniform(t, s); the loop stops at the
/// first failure.
DaOutcome delayed_accept(std::size_t stages,
                         const std::function<double(std::size_t)>& stage_log_ratio,
                         std::int64_t t, const RandomnessSchedule& schedule);

/// Convenience form over explicit factors, evaluating both endpoints.
DaOutcome delayed_accept(std::span<const Factor> factors, const ParamVector& current,
                         const ParamVector& proposed, std::int64_t t,
                         const RandomnessSchedule& schedule);

/// prod_k min(rho_k, 1). Throws std::invalid_argument on a nonpositive input.
double combined_acceptance_prob(std::span<const double> rho_values);

enum class OrderKind { fixed, by_success_rate, by_last_value };

struct OrderPolicy {
  OrderKind kind = OrderKind::fixed;
  std::int64_t refresh_every = 100;
};

/// Running statistics used by the reordering policies. Updated on the chain
/// thread only.
struct FactorStats {
  std::uint64_t attempts = 0;
  std::uint64_t successes = 0;
  /// Factor log term at the current chain state.
  double last_value = 0.0;

  double pass_rate() const noexcept {
    return attempts == 0 ? 1.0 : static_cast<double>(successes) / static_cast<double>(attempts);
  }
};

/// Permutation of factor indices. Factors never move across the
/// cheap/expensive boundary.
std::vector<std::size_t> reorder_factors(std::span<const Factor> factors, const OrderPolicy& policy,
                                         std::span<const FactorStats> stats);

/// Records one delayed-acceptance step in the statistics: stages 1..stage
/// were attempted, all but the last passed unless the move was accepted.
void record_da_step(std::span<FactorStats> stats, std::span<const std::size_t> order, int stage,
                    bool accepted);

/// Exact transition matrix of delayed-acceptance MH on a finite space.
/// The target is prod_k components[k] (up to normalisation); the proposal
/// ratio q(y,x)/q(x,y) is folded into the first factor.
/// Throws std::invalid_argument for malformed input and std::runtime_error
/// if a row fails to sum to one within 1e-12.
Eigen::MatrixXd exact_da_kernel(const Eigen::VectorXd& target,
                                const Eigen::MatrixXd& proposal,
                                const std::vector<Eigen::VectorXd>& components);

} // namespace dapref
