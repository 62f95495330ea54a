#include "dapref/delayed_acceptance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace dapref {

DaOutcome delayed_accept(std::size_t stages,
                         const std::function<double(std::size_t)>& stage_log_ratio,
                         std::int64_t t, const RandomnessSchedule& schedule) {
  if (stages == 0) throw std::invalid_argument("delayed acceptance needs at least one stage");
  if (stages > static_cast<std::size_t>(schedule.stages())) {
    throw std::invalid_argument("more stages than the schedule provides uniforms for");
  }
  DaOutcome out;
  out.log_ratios.reserve(stages);
  for (std::size_t s = 0; s < stages; ++s) {
    const double lr = stage_log_ratio(s);
    if (std::isnan(lr) || lr == std::numeric_limits<double>::infinity()) {
      throw EvaluationError("non-finite log ratio at stage " + std::to_string(s + 1));
    }
    out.log_ratios.push_back(lr);
    out.stages_evaluated = static_cast<int>(s + 1);
    if (!passes(schedule.uniform(t, static_cast<int>(s)), lr)) return out;
  }
  out.accepted = true;
  return out;
}

DaOutcome delayed_accept(std::span<const Factor> factors, const ParamVector& current,
                         const ParamVector& proposed, std::int64_t t,
                         const RandomnessSchedule& schedule) {
  return delayed_accept(
      factors.size(),
      [&](std::size_t s) { return factors[s].log_ratio(current, proposed); }, t, schedule);
}

double combined_acceptance_prob(std::span<const double> rho_values) {
  double p = 1.0;
  for (double rho : rho_values) {
    if (!(rho > 0.0)) throw std::invalid_argument("acceptance factors must be positive");
    p *= std::min(rho, 1.0);
  }
  return p;
}

std::vector<std::size_t> reorder_factors(std::span<const Factor> factors, const OrderPolicy& policy,
                                         std::span<const FactorStats> stats) {
  std::vector<std::size_t> order(factors.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (policy.kind == OrderKind::fixed) return order;
  if (stats.size() != factors.size()) {
    throw std::invalid_argument("factor statistics do not cover every factor");
  }

  auto tier = [&](std::size_t i) { return factors[i].cost == CostTier::cheap ? 0 : 1; };
  auto less = [&](std::size_t a, std::size_t b) {
    if (tier(a) != tier(b)) return tier(a) < tier(b);
    if (policy.kind == OrderKind::by_success_rate) {
      return stats[a].pass_rate() < stats[b].pass_rate();  // least successful first
    }
    return stats[a].last_value > stats[b].last_value;  // highest value first
  };
  std::stable_sort(order.begin(), order.end(), less);
  return order;
}

void record_da_step(std::span<FactorStats> stats, std::span<const std::size_t> order, int stage,
                    bool accepted) {
  for (int s = 0; s < stage; ++s) {
    auto& st = stats[order[static_cast<std::size_t>(s)]];
    ++st.attempts;
    if (accepted || s + 1 < stage) ++st.successes;
  }
}

Eigen::MatrixXd exact_da_kernel(const Eigen::VectorXd& target,
                                const Eigen::MatrixXd& proposal,
                                const std::vector<Eigen::VectorXd>& components) {
  const Eigen::Index n = target.size();
  if (n == 0 || n > 100) throw std::invalid_argument("state space size must be in [1, 100]");
  if (proposal.rows() != n || proposal.cols() != n) {
    throw std::invalid_argument("proposal matrix does not match the target");
  }
  if (components.empty()) throw std::invalid_argument("factor split is empty");

  Eigen::VectorXd product = Eigen::VectorXd::Ones(n);
  for (const auto& c : components) {
    if (c.size() != n || (c.array() <= 0.0).any()) {
      throw std::invalid_argument("factor components must be positive vectors of target size");
    }
    product = product.cwiseProduct(c);
  }
  // the product only needs to be proportional to the target
  const Eigen::VectorXd ratio = product.cwiseQuotient(target);
  if ((ratio.array() - ratio(0)).abs().maxCoeff() > 1e-10 * ratio(0)) {
    throw std::invalid_argument("factor split does not reproduce the target");
  }

  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index x = 0; x < n; ++x) {
    double off = 0.0;
    for (Eigen::Index y = 0; y < n; ++y) {
      if (y == x || proposal(x, y) == 0.0) continue;
      double accept = 1.0;
      for (std::size_t k = 0; k < components.size(); ++k) {
        double rho = components[k](y) / components[k](x);
        if (k == 0) rho *= proposal(y, x) / proposal(x, y);
        accept *= std::min(rho, 1.0);
      }
      P(x, y) = proposal(x, y) * accept;
      off += P(x, y);
    }
    P(x, x) = 1.0 - off;
  }
  for (Eigen::Index x = 0; x < n; ++x) {
    if (std::abs(P.row(x).sum() - 1.0) > 1e-12 || P(x, x) < -1e-12) {
      throw std::runtime_error("transition matrix row does not sum to one");
    }
  }
  return P;
}

} // namespace dapref
