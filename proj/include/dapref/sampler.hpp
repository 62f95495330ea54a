#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "dapref/chain.hpp"
#include "dapref/delayed_acceptance.hpp"
#include "dapref/prefetch.hpp"

namespace dapref {

enum class Algorithm { mh, da, mh_prefetch, da_prefetch };

std::string to_string(Algorithm algo);
Algorithm parse_algorithm(const std::string& name);

inline bool is_delayed(Algorithm a) noexcept { return a == Algorithm::da || a == Algorithm::da_prefetch; }
inline bool is_prefetch(Algorithm a) noexcept {
  return a == Algorithm::mh_prefetch || a == Algorithm::da_prefetch;
}

struct SamplerConfig {
  Algorithm algorithm = Algorithm::mh;
  std::int64_t iterations = 1000;
  std::int64_t burnin = 0;
  /// Tour capacity and worker-pool size for the prefetching variants.
  std::size_t workers = 1;
  BranchPolicy branch;
  OrderPolicy order;
  /// Replace the proposal covariance by the scaled empirical covariance of
  /// the burn-in draws once burn-in ends.
  bool adapt_burnin = false;
};

struct SamplerStats {
  double wall_seconds = 0.0;
  /// Parallel rounds (tours) for the prefetching variants, else iterations.
  std::int64_t rounds = 0;
  std::int64_t steps = 0;
  std::int64_t expensive_evaluations = 0;
  double draws_per_iteration = 1.0;
};

struct SamplerResult {
  ChainTrace trace;
  SamplerStats stats;
  Eigen::MatrixXd final_covariance;
};

/// An evaluation failed mid-run; carries the post-burn-in draws kept so far.
class SamplingAborted : public EvaluationError {
public:
  SamplingAborted(const std::string& what, ChainTrace kept)
      : EvaluationError(what), partial(std::move(kept)) {}
  ChainTrace partial;
};

/// Runs burn-in plus `iterations` steps from `initial`. Time indices are
/// absolute: burn-in uses t = 1..burnin, the kept draws the rest. The trace
/// holds only post-burn-in draws. For a fixed seed every algorithm variant
/// that shares an accept rule yields the same trajectory regardless of
/// workers or branch policy.
SamplerResult run_sampler(const FactorizedTarget& target, const ProposalKernel& kernel,
                          const ParamVector& initial, std::uint64_t seed,
                          const SamplerConfig& config);

} // namespace dapref
