#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dapref/chain.hpp"

namespace dapref {

/// Binary-heap index into the decision tree: root 0, rejection child 2i+1,
/// acceptance child 2i+2. Depth is capped at 64, so 128 bits suffice.
using NodeIndex = unsigned __int128;

inline constexpr int kMaxTreeDepth = 64;

int node_depth(NodeIndex index) noexcept;
inline NodeIndex parent_of(NodeIndex index) noexcept { return (index - 1) / 2; }
inline bool is_rejection_node(NodeIndex index) noexcept { return index % 2 == 1; }
std::string to_string(NodeIndex index);

enum class Branch { accept, reject };

/// gamma of the accept child is parent_gamma * alpha, of the reject child
/// parent_gamma * (1 - alpha).
double child_gamma(double parent_gamma, double alpha, Branch branch) noexcept;

enum class BranchKind { static_half, observed_rate, uniform_aware, approx_ratio, capped_approx };

struct BranchPolicy {
  BranchKind kind = BranchKind::static_half;
  /// Running acceptance rate of the chain (observed_rate).
  double alpha_obs = 0.234;
  /// Cap in (0, 1] (capped_approx).
  double beta_cap = 1.0;
};

struct BranchContext {
  /// Pre-committed uniform that will decide this proposal.
  std::optional<double> uniform;
  /// Plug-in estimate of the (remaining) acceptance ratio.
  std::optional<double> ratio_estimate;
};

bool needs_ratio_estimate(const BranchPolicy& policy) noexcept;

/// Estimated acceptance probability of a proposal node. Throws
/// std::invalid_argument when the policy needs a context field that is
/// missing.
double estimate_alpha(const BranchPolicy& policy, const BranchContext& context);

/// A proposal node of the tour. gamma is the probability that the chain
/// reaches the decision point where this proposal is tested.
struct PrefetchNode {
  NodeIndex index = 0;
  int depth = 0;
  double gamma = 1.0;
  /// Proposed chain state carried by this node.
  ParamVector state;
  bool needs_eval = true;
  /// Rejected during construction by the cheap block (or the support check);
  /// never handed to a worker.
  bool cheap_rejected = false;
  /// 1-based stage of the cheap rejection, 0 for a support rejection.
  int reject_stage = 0;
  /// Estimated acceptance probability used to grow the tree below this node.
  double alpha = 0.0;
  /// Cheap factor terms at state (NaN elsewhere); empty if not computed.
  std::vector<double> cheap_terms;

  bool requires_evaluation() const noexcept { return needs_eval && !cheap_rejected; }
};

struct Tour {
  std::vector<PrefetchNode> nodes;
  std::size_t capacity = 0;

  const PrefetchNode* find(NodeIndex index) const;
  std::size_t evaluation_count() const;
  int depth() const;
  std::vector<NodeIndex> indices() const;
};

struct TourOptions {
  int max_depth = kMaxTreeDepth;
  /// Needed for the ratio-based policies and for support checks.
  const FactorizedTarget* target = nullptr;
};

/// Greedy tour construction: the root's proposal first, then repeatedly the
/// candidate proposal with the highest reach probability (ties: shallower,
/// then smaller index), until `capacity` proposals are selected.
Tour build_tour(std::size_t capacity, const BranchPolicy& policy, const EvaluatedState& root,
                std::int64_t t0, const ProposalKernel& kernel, const RandomnessSchedule& schedule,
                const TourOptions& options = {});

/// Tour construction with the cheap block resolved on the spot: every
/// selected proposal that fails a cheap stage is replaced by the next
/// proposal down its rejection branch without consuming a worker.
/// `order` is the current stage order (cheap factors first).
Tour build_tour_da(std::size_t capacity, const BranchPolicy& policy,
                   const FactorizedTarget& target, std::span<const std::size_t> order,
                   const EvaluatedState& root, std::int64_t t0, const ProposalKernel& kernel,
                   const RandomnessSchedule& schedule, int max_depth = kMaxTreeDepth);

/// Factor terms per evaluated node, indexed like target.factors. Entries not
/// computed by the workers are NaN.
using EvaluationMap = std::map<NodeIndex, std::vector<double>>;

enum class AcceptRule { metropolis, delayed };

struct WalkStep {
  std::int64_t t = 0;
  bool accepted = false;
  int stage = 0;
  EvaluatedState state;
};

struct TourWalk {
  std::vector<WalkStep> steps;
  std::size_t draws() const noexcept { return steps.size(); }
};

/// Replays the realized accept/reject path through the tour with the
/// committed uniforms. Stops at the first proposal the tour does not cover.
/// Throws EvaluationError when a cached rejection node disagrees with its
/// parent, or when a node in the tour has no evaluation.
TourWalk consume_tour(const Tour& tour, const EvaluationMap& evaluations,
                      const EvaluatedState& root, std::int64_t t0,
                      const RandomnessSchedule& schedule, AcceptRule rule,
                      std::span<const std::size_t> order = {});

} // namespace dapref
