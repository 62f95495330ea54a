#include "dapref/prefetch.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "dapref/delayed_acceptance.hpp"

namespace dapref {

int node_depth(NodeIndex index) noexcept {
  // depth d holds indices [2^d - 1, 2^(d+1) - 2]
  const NodeIndex v = index + 1;
  const auto hi = static_cast<std::uint64_t>(v >> 64);
  const auto lo = static_cast<std::uint64_t>(v);
  if (hi != 0) return 64 + (63 - std::countl_zero(hi));
  return 63 - std::countl_zero(lo);
}

std::string to_string(NodeIndex index) {
  if (index == 0) return "0";
  std::string s;
  while (index > 0) {
    s.push_back(static_cast<char>('0' + static_cast<int>(index % 10)));
    index /= 10;
  }
  std::reverse(s.begin(), s.end());
  return s;
}

double child_gamma(double parent_gamma, double alpha, Branch branch) noexcept {
  return branch == Branch::accept ? parent_gamma * alpha : parent_gamma * (1.0 - alpha);
}

bool needs_ratio_estimate(const BranchPolicy& policy) noexcept {
  return policy.kind == BranchKind::approx_ratio || policy.kind == BranchKind::capped_approx;
}

double estimate_alpha(const BranchPolicy& policy, const BranchContext& context) {
  switch (policy.kind) {
    case BranchKind::static_half:
      return 0.5;
    case BranchKind::observed_rate:
      return std::clamp(policy.alpha_obs, 0.0, 1.0);
    case BranchKind::uniform_aware:
      if (!context.uniform) throw std::invalid_argument("uniform-aware policy needs the stored uniform");
      // heuristic: a ratio whose quantile is uniform exceeds u with probability 1 - u
      return std::clamp(1.0 - *context.uniform, 0.0, 1.0);
    case BranchKind::approx_ratio:
      if (!context.uniform || !context.ratio_estimate) {
        throw std::invalid_argument("approx-ratio policy needs the stored uniform and a ratio estimate");
      }
      return *context.uniform < *context.ratio_estimate ? 1.0 : 0.0;
    case BranchKind::capped_approx:
      if (!context.ratio_estimate) {
        throw std::invalid_argument("capped-approx policy needs a ratio estimate");
      }
      return std::clamp(std::min(policy.beta_cap, *context.ratio_estimate), 0.0, 1.0);
  }
  return 0.5;
}

const PrefetchNode* Tour::find(NodeIndex index) const {
  for (const auto& n : nodes) {
    if (n.index == index) return &n;
  }
  return nullptr;
}

std::size_t Tour::evaluation_count() const {
  return static_cast<std::size_t>(
      std::count_if(nodes.begin(), nodes.end(), [](const auto& n) { return n.requires_evaluation(); }));
}

int Tour::depth() const {
  int d = 0;
  for (const auto& n : nodes) d = std::max(d, n.depth);
  return d;
}

std::vector<NodeIndex> Tour::indices() const {
  std::vector<NodeIndex> out;
  out.reserve(nodes.size());
  for (const auto& n : nodes) out.push_back(n.index);
  return out;
}

namespace {

struct Candidate {
  NodeIndex index;
  int depth;
  double gamma;
};

bool preferred(const Candidate& a, const Candidate& b) {
  if (a.gamma != b.gamma) return a.gamma > b.gamma;
  if (a.depth != b.depth) return a.depth < b.depth;
  return a.index < b.index;
}

class TourBuilder {
public:
  TourBuilder(std::size_t capacity, const BranchPolicy& policy, const EvaluatedState& root,
              std::int64_t t0, const ProposalKernel& kernel, const RandomnessSchedule& schedule,
              const FactorizedTarget* target, std::span<const std::size_t> order, bool delayed,
              int max_depth)
      : policy_(policy), root_(root), t0_(t0), kernel_(kernel), schedule_(schedule),
        target_(target), order_(order), delayed_(delayed),
        max_depth_(std::clamp(max_depth, 0, kMaxTreeDepth)) {
    if (capacity < 1) throw std::invalid_argument("tour capacity must be >= 1");
    tour_.capacity = capacity;
    if (needs_ratio_estimate(policy_) && (!target_ || !target_->expensive_ratio_estimate)) {
      throw std::invalid_argument("ratio-based branch policy needs a target with a ratio estimate");
    }
    if (target_) cheap_ = target_->cheap_count();
  }

  Tour run() {
    std::vector<Candidate> candidates;
    if (max_depth_ >= 1) candidates.push_back({2, 1, 1.0});
    std::size_t evaluations = 0;
    while (evaluations < tour_.capacity && !candidates.empty()) {
      auto best = candidates.begin();
      for (auto it = candidates.begin() + 1; it != candidates.end(); ++it) {
        if (preferred(*it, *best)) best = it;
      }
      const Candidate pick = *best;
      candidates.erase(best);
      if (place(pick, candidates)) ++evaluations;
    }
    return std::move(tour_);
  }

private:
  // State of decision node i: rejection nodes share their parent's value.
  const PrefetchNode* decision_node(NodeIndex i) const {
    while (i != 0 && is_rejection_node(i)) i = parent_of(i);
    if (i == 0) return nullptr;
    const PrefetchNode* n = tour_.find(i);
    if (!n) throw std::logic_error("tour node selected before its parent");
    return n;
  }

  const ParamVector& decision_state(NodeIndex i) const {
    const PrefetchNode* n = decision_node(i);
    return n ? n->state : root_.x;
  }

  const std::vector<double>& decision_terms(NodeIndex i) const {
    const PrefetchNode* n = decision_node(i);
    return n ? n->cheap_terms : root_.terms;
  }

  std::vector<double> cheap_terms_at(const ParamVector& x) const {
    std::vector<double> terms(target_->size(), std::numeric_limits<double>::quiet_NaN());
    for (std::size_t k = 0; k < cheap_; ++k) terms[k] = evaluate_factor(*target_, k, x);
    return terms;
  }

  double cheap_log_ratio(const std::vector<double>& parent, const std::vector<double>& here) const {
    double lr = 0.0;
    for (std::size_t k = 0; k < cheap_; ++k) lr += here[k] - parent[k];
    return lr;
  }

  // Returns true when the placed chain ends in a node that needs a worker.
  bool place(Candidate c, std::vector<Candidate>& candidates) {
    while (true) {
      const NodeIndex parent = parent_of(c.index);
      const std::int64_t t = t0_ + c.depth;
      PrefetchNode node;
      node.index = c.index;
      node.depth = c.depth;
      node.gamma = c.gamma;
      node.state = kernel_.propose(decision_state(parent), schedule_.innovation(t));

      bool rejected = false;
      if (target_ && !target_->supports(node.state)) {
        rejected = true;
        node.reject_stage = 0;
      } else if (delayed_ || needs_ratio_estimate(policy_)) {
        node.cheap_terms = cheap_terms_at(node.state);
        if (delayed_) {
          const auto& parent_terms = decision_terms(parent);
          for (std::size_t s = 0; s < cheap_; ++s) {
            const std::size_t k = order_[s];
            if (!passes(schedule_.uniform(t, static_cast<int>(s)),
                        node.cheap_terms[k] - parent_terms[k])) {
              rejected = true;
              node.reject_stage = static_cast<int>(s + 1);
              break;
            }
          }
        }
      }

      if (rejected) {
        node.cheap_rejected = true;
        node.alpha = 0.0;
        tour_.nodes.push_back(std::move(node));
        // follow the rejection branch: next proposal from sibling 2i+1
        if (c.depth + 1 > max_depth_) return false;
        c = {c.index * 2, c.depth + 1, c.gamma};
        continue;
      }

      node.alpha = branch_alpha(node, parent, t);
      const double alpha = node.alpha;
      tour_.nodes.push_back(std::move(node));
      if (c.depth + 1 <= max_depth_) {
        candidates.push_back({c.index * 2, c.depth + 1, child_gamma(c.gamma, alpha, Branch::reject)});
        candidates.push_back({c.index * 2 + 2, c.depth + 1, child_gamma(c.gamma, alpha, Branch::accept)});
      }
      return true;
    }
  }

  double branch_alpha(const PrefetchNode& node, NodeIndex parent, std::int64_t t) const {
    // stage whose uniform settles the outcome still unknown at this point
    const std::size_t stages = target_ ? target_->size() : 1;
    const std::size_t decisive = delayed_ ? cheap_ : 0;
    if (delayed_ && decisive >= stages) return 1.0;  // cheap block is the whole ratio

    BranchContext ctx;
    if (decisive < static_cast<std::size_t>(schedule_.stages())) {
      ctx.uniform = schedule_.uniform(t, static_cast<int>(decisive));
    }
    if (needs_ratio_estimate(policy_)) {
      const double cheap_lr = cheap_log_ratio(decision_terms(parent), node.cheap_terms);
      const ParamVector& from = decision_state(parent);
      double est = target_->expensive_ratio_estimate(from, node.state, cheap_lr);
      if (!delayed_) est += cheap_lr;
      ctx.ratio_estimate = std::isnan(est) ? 0.0 : std::exp(std::min(est, 700.0));
    }
    return estimate_alpha(policy_, ctx);
  }

  Tour tour_;
  const BranchPolicy& policy_;
  const EvaluatedState& root_;
  std::int64_t t0_;
  const ProposalKernel& kernel_;
  const RandomnessSchedule& schedule_;
  const FactorizedTarget* target_;
  std::span<const std::size_t> order_;
  bool delayed_;
  int max_depth_;
  std::size_t cheap_ = 0;
};

} // namespace

Tour build_tour(std::size_t capacity, const BranchPolicy& policy, const EvaluatedState& root,
                std::int64_t t0, const ProposalKernel& kernel, const RandomnessSchedule& schedule,
                const TourOptions& options) {
  TourBuilder builder(capacity, policy, root, t0, kernel, schedule, options.target, {}, false,
                      options.max_depth);
  return builder.run();
}

Tour build_tour_da(std::size_t capacity, const BranchPolicy& policy,
                   const FactorizedTarget& target, std::span<const std::size_t> order,
                   const EvaluatedState& root, std::int64_t t0, const ProposalKernel& kernel,
                   const RandomnessSchedule& schedule, int max_depth) {
  if (order.size() != target.size()) throw std::invalid_argument("stage order does not cover the target");
  for (std::size_t s = 0; s < target.cheap_count(); ++s) {
    if (target.factors[order[s]].cost != CostTier::cheap) {
      throw std::invalid_argument("stage order puts an expensive factor in the cheap block");
    }
  }
  TourBuilder builder(capacity, policy, root, t0, kernel, schedule, &target, order, true, max_depth);
  return builder.run();
}

namespace {

bool same_terms(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (std::isnan(a[k]) && std::isnan(b[k])) continue;
    if (a[k] != b[k]) return false;
  }
  return true;
}

void check_rejection_entries(const EvaluationMap& evaluations, const EvaluatedState& root) {
  for (const auto& [index, terms] : evaluations) {
    if (index == 0 || !is_rejection_node(index)) continue;
    NodeIndex anc = index;
    while (anc != 0 && is_rejection_node(anc)) anc = parent_of(anc);
    const std::vector<double>* expected = &root.terms;
    if (anc != 0) {
      auto it = evaluations.find(anc);
      if (it == evaluations.end()) continue;
      expected = &it->second;
    }
    if (!same_terms(terms, *expected)) {
      throw EvaluationError("inconsistent cache: rejection node " + to_string(index) +
                            " differs from its parent");
    }
  }
}

} // namespace

TourWalk consume_tour(const Tour& tour, const EvaluationMap& evaluations,
                      const EvaluatedState& root, std::int64_t t0,
                      const RandomnessSchedule& schedule, AcceptRule rule,
                      std::span<const std::size_t> order) {
  check_rejection_entries(evaluations, root);

  TourWalk walk;
  EvaluatedState current = root;
  NodeIndex at = 0;
  while (true) {
    const NodeIndex proposal = at * 2 + 2;
    const PrefetchNode* node = tour.find(proposal);
    if (!node) break;
    const std::int64_t t = t0 + node->depth;

    if (node->cheap_rejected) {
      walk.steps.push_back({t, false, node->reject_stage, current});
      at = proposal - 1;
      continue;
    }

    auto it = evaluations.find(proposal);
    if (it == evaluations.end()) {
      throw EvaluationError("tour node " + to_string(proposal) + " has no evaluation");
    }
    std::vector<double> terms = it->second;
    for (std::size_t k = 0; k < node->cheap_terms.size() && k < terms.size(); ++k) {
      if (std::isnan(terms[k])) terms[k] = node->cheap_terms[k];
    }

    bool accepted = false;
    int stage = 0;
    if (rule == AcceptRule::metropolis) {
      const double lr = mh_log_ratio(current.terms, terms);
      if (std::isnan(lr)) throw EvaluationError("missing factor value at node " + to_string(proposal));
      accepted = passes(schedule.uniform(t, 0), lr);
      stage = static_cast<int>(terms.size());
    } else {
      const auto outcome = delayed_accept(
          order.size(),
          [&](std::size_t s) { return terms[order[s]] - current.terms[order[s]]; }, t, schedule);
      accepted = outcome.accepted;
      stage = outcome.stages_evaluated;
    }

    if (accepted) {
      current = EvaluatedState{node->state, std::move(terms)};
      at = proposal;
    } else {
      at = proposal - 1;
    }
    walk.steps.push_back({t, accepted, stage, current});
  }
  return walk;
}

} // namespace dapref
