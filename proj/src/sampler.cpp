#include "dapref/sampler.hpp"

#include <chrono>
#include <limits>
#include <memory>
#include <numeric>
#include <optional>
#include <stdexcept>

#include "dapref/executor.hpp"

namespace dapref {

std::string to_string(Algorithm algo) {
  switch (algo) {
    case Algorithm::mh: return "mh";
    case Algorithm::da: return "da";
    case Algorithm::mh_prefetch: return "mh+prefetch";
    case Algorithm::da_prefetch: return "da+prefetch";
  }
  return "mh";
}

Algorithm parse_algorithm(const std::string& name) {
  if (name == "mh") return Algorithm::mh;
  if (name == "da") return Algorithm::da;
  if (name == "mh+prefetch") return Algorithm::mh_prefetch;
  if (name == "da+prefetch") return Algorithm::da_prefetch;
  throw std::invalid_argument("unknown algorithm '" + name + "'");
}

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

class ChainRunner {
public:
  ChainRunner(const FactorizedTarget& target, const ProposalKernel& kernel,
              const ParamVector& initial, std::uint64_t seed, const SamplerConfig& config)
      : target_(target), kernel_(kernel), config_(config),
        schedule_(seed, static_cast<int>(target.dimension), static_cast<int>(target.size())),
        stats_(target.size()), order_(target.size()) {
    target_.validate();
    if (config.iterations < 1) throw std::invalid_argument("iterations must be positive");
    if (config.burnin < 0) throw std::invalid_argument("burn-in must be nonnegative");
    if (config.workers < 1) throw std::invalid_argument("workers must be >= 1");
    if (config.order.refresh_every < 1) throw std::invalid_argument("refresh_every must be >= 1");
    if (static_cast<std::size_t>(initial.size()) != target.dimension ||
        kernel.dimension() != target.dimension) {
      throw std::invalid_argument("initial state / kernel dimension does not match the target");
    }
    if (!target.supports(initial)) throw std::invalid_argument("initial state outside the support");
    current_ = evaluate_state(target, initial);
    for (double v : current_.terms) {
      if (!std::isfinite(v)) throw std::invalid_argument("initial state has a vanishing factor");
    }
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    refresh_last_values();
    if (is_prefetch(config.algorithm)) pool_ = std::make_unique<WorkerPool>(config.workers);
    total_ = config.burnin + config.iterations;
  }

  SamplerResult run() {
    SamplerResult result;
    result.trace.states.reserve(static_cast<std::size_t>(config_.iterations));
    result.trace.meta.reserve(static_cast<std::size_t>(config_.iterations));
    trace_ = &result.trace;

    const auto start = std::chrono::steady_clock::now();
    try {
      if (is_prefetch(config_.algorithm)) {
        while (t_ < total_) prefetch_round();
      } else {
        while (t_ < total_) serial_step();
      }
    } catch (const EvaluationError& e) {
      throw SamplingAborted(e.what(), std::move(result.trace));
    }
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;

    result.stats.wall_seconds = elapsed.count();
    result.stats.rounds = rounds_;
    result.stats.steps = t_;
    result.stats.expensive_evaluations = expensive_evals_;
    result.stats.draws_per_iteration =
        rounds_ > 0 ? static_cast<double>(t_) / static_cast<double>(rounds_) : 1.0;
    result.final_covariance = kernel_.covariance();
    return result;
  }

private:
  void serial_step() {
    const std::int64_t t = t_ + 1;
    ++rounds_;
    if (config_.algorithm == Algorithm::mh) {
      StepResult r = standard_mh_step(current_, target_, kernel_, t, schedule_);
      if (r.stage > 0) ++expensive_evals_;
      commit(t, r.accepted, r.stage, std::move(r.next), rounds_);
      return;
    }
    ParamVector proposal = kernel_.propose(current_.x, schedule_.innovation(t));
    if (!target_.supports(proposal)) {
      commit(t, false, 0, current_, rounds_);
      return;
    }
    std::vector<double> terms(target_.size(), kNaN);
    const std::size_t cheap = target_.cheap_count();
    bool touched_expensive = false;
    const DaOutcome outcome = delayed_accept(
        order_.size(),
        [&](std::size_t s) {
          const std::size_t k = order_[s];
          if (s >= cheap) touched_expensive = true;
          terms[k] = evaluate_factor(target_, k, proposal);
          return terms[k] - current_.terms[k];
        },
        t, schedule_);
    if (touched_expensive) ++expensive_evals_;
    if (outcome.accepted) {
      commit(t, true, outcome.stages_evaluated, EvaluatedState{std::move(proposal), std::move(terms)},
             rounds_);
    } else {
      commit(t, false, outcome.stages_evaluated, current_, rounds_);
    }
  }

  void prefetch_round() {
    const bool delayed = config_.algorithm == Algorithm::da_prefetch;
    const int depth_limit = static_cast<int>(std::min<std::int64_t>(kMaxTreeDepth, next_boundary() - t_));
    BranchPolicy policy = config_.branch;
    // DA tours only branch on proposals that passed the cheap stages, so the
    // rate is conditional on reaching the expensive block.
    const std::int64_t tried = delayed ? reached_expensive_ : steps_seen_;
    if (policy.kind == BranchKind::observed_rate && tried > 0) {
      policy.alpha_obs = static_cast<double>(accepted_seen_) / static_cast<double>(tried);
    }

    Tour tour;
    if (delayed) {
      tour = build_tour_da(config_.workers, policy, target_, order_, current_, t_, kernel_, schedule_,
                           depth_limit);
    } else {
      TourOptions options;
      options.max_depth = depth_limit;
      options.target = &target_;
      tour = build_tour(config_.workers, policy, current_, t_, kernel_, schedule_, options);
    }

    std::vector<EvalTask> tasks;
    for (const auto& node : tour.nodes) {
      if (node.requires_evaluation()) tasks.push_back({node.index, node.state, t_ + node.depth});
    }
    const std::size_t cheap = delayed ? target_.cheap_count() : 0;
    const TaskEvaluator evaluator = [this, cheap](const EvalTask& task) {
      std::vector<double> terms(target_.size(), kNaN);
      for (std::size_t k = cheap; k < target_.size(); ++k) terms[k] = evaluate_factor(target_, k, task.state);
      return terms;
    };
    const EvaluationMap evaluations = evaluate_tour(tasks, evaluator, *pool_);
    expensive_evals_ += static_cast<std::int64_t>(tasks.size());
    ++rounds_;

    TourWalk walk = consume_tour(tour, evaluations, current_, t_, schedule_,
                                 delayed ? AcceptRule::delayed : AcceptRule::metropolis, order_);
    if (walk.steps.empty()) throw std::logic_error("tour advanced the chain by zero steps");
    for (auto& step : walk.steps) {
      commit(step.t, step.accepted, step.stage, std::move(step.state), rounds_);
    }
  }

  // First time index after which the sampling configuration may change.
  std::int64_t next_boundary() const {
    std::int64_t b = total_;
    if (is_delayed(config_.algorithm) && config_.order.kind != OrderKind::fixed) {
      const std::int64_t r = config_.order.refresh_every;
      b = std::min(b, (t_ / r + 1) * r);
    }
    if (config_.adapt_burnin && t_ < config_.burnin) b = std::min(b, config_.burnin);
    return b;
  }

  void commit(std::int64_t t, bool accepted, int stage, EvaluatedState next, std::int64_t tour) {
    if (t != t_ + 1) throw std::logic_error("chain steps out of order");
    t_ = t;
    current_ = std::move(next);
    ++steps_seen_;
    if (accepted) ++accepted_seen_;
    if (static_cast<std::size_t>(stage) > target_.cheap_count()) ++reached_expensive_;

    if (is_delayed(config_.algorithm)) {
      record_da_step(stats_, order_, stage, accepted);
      refresh_last_values();
      if (config_.order.kind != OrderKind::fixed && t % config_.order.refresh_every == 0) {
        order_ = reorder_factors(target_.factors, config_.order, stats_);
      }
    }

    if (t <= config_.burnin) {
      if (config_.adapt_burnin) burnin_states_.push_back(current_.x);
      if (t == config_.burnin && config_.adapt_burnin) adapt_kernel();
      return;
    }
    trace_->states.push_back(current_.x);
    trace_->meta.push_back({accepted, stage, tour});
  }

  void refresh_last_values() {
    for (std::size_t k = 0; k < stats_.size(); ++k) stats_[k].last_value = current_.terms[k];
  }

  void adapt_kernel() {
    const auto d = static_cast<Eigen::Index>(target_.dimension);
    const auto n = static_cast<Eigen::Index>(burnin_states_.size());
    if (n < 2 * d + 2) return;
    Eigen::MatrixXd samples(n, d);
    for (Eigen::Index i = 0; i < n; ++i) samples.row(i) = burnin_states_[static_cast<std::size_t>(i)];
    const Eigen::RowVectorXd mean = samples.colwise().mean();
    const Eigen::MatrixXd centered = samples.rowwise() - mean;
    Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(n - 1);
    cov = 0.5 * (cov + cov.transpose()).eval();
    cov *= 2.38 * 2.38 / static_cast<double>(d);
    cov += 1e-10 * Eigen::MatrixXd::Identity(d, d);
    try {
      kernel_ = ProposalKernel(cov);
    } catch (const std::invalid_argument&) {
      // keep the initial kernel when the burn-in covariance is degenerate
    }
    burnin_states_.clear();
  }

  const FactorizedTarget& target_;
  ProposalKernel kernel_;
  SamplerConfig config_;
  RandomnessSchedule schedule_;
  std::vector<FactorStats> stats_;
  std::vector<std::size_t> order_;
  EvaluatedState current_;
  std::unique_ptr<WorkerPool> pool_;
  ChainTrace* trace_ = nullptr;
  std::vector<ParamVector> burnin_states_;
  std::int64_t total_ = 0;
  std::int64_t t_ = 0;
  std::int64_t rounds_ = 0;
  std::int64_t expensive_evals_ = 0;
  std::int64_t steps_seen_ = 0;
  std::int64_t accepted_seen_ = 0;
  std::int64_t reached_expensive_ = 0;
};

} // namespace

SamplerResult run_sampler(const FactorizedTarget& target, const ProposalKernel& kernel,
                          const ParamVector& initial, std::uint64_t seed,
                          const SamplerConfig& config) {
  ChainRunner runner(target, kernel, initial, seed, config);
  return runner.run();
}

} // namespace dapref
