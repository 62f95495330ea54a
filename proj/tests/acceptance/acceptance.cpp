// Acceptance suite: one PASS/FAIL line per criterion. Pass criterion numbers
// as arguments to run a subset; the exit status is nonzero if any line fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <boost/math/distributions/beta.hpp>

#include "../support/oracles.hpp"
#include "dapref/delayed_acceptance.hpp"
#include "dapref/diagnostics.hpp"
#include "dapref/experiment.hpp"
#include "dapref/models/mixture.hpp"
#include "dapref/models/normal_normal.hpp"
#include "dapref/prefetch.hpp"
#include "dapref/sampler.hpp"

using namespace dapref;

namespace {

// pinned tolerances
constexpr double kStationarityTol = 1e-10;
constexpr double kBalanceTol = 1e-12;
constexpr double kKsLevel = 0.01;
constexpr double kNnAcceptLo = 0.07;
constexpr double kNnAcceptHi = 0.20;
constexpr double kBetaBinSoft = 0.07;
constexpr double kPeskunRelTol = 1e-12;
constexpr double kIatRelTol = 0.15;
constexpr double kLogisticSoft = 0.05;
constexpr double kMixtureLo = 0.3;
constexpr double kMixtureHi = 0.6;
constexpr double kMixtureSoft = 0.1;
constexpr double kMixtureSpeedupSoft = 1.2;
constexpr double kFisherTol = 1e-6;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string fmt3(double v) { return fmt("%.3f", v); }

std::string soft(bool ok) { return ok ? "met" : "missed"; }

ExperimentResult run(ExperimentConfig c) { return run_experiment(c); }

// KS p-value with the sample size discounted by the autocorrelation time.
double ks_p(const ChainTrace& trace, const std::function<double(double)>& cdf) {
  const std::vector<double> x = trace.coordinate(0);
  const double n_eff = effective_sample_size(x);
  return oracle::ks_pvalue(oracle::ks_statistic(x, cdf), n_eff);
}

Outcome stationarity() {
  std::mt19937_64 rng(20150101);
  std::uniform_int_distribution<int> states(2, 20);
  std::uniform_int_distribution<int> splits(2, 4);
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int cases = 12;
  double worst_stat = 0.0;
  double worst_balance = 0.0;
  for (int c = 0; c < cases; ++c) {
    const int n = states(rng);
    const int m = splits(rng);
    std::vector<Eigen::VectorXd> comps;
    Eigen::VectorXd target = Eigen::VectorXd::Ones(n);
    for (int k = 0; k < m; ++k) {
      Eigen::VectorXd v(n);
      for (int i = 0; i < n; ++i) v(i) = std::exp(1.5 * z(rng));
      comps.push_back(v);
      target = target.cwiseProduct(v);
    }
    target /= target.sum();
    Eigen::MatrixXd q(n, n);
    if (c % 2 == 0) {
      // dense asymmetric proposal
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) q(i, j) = 0.05 + u(rng);
        q.row(i) /= q.row(i).sum();
      }
    } else {
      // lazy nearest-neighbour walk on a cycle
      q.setZero();
      for (int i = 0; i < n; ++i) {
        q(i, (i + 1) % n) += 0.4;
        q(i, (i + n - 1) % n) += 0.4;
        q(i, i) += 0.2;
      }
    }
    const Eigen::MatrixXd p = exact_da_kernel(target, q, comps);
    const Eigen::RowVectorXd pi = target.transpose();
    worst_stat = std::max(worst_stat, (pi * p - pi).cwiseAbs().maxCoeff());
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        worst_balance = std::max(worst_balance, std::abs(target(i) * p(i, j) - target(j) * p(j, i)));
      }
    }
  }
  return {worst_stat <= kStationarityTol && worst_balance <= kBalanceTol,
          std::to_string(cases) + " targets, max |piP - pi| = " + fmt("%.2e", worst_stat) +
              ", max balance gap = " + fmt("%.2e", worst_balance)};
}

Outcome normal_normal_fit() {
  const auto [mean, var] = models::nn_posterior_params({3.0, 10.0});
  const auto cdf = [mean, var](double x) { return oracle::normal_cdf(x, mean, std::sqrt(var)); };
  int passing = 0;
  double acc_sum = 0.0;
  std::string ps;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    ExperimentConfig c;
    c.model = "normal-normal";
    c.algo = "da";
    c.iters = 10000;
    c.burnin = 1000;
    c.seed = seed;
    const auto r = run(c);
    const double p = ks_p(r.sampler.trace, cdf);
    if (p >= kKsLevel) ++passing;
    acc_sum += r.report.acceptance_rate;
    ps += (ps.empty() ? "" : ",") + fmt("%.3f", p);
  }
  const double acc = acc_sum / 5.0;
  const bool window = acc >= kNnAcceptLo && acc <= kNnAcceptHi;
  return {passing >= 4 && window, "KS p-values {" + ps + "}, " + std::to_string(passing) +
                                      "/5 pass; mean acceptance " + fmt3(acc) + " at scale " +
                                      fmt("%.1f", default_scale("normal-normal")) + " (window " +
                                      (window ? "met" : "missed") + ")"};
}

Outcome beta_binomial_split() {
  const std::vector<int> parts{10, 20, 50, 100};
  const std::vector<double> paper{0.29, 0.25, 0.12, 0.09};
  const boost::math::beta_distribution<double> post(39.5, 68.5);
  const auto cdf = [&](double x) { return x <= 0 ? 0.0 : x >= 1 ? 1.0 : boost::math::cdf(post, x); };
  std::vector<double> acc;
  bool ks_ok = true;
  bool soft_ok = true;
  std::string detail = "acceptance";
  for (std::size_t i = 0; i < parts.size(); ++i) {
    ExperimentConfig c;
    c.model = "beta-binomial";
    c.algo = "da";
    c.parts = parts[i];
    c.iters = 20000;
    c.burnin = 1000;
    c.seed = 7;
    const auto r = run(c);
    acc.push_back(r.report.acceptance_rate);
    const double p = ks_p(r.sampler.trace, cdf);
    ks_ok = ks_ok && p >= kKsLevel;
    soft_ok = soft_ok && std::abs(acc.back() - paper[i]) <= kBetaBinSoft;
    detail += " m=" + std::to_string(parts[i]) + ":" + fmt3(acc.back()) + "(KS p " + fmt3(p) + ")";
  }
  bool monotone = true;
  for (std::size_t i = 1; i < acc.size(); ++i) monotone = monotone && acc[i] <= acc[i - 1];
  detail += "; monotone " + std::string(monotone ? "yes" : "no") + "; scale " +
            fmt("%.2f", default_scale("beta-binomial")) + "; soft +-0.07 " + soft(soft_ok);
  return {monotone && ks_ok, detail};
}

Outcome worked_tour() {
  const auto target = oracle::split_gaussian();
  const auto schedule = make_schedule(1, 1, 2);
  const auto root = evaluate_state(target, ParamVector::Zero(1));
  BranchPolicy policy;
  policy.kind = BranchKind::observed_rate;
  policy.alpha_obs = 0.234;
  const Tour tour = build_tour(8, policy, root, 0, ProposalKernel::isotropic(1, 1.0), schedule);
  const std::vector<int> want_idx{2, 4, 8, 16, 32, 64, 6, 128};
  const std::vector<double> want_gamma{1.0, 0.77, 0.59, 0.45, 0.34, 0.26, 0.23, 0.20};
  bool ok = tour.nodes.size() == want_idx.size();
  std::string idx;
  std::string gam;
  for (std::size_t i = 0; i < tour.nodes.size(); ++i) {
    const double g = std::round(tour.nodes[i].gamma * 100.0) / 100.0;
    idx += (i ? "," : "") + to_string(tour.nodes[i].index);
    gam += (i ? "," : "") + fmt("%.2f", g);
    if (i < want_idx.size()) {
      ok = ok && tour.nodes[i].index == static_cast<NodeIndex>(want_idx[i]) && std::abs(g - want_gamma[i]) < 1e-9;
    }
  }
  return {ok, "indices {" + idx + "}, gamma {" + gam + "}"};
}

Outcome static_prefetch() {
  const auto target = oracle::split_gaussian();
  const auto kernel = ProposalKernel::isotropic(1, 2.0);
  bool shape = true;
  std::size_t min_draws = 100;
  std::size_t max_draws = 0;
  const int tours = 1000;
  for (int s = 0; s < tours; ++s) {
    const auto schedule = make_schedule(static_cast<std::uint64_t>(s) + 1, 1, 2);
    const auto root = evaluate_state(target, ParamVector::Constant(1, 0.1 * (s % 20) - 1.0));
    const Tour tour = build_tour(7, BranchPolicy{}, root, 3 * s, kernel, schedule);
    std::vector<int> idx;
    for (auto i : tour.indices()) idx.push_back(static_cast<int>(i));
    shape = shape && idx == std::vector<int>{2, 4, 6, 8, 10, 12, 14};
    EvaluationMap evals;
    for (const auto& n : tour.nodes) evals[n.index] = evaluate_state(target, n.state).terms;
    const auto draws = consume_tour(tour, evals, root, 3 * s, schedule, AcceptRule::metropolis).draws();
    min_draws = std::min(min_draws, draws);
    max_draws = std::max(max_draws, draws);
  }
  return {shape && min_draws == 3 && max_draws == 3,
          std::to_string(tours) + " tours, indices {2,4,...,14} " + (shape ? "every time" : "NOT always") +
              ", draws in [" + std::to_string(min_draws) + ", " + std::to_string(max_draws) + "]"};
}

Outcome exactness() {
  struct Case {
    std::string model;
    std::int64_t iters;
  };
  const std::vector<Case> cases{{"normal-normal", 5000}, {"beta-binomial", 5000}, {"logistic", 2000}, {"mixture", 400}};
  int compared = 0;
  int mismatches = 0;
  std::string bad;
  for (const auto& cs : cases) {
    ExperimentConfig base;
    base.model = cs.model;
    base.iters = cs.iters;
    base.burnin = 100;
    base.seed = 42;
    if (cs.model == "beta-binomial") base.parts = 20;
    const ModelSetup setup = build_model(base);
    for (const auto& [serial, parallel] : {std::pair{"mh", "mh+prefetch"}, std::pair{"da", "da+prefetch"}}) {
      ExperimentConfig c = base;
      c.algo = serial;
      const auto ref = run_sampler(setup.target, setup.kernel, setup.initial, c.seed, sampler_config(c));
      for (const auto* algo : {serial, parallel}) {
        for (const auto* policy : {"static-half", "observed-rate"}) {
          if (algo == serial && std::string(policy) != "static-half") continue;
          for (std::size_t w : {1, 2, 4, 8}) {
            ExperimentConfig v = c;
            v.algo = algo;
            v.policy = policy;
            v.workers = w;
            const auto r = run_sampler(setup.target, setup.kernel, setup.initial, v.seed, sampler_config(v));
            ++compared;
            if (!oracle::same_trace(ref.trace, r.trace)) {
              ++mismatches;
              bad += " " + cs.model + "/" + algo + "/" + policy + "/w" + std::to_string(w);
            }
          }
        }
      }
    }
  }
  return {mismatches == 0, std::to_string(compared) + " traces compared against the serial chain, " +
                               std::to_string(mismatches) + " differ" + bad};
}

Outcome peskun() {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> len(1, 6);
  std::normal_distribution<double> z(0.0, 1.5);
  int violations = 0;
  const int cases = 10000;
  for (int c = 0; c < cases; ++c) {
    std::vector<double> rho(static_cast<std::size_t>(len(rng)));
    double prod = 1.0;
    for (auto& r : rho) {
      r = std::exp(z(rng));
      prod *= r;
    }
    const double lhs = combined_acceptance_prob(rho);
    const double rhs = std::min(prod, 1.0);
    if (lhs > rhs * (1.0 + kPeskunRelTol)) ++violations;
  }
  return {violations == 0, std::to_string(cases) + " factor vectors, " + std::to_string(violations) + " violations"};
}

Outcome calibration() {
  bool ok = true;
  std::string detail;
  for (double rho : {0.3, 0.5, 0.8}) {
    const double want = (1 + rho) / (1 - rho);
    const double tau = integrated_autocorrelation_time(oracle::ar1(rho, 100000, 1234));
    ok = ok && std::abs(tau - want) <= kIatRelTol * want;
    detail += (detail.empty() ? "" : ", ") + std::string("rho ") + fmt("%.1f", rho) + ": tau " + fmt("%.2f", tau) +
              " vs " + fmt("%.2f", want);
  }
  return {ok, detail};
}

Outcome logistic_regime() {
  ExperimentConfig base;
  base.model = "logistic";
  base.n = 1000;
  base.p = 5;
  base.iters = 20000;
  base.burnin = 2000;
  base.seed = 11;
  base.algo = "mh";
  const double acc_mh = run(base).report.acceptance_rate;
  base.algo = "da";
  const double acc_da = run(base).report.acceptance_rate;
  const bool acc_hard = acc_da < acc_mh;
  const bool acc_soft = std::abs(acc_da - 0.2062) <= kLogisticSoft && std::abs(acc_mh - 0.2577) <= kLogisticSoft;

  ExperimentConfig bench = base;
  bench.algo = "da+prefetch";
  bench.policy = "observed-rate";
  const std::vector<std::uint64_t> costs{0, 30, 300};
  const auto rows = bench_sweep(bench, costs, {8}, {1, 2, 3, 4, 5});
  int wins = 0;
  std::map<std::uint64_t, double> mean_rg;
  std::string top;
  for (const auto& r : rows) {
    mean_rg[r.cost_c] += r.rg / 5.0;
    if (r.cost_c == costs.back()) {
      if (r.rg > 1.0) ++wins;
      top += (top.empty() ? "" : ",") + fmt("%.2f", r.rg);
    }
  }
  std::string trend;
  for (const auto& [cost, rg] : mean_rg) trend += " C=" + std::to_string(cost) + ":" + fmt("%.2f", rg);
  return {acc_hard && wins >= 3,
          "acceptance DA " + fmt3(acc_da) + " vs MH " + fmt3(acc_mh) + " (soft +-0.05 " + soft(acc_soft) +
              "); RG at C=" + std::to_string(costs.back()) + ", 8 workers {" + top + "}, " + std::to_string(wins) +
              "/5 above 1; mean RG" + trend};
}

Outcome mixture_regime() {
  ExperimentConfig base;
  base.model = "mixture";
  base.n = 1000;
  base.iters = 20000;
  base.burnin = 1000;
  base.seed = 3;
  base.algo = "mh";
  const auto mh = run(base).report;
  base.algo = "da";
  const auto da = run(base).report;
  base.algo = "da+prefetch";
  base.workers = 8;
  base.policy = "observed-rate";
  const auto pf = run(base).report;

  const bool acc_hard = da.acceptance_rate < mh.acceptance_rate && da.acceptance_rate >= kMixtureLo &&
                        da.acceptance_rate <= kMixtureHi && mh.acceptance_rate >= kMixtureLo &&
                        mh.acceptance_rate <= kMixtureHi;
  const bool acc_soft = std::abs(da.acceptance_rate - 0.43) <= kMixtureSoft &&
                        std::abs(mh.acceptance_rate - 0.50) <= kMixtureSoft;
  const double speedup = mh.wall_seconds / da.wall_seconds;
  const bool time_hard = da.wall_seconds < mh.wall_seconds;
  const bool prefetch_hard = pf.wall_seconds < da.wall_seconds;

  double fisher_err = 0.0;
  for (double sd : {0.5, 1.0, 2.0, 5.0}) {
    models::MixtureParams psi;
    psi.weights = Eigen::VectorXd::Ones(1);
    psi.means = Eigen::VectorXd::Constant(1, 1.0);
    psi.sds = Eigen::VectorXd::Constant(1, sd);
    const Eigen::MatrixXd info = models::fisher_info(psi);
    Eigen::Matrix2d want = Eigen::Matrix2d::Zero();
    want(0, 0) = 1.0 / (sd * sd);
    want(1, 1) = 2.0 / (sd * sd);
    fisher_err = std::max(fisher_err, (info - want).cwiseAbs().maxCoeff());
  }
  const bool fisher_ok = fisher_err <= kFisherTol;

  return {acc_hard && time_hard && prefetch_hard && fisher_ok,
          "acceptance DA " + fmt3(da.acceptance_rate) + " vs MH " + fmt3(mh.acceptance_rate) + " (soft " +
              soft(acc_soft) + "); wall MH " + fmt("%.2f", mh.wall_seconds) + "s, DA " + fmt("%.2f", da.wall_seconds) +
              "s (ratio " + fmt("%.2f", speedup) + ", soft >=1.2 " + soft(speedup >= kMixtureSpeedupSoft) +
              "); DA+prefetch 8 workers " + fmt("%.2f", pf.wall_seconds) + "s (" +
              (prefetch_hard ? "faster" : "NOT faster") + " than DA, " + std::to_string(std::thread::hardware_concurrency()) +
              " hardware threads); Fisher k=1 max error " + fmt("%.1e", fisher_err)};
}

Outcome cost_neutrality() {
  int identical = 0;
  int runs = 0;
  std::string timing;
  for (const auto* algo : {"mh", "da"}) {
    ExperimentConfig c;
    c.model = "logistic";
    c.algo = algo;
    c.iters = 120;
    c.burnin = 0;
    c.seed = 5;
    c.cost_c = 0;
    const auto cheap = run(c);
    c.cost_c = 100000;
    const auto costly = run(c);
    ++runs;
    if (oracle::same_trace(cheap.sampler.trace, costly.sampler.trace)) ++identical;
    timing += std::string(" ") + algo + ": " + fmt("%.3f", cheap.report.wall_seconds) + "s vs " +
              fmt("%.1f", costly.report.wall_seconds) + "s";
  }
  return {identical == runs, std::to_string(identical) + "/" + std::to_string(runs) +
                                 " traces bit-identical between C=0 and C=1e5;" + timing};
}

struct Criterion {
  const char* name;
  Outcome (*fn)();
};

const std::map<int, Criterion>& criteria() {
  static const std::map<int, Criterion> all{
      {1, {"stationarity of the exact delayed-acceptance kernel", stationarity}},
      {2, {"normal-normal posterior fit", normal_normal_fit}},
      {3, {"beta-binomial splitting", beta_binomial_split}},
      {4, {"worked eight-core tour", worked_tour}},
      {5, {"static prefetch with seven cores", static_prefetch}},
      {6, {"exactness and determinism across workers", exactness}},
      {7, {"Peskun domination", peskun}},
      {8, {"autocorrelation-time calibration", calibration}},
      {9, {"logistic regression regime", logistic_regime}},
      {10, {"mixture regime", mixture_regime}},
      {11, {"cost-injection neutrality", cost_neutrality}},
  };
  return all;
}

} // namespace

int main(int argc, char** argv) {
  std::vector<int> chosen;
  for (int i = 1; i < argc; ++i) chosen.push_back(std::stoi(argv[i]));
  if (chosen.empty()) {
    for (const auto& [id, c] : criteria()) chosen.push_back(id);
  }
  int failures = 0;
  for (int id : chosen) {
    const auto it = criteria().find(id);
    if (it == criteria().end()) {
      std::printf("FAIL %2d unknown criterion\n", id);
      ++failures;
      continue;
    }
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = it->second.fn();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s %2d %s: %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", id, it->second.name, o.detail.c_str(), secs);
    std::fflush(stdout);
    if (!o.pass) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
