#include "dapref/models/beta_binomial.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace dapref::models {

namespace {

void check(const BetaBinomialModel& m) {
  if (m.trials < 1 || m.successes < 0 || m.successes > m.trials) {
    throw std::invalid_argument("need 0 <= successes <= trials and trials >= 1");
  }
  if (!(m.a > 0.0) || !(m.b > 0.0)) throw std::invalid_argument("Beta prior parameters must be positive");
  if (m.parts < 1 || m.parts > m.trials) throw std::invalid_argument("parts must be in [1, trials]");
}

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

} // namespace

std::vector<BlockCounts> bernoulli_partition(const BetaBinomialModel& model) {
  check(model);
  std::vector<BlockCounts> blocks(static_cast<std::size_t>(model.parts));
  const int m = model.parts;
  for (int j = 0; j < model.successes; ++j) ++blocks[static_cast<std::size_t>(j % m)].successes;
  for (int j = 0; j < model.trials - model.successes; ++j) {
    ++blocks[static_cast<std::size_t>((model.successes + j) % m)].failures;
  }
  return blocks;
}

double betabin_block_loglik(const BetaBinomialModel& model, double p, int block) {
  check(model);
  if (block < 0 || block >= model.parts) throw std::out_of_range("block index out of range");
  if (!(p > 0.0 && p < 1.0)) return kNegInf;
  const auto counts = bernoulli_partition(model)[static_cast<std::size_t>(block)];
  return counts.successes * std::log(p) + counts.failures * std::log1p(-p);
}

FactorizedTarget beta_binomial_target(const BetaBinomialModel& model) {
  check(model);
  const double a = model.a;
  const double b = model.b;
  FactorizedTarget target;
  target.dimension = 1;
  target.in_support = [](const ParamVector& p) { return p(0) > 0.0 && p(0) < 1.0; };
  target.factors.push_back({"prior", CostTier::cheap, [a, b](const ParamVector& p) {
                              return (a - 1.0) * std::log(p(0)) + (b - 1.0) * std::log1p(-p(0));
                            }});
  const auto blocks = bernoulli_partition(model);
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const double s = blocks[i].successes;
    const double f = blocks[i].failures;
    target.factors.push_back({"block-" + std::to_string(i), CostTier::expensive,
                              [s, f](const ParamVector& p) {
                                return s * std::log(p(0)) + f * std::log1p(-p(0));
                              }});
  }
  const double x = model.successes;
  const double n = model.trials;
  target.reference_log_density = [x, n, a, b](const ParamVector& p) {
    return (x + a - 1.0) * std::log(p(0)) + (n - x + b - 1.0) * std::log1p(-p(0));
  };
  return target;
}

} // namespace dapref::models
