#pragma once

#include <vector>

#include "dapref/chain.hpp"

namespace dapref::models {

/// Binomial(N, p) observation x with a Be(a, b) prior; the likelihood is
/// written as N Bernoulli terms grouped into `parts` blocks.
struct BetaBinomialModel {
  int trials = 100;
  int successes = 32;
  double a = 7.5;
  double b = 0.5;
  int parts = 1;
};

struct BlockCounts {
  int successes = 0;
  int failures = 0;
};

/// Round-robin partition: success j goes to block j mod m, failure j to
/// block (x + j) mod m, so block sizes differ by at most one.
std::vector<BlockCounts> bernoulli_partition(const BetaBinomialModel& model);

/// Block's log-likelihood share; -inf for p outside (0, 1).
double betabin_block_loglik(const BetaBinomialModel& model, double p, int block);

/// Prior factor (cheap) followed by one factor per block (expensive).
FactorizedTarget beta_binomial_target(const BetaBinomialModel& model);

} // namespace dapref::models
