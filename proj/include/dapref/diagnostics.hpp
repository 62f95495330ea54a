#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "dapref/chain.hpp"

namespace dapref {

/// Raised when a series is too short for the requested estimator.
class DiagnosticsError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

inline constexpr std::size_t kMinIatLength = 1000;

/// Biased autocorrelation (each lag divided by the lag-0 autocovariance),
/// lags 0..max_lag. A constant series gives 1 at lag 0 and 0 elsewhere.
std::vector<double> autocorrelation(std::span<const double> series, std::size_t max_lag);

/// tau = 1 + 2 sum rho_k, truncated with Geyer's initial positive sequence
/// (pairs rho_{2m} + rho_{2m+1} summed while positive). Clamped to >= 1.
/// A constant series is fully correlated: tau = its length.
double integrated_autocorrelation_time(std::span<const double> series);

/// T / tau.
double effective_sample_size(std::span<const double> series);

/// Per-coordinate minimum ESS and maximum tau of a trace.
struct TraceEss {
  double ess = 0.0;
  double tau = 1.0;
};
TraceEss trace_ess(const ChainTrace& trace, std::size_t thin = 1);

/// (ess_da / t_da) / (ess_mh / t_mh). Times must be positive.
double relative_gain(double ess_da, double t_da, double ess_mh, double t_mh);

struct DiagnosticsReport {
  double ess = 0.0;
  double tau = 1.0;
  double acceptance_rate = 0.0;
  double wall_seconds = 0.0;
  double draws_per_iteration = 1.0;
  std::optional<double> rg;
  /// ess divided by the number of kept draws.
  double relative_ess = 0.0;
};

} // namespace dapref
