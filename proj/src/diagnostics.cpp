#include "dapref/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dapref {

namespace {

double mean_of(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

bool is_constant(std::span<const double> x) {
  return std::all_of(x.begin(), x.end(), [&](double v) { return v == x.front(); });
}

double autocovariance(std::span<const double> x, double mean, std::size_t lag) {
  double s = 0.0;
  const std::size_t n = x.size();
  for (std::size_t i = 0; i + lag < n; ++i) s += (x[i] - mean) * (x[i + lag] - mean);
  return s / static_cast<double>(n);
}

} // namespace

std::vector<double> autocorrelation(std::span<const double> series, std::size_t max_lag) {
  if (series.size() <= max_lag) throw DiagnosticsError("series must be longer than max_lag");
  std::vector<double> acf(max_lag + 1, 0.0);
  acf[0] = 1.0;
  if (is_constant(series)) return acf;
  const double mean = mean_of(series);
  const double c0 = autocovariance(series, mean, 0);
  if (!(c0 > 0.0)) return acf;
  for (std::size_t k = 1; k <= max_lag; ++k) acf[k] = autocovariance(series, mean, k) / c0;
  return acf;
}

double integrated_autocorrelation_time(std::span<const double> series) {
  const std::size_t n = series.size();
  if (n < kMinIatLength) throw DiagnosticsError("series too short for an autocorrelation time");
  if (is_constant(series)) return static_cast<double>(n);
  const double mean = mean_of(series);
  const double c0 = autocovariance(series, mean, 0);
  if (!(c0 > 0.0)) return static_cast<double>(n);

  // Geyer initial positive sequence over pairs (2m, 2m+1)
  double sum_pairs = 0.0;
  for (std::size_t m = 0; 2 * m + 1 < n; ++m) {
    const double r0 = (m == 0) ? 1.0 : autocovariance(series, mean, 2 * m) / c0;
    const double r1 = autocovariance(series, mean, 2 * m + 1) / c0;
    const double pair = r0 + r1;
    if (!(pair > 0.0)) break;
    sum_pairs += pair;
  }
  const double tau = -1.0 + 2.0 * sum_pairs;
  return std::clamp(tau, 1.0, static_cast<double>(n));
}

double effective_sample_size(std::span<const double> series) {
  return static_cast<double>(series.size()) / integrated_autocorrelation_time(series);
}

TraceEss trace_ess(const ChainTrace& trace, std::size_t thin) {
  thin = std::max<std::size_t>(thin, 1);
  TraceEss out{std::numeric_limits<double>::infinity(), 1.0};
  if (trace.states.empty()) return {0.0, 1.0};
  const auto dim = static_cast<std::size_t>(trace.states.front().size());
  for (std::size_t j = 0; j < dim; ++j) {
    std::vector<double> column;
    column.reserve(trace.size() / thin + 1);
    for (std::size_t i = 0; i < trace.size(); i += thin) {
      column.push_back(trace.states[i](static_cast<Eigen::Index>(j)));
    }
    const double tau = integrated_autocorrelation_time(column);
    out.ess = std::min(out.ess, static_cast<double>(column.size()) / tau);
    out.tau = std::max(out.tau, tau);
  }
  return out;
}

double relative_gain(double ess_da, double t_da, double ess_mh, double t_mh) {
  if (!(t_da > 0.0) || !(t_mh > 0.0)) throw std::invalid_argument("run times must be positive");
  if (!(ess_mh > 0.0)) throw std::invalid_argument("baseline ESS must be positive");
  return (ess_da / t_da) / (ess_mh / t_mh);
}

} // namespace dapref
