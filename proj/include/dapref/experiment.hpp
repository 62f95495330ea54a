#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dapref/diagnostics.hpp"
#include "dapref/sampler.hpp"

namespace dapref {

struct ExperimentConfig {
  std::string model = "normal-normal";  // normal-normal | beta-binomial | logistic | mixture
  std::string algo = "mh";              // mh | da | mh+prefetch | da+prefetch
  std::int64_t iters = 10000;
  std::int64_t burnin = 1000;
  std::uint64_t seed = 1;
  std::size_t workers = 1;
  /// Cheap-block fraction; 0 selects the model default (logistic 0.05, mixture 0.02).
  double split_r = 0.0;
  int parts = 1;
  std::uint64_t cost_c = 0;
  std::string policy = "static-half";
  double beta_cap = 1.0;
  std::string order_policy = "fixed";
  std::int64_t refresh_every = 100;
  std::size_t thin = 1;
  std::string data;
  std::string out;

  /// Proposal scale multiplier; 0 selects the tuned model default.
  double scale = 0.0;
  /// Size of simulated datasets (logistic, mixture).
  std::size_t n = 1000;
  std::size_t p = 5;
  std::uint64_t data_seed = 20150101;
  std::size_t quad_nodes = 512;
  /// "variance" or "sd": reading of the second N(., .) argument in the mixture.
  std::string mixture_scale = "variance";
  bool adapt = false;
};

/// Sets one field from its textual value. Keys are the field names above;
/// dashes are accepted in place of underscores. Throws std::invalid_argument
/// for unknown keys or unparsable values.
void apply_setting(ExperimentConfig& config, const std::string& key, const std::string& value);

/// key = value lines; '#' starts a comment.
std::map<std::string, std::string> read_config_file(const std::string& path);

/// Throws std::invalid_argument on an inconsistent configuration.
void validate(const ExperimentConfig& config);

BranchPolicy parse_branch_policy(const std::string& name, double beta_cap);
OrderPolicy parse_order_policy(const std::string& name, std::int64_t refresh_every);
std::string to_string(BranchKind kind);
std::string to_string(OrderKind kind);

SamplerConfig sampler_config(const ExperimentConfig& config);

/// Target, proposal and starting point for one experiment.
struct ModelSetup {
  FactorizedTarget target;
  ProposalKernel kernel = ProposalKernel::isotropic(1, 1.0);
  ParamVector initial;
};

ModelSetup build_model(const ExperimentConfig& config);

/// Tuned proposal scale multiplier used when config.scale is 0.
double default_scale(const std::string& model);

struct ExperimentResult {
  SamplerResult sampler;
  DiagnosticsReport report;
  nlohmann::json report_json;
};

/// Runs the sampler and computes diagnostics. When config.out is set,
/// writes samples.csv, report.json and acf.csv into that directory.
ExperimentResult run_experiment(const ExperimentConfig& config);

nlohmann::json config_to_json(const ExperimentConfig& config);
nlohmann::json report_to_json(const DiagnosticsReport& report, const ExperimentConfig& config,
                              const SamplerStats& stats);
DiagnosticsReport report_from_json(const nlohmann::json& j);

void write_samples_csv(const std::string& path, const ChainTrace& trace, std::int64_t first_iter);

struct CompareSummary {
  double rg = 0.0;
  std::string row;
};

/// RG of report_da over report_mh. Throws std::invalid_argument when the
/// reports come from different models and when a time is not positive.
CompareSummary compare(const nlohmann::json& report_da, const nlohmann::json& report_mh);

struct BenchRow {
  std::uint64_t cost_c = 0;
  std::size_t workers = 1;
  std::uint64_t seed = 0;
  double rg = 0.0;
  double ess_da = 0.0;
  double ess_mh = 0.0;
  double t_da = 0.0;
  double t_mh = 0.0;
  double dpi_da = 0.0;
  double dpi_mh = 0.0;
  double acc_da = 0.0;
  double acc_mh = 0.0;
};

/// Runs the delayed-acceptance variant of the template (da or da+prefetch)
/// against its plain counterpart over cost x workers x seeds. A failing cell
/// is recorded with NaN metrics.
std::vector<BenchRow> bench_sweep(const ExperimentConfig& base, const std::vector<std::uint64_t>& costs,
                                  const std::vector<std::size_t>& workers,
                                  const std::vector<std::uint64_t>& seeds);

void write_bench_csv(const std::string& path, const std::vector<BenchRow>& rows);

/// Shortest round-trip decimal form.
std::string format_double(double v);

std::string version_string();

} // namespace dapref
