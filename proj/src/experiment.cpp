#include "dapref/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <Eigen/Eigenvalues>

#include "dapref/models/beta_binomial.hpp"
#include "dapref/models/logistic.hpp"
#include "dapref/models/mixture.hpp"
#include "dapref/models/normal_normal.hpp"

namespace dapref {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_as(const std::string& key, const std::string& raw) {
  const std::string value = trim(raw);
  T out{};
  const auto res = std::from_chars(value.data(), value.data() + value.size(), out);
  if (res.ec != std::errc() || res.ptr != value.data() + value.size()) {
    throw std::invalid_argument("invalid value '" + value + "' for " + key);
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& raw) {
  const std::string v = trim(raw);
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw std::invalid_argument("invalid boolean '" + v + "' for " + key);
}

models::ScaleConvention mixture_convention(const std::string& name) {
  if (name == "variance") return models::ScaleConvention::variance;
  if (name == "sd") return models::ScaleConvention::standard_deviation;
  throw std::invalid_argument("mixture_scale must be 'variance' or 'sd'");
}

bool model_has_estimate(const std::string& model) { return model == "logistic" || model == "mixture"; }

Eigen::VectorXd logistic_truth(std::size_t p) {
  Eigen::VectorXd beta(static_cast<Eigen::Index>(p));
  for (Eigen::Index j = 0; j < beta.size(); ++j) {
    const double magnitude = std::max(0.2, 1.0 - 0.2 * static_cast<double>(j));
    beta(j) = j % 2 == 0 ? magnitude : -magnitude;
  }
  return beta;
}

// Observed information of the mixture log-likelihood by central differences.
Eigen::MatrixXd mixture_hessian(const FactorizedTarget& target, const ParamVector& at) {
  const Eigen::Index d = at.size();
  const auto loglik = [&](const ParamVector& x) {
    double s = 0.0;
    for (const auto& f : target.factors) s += f.log_term(x);
    return s;
  };
  constexpr double h = 1e-3;
  Eigen::MatrixXd hess(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = i; j < d; ++j) {
      ParamVector pp = at, pm = at, mp = at, mm = at;
      pp(i) += h; pp(j) += h;
      pm(i) += h; pm(j) -= h;
      mp(i) -= h; mp(j) += h;
      mm(i) -= h; mm(j) -= h;
      hess(i, j) = (loglik(pp) - loglik(pm) - loglik(mp) + loglik(mm)) / (4.0 * h * h);
      hess(j, i) = hess(i, j);
    }
  }
  return hess;
}

Eigen::MatrixXd spd_inverse(const Eigen::MatrixXd& info) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (info + info.transpose()));
  Eigen::VectorXd values = eig.eigenvalues();
  const double top = values.cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < values.size(); ++i) values(i) = 1.0 / std::max(values(i), 1e-8 * top);
  Eigen::MatrixXd inv = eig.eigenvectors() * values.asDiagonal() * eig.eigenvectors().transpose();
  return 0.5 * (inv + inv.transpose());
}

} // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string version_string() { return std::string("dapref ") + DAPREF_VERSION; }

void apply_setting(ExperimentConfig& c, const std::string& raw_key, const std::string& value) {
  std::string key = trim(raw_key);
  std::replace(key.begin(), key.end(), '-', '_');
  if (key == "model") c.model = trim(value);
  else if (key == "algo") c.algo = trim(value);
  else if (key == "iters") c.iters = parse_as<std::int64_t>(key, value);
  else if (key == "burnin") c.burnin = parse_as<std::int64_t>(key, value);
  else if (key == "seed") c.seed = parse_as<std::uint64_t>(key, value);
  else if (key == "workers") c.workers = parse_as<std::size_t>(key, value);
  else if (key == "split_r") c.split_r = parse_as<double>(key, value);
  else if (key == "parts") c.parts = parse_as<int>(key, value);
  else if (key == "cost_c") c.cost_c = parse_as<std::uint64_t>(key, value);
  else if (key == "policy") c.policy = trim(value);
  else if (key == "beta_cap") c.beta_cap = parse_as<double>(key, value);
  else if (key == "order_policy") c.order_policy = trim(value);
  else if (key == "refresh_every") c.refresh_every = parse_as<std::int64_t>(key, value);
  else if (key == "thin") c.thin = parse_as<std::size_t>(key, value);
  else if (key == "data") c.data = trim(value);
  else if (key == "out") c.out = trim(value);
  else if (key == "scale") c.scale = parse_as<double>(key, value);
  else if (key == "n") c.n = parse_as<std::size_t>(key, value);
  else if (key == "p") c.p = parse_as<std::size_t>(key, value);
  else if (key == "data_seed") c.data_seed = parse_as<std::uint64_t>(key, value);
  else if (key == "quad_nodes") c.quad_nodes = parse_as<std::size_t>(key, value);
  else if (key == "mixture_scale") c.mixture_scale = trim(value);
  else if (key == "adapt") c.adapt = parse_bool(key, value);
  else throw std::invalid_argument("unknown configuration key '" + raw_key + "'");
}

std::map<std::string, std::string> read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file '" + path + "'");
  std::map<std::string, std::string> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument(path + ":" + std::to_string(lineno) + ": expected key = value");
    }
    out[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return out;
}

BranchPolicy parse_branch_policy(const std::string& name, double beta_cap) {
  BranchPolicy p;
  p.beta_cap = beta_cap;
  if (name == "static-half") p.kind = BranchKind::static_half;
  else if (name == "observed-rate") p.kind = BranchKind::observed_rate;
  else if (name == "uniform-aware") p.kind = BranchKind::uniform_aware;
  else if (name == "approx-ratio") p.kind = BranchKind::approx_ratio;
  else if (name == "capped-approx") p.kind = BranchKind::capped_approx;
  else throw std::invalid_argument("unknown branch policy '" + name + "'");
  return p;
}

std::string to_string(BranchKind kind) {
  switch (kind) {
    case BranchKind::static_half: return "static-half";
    case BranchKind::observed_rate: return "observed-rate";
    case BranchKind::uniform_aware: return "uniform-aware";
    case BranchKind::approx_ratio: return "approx-ratio";
    case BranchKind::capped_approx: return "capped-approx";
  }
  return "static-half";
}

OrderPolicy parse_order_policy(const std::string& name, std::int64_t refresh_every) {
  OrderPolicy p;
  p.refresh_every = refresh_every;
  if (name == "fixed") p.kind = OrderKind::fixed;
  else if (name == "success-rate") p.kind = OrderKind::by_success_rate;
  else if (name == "last-value") p.kind = OrderKind::by_last_value;
  else throw std::invalid_argument("unknown order policy '" + name + "'");
  return p;
}

std::string to_string(OrderKind kind) {
  switch (kind) {
    case OrderKind::fixed: return "fixed";
    case OrderKind::by_success_rate: return "success-rate";
    case OrderKind::by_last_value: return "last-value";
  }
  return "fixed";
}

void validate(const ExperimentConfig& c) {
  static const std::vector<std::string> kModels{"normal-normal", "beta-binomial", "logistic", "mixture"};
  if (std::find(kModels.begin(), kModels.end(), c.model) == kModels.end()) {
    throw std::invalid_argument("unknown model '" + c.model + "'");
  }
  const Algorithm algo = parse_algorithm(c.algo);
  if (c.iters <= 0) throw std::invalid_argument("iters must be positive");
  if (c.burnin < 0) throw std::invalid_argument("burnin must be nonnegative");
  if (c.workers < 1) throw std::invalid_argument("workers must be >= 1");
  if (c.thin < 1) throw std::invalid_argument("thin must be >= 1");
  if (c.refresh_every < 1) throw std::invalid_argument("refresh_every must be >= 1");
  if (c.split_r < 0.0 || c.split_r >= 1.0) throw std::invalid_argument("split_r must be in [0, 1)");
  if (!(c.beta_cap > 0.0 && c.beta_cap <= 1.0)) throw std::invalid_argument("beta_cap must be in (0, 1]");
  if (c.scale < 0.0) throw std::invalid_argument("scale must be nonnegative");
  if (c.parts < 1) throw std::invalid_argument("parts must be >= 1");
  const BranchPolicy branch = parse_branch_policy(c.policy, c.beta_cap);
  const OrderPolicy order = parse_order_policy(c.order_policy, c.refresh_every);
  if (needs_ratio_estimate(branch) && !model_has_estimate(c.model)) {
    throw std::invalid_argument("policy '" + c.policy + "' needs a ratio estimate, which model '" +
                                c.model + "' does not provide");
  }
  if (order.kind != OrderKind::fixed && !is_delayed(algo)) {
    throw std::invalid_argument("order_policy applies to delayed acceptance only");
  }
  if (c.parts != 1 && c.model != "beta-binomial") {
    throw std::invalid_argument("parts applies to the beta-binomial model only");
  }
  if (!c.data.empty() && c.model != "logistic") {
    throw std::invalid_argument("a dataset can only be supplied for the logistic model");
  }
  mixture_convention(c.mixture_scale);
}

SamplerConfig sampler_config(const ExperimentConfig& c) {
  SamplerConfig s;
  s.algorithm = parse_algorithm(c.algo);
  s.iterations = c.iters;
  s.burnin = c.burnin;
  s.workers = c.workers;
  s.branch = parse_branch_policy(c.policy, c.beta_cap);
  s.order = parse_order_policy(c.order_policy, c.refresh_every);
  s.adapt_burnin = c.adapt;
  return s;
}

double default_scale(const std::string& model) {
  if (model == "normal-normal") return 10.0;
  if (model == "beta-binomial") return 0.09;
  if (model == "logistic") return 1.15;
  if (model == "mixture") return 0.5;
  throw std::invalid_argument("unknown model '" + model + "'");
}

ModelSetup build_model(const ExperimentConfig& c) {
  validate(c);
  const double scale = c.scale > 0.0 ? c.scale : default_scale(c.model);
  ModelSetup setup;
  if (c.model == "normal-normal") {
    const models::NormalNormalModel m;
    setup.target = models::normal_normal_target(m);
    setup.kernel = ProposalKernel::isotropic(1, scale);
    setup.initial = ParamVector::Constant(1, m.x);
  } else if (c.model == "beta-binomial") {
    models::BetaBinomialModel m;
    m.parts = c.parts;
    setup.target = models::beta_binomial_target(m);
    setup.kernel = ProposalKernel::isotropic(1, scale);
    setup.initial = ParamVector::Constant(1, static_cast<double>(m.successes) / m.trials);
  } else if (c.model == "logistic") {
    models::LogisticModel m;
    m.data = c.data.empty()
                 ? models::simulate_logistic(static_cast<Eigen::Index>(c.n), static_cast<Eigen::Index>(c.p),
                                             logistic_truth(c.p), c.data_seed)
                 : models::load_logistic_csv(c.data);
    m.cost_c = c.cost_c;
    if (c.split_r > 0.0) m.split_r = c.split_r;
    // asymptotic MLE covariance, fitted on at most 10^4 rows
    const Eigen::Index rows = std::min<Eigen::Index>(m.data.rows(), 10000);
    const models::MleFit fit = models::logistic_mle(m.data, rows);
    setup.target = models::logistic_target(m);
    setup.kernel = ProposalKernel(scale * scale * fit.covariance);
    setup.initial = fit.beta;
  } else {
    models::MixtureModel m;
    const auto truth = models::reference_mixture(mixture_convention(c.mixture_scale));
    m.data = models::simulate_mixture(c.n, c.data_seed, truth).values;
    m.quadrature.nodes = c.quad_nodes;
    if (c.split_r > 0.0) m.split_r = c.split_r;
    setup.target = models::mixture_da_factors(m);
    setup.initial = models::pack_mixture(truth);
    const Eigen::MatrixXd info = -mixture_hessian(setup.target, setup.initial);
    setup.kernel = ProposalKernel(scale * scale * spd_inverse(info));
  }
  return setup;
}

void write_samples_csv(const std::string& path, const ChainTrace& trace, std::int64_t first_iter) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  const Eigen::Index d = trace.states.empty() ? 0 : trace.states.front().size();
  out << "iter";
  for (Eigen::Index j = 0; j < d; ++j) out << ",param_" << j;
  out << ",accepted,stage\n";
  for (std::size_t i = 0; i < trace.size(); ++i) {
    out << first_iter + static_cast<std::int64_t>(i);
    for (Eigen::Index j = 0; j < d; ++j) out << ',' << format_double(trace.states[i](j));
    out << ',' << (trace.meta[i].accepted ? 1 : 0) << ',' << trace.meta[i].stage << '\n';
  }
  if (!out) throw std::runtime_error("failed while writing '" + path + "'");
}

nlohmann::json config_to_json(const ExperimentConfig& c) {
  return {{"model", c.model},     {"algo", c.algo},
          {"iters", c.iters},     {"burnin", c.burnin},
          {"seed", c.seed},       {"workers", c.workers},
          {"split_r", c.split_r}, {"parts", c.parts},
          {"cost_c", c.cost_c},   {"policy", c.policy},
          {"beta_cap", c.beta_cap}, {"order_policy", c.order_policy},
          {"refresh_every", c.refresh_every}, {"thin", c.thin},
          {"data", c.data},       {"out", c.out},
          {"scale", c.scale > 0.0 ? c.scale : default_scale(c.model)},
          {"n", c.n},             {"p", c.p},
          {"data_seed", c.data_seed}, {"quad_nodes", c.quad_nodes},
          {"mixture_scale", c.mixture_scale}, {"adapt", c.adapt}};
}

nlohmann::json report_to_json(const DiagnosticsReport& r, const ExperimentConfig& c, const SamplerStats& stats) {
  nlohmann::json j;
  const auto number = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  j["ess"] = number(r.ess);
  j["tau"] = number(r.tau);
  j["acceptance_rate"] = r.acceptance_rate;
  j["wall_seconds"] = r.wall_seconds;
  j["draws_per_iteration"] = r.draws_per_iteration;
  j["rg"] = r.rg ? nlohmann::json(*r.rg) : nlohmann::json(nullptr);
  j["relative_ess"] = number(r.relative_ess);
  j["rounds"] = stats.rounds;
  j["expensive_evaluations"] = stats.expensive_evaluations;
  j["config"] = config_to_json(c);
  j["version"] = version_string();
  return j;
}

DiagnosticsReport report_from_json(const nlohmann::json& j) {
  DiagnosticsReport r;
  const auto number = [&](const char* key) {
    const auto& v = j.at(key);
    return v.is_null() ? std::nan("") : v.get<double>();
  };
  r.ess = number("ess");
  r.tau = number("tau");
  r.acceptance_rate = j.at("acceptance_rate").get<double>();
  r.wall_seconds = j.at("wall_seconds").get<double>();
  r.draws_per_iteration = j.at("draws_per_iteration").get<double>();
  if (j.contains("rg") && !j.at("rg").is_null()) r.rg = j.at("rg").get<double>();
  r.relative_ess = j.contains("relative_ess") ? number("relative_ess") : 0.0;
  return r;
}

ExperimentResult run_experiment(const ExperimentConfig& c) {
  const ModelSetup setup = build_model(c);
  ExperimentResult result;
  std::filesystem::path dir;
  if (!c.out.empty()) {
    dir = c.out;
    std::filesystem::create_directories(dir);
  }
  try {
    result.sampler = run_sampler(setup.target, setup.kernel, setup.initial, c.seed, sampler_config(c));
  } catch (const SamplingAborted& e) {
    if (!c.out.empty()) write_samples_csv((dir / "samples.csv").string(), e.partial, c.burnin + 1);
    throw;
  }
  const ChainTrace& trace = result.sampler.trace;
  // too few kept draws for an autocorrelation time: report ess and tau as null
  const std::size_t kept = (trace.size() + c.thin - 1) / c.thin;
  const TraceEss ess = kept >= kMinIatLength ? trace_ess(trace, c.thin)
                                             : TraceEss{std::nan(""), std::nan("")};
  DiagnosticsReport& r = result.report;
  r.ess = ess.ess;
  r.tau = ess.tau;
  r.acceptance_rate = trace.acceptance_rate();
  r.wall_seconds = result.sampler.stats.wall_seconds;
  r.draws_per_iteration = result.sampler.stats.draws_per_iteration;
  r.relative_ess = kept > 0 ? ess.ess / static_cast<double>(kept) : 0.0;
  result.report_json = report_to_json(r, c, result.sampler.stats);

  if (!c.out.empty()) {
    write_samples_csv((dir / "samples.csv").string(), trace, c.burnin + 1);
    std::ofstream rep(dir / "report.json", std::ios::trunc);
    rep << result.report_json.dump(2) << '\n';
    if (!rep) throw std::runtime_error("cannot write report.json");

    // plot-ready autocorrelogram of the (thinned) coordinates
    const std::size_t dim = trace.states.empty() ? 0 : static_cast<std::size_t>(trace.states.front().size());
    std::vector<std::vector<double>> acfs;
    std::size_t lags = 0;
    for (std::size_t j = 0; j < dim; ++j) {
      const std::vector<double> full = trace.coordinate(j);
      std::vector<double> thinned;
      for (std::size_t i = 0; i < full.size(); i += c.thin) thinned.push_back(full[i]);
      if (thinned.size() < 2) break;
      lags = std::min<std::size_t>(100, thinned.size() - 1);
      acfs.push_back(autocorrelation(thinned, lags));
    }
    std::ofstream acf(dir / "acf.csv", std::ios::trunc);
    acf << "lag";
    for (std::size_t j = 0; j < acfs.size(); ++j) acf << ",param_" << j;
    acf << '\n';
    for (std::size_t k = 0; !acfs.empty() && k <= lags; ++k) {
      acf << k;
      for (const auto& a : acfs) acf << ',' << format_double(a[k]);
      acf << '\n';
    }
  }
  return result;
}

CompareSummary compare(const nlohmann::json& da, const nlohmann::json& mh) {
  const std::string model_da = da.at("config").at("model").get<std::string>();
  const std::string model_mh = mh.at("config").at("model").get<std::string>();
  if (model_da != model_mh) {
    throw std::invalid_argument("reports come from different models: '" + model_da + "' vs '" + model_mh + "'");
  }
  const DiagnosticsReport a = report_from_json(da);
  const DiagnosticsReport b = report_from_json(mh);
  CompareSummary s;
  s.rg = relative_gain(a.ess, a.wall_seconds, b.ess, b.wall_seconds);
  std::ostringstream row;
  row << model_da << ',' << da.at("config").at("algo").get<std::string>() << ','
      << mh.at("config").at("algo").get<std::string>() << ',' << format_double(a.ess) << ','
      << format_double(b.ess) << ',' << format_double(a.wall_seconds) << ',' << format_double(b.wall_seconds)
      << ',' << format_double(s.rg) << ',' << (s.rg > 1.0 ? "gain" : "no-gain");
  s.row = row.str();
  return s;
}

std::vector<BenchRow> bench_sweep(const ExperimentConfig& base, const std::vector<std::uint64_t>& costs,
                                  const std::vector<std::size_t>& workers,
                                  const std::vector<std::uint64_t>& seeds) {
  if (costs.empty() || workers.empty() || seeds.empty()) throw std::invalid_argument("bench axes must be nonempty");
  const Algorithm algo = parse_algorithm(base.algo);
  if (!is_delayed(algo)) throw std::invalid_argument("bench template must use da or da+prefetch");
  const std::string baseline = is_prefetch(algo) ? "mh+prefetch" : "mh";

  std::vector<BenchRow> rows;
  for (const auto cost : costs) {
    for (const auto w : workers) {
      for (const auto seed : seeds) {
        BenchRow row;
        row.cost_c = cost;
        row.workers = w;
        row.seed = seed;
        try {
          ExperimentConfig da = base;
          da.cost_c = cost;
          da.workers = w;
          da.seed = seed;
          da.out.clear();
          ExperimentConfig mh = da;
          mh.algo = baseline;
          mh.order_policy = "fixed";
          const ExperimentResult rd = run_experiment(da);
          const ExperimentResult rm = run_experiment(mh);
          row.ess_da = rd.report.ess;
          row.ess_mh = rm.report.ess;
          row.t_da = rd.report.wall_seconds;
          row.t_mh = rm.report.wall_seconds;
          row.dpi_da = rd.report.draws_per_iteration;
          row.dpi_mh = rm.report.draws_per_iteration;
          row.acc_da = rd.report.acceptance_rate;
          row.acc_mh = rm.report.acceptance_rate;
          row.rg = relative_gain(row.ess_da, row.t_da, row.ess_mh, row.t_mh);
        } catch (const std::exception&) {
          row.rg = row.ess_da = row.ess_mh = row.t_da = row.t_mh = kNaN;
          row.dpi_da = row.dpi_mh = row.acc_da = row.acc_mh = kNaN;
        }
        rows.push_back(row);
      }
    }
  }
  return rows;
}

void write_bench_csv(const std::string& path, const std::vector<BenchRow>& rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << "cost_C,workers,seed,rg,ess_da,ess_mh,t_da,t_mh,dpi_da,dpi_mh,acc_da,acc_mh\n";
  for (const auto& r : rows) {
    out << r.cost_c << ',' << r.workers << ',' << r.seed << ',' << format_double(r.rg) << ','
        << format_double(r.ess_da) << ',' << format_double(r.ess_mh) << ',' << format_double(r.t_da) << ','
        << format_double(r.t_mh) << ',' << format_double(r.dpi_da) << ',' << format_double(r.dpi_mh) << ','
        << format_double(r.acc_da) << ',' << format_double(r.acc_mh) << '\n';
  }
}

} // namespace dapref
