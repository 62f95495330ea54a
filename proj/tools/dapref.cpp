#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dapref/executor.hpp"
#include "dapref/experiment.hpp"

namespace {

using Raw = std::map<std::string, std::string>;

// Every experiment flag is captured as text so file values and flags go
// through the same parser; flags win over the config file.
void add_experiment_flags(CLI::App& cmd, Raw& raw, std::string& config_path) {
  cmd.add_option("--config", config_path, "key = value configuration file");
  const std::vector<std::pair<std::string, std::string>> flags{
      {"--seed", "seed"},           {"--workers", "workers"},       {"--iters", "iters"},
      {"--burnin", "burnin"},       {"--model", "model"},           {"--algo", "algo"},
      {"--split-r,--split_r", "split_r"}, {"--parts", "parts"},     {"--cost-c,--cost_c", "cost_c"},
      {"--policy", "policy"},       {"--beta-cap,--beta_cap", "beta_cap"},
      {"--order-policy,--order_policy", "order_policy"},
      {"--refresh-every", "refresh_every"}, {"--thin", "thin"},     {"--data", "data"},
      {"--out", "out"},             {"--scale", "scale"},           {"--n", "n"},
      {"--p", "p"},                 {"--data-seed", "data_seed"},   {"--quad-nodes", "quad_nodes"},
      {"--mixture-scale", "mixture_scale"}, {"--adapt", "adapt"}};
  for (const auto& [flag, key] : flags) cmd.add_option(flag, raw[key]);
}

dapref::ExperimentConfig resolve(const CLI::App& cmd, const Raw& raw, const std::string& config_path) {
  dapref::ExperimentConfig config;
  if (const char* env = std::getenv("DAPREF_WORKERS"); env != nullptr && *env != '\0') {
    dapref::apply_setting(config, "workers", env);
  }
  if (!config_path.empty()) {
    for (const auto& [key, value] : dapref::read_config_file(config_path)) {
      dapref::apply_setting(config, key, value);
    }
  }
  for (const auto* opt : cmd.get_options()) {
    if (opt->count() == 0) continue;
    std::string key = opt->get_name();
    while (!key.empty() && key.front() == '-') key.erase(0, 1);
    if (key == "config" || key == "help" || key == "h") continue;
    for (auto& ch : key) if (ch == '-') ch = '_';
    if (auto it = raw.find(key); it != raw.end()) dapref::apply_setting(config, key, it->second);
  }
  dapref::validate(config);
  return config;
}

template <typename T>
std::vector<T> parse_list(const std::string& text) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::istringstream conv(item);
    T v{};
    if (!(conv >> v)) throw std::invalid_argument("bad list entry '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw std::invalid_argument("empty list '" + text + "'");
  return out;
}

nlohmann::json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open '" + path + "'");
  return nlohmann::json::parse(in);
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Metropolis-Hastings with delayed acceptance and prefetching"};
  app.require_subcommand(1);
  app.set_version_flag("--version", dapref::version_string());

  Raw run_raw;
  std::string run_config;
  auto* run = app.add_subcommand("run", "run one chain and write samples.csv / report.json");
  add_experiment_flags(*run, run_raw, run_config);

  std::string da_path;
  std::string mh_path;
  auto* cmp = app.add_subcommand("compare", "relative gain of a DA report over an MH report");
  cmp->add_option("report_da", da_path)->required();
  cmp->add_option("report_mh", mh_path)->required();

  Raw bench_raw;
  std::string bench_config;
  std::string costs = "0";
  std::string workers = "1,2,4,8";
  std::string seeds = "1";
  std::string bench_csv = "bench.csv";
  auto* bench = app.add_subcommand("bench", "RG sweep over cost_C x workers");
  add_experiment_flags(*bench, bench_raw, bench_config);
  bench->add_option("--costs", costs, "comma-separated cost_C values");
  bench->add_option("--workers-axis", workers, "comma-separated worker counts");
  bench->add_option("--seeds", seeds, "comma-separated seeds");
  bench->add_option("--csv", bench_csv, "output CSV path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      const auto config = resolve(*run, run_raw, run_config);
      const auto result = dapref::run_experiment(config);
      const auto& r = result.report;
      std::cout << "model=" << config.model << " algo=" << config.algo << " iters=" << config.iters
                << " acceptance=" << dapref::format_double(r.acceptance_rate)
                << " ess=" << dapref::format_double(r.ess) << " tau=" << dapref::format_double(r.tau)
                << " seconds=" << dapref::format_double(r.wall_seconds)
                << " draws_per_iteration=" << dapref::format_double(r.draws_per_iteration) << '\n';
      if (!config.out.empty()) std::cout << "wrote " << config.out << "/{samples.csv,report.json,acf.csv}\n";
    } else if (cmp->parsed()) {
      const auto summary = dapref::compare(load_json(da_path), load_json(mh_path));
      std::cout << "model,algo_da,algo_mh,ess_da,ess_mh,t_da,t_mh,rg,verdict\n" << summary.row << '\n';
    } else if (bench->parsed()) {
      auto config = resolve(*bench, bench_raw, bench_config);
      if (bench_raw["algo"].empty() && bench_config.empty()) config.algo = "da+prefetch";
      const auto rows = dapref::bench_sweep(config, parse_list<std::uint64_t>(costs),
                                            parse_list<std::size_t>(workers), parse_list<std::uint64_t>(seeds));
      dapref::write_bench_csv(bench_csv, rows);
      std::cout << "wrote " << rows.size() << " rows to " << bench_csv << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
