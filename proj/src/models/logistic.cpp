#include "dapref/models/logistic.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <vector>

#include <Eigen/Cholesky>

#include "dapref/random_schedule.hpp"

namespace dapref::models {

Eigen::Index LogisticModel::cheap_rows() const {
  const Eigen::Index n = data.rows();
  if (!(split_r > 0.0 && split_r < 1.0)) throw std::invalid_argument("split_r must be in (0, 1)");
  const auto r = static_cast<Eigen::Index>(std::floor(split_r * static_cast<double>(n)));
  if (r < 1 || r >= n) throw std::invalid_argument("split_r leaves an empty likelihood block");
  return r;
}

void burn_operations(std::uint64_t ops) noexcept {
  double acc = 1.0;
  for (std::uint64_t i = 0; i < ops; ++i) {
    acc = acc * 0.999999 + 1e-7;
#if defined(__x86_64__) || defined(__i386__)
    __asm__ __volatile__("" : "+x"(acc));
#else
    __asm__ __volatile__("" : "+m"(acc));
#endif
  }
}

namespace {

// log-likelihood of one observation, stable in both tails
inline double point_loglik(double eta, double y) {
  if (eta > 0.0) return y * eta - eta - std::log1p(std::exp(-eta));
  return y * eta - std::log1p(std::exp(eta));
}

double range_loglik(const LogisticData& d, const Eigen::VectorXd& beta, Eigen::Index begin,
                    Eigen::Index end, std::uint64_t cost) {
  double sum = 0.0;
  const Eigen::Index p = d.cols();
  for (Eigen::Index i = begin; i < end; ++i) {
    double eta = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) eta += d.X(i, j) * beta(j);
    sum += point_loglik(eta, d.y(i));
    if (cost > 0) burn_operations(cost);
  }
  return sum;
}

double log_prior(const Eigen::VectorXd& beta, double sd) {
  double s = 0.0;
  for (Eigen::Index j = 0; j < beta.size(); ++j) s += beta(j) * beta(j);
  return -0.5 * s / (sd * sd);
}

} // namespace

double logistic_loglik(const LogisticModel& model, const Eigen::VectorXd& beta, DataRange range) {
  const auto& d = model.data;
  if (beta.size() != d.cols()) throw std::invalid_argument("coefficient dimension mismatch");
  const Eigen::Index n = d.rows();
  switch (range) {
    case DataRange::all: return range_loglik(d, beta, 0, n, model.cost_c);
    case DataRange::cheap: return range_loglik(d, beta, 0, model.cheap_rows(), model.cost_c);
    case DataRange::expensive: return range_loglik(d, beta, model.cheap_rows(), n, model.cost_c);
  }
  return 0.0;
}

LogisticData simulate_logistic(Eigen::Index n, Eigen::Index p, const Eigen::VectorXd& beta_true,
                               std::uint64_t seed) {
  if (n < 1 || p < 1) throw std::invalid_argument("need n, p >= 1");
  if (beta_true.size() != p) throw std::invalid_argument("beta_true must have p entries");
  const CounterRng rng(seed);
  constexpr std::uint64_t kCovariates = 0x43;
  constexpr std::uint64_t kLabels = 0x4c;
  LogisticData d{Eigen::MatrixXd(n, p), Eigen::VectorXd(n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    double eta = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      d.X(i, j) = rng.normal(kCovariates, static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(j));
      eta += d.X(i, j) * beta_true(j);
    }
    const double prob = 1.0 / (1.0 + std::exp(-eta));
    d.y(i) = rng.uniform(kLabels, static_cast<std::uint64_t>(i)) < prob ? 1.0 : 0.0;
  }
  return d;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    if (!cell.empty() && cell.back() == '\r') cell.pop_back();
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_number(const std::string& cell, std::size_t row, std::size_t col) {
  std::size_t b = 0;
  std::size_t e = cell.size();
  while (b < e && (cell[b] == ' ' || cell[b] == '"')) ++b;
  while (e > b && (cell[e - 1] == ' ' || cell[e - 1] == '"')) --e;
  double v = 0.0;
  const auto res = std::from_chars(cell.data() + b, cell.data() + e, v);
  if (res.ec != std::errc() || res.ptr != cell.data() + e) {
    throw std::runtime_error("csv row " + std::to_string(row) + " column " + std::to_string(col) +
                             ": not a number '" + cell + "'");
  }
  return v;
}

} // namespace

LogisticData load_logistic_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("dataset '" + path + "' is empty");
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // BOM
  const auto header = split_csv_line(line);
  std::size_t label_col = header.size();
  for (std::size_t c = 0; c < header.size(); ++c) {
    std::string h = header[c];
    h.erase(std::remove(h.begin(), h.end(), '"'), h.end());
    h.erase(std::remove(h.begin(), h.end(), ' '), h.end());
    if (h == "label") label_col = c;
  }
  if (label_col == header.size()) throw std::runtime_error("dataset has no 'label' column");
  if (header.size() < 2) throw std::runtime_error("dataset has no feature columns");

  std::vector<double> features;
  std::vector<double> labels;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw std::runtime_error("csv row " + std::to_string(row) + " has " +
                               std::to_string(cells.size()) + " cells, expected " +
                               std::to_string(header.size()));
    }
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const double v = parse_number(cells[c], row, c);
      if (c == label_col) {
        if (v != 0.0 && v != 1.0) {
          throw std::runtime_error("csv row " + std::to_string(row) + ": label must be 0 or 1");
        }
        labels.push_back(v);
      } else {
        features.push_back(v);
      }
    }
  }
  const auto n = static_cast<Eigen::Index>(labels.size());
  const auto p = static_cast<Eigen::Index>(header.size() - 1);
  if (n == 0) throw std::runtime_error("dataset has no rows");
  LogisticData d{Eigen::MatrixXd(n, p), Eigen::VectorXd(n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    d.y(i) = labels[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < p; ++j) d.X(i, j) = features[static_cast<std::size_t>(i * p + j)];
  }
  return d;
}

MleFit logistic_mle(const LogisticData& data, Eigen::Index rows) {
  const Eigen::Index n = data.rows();
  const Eigen::Index m = (rows <= 0 || rows > n) ? n : rows;
  const Eigen::Index p = data.cols();
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  Eigen::MatrixXd info(p, p);
  for (int iter = 0; iter < 100; ++iter) {
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(p);
    info.setZero();
    for (Eigen::Index i = 0; i < m; ++i) {
      const auto xi = data.X.row(i);
      const double prob = 1.0 / (1.0 + std::exp(-xi.dot(beta)));
      grad += (data.y(i) - prob) * xi.transpose();
      info += prob * (1.0 - prob) * xi.transpose() * xi;
    }
    // tiny ridge keeps separable data from diverging
    info += 1e-8 * Eigen::MatrixXd::Identity(p, p);
    const Eigen::VectorXd step = info.ldlt().solve(grad);
    beta += step;
    if (step.lpNorm<Eigen::Infinity>() < 1e-10) break;
  }
  Eigen::MatrixXd cov = info.ldlt().solve(Eigen::MatrixXd::Identity(p, p));
  cov *= static_cast<double>(m) / static_cast<double>(n);
  cov = 0.5 * (cov + cov.transpose()).eval();
  return {beta, cov};
}

FactorizedTarget logistic_target(const LogisticModel& model) {
  auto shared = std::make_shared<const LogisticModel>(model);
  const Eigen::Index n = shared->data.rows();
  const Eigen::Index r = shared->cheap_rows();
  const double sd = shared->prior_sd;
  if (!(sd > 0.0)) throw std::invalid_argument("prior_sd must be positive");

  FactorizedTarget target;
  target.dimension = static_cast<std::size_t>(shared->data.cols());
  target.factors.push_back({"prior+head", CostTier::cheap, [shared, r, sd](const ParamVector& b) {
                              return log_prior(b, sd) +
                                     range_loglik(shared->data, b, 0, r, shared->cost_c);
                            }});
  target.factors.push_back({"tail", CostTier::expensive, [shared, r, n](const ParamVector& b) {
                              return range_loglik(shared->data, b, r, n, shared->cost_c);
                            }});
  target.reference_log_density = [shared, n, sd](const ParamVector& b) {
    return range_loglik(shared->data, b, 0, n, 0) + log_prior(b, sd);
  };
  const double scale = static_cast<double>(n - r) / static_cast<double>(r);
  target.expensive_ratio_estimate = [sd, scale](const ParamVector& cur, const ParamVector& prop,
                                                double cheap_lr) {
    const double head_lr = cheap_lr - (log_prior(prop, sd) - log_prior(cur, sd));
    return head_lr * scale;
  };
  return target;
}

} // namespace dapref::models
