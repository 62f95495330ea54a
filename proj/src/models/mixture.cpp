#include "dapref/models/mixture.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <stdexcept>

#include <Eigen/Eigenvalues>
#include <boost/math/quadrature/gauss.hpp>

#include "dapref/random_schedule.hpp"

namespace dapref::models {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kHalfLog2Pi = 0.91893853320467274178;
constexpr std::size_t kPanelPoints = 16;

// log w_i + log N(x; mu_i, sd_i^2) for every component, and their log-sum-exp
double component_logs(const MixtureParams& psi, double x, Eigen::VectorXd& out) {
  const Eigen::Index k = psi.components();
  out.resize(k);
  double top = kNegInf;
  for (Eigen::Index i = 0; i < k; ++i) {
    const double z = (x - psi.means(i)) / psi.sds(i);
    out(i) = std::log(psi.weights(i)) - 0.5 * z * z - std::log(psi.sds(i)) - kHalfLog2Pi;
    top = std::max(top, out(i));
  }
  double s = 0.0;
  for (Eigen::Index i = 0; i < k; ++i) s += std::exp(out(i) - top);
  return top + std::log(s);
}

} // namespace

bool MixtureParams::valid() const {
  const Eigen::Index k = weights.size();
  if (k < 1 || means.size() != k || sds.size() != k) return false;
  if (!weights.allFinite() || !means.allFinite() || !sds.allFinite()) return false;
  if ((weights.array() <= 0.0).any() || (sds.array() <= 0.0).any()) return false;
  return std::abs(weights.sum() - 1.0) <= 1e-9;
}

MixtureParams reference_mixture(ScaleConvention convention) {
  MixtureParams psi;
  psi.weights = Eigen::Vector3d(0.10, 0.65, 0.25);
  psi.means = Eigen::Vector3d(-10.0, 0.0, 15.0);
  const Eigen::Vector3d second(2.0, 5.0, 5.0);
  psi.sds = convention == ScaleConvention::variance ? Eigen::VectorXd(second.cwiseSqrt())
                                                    : Eigen::VectorXd(second);
  return psi;
}

double mixture_logpdf(const MixtureParams& psi, double x) {
  if (!psi.valid()) return kNegInf;
  Eigen::VectorXd logs;
  return component_logs(psi, x, logs);
}

Eigen::VectorXd mixture_score(const MixtureParams& psi, double x) {
  const Eigen::Index k = psi.components();
  Eigen::VectorXd logs;
  const double log_f = component_logs(psi, x, logs);
  Eigen::VectorXd s(3 * k - 1);
  // density ratio N_i / f and responsibility w_i N_i / f
  Eigen::VectorXd dens(k);
  Eigen::VectorXd resp(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    resp(i) = std::exp(logs(i) - log_f);
    dens(i) = resp(i) / psi.weights(i);
  }
  for (Eigen::Index j = 0; j + 1 < k; ++j) s(j) = dens(j) - dens(k - 1);
  for (Eigen::Index j = 0; j < k; ++j) {
    const double sd = psi.sds(j);
    const double d = (x - psi.means(j)) / sd;
    s(k - 1 + j) = resp(j) * d / sd;
    s(2 * k - 1 + j) = resp(j) * (d * d - 1.0) / sd;
  }
  return s;
}

Eigen::MatrixXd fisher_info(const MixtureParams& psi, const Quadrature& quadrature) {
  if (!psi.valid()) throw std::runtime_error("mixture parameters violate their constraints");
  if (quadrature.nodes < kPanelPoints || quadrature.nodes % kPanelPoints != 0) {
    throw std::invalid_argument("quadrature node count must be a positive multiple of 16");
  }
  const Eigen::Index k = psi.components();
  const Eigen::Index dim = 3 * k - 1;
  const double spread = quadrature.half_width * psi.sds.maxCoeff();
  const double lo = psi.means.minCoeff() - spread;
  const double hi = psi.means.maxCoeff() + spread;
  const std::size_t panels = quadrature.nodes / kPanelPoints;
  const double width = (hi - lo) / static_cast<double>(panels);

  using rule = boost::math::quadrature::gauss<double, kPanelPoints>;
  const auto& abscissa = rule::abscissa();
  const auto& weight = rule::weights();

  Eigen::MatrixXd info = Eigen::MatrixXd::Zero(dim, dim);
  Eigen::VectorXd logs;
  for (std::size_t p = 0; p < panels; ++p) {
    const double mid = lo + (static_cast<double>(p) + 0.5) * width;
    for (std::size_t a = 0; a < abscissa.size(); ++a) {
      for (int sign : {-1, 1}) {
        const double x = mid + sign * 0.5 * width * abscissa[a];
        const double f = std::exp(component_logs(psi, x, logs));
        if (f == 0.0) continue;
        const Eigen::VectorXd s = mixture_score(psi, x);
        info.selfadjointView<Eigen::Lower>().rankUpdate(s, 0.5 * width * weight[a] * f);
      }
    }
  }
  info = info.selfadjointView<Eigen::Lower>();
  if (!info.allFinite()) throw std::runtime_error("Fisher information has non-finite entries");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(info, Eigen::EigenvaluesOnly);
  if (eig.info() != Eigen::Success || eig.eigenvalues().minCoeff() < -1e-8) {
    throw std::runtime_error("Fisher information is not positive semi-definite");
  }
  return info;
}

double jeffreys_logprior(const MixtureParams& psi, const Quadrature& quadrature) {
  Eigen::MatrixXd info;
  try {
    info = fisher_info(psi, quadrature);
  } catch (const std::runtime_error&) {
    return kNegInf;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(info, Eigen::EigenvaluesOnly);
  double log_det = 0.0;
  for (Eigen::Index i = 0; i < eig.eigenvalues().size(); ++i) {
    log_det += std::log(std::max(eig.eigenvalues()(i), 1e-12));
  }
  if (!std::isfinite(log_det)) return kNegInf;
  return 0.5 * log_det;
}

MixtureParams unpack_mixture(const Eigen::VectorXd& phi, Eigen::Index k) {
  if (k < 1 || phi.size() != 3 * k - 1) throw std::invalid_argument("mixture coordinate size mismatch");
  MixtureParams psi;
  psi.weights.resize(k);
  // softmax with the last component as reference
  double top = 0.0;
  for (Eigen::Index i = 0; i + 1 < k; ++i) top = std::max(top, phi(i));
  double norm = std::exp(-top);
  for (Eigen::Index i = 0; i + 1 < k; ++i) norm += std::exp(phi(i) - top);
  for (Eigen::Index i = 0; i + 1 < k; ++i) psi.weights(i) = std::exp(phi(i) - top) / norm;
  psi.weights(k - 1) = std::exp(-top) / norm;
  psi.means = phi.segment(k - 1, k);
  psi.sds = phi.segment(2 * k - 1, k).array().exp();
  return psi;
}

Eigen::VectorXd pack_mixture(const MixtureParams& psi) {
  const Eigen::Index k = psi.components();
  Eigen::VectorXd phi(3 * k - 1);
  for (Eigen::Index i = 0; i + 1 < k; ++i) phi(i) = std::log(psi.weights(i) / psi.weights(k - 1));
  phi.segment(k - 1, k) = psi.means;
  phi.segment(2 * k - 1, k) = psi.sds.array().log();
  return phi;
}

double mixture_log_jacobian(const MixtureParams& psi) {
  return psi.weights.array().log().sum() + psi.sds.array().log().sum();
}

MixtureSample simulate_mixture(std::size_t n, std::uint64_t seed, const MixtureParams& psi) {
  if (n < 1) throw std::invalid_argument("sample size must be >= 1");
  if (!psi.valid()) throw std::invalid_argument("invalid mixture parameters");
  const CounterRng rng(seed);
  constexpr std::uint64_t kComponent = 0x4d43;
  constexpr std::uint64_t kDraw = 0x4d44;
  MixtureSample out;
  out.values.reserve(n);
  out.components.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = rng.uniform(kComponent, i);
    Eigen::Index c = 0;
    double cum = psi.weights(0);
    while (u >= cum && c + 1 < psi.components()) cum += psi.weights(++c);
    out.components.push_back(static_cast<int>(c));
    out.values.push_back(psi.means(c) + psi.sds(c) * rng.normal(kDraw, i));
  }
  return out;
}

std::size_t MixtureModel::head_size() const {
  if (!(split_r > 0.0 && split_r < 1.0)) throw std::invalid_argument("split_r must be in (0, 1)");
  const auto head = static_cast<std::size_t>(std::floor(split_r * static_cast<double>(data.size())));
  if (head < 1 || head >= data.size()) {
    throw std::invalid_argument("sample too small for a nonempty prior-side likelihood block");
  }
  return head;
}

namespace {

double block_loglik(const MixtureParams& psi, const std::vector<double>& data, std::size_t begin,
                    std::size_t end) {
  Eigen::VectorXd logs;
  double sum = 0.0;
  for (std::size_t i = begin; i < end; ++i) sum += component_logs(psi, data[i], logs);
  return sum;
}

} // namespace

FactorizedTarget mixture_da_factors(const MixtureModel& model) {
  if (model.data.size() < 50) throw std::invalid_argument("mixture model needs at least 50 observations");
  auto shared = std::make_shared<const MixtureModel>(model);
  const std::size_t head = shared->head_size();
  const std::size_t n = shared->data.size();
  const Eigen::Index k = shared->components;

  FactorizedTarget target;
  target.dimension = static_cast<std::size_t>(3 * k - 1);
  target.factors.push_back({"bulk-likelihood", CostTier::cheap, [shared, head, n, k](const ParamVector& phi) {
                              const MixtureParams psi = unpack_mixture(phi, k);
                              if (!psi.valid()) return kNegInf;
                              return block_loglik(psi, shared->data, head, n) + mixture_log_jacobian(psi);
                            }});
  target.factors.push_back({"head-likelihood+jeffreys", CostTier::expensive,
                            [shared, head, k](const ParamVector& phi) {
                              const MixtureParams psi = unpack_mixture(phi, k);
                              if (!psi.valid()) return kNegInf;
                              const double prior = jeffreys_logprior(psi, shared->quadrature);
                              if (prior == kNegInf) return kNegInf;
                              return block_loglik(psi, shared->data, 0, head) + prior;
                            }});
  target.reference_log_density = [shared, n, k](const ParamVector& phi) {
    const MixtureParams psi = unpack_mixture(phi, k);
    if (!psi.valid()) return kNegInf;
    return block_loglik(psi, shared->data, 0, n) + jeffreys_logprior(psi, shared->quadrature) +
           mixture_log_jacobian(psi);
  };
  const double scale = static_cast<double>(head) / static_cast<double>(n - head);
  target.expensive_ratio_estimate = [k, scale](const ParamVector& cur, const ParamVector& prop,
                                               double cheap_lr) {
    const double jac = mixture_log_jacobian(unpack_mixture(prop, k)) -
                       mixture_log_jacobian(unpack_mixture(cur, k));
    return (cheap_lr - jac) * scale;
  };
  return target;
}

} // namespace dapref::models
