#include "mfclust/em.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <set>
#include <stdexcept>
#include <string>

#include "mfclust/errors.hpp"
#include "mfclust/kmeans.hpp"
#include "mfclust/random.hpp"

namespace mfclust {

std::string to_string(PenaltyKind kind) {
  switch (kind) {
    case PenaltyKind::none: return "none";
    case PenaltyKind::individual: return "individual";
    case PenaltyKind::variable: return "variable";
    case PenaltyKind::group: return "group";
  }
  return "unknown";
}

PenaltyKind parse_penalty_kind(std::string_view name) {
  if (name == "none") return PenaltyKind::none;
  if (name == "individual") return PenaltyKind::individual;
  if (name == "variable") return PenaltyKind::variable;
  if (name == "group") return PenaltyKind::group;
  throw std::invalid_argument("unknown penalty kind '" + std::string(name) +
                              "' (expected none, individual, variable or group)");
}

PenaltySpec PenaltySpec::none(int m, int q) { return unit(PenaltyKind::none, 0.0, m, q); }

PenaltySpec PenaltySpec::unit(PenaltyKind kind, double lambda, int m, int q) {
  PenaltySpec s;
  s.kind = kind;
  s.lambda = kind == PenaltyKind::none ? 0.0 : lambda;
  s.gamma = 0.0;
  s.weights = Eigen::MatrixXd::Ones(m, q);
  s.group_weights = Eigen::VectorXd::Ones(m);
  return s;
}

PenaltySpec PenaltySpec::adaptive(PenaltyKind kind, double lambda, double gamma,
                                  const Eigen::MatrixXd& reference_means) {
  const auto m = reference_means.rows();
  const auto q = reference_means.cols();
  PenaltySpec s = unit(kind, lambda, static_cast<int>(m), static_cast<int>(q));
  s.gamma = gamma;
  s.reference_means = reference_means;
  const double inf = std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < m; ++k) {
    for (Eigen::Index j = 0; j < q; ++j) {
      const double a = std::abs(reference_means(k, j));
      s.weights(k, j) = gamma == 0.0 ? 1.0 : (a == 0.0 ? inf : 1.0 / std::pow(a, gamma));
    }
    const double norm = reference_means.row(k).norm();
    s.group_weights(k) = gamma == 0.0 ? 1.0 : (norm == 0.0 ? inf : 1.0 / std::pow(norm, gamma));
  }
  return s;
}

void PenaltySpec::validate(int m, int q) const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("penalty: lambda must be finite and >= 0");
  if (!(gamma >= 0.0)) throw std::invalid_argument("penalty: gamma must be >= 0");
  if (kind == PenaltyKind::none && lambda != 0.0) throw std::invalid_argument("penalty: kind none requires lambda = 0");
  if (weights.rows() != m || weights.cols() != q)
    throw std::invalid_argument("penalty: weight matrix must be m x q");
  if (group_weights.size() != m) throw std::invalid_argument("penalty: group weights must have length m");
  if ((weights.array().isNaN()).any() || (weights.array() < 0.0).any() || (group_weights.array().isNaN()).any() ||
      (group_weights.array() < 0.0).any())
    throw std::invalid_argument("penalty: weights must be nonnegative");
}

namespace {

constexpr double kEmptyCluster = 1e-12;

void check_shapes(const CoefficientMatrix& b, const Eigen::MatrixXd& tau) {
  if (tau.rows() != b.n()) throw std::invalid_argument("responsibilities must have one row per observation");
}

bool pinned(const PenaltySpec& spec, double weight) { return spec.lambda > 0.0 && std::isinf(weight); }

double log_sum_exp(const Eigen::RowVectorXd& row) {
  const double mx = row.maxCoeff();
  if (!std::isfinite(mx)) return mx;
  return mx + std::log((row.array() - mx).exp().sum());
}

}  // namespace

Eigen::MatrixXd log_weighted_densities(const CoefficientMatrix& b, const MixtureParams& params) {
  const Eigen::MatrixXd& x = b.scores();
  if (params.q() != b.q()) throw std::invalid_argument("mixture dimension does not match coefficient matrix");
  const Eigen::ArrayXd inv_var = params.variances.array().inverse();
  const double log_norm = -0.5 * (b.q() * std::log(2.0 * std::numbers::pi) + params.variances.array().log().sum());
  Eigen::MatrixXd out(b.n(), params.m());
  for (int k = 0; k < params.m(); ++k) {
    const Eigen::ArrayXXd diff = x.array().rowwise() - params.means.row(k).array();
    const Eigen::ArrayXd quad = (diff.square().rowwise() * inv_var.transpose()).rowwise().sum();
    out.col(k) = (std::log(params.proportions(k)) + log_norm - 0.5 * quad).matrix();
  }
  return out;
}

EStepResult e_step(const CoefficientMatrix& b, const MixtureParams& params) {
  const Eigen::MatrixXd logd = log_weighted_densities(b, params);
  EStepResult r;
  r.responsibilities.resize(logd.rows(), logd.cols());
  r.log_likelihood = 0.0;
  for (Eigen::Index i = 0; i < logd.rows(); ++i) {
    const double lse = log_sum_exp(logd.row(i));
    if (!std::isfinite(lse))
      throw NumericalError("E-step: all cluster densities vanish for observation " + std::to_string(i));
    r.responsibilities.row(i) = (logd.row(i).array() - lse).exp().matrix();
    r.log_likelihood += lse;
  }
  r.proportions = r.responsibilities.colwise().mean().transpose();
  return r;
}

VarianceUpdate update_variances(const CoefficientMatrix& b, const Eigen::MatrixXd& tau, const Eigen::MatrixXd& means) {
  check_shapes(b, tau);
  const Eigen::MatrixXd& x = b.scores();
  Eigen::ArrayXd acc = Eigen::ArrayXd::Zero(b.q());
  for (Eigen::Index k = 0; k < means.rows(); ++k) {
    const Eigen::ArrayXXd diff = x.array().rowwise() - means.row(k).array();
    acc += (diff.square().colwise() * tau.col(k).array()).colwise().sum().transpose();
  }
  VarianceUpdate out;
  out.variances = acc / static_cast<double>(b.n());
  for (Eigen::Index j = 0; j < out.variances.size(); ++j)
    if (!(out.variances(j) >= kVarianceFloor)) {
      out.variances(j) = kVarianceFloor;
      out.floored.push_back(static_cast<int>(j));
    }
  return out;
}

Eigen::MatrixXd unpenalized_means(const CoefficientMatrix& b, const Eigen::MatrixXd& tau) {
  check_shapes(b, tau);
  const Eigen::VectorXd totals = tau.colwise().sum().transpose();
  for (Eigen::Index k = 0; k < totals.size(); ++k)
    if (!(totals(k) > kEmptyCluster))
      throw NumericalError("cluster " + std::to_string(k + 1) + " is empty (responsibility mass " +
                           std::to_string(totals(k)) + ")");
  return (tau.transpose() * b.scores()).array().colwise() / totals.array();
}

Eigen::MatrixXd update_means_individual(const CoefficientMatrix& b, const Eigen::MatrixXd& tau,
                                        const Eigen::VectorXd& variances, const PenaltySpec& spec) {
  Eigen::MatrixXd means = unpenalized_means(b, tau);
  if (spec.lambda == 0.0) return means;
  const Eigen::MatrixXd sums = tau.transpose() * b.scores();
  for (Eigen::Index k = 0; k < means.rows(); ++k)
    for (Eigen::Index j = 0; j < means.cols(); ++j) {
      const double w = spec.weights(k, j);
      if (pinned(spec, w)) {
        means(k, j) = 0.0;
        continue;
      }
      const double threshold = spec.lambda * w * variances(j);
      const double s = std::abs(sums(k, j));
      means(k, j) = s <= threshold ? 0.0 : means(k, j) * (1.0 - threshold / s);
    }
  return means;
}

Eigen::MatrixXd update_means_variable(const CoefficientMatrix& b, const Eigen::MatrixXd& tau,
                                      const Eigen::VectorXd& variances, const PenaltySpec& spec,
                                      const Eigen::MatrixXd& current_means) {
  Eigen::MatrixXd means = unpenalized_means(b, tau);
  if (spec.lambda == 0.0) return means;
  const Eigen::VectorXd totals = tau.colwise().sum().transpose();
  for (Eigen::Index j = 0; j < means.cols(); ++j) {
    Eigen::Index top = 0;
    for (Eigen::Index k = 1; k < means.rows(); ++k)
      if (std::abs(current_means(k, j)) > std::abs(current_means(top, j))) top = k;
    const double w = spec.weights(top, j);
    double shrunk = 0.0;
    if (!pinned(spec, w)) {
      const double threshold = spec.lambda * w * variances(j) / totals(top);
      const double a = std::abs(means(top, j)) - threshold;
      shrunk = a > 0.0 ? std::copysign(a, means(top, j)) : 0.0;
    }
    if (shrunk == 0.0) {
      // The maximum is zero, so the whole column is.
      means.col(j).setZero();
      continue;
    }
    means(top, j) = shrunk;
    for (Eigen::Index k = 0; k < means.rows(); ++k)
      if (pinned(spec, spec.weights(k, j))) means(k, j) = 0.0;
  }
  return means;
}

Eigen::MatrixXd update_means_group(const CoefficientMatrix& b, const Eigen::MatrixXd& tau,
                                   const Eigen::VectorXd& variances, const PenaltySpec& spec,
                                   const Eigen::MatrixXd& current_means) {
  Eigen::MatrixXd means = unpenalized_means(b, tau);
  if (spec.lambda == 0.0) return means;
  const Eigen::VectorXd totals = tau.colwise().sum().transpose();
  const Eigen::MatrixXd sums = tau.transpose() * b.scores();
  const int qc = b.q_c();
  const double root_qc = std::sqrt(static_cast<double>(qc));
  for (Eigen::Index k = 0; k < means.rows(); ++k) {
    const double w = spec.group_weights(k);
    for (int s = 0; s < b.p(); ++s) {
      auto block = means.row(k).segment(s * qc, qc);
      if (pinned(spec, w)) {
        block.setZero();
        continue;
      }
      const double threshold = spec.lambda * w * root_qc;
      const Eigen::ArrayXd var = variances.segment(s * qc, qc).array();
      const double score_norm = (sums.row(k).segment(s * qc, qc).transpose().array() / var).matrix().norm();
      if (score_norm <= threshold) {
        block.setZero();
        continue;
      }
      double previous = current_means.row(k).segment(s * qc, qc).norm();
      if (previous == 0.0) {
        if (score_norm <= threshold * (1.0 + 1e-6)) {
          block.setZero();
          continue;
        }
        previous = 1e-8;
      }
      const double c = threshold / (totals(k) * previous);
      for (int l = 0; l < qc; ++l) block(l) = block(l) / (1.0 + c * var(l));
    }
  }
  return means;
}

Eigen::MatrixXd update_means(const CoefficientMatrix& b, const Eigen::MatrixXd& tau, const Eigen::VectorXd& variances,
                             const PenaltySpec& spec, const Eigen::MatrixXd& current_means) {
  switch (spec.kind) {
    case PenaltyKind::none: return unpenalized_means(b, tau);
    case PenaltyKind::individual: return update_means_individual(b, tau, variances, spec);
    case PenaltyKind::variable: return update_means_variable(b, tau, variances, spec, current_means);
    case PenaltyKind::group: return update_means_group(b, tau, variances, spec, current_means);
  }
  throw std::logic_error("unhandled penalty kind");
}

double penalty_value(const Eigen::MatrixXd& means, const PenaltySpec& spec, int q_c) {
  if (spec.kind == PenaltyKind::none || spec.lambda == 0.0) return 0.0;
  double total = 0.0;
  switch (spec.kind) {
    case PenaltyKind::individual:
      for (Eigen::Index k = 0; k < means.rows(); ++k)
        for (Eigen::Index j = 0; j < means.cols(); ++j)
          if (means(k, j) != 0.0) total += spec.weights(k, j) * std::abs(means(k, j));
      break;
    case PenaltyKind::variable:
      for (Eigen::Index j = 0; j < means.cols(); ++j) {
        Eigen::Index top = 0;
        for (Eigen::Index k = 1; k < means.rows(); ++k)
          if (std::abs(means(k, j)) > std::abs(means(top, j))) top = k;
        if (means(top, j) != 0.0) total += spec.weights(top, j) * std::abs(means(top, j));
      }
      break;
    case PenaltyKind::group: {
      const double root_qc = std::sqrt(static_cast<double>(q_c));
      const auto p = means.cols() / q_c;
      for (Eigen::Index k = 0; k < means.rows(); ++k)
        for (Eigen::Index s = 0; s < p; ++s) {
          const double norm = means.row(k).segment(s * q_c, q_c).norm();
          if (norm != 0.0) total += spec.group_weights(k) * root_qc * norm;
        }
      break;
    }
    case PenaltyKind::none: break;
  }
  return spec.lambda * total;
}

ObjectiveValue penalized_nll(const CoefficientMatrix& b, const MixtureParams& params, const PenaltySpec& spec,
                             const Eigen::MatrixXd& tau) {
  const Eigen::MatrixXd logd = log_weighted_densities(b, params);
  ObjectiveValue v;
  v.penalty = penalty_value(params.means, spec, b.q_c());
  double complete = 0.0, observed = 0.0;
  for (Eigen::Index i = 0; i < logd.rows(); ++i) {
    observed += log_sum_exp(logd.row(i));
    for (Eigen::Index k = 0; k < logd.cols(); ++k)
      if (tau(i, k) != 0.0) complete += tau(i, k) * logd(i, k);
  }
  v.plain_observed = -observed;
  v.observed = -observed + v.penalty;
  v.complete = -complete + v.penalty;
  return v;
}

MixtureParams initialize(const CoefficientMatrix& b, int m, std::uint64_t seed, int kmeans_restarts) {
  if (m < 1) throw std::invalid_argument("initialize: m must be >= 1");
  if (b.n() < m) throw std::invalid_argument("initialize: fewer observations than clusters");
  const KMeansResult km = kmeans(b.scores(), m, seed, kmeans_restarts);
  MixtureParams p;
  p.means = km.centroids;
  p.proportions = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd ss = Eigen::VectorXd::Zero(b.q());
  for (int i = 0; i < b.n(); ++i) {
    const int k = km.labels[static_cast<size_t>(i)];
    p.proportions(k) += 1.0;
    ss += (b.scores().row(i) - p.means.row(k)).array().square().matrix().transpose();
  }
  p.proportions /= static_cast<double>(b.n());
  p.variances = (ss / static_cast<double>(b.n())).cwiseMax(1e-6);
  p.refresh_zero_mask();
  return p;
}

std::vector<int> hard_labels(const Eigen::MatrixXd& tau) {
  std::vector<int> labels(static_cast<size_t>(tau.rows()));
  for (Eigen::Index i = 0; i < tau.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index k = 1; k < tau.cols(); ++k)
      if (tau(i, k) > tau(i, best)) best = k;
    labels[static_cast<size_t>(i)] = static_cast<int>(best);
  }
  return labels;
}

std::vector<int> removed_sensors(const MixtureParams& params, int p, int q_c) {
  std::vector<int> out;
  for (int s = 0; s < p; ++s)
    if (params.zero_mask.middleCols(s * q_c, q_c).all()) out.push_back(s);
  return out;
}

int count_zero_columns(const MixtureParams& params) {
  int count = 0;
  for (Eigen::Index j = 0; j < params.means.cols(); ++j) count += params.zero_mask.col(j).all();
  return count;
}

namespace {

void apply_pins(MixtureParams& p, const PenaltySpec& spec, int q_c) {
  if (spec.lambda <= 0.0) return;
  switch (spec.kind) {
    case PenaltyKind::individual:
    case PenaltyKind::variable:
      for (Eigen::Index k = 0; k < p.means.rows(); ++k)
        for (Eigen::Index j = 0; j < p.means.cols(); ++j)
          if (std::isinf(spec.weights(k, j))) p.means(k, j) = 0.0;
      break;
    case PenaltyKind::group:
      for (Eigen::Index k = 0; k < p.means.rows(); ++k)
        if (std::isinf(spec.group_weights(k))) p.means.row(k).setZero();
      break;
    case PenaltyKind::none: break;
  }
  (void)q_c;
}

void finalize(FitResult& r, const CoefficientMatrix& b, const PenaltySpec& spec) {
  r.params.refresh_zero_mask();
  // Exact zeros without an active penalty are rounding coincidences.
  if (spec.kind == PenaltyKind::none || spec.lambda <= 0.0) r.params.zero_mask.setConstant(false);
  r.n_zero_means = static_cast<int>(r.params.zero_mask.count());
  r.removed_sensors = removed_sensors(r.params, b.p(), b.q_c());
  try {
    const EStepResult es = e_step(b, r.params);
    r.responsibilities = es.responsibilities;
    r.hard_labels = hard_labels(es.responsibilities);
    r.plain_nll = -es.log_likelihood;
    r.penalized_nll = r.plain_nll + penalty_value(r.params.means, spec, b.q_c());
  } catch (const NumericalError& e) {
    r.plain_nll = r.penalized_nll = std::numeric_limits<double>::infinity();
    r.warnings.emplace_back(e.what());
  }
}

}  // namespace

FitResult run_em_from(const CoefficientMatrix& b, const MixtureParams& init, const PenaltySpec& spec,
                      const EmOptions& options) {
  spec.validate(init.m(), b.q());
  FitResult r;
  r.params = init;
  apply_pins(r.params, spec, b.q_c());
  std::set<int> floored;
  try {
    for (int it = 1; it <= options.max_iter; ++it) {
      const EStepResult es = e_step(b, r.params);
      r.objective_trace.push_back(-es.log_likelihood + penalty_value(r.params.means, spec, b.q_c()));

      MixtureParams next;
      next.proportions = es.proportions;
      next.means = update_means(b, es.responsibilities, r.params.variances, spec, r.params.means);
      VarianceUpdate vu = update_variances(b, es.responsibilities, next.means);
      next.variances = std::move(vu.variances);
      floored.insert(vu.floored.begin(), vu.floored.end());

      const double change = std::sqrt((next.means - r.params.means).squaredNorm() +
                                      (next.variances - r.params.variances).squaredNorm() +
                                      (next.proportions - r.params.proportions).squaredNorm());
      r.params = std::move(next);
      r.iterations = it;
      if (change <= options.tol) {
        r.converged = true;
        break;
      }
    }
  } catch (const NumericalError& e) {
    r.collapsed = true;
    r.converged = false;
    r.warnings.emplace_back(e.what());
  }
  if (!floored.empty()) {
    std::string cols;
    for (int j : floored) cols += (cols.empty() ? "" : ",") + std::to_string(j + 1);
    r.warnings.push_back("degenerate variance floored at 1e-8 for columns " + cols);
  }
  finalize(r, b, spec);
  if (std::isfinite(r.penalized_nll)) r.objective_trace.push_back(r.penalized_nll);
  return r;
}

FitResult run_em(const CoefficientMatrix& b, int m, const PenaltySpec& spec, std::uint64_t seed,
                 const EmOptions& options, const MixtureParams* first_init) {
  if (m < 1) throw std::invalid_argument("run_em: m must be >= 1");
  FitResult best;
  bool have_best = false;
  std::string last_error;
  for (int attempt = 0; attempt <= options.restarts; ++attempt) {
    MixtureParams init;
    try {
      if (attempt == 0 && first_init != nullptr) init = *first_init;
      else if (attempt == 0) init = initialize(b, m, seed, options.kmeans_restarts);
      else init = initialize(b, m, derive_seed(seed, static_cast<std::uint64_t>(attempt)), options.kmeans_restarts);
    } catch (const NumericalError& e) {
      last_error = e.what();
      continue;
    }
    FitResult r = run_em_from(b, init, spec, options);
    r.attempts = attempt + 1;
    if (!r.collapsed) return r;
    if (!have_best || r.penalized_nll < best.penalized_nll) {
      best = std::move(r);
      have_best = true;
    }
  }
  if (!have_best) throw NumericalError("run_em: initialization failed: " + last_error);
  best.attempts = options.restarts + 1;
  return best;
}

}  // namespace mfclust
