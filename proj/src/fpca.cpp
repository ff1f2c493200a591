#include "mfclust/fpca.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "mfclust/errors.hpp"
#include "mfclust/parallel.hpp"

namespace mfclust {

int FunctionalDataSet::sensor_index(const std::string& name) const {
  for (size_t s = 0; s < sensor_names.size(); ++s)
    if (sensor_names[s] == name) return static_cast<int>(s);
  return -1;
}

void validate_dataset(const FunctionalDataSet& data) {
  if (data.curves.size() != data.sensor_names.size())
    throw DataError("dataset: " + std::to_string(data.curves.size()) + " curve blocks for " +
                    std::to_string(data.sensor_names.size()) + " sensors");
  for (size_t i = 1; i < data.times.size(); ++i)
    if (!(data.times[i] > data.times[i - 1])) throw DataError("dataset: times must be strictly increasing");
  for (size_t s = 0; s < data.curves.size(); ++s) {
    const auto& c = data.curves[s];
    if (c.rows() != data.n() || c.cols() != data.tau())
      throw DataError("dataset: sensor " + data.sensor_names[s] + " has shape " + std::to_string(c.rows()) +
                      "x" + std::to_string(c.cols()) + ", expected " + std::to_string(data.n()) + "x" +
                      std::to_string(data.tau()));
    if (!c.allFinite()) throw DataError("dataset: non-finite value in sensor " + data.sensor_names[s]);
  }
  if (!data.labels.empty() && static_cast<int>(data.labels.size()) != data.n())
    throw DataError("dataset: label count does not match observation count");
}

StandardizedData standardize(const FunctionalDataSet& data) {
  validate_dataset(data);
  StandardizedData out{data, {}};
  out.stats.reserve(data.curves.size());
  for (size_t s = 0; s < data.curves.size(); ++s) {
    const auto& c = data.curves[s];
    const double count = static_cast<double>(c.size());
    const double mean = c.sum() / count;
    const double var = (c.array() - mean).square().sum() / count;
    const double sd = std::sqrt(var);
    if (!(sd > 1e-12 * std::max(1.0, std::abs(mean))))
      throw DataError("sensor " + data.sensor_names[s] + " has zero variance and cannot be standardized");
    out.stats.push_back({mean, sd});
    out.data.curves[s] = (c.array() - mean) / sd;
  }
  return out;
}

FunctionalDataSet apply_standardization(const FunctionalDataSet& data,
                                        std::span<const Standardization> stats) {
  if (stats.size() != data.curves.size())
    throw DataError("standardization statistics do not match sensor count");
  FunctionalDataSet out = data;
  for (size_t s = 0; s < stats.size(); ++s)
    out.curves[s] = (data.curves[s].array() - stats[s].mean) / stats[s].sd;
  return out;
}

SensorFpcaModel fit_sensor_fpca(const FunctionalDataSet& data, int sensor, const BasisSpec& basis,
                                int q_c) {
  if (sensor < 0 || sensor >= data.p()) throw std::invalid_argument("fit_sensor_fpca: sensor index out of range");
  const int n = data.n();
  const int h = basis.n_basis;
  if (q_c < 1 || q_c > std::min(n - 1, h))
    throw std::invalid_argument("fit_sensor_fpca: q_c=" + std::to_string(q_c) + " outside [1, min(n-1, n_basis)=" +
                                std::to_string(std::min(n - 1, h)) + "]");

  const Eigen::MatrixXd coeffs = fit_coefficients(basis, data.times, data.curves[static_cast<size_t>(sensor)]);
  SensorFpcaModel model;
  model.sensor = data.sensor_names[static_cast<size_t>(sensor)];
  model.basis = basis;
  model.times = data.times;
  model.gram = gram_matrix(basis);
  model.mean_coeffs = coeffs.colwise().mean().transpose();

  const Eigen::MatrixXd centered = coeffs.rowwise() - model.mean_coeffs.transpose();
  const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(n);

  // Covariance operator in the basis: cov * G e = lambda e. With G = L L^T
  // the symmetric form is L^T cov L u = lambda u and e = L^{-T} u.
  const Eigen::LLT<Eigen::MatrixXd> llt(model.gram);
  const Eigen::MatrixXd l = llt.matrixL();
  Eigen::MatrixXd whitened = l.transpose() * cov * l;
  whitened = 0.5 * (whitened + whitened.transpose());
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(whitened);

  Eigen::VectorXd all_values(h);
  Eigen::MatrixXd all_vectors(h, h);
  for (int c = 0; c < h; ++c) {
    all_values(c) = std::max(0.0, es.eigenvalues()(h - 1 - c));
    all_vectors.col(c) = es.eigenvectors().col(h - 1 - c);
  }
  const Eigen::MatrixXd eig = l.transpose().triangularView<Eigen::Upper>().solve(all_vectors.leftCols(q_c));

  model.eigen_coeffs = eig;
  for (int c = 0; c < q_c; ++c) {
    Eigen::Index at = 0;
    eig.col(c).cwiseAbs().maxCoeff(&at);
    if (eig(at, c) < 0) model.eigen_coeffs.col(c) *= -1.0;
  }
  model.eigenvalues = all_values.head(q_c);

  const double total = all_values.sum();
  model.variance_explained.resize(h);
  double running = 0.0;
  for (int c = 0; c < h; ++c) {
    running += all_values(c);
    model.variance_explained(c) = total > 0 ? std::min(1.0, running / total) : 1.0;
  }
  return model;
}

SensorFpcaModel truncate(const SensorFpcaModel& model, int q_c) {
  if (q_c < 1 || q_c > model.q_c()) throw std::invalid_argument("truncate: q_c out of range");
  SensorFpcaModel out = model;
  out.eigen_coeffs = model.eigen_coeffs.leftCols(q_c);
  out.eigenvalues = model.eigenvalues.head(q_c);
  return out;
}

Eigen::MatrixXd transform(const SensorFpcaModel& model, const Eigen::MatrixXd& curves) {
  if (curves.cols() != static_cast<Eigen::Index>(model.times.size()))
    throw DataError("transform: curve has " + std::to_string(curves.cols()) + " samples, model grid has " +
                    std::to_string(model.times.size()));
  const Eigen::MatrixXd coeffs = fit_coefficients(model.basis, model.times, curves);
  const Eigen::MatrixXd centered = coeffs.rowwise() - model.mean_coeffs.transpose();
  return centered * model.gram * model.eigen_coeffs;
}

Eigen::VectorXd transform(const SensorFpcaModel& model, std::span<const double> curve) {
  Eigen::MatrixXd row(1, static_cast<Eigen::Index>(curve.size()));
  for (size_t i = 0; i < curve.size(); ++i) row(0, static_cast<Eigen::Index>(i)) = curve[i];
  return transform(model, row).row(0).transpose();
}

Eigen::VectorXd reconstruct(const SensorFpcaModel& model, const Eigen::VectorXd& scores) {
  if (scores.size() > model.q_c()) throw std::invalid_argument("reconstruct: more scores than components");
  const Eigen::VectorXd coeffs = model.mean_coeffs + model.eigen_coeffs.leftCols(scores.size()) * scores;
  return design_matrix(model.basis, model.times) * coeffs;
}

ComponentSelection select_num_components(std::span<const SensorFpcaModel> models, double alpha,
                                         double beta) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must lie in (0, 1]");
  if (!(beta > 0.0 && beta < 1.0)) throw std::invalid_argument("beta must lie in (0, 1)");
  if (models.empty()) throw std::invalid_argument("select_num_components: no sensor models");
  int max_q = 0;
  for (const auto& m : models) max_q = std::max(max_q, static_cast<int>(m.variance_explained.size()));
  const double p = static_cast<double>(models.size());
  ComponentSelection sel;
  for (int q = 1; q <= max_q; ++q) {
    int above = 0;
    for (const auto& m : models) {
      const auto& ve = m.variance_explained;
      const double explained = ve.size() == 0 ? 0.0 : ve(std::min<Eigen::Index>(q, ve.size()) - 1);
      above += explained > beta;
    }
    sel.q_c = q;
    sel.fraction = above / p;
    if (above >= alpha * p - 1e-9) return sel;
  }
  sel.satisfied = false;
  return sel;
}

CoefficientMatrix::CoefficientMatrix(Eigen::MatrixXd scores, int p, int q_c,
                                     std::vector<std::string> sensor_names)
    : scores_(std::move(scores)), p_(p), q_c_(q_c), sensor_names_(std::move(sensor_names)) {
  if (p_ < 1 || q_c_ < 1 || scores_.cols() != static_cast<Eigen::Index>(p_) * q_c_)
    throw DataError("coefficient matrix: " + std::to_string(scores_.cols()) + " columns for p=" +
                    std::to_string(p_) + ", q_c=" + std::to_string(q_c_));
  if (sensor_names_.empty())
    for (int s = 0; s < p_; ++s) sensor_names_.push_back("sensor" + std::to_string(s + 1));
  if (static_cast<int>(sensor_names_.size()) != p_) throw DataError("coefficient matrix: sensor name count mismatch");
}

int CoefficientMatrix::column(int sensor, int component) const {
  if (sensor < 0 || sensor >= p_ || component < 0 || component >= q_c_)
    throw std::out_of_range("coefficient matrix: (sensor, component) out of range");
  return sensor * q_c_ + component;
}

std::pair<int, int> CoefficientMatrix::sensor_component(int column) const {
  if (column < 0 || column >= q()) throw std::out_of_range("coefficient matrix: column out of range");
  return {column / q_c_, column % q_c_};
}

CoefficientMatrix assemble_coefficients(std::span<const Eigen::MatrixXd> blocks,
                                        std::vector<std::string> sensor_names) {
  if (blocks.empty()) throw DataError("assemble_coefficients: no sensor blocks");
  const auto n = blocks.front().rows();
  const auto q_c = blocks.front().cols();
  for (size_t s = 0; s < blocks.size(); ++s)
    if (blocks[s].rows() != n || blocks[s].cols() != q_c)
      throw DataError("assemble_coefficients: block " + std::to_string(s) + " has shape " +
                      std::to_string(blocks[s].rows()) + "x" + std::to_string(blocks[s].cols()) + ", expected " +
                      std::to_string(n) + "x" + std::to_string(q_c));
  Eigen::MatrixXd scores(n, q_c * static_cast<Eigen::Index>(blocks.size()));
  for (size_t s = 0; s < blocks.size(); ++s) scores.middleCols(static_cast<Eigen::Index>(s) * q_c, q_c) = blocks[s];
  return CoefficientMatrix(std::move(scores), static_cast<int>(blocks.size()), static_cast<int>(q_c),
                           std::move(sensor_names));
}

TransformResult run_transform(const FunctionalDataSet& raw, const TransformOptions& options) {
  const StandardizedData std_data = standardize(raw);
  const FunctionalDataSet& data = std_data.data;
  const BasisSpec basis = build_basis(data.times.front(), data.times.back(), options.n_basis, options.order);
  const int max_q = std::min(data.n() - 1, basis.n_basis);
  if (options.q_c > max_q)
    throw std::invalid_argument("q_c=" + std::to_string(options.q_c) + " exceeds min(n-1, n_basis)=" +
                                std::to_string(max_q));
  const int fit_q = options.q_c > 0 ? options.q_c : max_q;

  std::vector<SensorFpcaModel> full(static_cast<size_t>(data.p()));
  parallel_for(full.size(), options.threads, [&](size_t s) {
    full[s] = fit_sensor_fpca(data, static_cast<int>(s), basis, fit_q);
    full[s].standardization = std_data.stats[s];
  });

  TransformResult result;
  if (options.q_c > 0) {
    result.selection.q_c = options.q_c;
    int above = 0;
    for (const auto& m : full) above += m.variance_explained(options.q_c - 1) > options.beta;
    result.selection.fraction = above / static_cast<double>(full.size());
    result.selection.satisfied = true;
  } else {
    result.selection = select_num_components(full, options.alpha, options.beta);
    result.selection.q_c = std::min(result.selection.q_c, max_q);
  }
  const int q_c = result.selection.q_c;

  std::vector<Eigen::MatrixXd> blocks(full.size());
  result.models.resize(full.size());
  for (size_t s = 0; s < full.size(); ++s) {
    result.models[s] = truncate(full[s], q_c);
    blocks[s] = transform(result.models[s], data.curves[s]);
  }
  result.coefficients = assemble_coefficients(blocks, data.sensor_names);
  return result;
}

CoefficientMatrix apply_transform(const FunctionalDataSet& raw, std::span<const SensorFpcaModel> models) {
  validate_dataset(raw);
  if (models.size() != raw.curves.size())
    throw DataError("apply_transform: model has " + std::to_string(models.size()) + " sensors, data has " +
                    std::to_string(raw.curves.size()));
  std::vector<Eigen::MatrixXd> blocks(models.size());
  for (size_t s = 0; s < models.size(); ++s) {
    if (models[s].sensor != raw.sensor_names[s])
      throw DataError("apply_transform: sensor order mismatch at " + raw.sensor_names[s]);
    const auto& st = models[s].standardization;
    blocks[s] = transform(models[s], Eigen::MatrixXd((raw.curves[s].array() - st.mean) / st.sd));
  }
  return assemble_coefficients(blocks, raw.sensor_names);
}

}  // namespace mfclust
