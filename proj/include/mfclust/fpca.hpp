#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "mfclust/bspline.hpp"
#include "mfclust/dataset.hpp"

namespace mfclust {

struct Standardization {
  double mean = 0.0;
  double sd = 1.0;
};

struct StandardizedData {
  FunctionalDataSet data;
  std::vector<Standardization> stats;  // per sensor
};

// Per sensor: subtract the mean pooled over all curves and time points and
// divide by the pooled (population) standard deviation.
StandardizedData standardize(const FunctionalDataSet& data);

// Applies previously estimated per-sensor statistics.
FunctionalDataSet apply_standardization(const FunctionalDataSet& data,
                                        std::span<const Standardization> stats);

// Functional principal components of one sensor, expressed in the spline basis.
struct SensorFpcaModel {
  std::string sensor;
  BasisSpec basis;
  std::vector<double> times;
  Eigen::VectorXd mean_coeffs;
  Eigen::MatrixXd eigen_coeffs;       // n_basis x q_c, Gram-orthonormal columns
  Eigen::VectorXd eigenvalues;        // q_c, nonincreasing, >= 0
  Eigen::VectorXd variance_explained; // cumulative fractions over all n_basis components
  Standardization standardization;
  Eigen::MatrixXd gram;               // cached basis Gram matrix

  int q_c() const { return static_cast<int>(eigen_coeffs.cols()); }
};

SensorFpcaModel fit_sensor_fpca(const FunctionalDataSet& data, int sensor, const BasisSpec& basis,
                                int q_c);

// Keeps the leading q_c components of a fitted model.
SensorFpcaModel truncate(const SensorFpcaModel& model, int q_c);

// Scores of one curve sampled on model.times.
Eigen::VectorXd transform(const SensorFpcaModel& model, std::span<const double> curve);

// Scores of many curves (rows of `curves`); returns rows x q_c.
Eigen::MatrixXd transform(const SensorFpcaModel& model, const Eigen::MatrixXd& curves);

// Curve values on model.times from the leading scores.size() components.
Eigen::VectorXd reconstruct(const SensorFpcaModel& model, const Eigen::VectorXd& scores);

struct ComponentSelection {
  int q_c = 1;
  double fraction = 0.0;  // share of sensors above beta at q_c
  bool satisfied = true;  // false when the rule never holds up to n_basis
};

// Smallest q_c such that at least alpha of the sensors have more than beta
// of their variation explained by the first q_c components.
ComponentSelection select_num_components(std::span<const SensorFpcaModel> models, double alpha,
                                         double beta);

// n x (p*q_c) score matrix, sensor-major and component-minor.
class CoefficientMatrix {
 public:
  CoefficientMatrix() = default;
  CoefficientMatrix(Eigen::MatrixXd scores, int p, int q_c, std::vector<std::string> sensor_names);

  const Eigen::MatrixXd& scores() const { return scores_; }
  int n() const { return static_cast<int>(scores_.rows()); }
  int q() const { return static_cast<int>(scores_.cols()); }
  int p() const { return p_; }
  int q_c() const { return q_c_; }
  const std::vector<std::string>& sensor_names() const { return sensor_names_; }

  int column(int sensor, int component) const;
  std::pair<int, int> sensor_component(int column) const;

 private:
  Eigen::MatrixXd scores_;
  int p_ = 0;
  int q_c_ = 0;
  std::vector<std::string> sensor_names_;
};

CoefficientMatrix assemble_coefficients(std::span<const Eigen::MatrixXd> blocks,
                                        std::vector<std::string> sensor_names);

struct TransformOptions {
  int n_basis = 12;
  int order = 3;
  int q_c = 0;  // 0 selects q_c by the (alpha, beta) rule
  double alpha = 0.8;
  double beta = 0.8;
  int threads = 1;
};

struct TransformResult {
  std::vector<SensorFpcaModel> models;  // truncated to the chosen q_c
  CoefficientMatrix coefficients;
  ComponentSelection selection;
};

// Standardize, fit per-sensor FPCA on the common basis, pick q_c and
// assemble the in-sample score matrix.
TransformResult run_transform(const FunctionalDataSet& raw, const TransformOptions& options);

// Scores of (raw) data under already fitted sensor models.
CoefficientMatrix apply_transform(const FunctionalDataSet& raw,
                                  std::span<const SensorFpcaModel> models);

}  // namespace mfclust
