#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "mfclust/dataset.hpp"
#include "mfclust/select.hpp"

namespace mfclust {

// Synthetic multi-sensor design: spline coefficients of signal sensors follow
// a Gaussian mixture, noisy sensors share a zero mean in every cluster.
struct SimulationDesign {
  int n = 200;
  int p_signal = 2;
  int p_noise = 16;
  double delta = 1.5;
  int m_true = 3;
  std::vector<double> proportions{1.0 / 3, 1.0 / 3, 1.0 / 3};
  int h = 12;
  int order = 3;
  std::vector<double> grid;                      // defaults to 31 points on [0, 30]
  std::vector<Eigen::MatrixXd> signal_means;     // per signal sensor, m_true x h
  std::vector<Eigen::MatrixXd> signal_variances; // per signal sensor, m_true x h (before / delta)
  double noise_variance = 1.0;
  std::uint64_t seed = 1;

  void validate() const;
};

std::vector<double> default_grid();

// Frozen constants: master seed, spread, and the drawn cluster means.
struct DesignConstants {
  int schema_version = 1;
  std::uint64_t master_seed = 0;
  double spread = 1.0;
  double target_separation = 2.0;
  double calibration_delta = 1.5;
  int m_true = 3;
  int h = 12;
  int order = 3;
  std::vector<Eigen::MatrixXd> signal_means;  // unscaled draws times spread
};

// Mean over cluster pairs of the RMS (over the grid) distance between the
// cluster mean curves of one signal sensor, in units of the sensor's
// population standard deviation pooled over grid points.
double standardized_separation(const SimulationDesign& design, int signal_sensor);

// Draws N(0, 1) mean coefficients for p_signal sensors from master_seed and
// scales them so every sensor's average standardized separation equals
// target at delta = calibration_delta (unit coefficient variances).
DesignConstants calibrate_design(std::uint64_t master_seed, int p_signal, double target, double calibration_delta,
                                 int m_true = 3, int h = 12, int order = 3);

void write_design_constants(const DesignConstants& c, const std::string& path);
DesignConstants read_design_constants(const std::string& path);
// <source>/config/simulation_design.json
std::string default_design_path();

// Default design using the frozen constants; signal sensors beyond the
// frozen count are an error.
SimulationDesign make_design(const DesignConstants& c, int n, int p_signal, int p_noise, double delta,
                             std::uint64_t seed);

// Standardized curves with ground-truth labels. Sensors are S1.. then N1..
FunctionalDataSet generate_dataset(const SimulationDesign& design);

double ari(const std::vector<int>& a, const std::vector<int>& b);
double mae_m(const std::vector<int>& estimates, int m_true);

struct RemovalCounts {
  int correct = 0;
  int falsely = 0;
  int variables_removed = 0;
};

// Sensors are indices; zero_columns is the number of all-cluster-zero columns.
RemovalCounts removal_counts(const std::vector<int>& removed, const std::vector<int>& signal,
                             const std::vector<int>& noise, int zero_columns);

enum class Scenario { sample_size, noise_ratio, signal_strength };
std::string to_string(Scenario s);
Scenario parse_scenario(std::string_view name);

struct ScenarioConfig {
  Scenario scenario = Scenario::sample_size;
  std::vector<double> levels;
  int reps = 50;
  std::vector<PenaltyKind> kinds{PenaltyKind::group, PenaltyKind::variable, PenaltyKind::individual};
  bool include_baseline = true;  // clustering without penalty
  std::uint64_t seed = 2024;
  // Factors not being varied: n = 200, p_noise = 16, delta = 1.5.
  int n = 200;
  int p_signal = 2;
  int p_noise = 16;
  double delta = 1.5;
  int q_c = 3;
  SearchGrid grid;  // kinds field is ignored
  int threads = 1;
};

struct ReplicateRecord {
  Scenario scenario = Scenario::sample_size;
  double level = 0.0;
  int rep = 0;
  PenaltyKind kind = PenaltyKind::none;
  int m_hat = 0;
  double lambda = 0.0;
  double gamma = 0.0;
  double ari = 0.0;
  int correct = 0;
  int falsely = 0;
  int variables_removed = 0;
  int fits = 0;                         // EM fits behind this record
  double max_objective_increase = 0.0;  // over all of them
  std::string failure;
};

struct BenchmarkRow {
  std::string scenario_id;  // e.g. sample_size=200
  Scenario scenario = Scenario::sample_size;
  double level = 0.0;
  PenaltyKind kind = PenaltyKind::none;
  double mae = 0.0;
  double mean_variables_removed = 0.0;
  double mean_correct = 0.0;
  double mean_falsely = 0.0;
  double ari_median = 0.0;
  double ari_q1 = 0.0;
  double ari_q3 = 0.0;
  int reps = 0;
  int failures = 0;
};

struct ScenarioResult {
  std::vector<BenchmarkRow> rows;
  std::vector<ReplicateRecord> records;  // level, rep, kind order
};

// Design for one level of a scenario.
SimulationDesign scenario_design(const ScenarioConfig& cfg, const DesignConstants& c, double level, int level_index,
                                 int rep);

// Full pipeline for one dataset and every penalty kind of cfg.
std::vector<ReplicateRecord> run_replicate(const ScenarioConfig& cfg, const DesignConstants& c, double level,
                                           int level_index, int rep);

// Replicates run in parallel over (level, rep); on_record, if set, is called
// once per finished replicate record, serialized.
ScenarioResult run_scenario(const ScenarioConfig& cfg, const DesignConstants& c,
                            const std::function<void(const ReplicateRecord&)>& on_record = {});

std::vector<BenchmarkRow> aggregate(const ScenarioConfig& cfg, const std::vector<ReplicateRecord>& records,
                                    int m_true);

// Linear-interpolation quantile of an unsorted sample, 0 <= prob <= 1.
double quantile(std::vector<double> values, double prob);

// Stand-in for the industrial case study: sensors with geometric eigenvalue
// decay, most of them needing three components to pass 80%.
struct SystemBOptions {
  int n = 300;
  int p = 42;
  int p_signal = 20;
  int fast_sensors = 35;  // sensors whose first three components pass 80%
  int m = 4;
  int h = 12;
  int order = 3;
  std::uint64_t seed = 7;
};

FunctionalDataSet generate_systemb_analog(const SystemBOptions& options);

}  // namespace mfclust
