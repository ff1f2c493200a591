#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mfclust/dataset.hpp"
#include "mfclust/fpca.hpp"
#include "mfclust/select.hpp"
#include "mfclust/simbench.hpp"

namespace mfclust {

inline constexpr int kModelSchemaVersion = 1;

// Long format, header obs_id,sensor_id,time,value. Observations and sensors
// keep their first-appearance order; times are sorted.
FunctionalDataSet read_long_csv(const std::string& path);
void write_long_csv(const FunctionalDataSet& data, const std::string& path);

// obs_id followed by one column per score, named <sensor>_fpc<l>.
struct ScoreTable {
  std::vector<std::string> obs_ids;
  CoefficientMatrix coefficients;
};
void write_scores(const std::vector<std::string>& obs_ids, const CoefficientMatrix& b, const std::string& path);
ScoreTable read_scores(const std::string& path);

// Everything needed to reproduce assignments for new data.
struct ModelFile {
  std::vector<SensorFpcaModel> fpca;  // empty when the fit started from scores
  SelectionReport report;             // report.best.responsibilities is not stored
  std::vector<std::string> sensor_names;
};
void write_model(const ModelFile& model, const std::string& path);
ModelFile read_model(const std::string& path);

// Per-sensor FPCA models alone, as written by the transform step.
void write_fpca_models(const std::vector<SensorFpcaModel>& models, const std::string& path);
std::vector<SensorFpcaModel> read_fpca_models(const std::string& path);

struct Assignments {
  std::vector<std::string> obs_ids;
  std::vector<int> labels;  // 0-based in memory, 1-based on disk
  Eigen::MatrixXd responsibilities;
};
void write_assignments(const std::vector<std::string>& obs_ids, const std::vector<int>& labels,
                       const Eigen::MatrixXd& responsibilities, const std::string& path);
Assignments read_assignments(const std::string& path);

void write_benchmark_rows(const std::vector<BenchmarkRow>& rows, const std::string& path);
std::vector<BenchmarkRow> read_benchmark_rows(const std::string& path);

// Replicate records are appended one line per write call and flushed, so an
// interrupted run leaves a valid CSV.
class ReplicateWriter {
 public:
  explicit ReplicateWriter(const std::string& path);
  void write(const ReplicateRecord& r);

 private:
  std::ofstream out_;
  std::string path_;
};
std::vector<ReplicateRecord> read_replicate_records(const std::string& path);

// Ground truth of a simulated dataset: labels, sensor roles, design echo.
void write_truth(const SimulationDesign& design, const FunctionalDataSet& data, const std::string& path);

// Writes through a temporary file renamed into place.
void write_text_atomic(const std::string& path, const std::string& contents);

std::string format_double(double x);

}  // namespace mfclust
