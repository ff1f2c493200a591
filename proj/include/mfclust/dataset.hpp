#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace mfclust {

// n observations of p sensors, every curve sampled on the same time grid.
struct FunctionalDataSet {
  std::vector<std::string> obs_ids;
  std::vector<std::string> sensor_names;
  std::vector<double> times;
  std::vector<Eigen::MatrixXd> curves;  // one n x tau matrix per sensor
  std::vector<int> labels;              // optional ground truth, empty if unknown

  int n() const { return static_cast<int>(obs_ids.size()); }
  int p() const { return static_cast<int>(sensor_names.size()); }
  int tau() const { return static_cast<int>(times.size()); }
  int sensor_index(const std::string& name) const;
};

// Throws DataError on inconsistent shapes, non-increasing times, or
// non-finite values.
void validate_dataset(const FunctionalDataSet& data);

}  // namespace mfclust
