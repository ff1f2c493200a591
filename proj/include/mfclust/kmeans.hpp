#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace mfclust {

struct KMeansResult {
  Eigen::MatrixXd centroids;  // k x d
  std::vector<int> labels;
  double inertia = 0.0;
};

// Lloyd's algorithm with k-means++ seeding; keeps the best of `restarts`
// runs. A run that empties a cluster is re-seeded, at most 10 times, after
// which NumericalError is thrown.
KMeansResult kmeans(const Eigen::MatrixXd& points, int k, std::uint64_t seed, int restarts = 10,
                    int max_iter = 100);

}  // namespace mfclust
