#include "mfclust/kmeans.hpp"

#include <limits>
#include <random>
#include <stdexcept>
#include <string>

#include "mfclust/errors.hpp"
#include "mfclust/random.hpp"

namespace mfclust {
namespace {

Eigen::MatrixXd plus_plus_seeds(const Eigen::MatrixXd& x, int k, std::mt19937_64& rng) {
  const Eigen::Index n = x.rows();
  Eigen::MatrixXd centers(k, x.cols());
  std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
  centers.row(0) = x.row(pick(rng));
  Eigen::VectorXd d2 = (x.rowwise() - centers.row(0)).rowwise().squaredNorm();
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int c = 1; c < k; ++c) {
    const double total = d2.sum();
    Eigen::Index chosen = pick(rng);
    if (total > 0) {
      double target = unit(rng) * total;
      for (Eigen::Index i = 0; i < n; ++i) {
        target -= d2(i);
        if (target <= 0) {
          chosen = i;
          break;
        }
      }
    }
    centers.row(c) = x.row(chosen);
    d2 = d2.cwiseMin((x.rowwise() - centers.row(c)).rowwise().squaredNorm());
  }
  return centers;
}

// One Lloyd run; returns false if a cluster became empty.
bool lloyd(const Eigen::MatrixXd& x, Eigen::MatrixXd& centers, std::vector<int>& labels, double& inertia,
           int max_iter) {
  const Eigen::Index n = x.rows();
  const int k = static_cast<int>(centers.rows());
  labels.assign(static_cast<size_t>(n), -1);
  for (int iter = 0; iter < max_iter; ++iter) {
    bool changed = false;
    inertia = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) {
        const double d = (x.row(i) - centers.row(c)).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      inertia += best_d;
      if (labels[static_cast<size_t>(i)] != best) {
        labels[static_cast<size_t>(i)] = best;
        changed = true;
      }
    }
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, x.cols());
    std::vector<int> counts(static_cast<size_t>(k), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(labels[static_cast<size_t>(i)]) += x.row(i);
      ++counts[static_cast<size_t>(labels[static_cast<size_t>(i)])];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<size_t>(c)] == 0) return false;
      centers.row(c) = sums.row(c) / counts[static_cast<size_t>(c)];
    }
    if (!changed) break;
  }
  return true;
}

}  // namespace

KMeansResult kmeans(const Eigen::MatrixXd& points, int k, std::uint64_t seed, int restarts, int max_iter) {
  if (k < 1) throw std::invalid_argument("kmeans: k must be >= 1");
  if (points.rows() < k) throw std::invalid_argument("kmeans: fewer points than clusters");
  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (int r = 0; r < std::max(1, restarts); ++r) {
    std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(r)));
    bool ok = false;
    KMeansResult run;
    for (int attempt = 0; attempt <= 10 && !ok; ++attempt) {
      run.centroids = plus_plus_seeds(points, k, rng);
      ok = lloyd(points, run.centroids, run.labels, run.inertia, max_iter);
    }
    if (!ok)
      throw NumericalError("kmeans: a cluster stayed empty after 10 re-seeds (k=" + std::to_string(k) + ")");
    // Final inertia against the converged centroids.
    run.inertia = 0.0;
    for (Eigen::Index i = 0; i < points.rows(); ++i)
      run.inertia += (points.row(i) - run.centroids.row(run.labels[static_cast<size_t>(i)])).squaredNorm();
    if (run.inertia < best.inertia) best = std::move(run);
  }
  return best;
}

}  // namespace mfclust
