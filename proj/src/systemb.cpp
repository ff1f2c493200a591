#include <cmath>
#include <random>
#include <stdexcept>

#include "mfclust/bspline.hpp"
#include "mfclust/fpca.hpp"
#include "mfclust/simbench.hpp"

namespace mfclust {

FunctionalDataSet generate_systemb_analog(const SystemBOptions& o) {
  if (o.p < 1 || o.p_signal < 0 || o.p_signal > o.p || o.fast_sensors < 0 || o.fast_sensors > o.p || o.m < 1 ||
      o.n < 2)
    throw std::invalid_argument("System-B analog: inconsistent options");
  const std::vector<double> grid = default_grid();
  const BasisSpec basis = build_basis(grid.front(), grid.back(), o.h, o.order);
  const Eigen::MatrixXd bm = design_matrix(basis, grid);
  const Eigen::MatrixXd lt = gram_matrix(basis).llt().matrixL().transpose();

  std::mt19937_64 rng(o.seed);
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_real_distribution<double> fast(0.48, 0.53), slow(0.65, 0.75);
  std::uniform_int_distribution<int> cluster(0, o.m - 1);

  FunctionalDataSet data;
  data.times = grid;
  for (int i = 0; i < o.n; ++i) {
    data.obs_ids.push_back("unit" + std::to_string(i + 1));
    data.labels.push_back(cluster(rng));
  }
  // Slow-decay sensors are spread evenly over the index range.
  const int n_slow = o.p - o.fast_sensors;
  std::vector<bool> is_slow(static_cast<size_t>(o.p), false);
  for (int j = 0; j < n_slow; ++j) is_slow[static_cast<size_t>((2 * j + 1) * o.p / (2 * n_slow))] = true;

  const double a = 0.8;  // share of signal-component sd carried by the cluster mean
  for (int s = 0; s < o.p; ++s) {
    char name[24];
    std::snprintf(name, sizeof name, "sensor%02d", s + 1);
    data.sensor_names.push_back(name);
    const double r = is_slow[static_cast<size_t>(s)] ? slow(rng) : fast(rng);
    Eigen::MatrixXd raw(o.h, o.h);
    for (int i = 0; i < raw.size(); ++i) raw.data()[i] = z(rng);
    const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(raw).householderQ();
    const Eigen::MatrixXd eig = lt.triangularView<Eigen::Upper>().solve(q);  // Gram-orthonormal columns

    Eigen::MatrixXd centers = Eigen::MatrixXd::Zero(o.m, 3);
    if (s < o.p_signal) {
      for (int i = 0; i < centers.size(); ++i) centers.data()[i] = z(rng);
      centers.rowwise() -= centers.colwise().mean();
      for (int l = 0; l < 3; ++l) {
        const double sd = std::sqrt(centers.col(l).squaredNorm() / o.m);
        if (sd > 0) centers.col(l) /= sd;
      }
    }
    Eigen::MatrixXd scores(o.n, o.h);
    for (int i = 0; i < o.n; ++i)
      for (int l = 0; l < o.h; ++l) {
        const double sd = std::pow(r, 0.5 * l);
        if (s < o.p_signal && l < 3)
          scores(i, l) = sd * (a * centers(data.labels[static_cast<size_t>(i)], l) + std::sqrt(1 - a * a) * z(rng));
        else
          scores(i, l) = sd * z(rng);
      }
    data.curves.push_back(scores * eig.transpose() * bm.transpose());
  }
  FunctionalDataSet out = standardize(data).data;
  out.labels = data.labels;
  return out;
}

}  // namespace mfclust
