#include "mfclust/bspline.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "mfclust/errors.hpp"

namespace mfclust {

BasisSpec build_basis(double domain_lo, double domain_hi, int n_basis, int order) {
  if (order < 1) throw std::invalid_argument("spline order must be >= 1");
  if (n_basis < order) throw std::invalid_argument("n_basis must be >= order");
  if (!(domain_lo < domain_hi)) throw std::invalid_argument("domain_lo must be < domain_hi");

  BasisSpec b;
  b.domain_lo = domain_lo;
  b.domain_hi = domain_hi;
  b.order = order;
  b.n_basis = n_basis;
  b.knots.reserve(static_cast<size_t>(n_basis + order));
  for (int i = 0; i < order; ++i) b.knots.push_back(domain_lo);
  const int n_interior = n_basis - order;
  const double step = (domain_hi - domain_lo) / (n_interior + 1);
  for (int i = 1; i <= n_interior; ++i) b.knots.push_back(domain_lo + i * step);
  for (int i = 0; i < order; ++i) b.knots.push_back(domain_hi);
  return b;
}

void validate_basis(const BasisSpec& basis) {
  if (basis.order < 1 || basis.n_basis < basis.order)
    throw std::invalid_argument("invalid basis: need n_basis >= order >= 1");
  if (!(basis.domain_lo < basis.domain_hi))
    throw std::invalid_argument("invalid basis: empty domain");
  if (basis.knots.size() != static_cast<size_t>(basis.n_basis + basis.order))
    throw std::invalid_argument("invalid basis: knot count must equal n_basis + order");
  for (size_t i = 1; i < basis.knots.size(); ++i)
    if (basis.knots[i] < basis.knots[i - 1])
      throw std::invalid_argument("invalid basis: knots must be nondecreasing");
}

namespace {

// Index i of the knot span [knots[i], knots[i+1]) containing t, restricted to
// the active range [order-1, n_basis-1]. The right endpoint maps to the last span.
int find_span(const BasisSpec& b, double t) {
  const int lo = b.order - 1;
  const int hi = b.n_basis - 1;
  if (t >= b.knots[static_cast<size_t>(hi + 1)]) return hi;
  int left = lo;
  int right = hi + 1;
  while (right - left > 1) {
    const int mid = (left + right) / 2;
    if (t < b.knots[static_cast<size_t>(mid)]) right = mid;
    else left = mid;
  }
  return left;
}

double clamp_to_domain(const BasisSpec& b, double t) {
  const double slack = 1e-12 * (b.domain_hi - b.domain_lo);
  if (!(t >= b.domain_lo - slack && t <= b.domain_hi + slack))
    throw std::out_of_range("evaluation point " + std::to_string(t) + " outside basis domain [" +
                            std::to_string(b.domain_lo) + ", " + std::to_string(b.domain_hi) + "]");
  return std::clamp(t, b.domain_lo, b.domain_hi);
}

// Nonzero basis values N[span-degree .. span] at t.
void nonzero_basis(const BasisSpec& b, int span, double t, std::vector<double>& out) {
  const int p = b.degree();
  out.assign(static_cast<size_t>(p + 1), 0.0);
  std::vector<double> left(static_cast<size_t>(p + 1)), right(static_cast<size_t>(p + 1));
  out[0] = 1.0;
  for (int j = 1; j <= p; ++j) {
    left[static_cast<size_t>(j)] = t - b.knots[static_cast<size_t>(span + 1 - j)];
    right[static_cast<size_t>(j)] = b.knots[static_cast<size_t>(span + j)] - t;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      const double denom = right[static_cast<size_t>(r + 1)] + left[static_cast<size_t>(j - r)];
      const double temp = denom > 0.0 ? out[static_cast<size_t>(r)] / denom : 0.0;
      out[static_cast<size_t>(r)] = saved + right[static_cast<size_t>(r + 1)] * temp;
      saved = left[static_cast<size_t>(j - r)] * temp;
    }
    out[static_cast<size_t>(j)] = saved;
  }
}

}  // namespace

Eigen::VectorXd evaluate_basis(const BasisSpec& basis, double t) {
  t = clamp_to_domain(basis, t);
  const int span = find_span(basis, t);
  std::vector<double> local;
  nonzero_basis(basis, span, t, local);
  Eigen::VectorXd values = Eigen::VectorXd::Zero(basis.n_basis);
  const int first = span - basis.degree();
  for (int r = 0; r < basis.order; ++r) values(first + r) = local[static_cast<size_t>(r)];
  return values;
}

Eigen::MatrixXd design_matrix(const BasisSpec& basis, std::span<const double> times) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(times.size()), basis.n_basis);
  for (size_t i = 0; i < times.size(); ++i)
    x.row(static_cast<Eigen::Index>(i)) = evaluate_basis(basis, times[i]).transpose();
  return x;
}

Eigen::MatrixXd fit_coefficients(const BasisSpec& basis, std::span<const double> times,
                                 const Eigen::MatrixXd& values) {
  if (static_cast<size_t>(values.cols()) != times.size())
    throw std::invalid_argument("fit_coefficients: values and times lengths differ");
  if (times.size() < static_cast<size_t>(basis.n_basis))
    throw DataError("rank-deficient spline design: " + std::to_string(times.size()) +
                    " sample times for " + std::to_string(basis.n_basis) + " basis functions");
  const Eigen::MatrixXd x = design_matrix(basis, times);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  qr.setThreshold(1e-10);
  if (qr.rank() < basis.n_basis)
    throw DataError("rank-deficient spline design: rank " + std::to_string(qr.rank()) + " < " +
                    std::to_string(basis.n_basis));
  return qr.solve(values.transpose()).transpose();
}

Eigen::VectorXd fit_coefficients(const BasisSpec& basis, std::span<const double> times,
                                 std::span<const double> values) {
  if (values.size() != times.size())
    throw std::invalid_argument("fit_coefficients: values and times lengths differ");
  Eigen::MatrixXd row(1, static_cast<Eigen::Index>(values.size()));
  for (size_t i = 0; i < values.size(); ++i) row(0, static_cast<Eigen::Index>(i)) = values[i];
  return fit_coefficients(basis, times, row).row(0).transpose();
}

void gauss_legendre(int points, std::vector<double>& nodes, std::vector<double>& weights) {
  if (points < 1) throw std::invalid_argument("gauss_legendre: need at least one point");
  nodes.assign(static_cast<size_t>(points), 0.0);
  weights.assign(static_cast<size_t>(points), 0.0);
  const int n = points;
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 1.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0;
      double p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = pk;
      }
      const double pn = n == 1 ? x : p1;
      const double pn_1 = n == 1 ? 1.0 : p0;
      dp = n * (x * pn - pn_1) / (x * x - 1.0);
      const double dx = pn / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    nodes[static_cast<size_t>(i)] = -x;
    nodes[static_cast<size_t>(n - 1 - i)] = x;
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    weights[static_cast<size_t>(i)] = w;
    weights[static_cast<size_t>(n - 1 - i)] = w;
  }
}

Eigen::MatrixXd gram_matrix(const BasisSpec& basis) {
  validate_basis(basis);
  std::vector<double> nodes, weights;
  // `order` points integrate degree 2*order-1 exactly; products of two
  // basis functions have degree 2*order-2.
  gauss_legendre(basis.order, nodes, weights);

  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(basis.n_basis, basis.n_basis);
  std::vector<double> local;
  for (int span = basis.order - 1; span < basis.n_basis; ++span) {
    const double a = basis.knots[static_cast<size_t>(span)];
    const double b = basis.knots[static_cast<size_t>(span + 1)];
    if (!(b > a)) continue;
    const double half = 0.5 * (b - a);
    const double mid = 0.5 * (a + b);
    const int first = span - basis.degree();
    for (size_t g = 0; g < nodes.size(); ++g) {
      const double t = mid + half * nodes[g];
      nonzero_basis(basis, span, t, local);
      const double w = half * weights[g];
      for (int r = 0; r < basis.order; ++r)
        for (int c = 0; c < basis.order; ++c)
          gram(first + r, first + c) += w * local[static_cast<size_t>(r)] * local[static_cast<size_t>(c)];
    }
  }
  return gram;
}

}  // namespace mfclust
