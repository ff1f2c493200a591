#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

namespace mfclust {

// Clamped B-spline basis on [domain_lo, domain_hi]. `order` is de Boor's
// order (polynomial degree + 1); knots has n_basis + order entries.
struct BasisSpec {
  double domain_lo = 0.0;
  double domain_hi = 1.0;
  int order = 1;
  int n_basis = 1;
  std::vector<double> knots;

  int degree() const { return order - 1; }
  int n_spans() const { return n_basis - order + 1; }
};

BasisSpec build_basis(double domain_lo, double domain_hi, int n_basis, int order);

// Throws std::invalid_argument if the knot vector or sizes are inconsistent.
void validate_basis(const BasisSpec& basis);

// Values of all n_basis functions at t (Cox-de Boor recursion).
Eigen::VectorXd evaluate_basis(const BasisSpec& basis, double t);

// times.size() x n_basis matrix of basis values.
Eigen::MatrixXd design_matrix(const BasisSpec& basis, std::span<const double> times);

// Least-squares spline coefficients of one sampled curve.
Eigen::VectorXd fit_coefficients(const BasisSpec& basis, std::span<const double> times,
                                 std::span<const double> values);

// Least-squares fit of many curves sampled on a common grid, one curve per
// row of `values`. Returns rows x n_basis.
Eigen::MatrixXd fit_coefficients(const BasisSpec& basis, std::span<const double> times,
                                 const Eigen::MatrixXd& values);

// Pairwise L2 inner products of the basis functions over the domain.
Eigen::MatrixXd gram_matrix(const BasisSpec& basis);

// Gauss-Legendre nodes and weights on [-1, 1].
void gauss_legendre(int points, std::vector<double>& nodes, std::vector<double>& weights);

}  // namespace mfclust
