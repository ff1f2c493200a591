#include <cmath>
#include <random>

#include "doctest.h"
#include "mfclust/bspline.hpp"
#include "mfclust/errors.hpp"

using namespace mfclust;

namespace {

// Textbook recursive Cox-de Boor definition, independent of the iterative
// evaluator. Right endpoint handled by closing the last nonempty span.
double naive_bspline(const std::vector<double>& knots, int i, int order, double t, double hi) {
  if (order == 1) {
    const double a = knots[static_cast<size_t>(i)];
    const double b = knots[static_cast<size_t>(i + 1)];
    if (a < b && ((t >= a && t < b) || (t == hi && b == hi))) return 1.0;
    return 0.0;
  }
  double value = 0.0;
  const double d1 = knots[static_cast<size_t>(i + order - 1)] - knots[static_cast<size_t>(i)];
  const double d2 = knots[static_cast<size_t>(i + order)] - knots[static_cast<size_t>(i + 1)];
  if (d1 > 0) value += (t - knots[static_cast<size_t>(i)]) / d1 * naive_bspline(knots, i, order - 1, t, hi);
  if (d2 > 0)
    value += (knots[static_cast<size_t>(i + order)] - t) / d2 * naive_bspline(knots, i + 1, order - 1, t, hi);
  return value;
}

}  // namespace

TEST_CASE("build_basis produces clamped uniform knots") {
  const BasisSpec b = build_basis(0, 30, 12, 3);
  CHECK(b.n_basis == 12);
  CHECK(b.knots.size() == 15);
  CHECK(b.knots.front() == 0.0);
  CHECK(b.knots.back() == 30.0);
  CHECK_NOTHROW(validate_basis(b));
  // 12 - 3 = 9 interior knots at spacing 3
  CHECK(b.knots[3] == doctest::Approx(3.0));
  CHECK(b.knots[11] == doctest::Approx(27.0));
}

TEST_CASE("build_basis rejects invalid arguments") {
  CHECK_THROWS_AS(build_basis(0, 1, 2, 3), std::invalid_argument);
  CHECK_THROWS_AS(build_basis(1, 1, 4, 3), std::invalid_argument);
  CHECK_THROWS_AS(build_basis(0, 1, 4, 0), std::invalid_argument);
}

TEST_CASE("single order-1 basis is the domain indicator") {
  const BasisSpec b = build_basis(0, 1, 1, 1);
  for (double t : {0.0, 0.3, 0.999, 1.0}) {
    const auto v = evaluate_basis(b, t);
    REQUIRE(v.size() == 1);
    CHECK(v(0) == 1.0);
  }
}

TEST_CASE("order-1 basis has exactly one unit entry") {
  const BasisSpec b = build_basis(0, 1, 5, 1);
  for (double t : {0.0, 0.1, 0.2, 0.55, 0.8, 1.0}) {
    const auto v = evaluate_basis(b, t);
    int ones = 0;
    for (int i = 0; i < v.size(); ++i) ones += v(i) == 1.0;
    CHECK(ones == 1);
    CHECK(v.sum() == 1.0);
  }
}

TEST_CASE("clamped endpoint: first function is 1 at domain_lo, last at domain_hi") {
  const BasisSpec b = build_basis(0, 30, 12, 4);
  CHECK(evaluate_basis(b, 0.0)(0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(evaluate_basis(b, 30.0)(11) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("partition of unity at t=2.5 and matches naive recursion") {
  const BasisSpec b = build_basis(0, 10, 5, 3);
  const auto v = evaluate_basis(b, 2.5);
  CHECK(std::abs(v.sum() - 1.0) < 1e-14);
  for (int i = 0; i < b.n_basis; ++i)
    CHECK(v(i) == doctest::Approx(naive_bspline(b.knots, i, b.order, 2.5, b.domain_hi)).epsilon(1e-13));
}

TEST_CASE("cubic basis on [0,30] sums to one at t=15") {
  const BasisSpec b = build_basis(0, 30, 12, 4);
  CHECK(std::abs(evaluate_basis(b, 15.0).sum() - 1.0) < 1e-12);
}

TEST_CASE("property: partition of unity, nonnegativity, local support at random points") {
  std::mt19937_64 rng(42);
  for (int order : {1, 2, 3, 4}) {
    const BasisSpec b = build_basis(-2.0, 7.0, 9, order);
    std::uniform_real_distribution<double> u(b.domain_lo, b.domain_hi);
    for (int rep = 0; rep < 1000; ++rep) {
      const double t = u(rng);
      const auto v = evaluate_basis(b, t);
      CHECK(std::abs(v.sum() - 1.0) < 1e-10);
      for (int i = 0; i < b.n_basis; ++i) {
        CHECK(v(i) >= 0.0);
        const bool outside = t < b.knots[static_cast<size_t>(i)] || t > b.knots[static_cast<size_t>(i + order)];
        if (outside) CHECK(v(i) == 0.0);
        CHECK(v(i) == doctest::Approx(naive_bspline(b.knots, i, order, t, b.domain_hi)).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("evaluate_basis rejects out-of-domain points") {
  const BasisSpec b = build_basis(0, 30, 12, 3);
  CHECK_THROWS_AS(evaluate_basis(b, -0.5), std::out_of_range);
  CHECK_THROWS_AS(evaluate_basis(b, 30.5), std::out_of_range);
}

TEST_CASE("fit_coefficients reproduces a constant curve") {
  const BasisSpec b = build_basis(0, 30, 12, 3);
  std::vector<double> times, values;
  for (int i = 0; i <= 30; ++i) {
    times.push_back(i);
    values.push_back(4.25);
  }
  const auto c = fit_coefficients(b, times, values);
  const Eigen::VectorXd fitted = design_matrix(b, times) * c;
  for (int i = 0; i < fitted.size(); ++i) CHECK(fitted(i) == doctest::Approx(4.25).epsilon(1e-12));
}

TEST_CASE("fit_coefficients recovers synthesized coefficients on 31 grid points") {
  const BasisSpec b = build_basis(0, 30, 12, 3);
  std::vector<double> times;
  for (int i = 0; i <= 30; ++i) times.push_back(i);
  std::mt19937_64 rng(7);
  std::normal_distribution<double> z(0.0, 2.0);
  Eigen::VectorXd truth(12);
  for (int i = 0; i < 12; ++i) truth(i) = z(rng);
  const Eigen::VectorXd y = design_matrix(b, times) * truth;
  std::vector<double> values(y.data(), y.data() + y.size());
  const auto c = fit_coefficients(b, times, values);
  CHECK((c - truth).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("fit_coefficients residual is orthogonal to basis columns") {
  const BasisSpec b = build_basis(0, 30, 12, 4);
  std::vector<double> times, values;
  for (int i = 0; i <= 30; ++i) {
    times.push_back(i);
    values.push_back(std::sin(i / 4.0) + 0.1 * i);
  }
  const auto c = fit_coefficients(b, times, values);
  const Eigen::MatrixXd x = design_matrix(b, times);
  const Eigen::VectorXd resid = Eigen::Map<const Eigen::VectorXd>(values.data(), 31) - x * c;
  CHECK((x.transpose() * resid).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("fit_coefficients rejects underdetermined designs") {
  const BasisSpec b = build_basis(0, 30, 12, 3);
  std::vector<double> times{0.0, 30.0}, values{1.0, 2.0};
  CHECK_THROWS_AS(fit_coefficients(b, times, values), DataError);
  // Enough points but clustered in one span: still rank deficient.
  std::vector<double> t2, v2;
  for (int i = 0; i < 20; ++i) {
    t2.push_back(0.01 * i);
    v2.push_back(1.0);
  }
  CHECK_THROWS_AS(fit_coefficients(b, t2, v2), DataError);
}

TEST_CASE("gram matrix of order-1 basis with k spans is diag(1/k)") {
  const int k = 4;
  const BasisSpec b = build_basis(0, 1, k, 1);
  const auto g = gram_matrix(b);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) CHECK(g(i, j) == doctest::Approx(i == j ? 1.0 / k : 0.0).epsilon(1e-14));
}

TEST_CASE("gram matrix is symmetric positive definite and matches fine-grid Simpson") {
  for (int order : {3, 4}) {
    const BasisSpec b = build_basis(0, 30, 12, order);
    const auto g = gram_matrix(b);
    CHECK((g - g.transpose()).cwiseAbs().maxCoeff() < 1e-12);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g);
    CHECK(es.eigenvalues().minCoeff() > 0.0);

    // Composite Simpson per knot span (integrand is a polynomial there).
    Eigen::MatrixXd oracle = Eigen::MatrixXd::Zero(12, 12);
    const int sub = 1024;
    for (size_t s = 0; s + 1 < b.knots.size(); ++s) {
      const double a = b.knots[s], c = b.knots[s + 1];
      if (!(c > a)) continue;
      const double h = (c - a) / sub;
      for (int i = 0; i <= sub; ++i) {
        const double w = (i == 0 || i == sub) ? 1.0 : (i % 2 ? 4.0 : 2.0);
        const double t = i == sub ? c : a + i * h;
        const auto v = evaluate_basis(b, std::min(t, b.domain_hi));
        oracle += (w * h / 3.0) * v * v.transpose();
      }
    }
    CHECK((g - oracle).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("gauss_legendre integrates polynomials exactly") {
  std::vector<double> x, w;
  gauss_legendre(4, x, w);
  double s0 = 0, s6 = 0, s7 = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    s0 += w[i];
    s6 += w[i] * std::pow(x[i], 6);
    s7 += w[i] * std::pow(x[i], 7);
  }
  CHECK(s0 == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(s6 == doctest::Approx(2.0 / 7.0).epsilon(1e-14));
  CHECK(std::abs(s7) < 1e-14);
}
