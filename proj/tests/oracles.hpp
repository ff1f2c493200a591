#pragma once

// Test-only reference computations. Nothing here calls into the library's
// EM code paths; everything is written with plain loops over std::vector.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

namespace oracle {

using Matrix = std::vector<std::vector<double>>;

// Dense grid followed by golden-section refinement around the best grid
// point. Adequate for the convex 1-D objectives used in the tests.
inline double minimize_1d(const std::function<double(double)>& f, double lo, double hi, int grid = 4001) {
  double best_x = lo;
  double best_f = f(lo);
  const double step = (hi - lo) / (grid - 1);
  for (int i = 1; i < grid; ++i) {
    const double x = lo + i * step;
    const double v = f(x);
    if (v < best_f) {
      best_f = v;
      best_x = x;
    }
  }
  double a = std::max(lo, best_x - step);
  double b = std::min(hi, best_x + step);
  const double r = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - r * (b - a);
  double d = a + r * (b - a);
  double fc = f(c), fd = f(d);
  for (int it = 0; it < 200 && (b - a) > 1e-14 * (1.0 + std::abs(a)); ++it) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - r * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + r * (b - a);
      fd = f(d);
    }
  }
  double x = 0.5 * (a + b);
  // Kinks at zero are common for lasso-type objectives.
  if (lo <= 0.0 && hi >= 0.0 && f(0.0) <= f(x)) x = 0.0;
  return x;
}

inline double normal_pdf(double x, double mean, double var) {
  return std::exp(-(x - mean) * (x - mean) / (2.0 * var)) / std::sqrt(2.0 * std::numbers::pi * var);
}

// Log of pi_k * prod_j N(x_j; mu_kj, var_j), summed in log space.
inline double log_weighted_density(const std::vector<double>& x, double pi, const std::vector<double>& mu,
                                   const std::vector<double>& var) {
  double s = std::log(pi);
  for (size_t j = 0; j < x.size(); ++j) s += std::log(normal_pdf(x[j], mu[j], var[j]));
  return s;
}

struct Gmm {
  std::vector<double> pi;
  Matrix mu;  // m x q
  std::vector<double> var;
  int iterations = 0;
};

// Plain EM for a diagonal Gaussian mixture with shared variances.
inline Gmm diagonal_gmm_em(const Matrix& x, Gmm start, double tol, int max_iter) {
  const size_t n = x.size();
  const size_t q = x[0].size();
  const size_t m = start.pi.size();
  Gmm g = std::move(start);
  for (int it = 1; it <= max_iter; ++it) {
    Matrix tau(n, std::vector<double>(m));
    for (size_t i = 0; i < n; ++i) {
      std::vector<double> l(m);
      double mx = -INFINITY;
      for (size_t k = 0; k < m; ++k) {
        l[k] = log_weighted_density(x[i], g.pi[k], g.mu[k], g.var);
        mx = std::max(mx, l[k]);
      }
      double z = 0.0;
      for (size_t k = 0; k < m; ++k) z += std::exp(l[k] - mx);
      for (size_t k = 0; k < m; ++k) tau[i][k] = std::exp(l[k] - mx) / z;
    }
    Gmm next;
    next.pi.assign(m, 0.0);
    next.mu.assign(m, std::vector<double>(q, 0.0));
    next.var.assign(q, 0.0);
    for (size_t k = 0; k < m; ++k) {
      double t = 0.0;
      for (size_t i = 0; i < n; ++i) t += tau[i][k];
      next.pi[k] = t / static_cast<double>(n);
      for (size_t j = 0; j < q; ++j) {
        double s = 0.0;
        for (size_t i = 0; i < n; ++i) s += tau[i][k] * x[i][j];
        next.mu[k][j] = s / t;
      }
    }
    for (size_t j = 0; j < q; ++j) {
      double s = 0.0;
      for (size_t k = 0; k < m; ++k)
        for (size_t i = 0; i < n; ++i) s += tau[i][k] * (x[i][j] - next.mu[k][j]) * (x[i][j] - next.mu[k][j]);
      next.var[j] = s / static_cast<double>(n);
    }
    double change = 0.0;
    for (size_t k = 0; k < m; ++k) {
      change += (next.pi[k] - g.pi[k]) * (next.pi[k] - g.pi[k]);
      for (size_t j = 0; j < q; ++j) change += (next.mu[k][j] - g.mu[k][j]) * (next.mu[k][j] - g.mu[k][j]);
    }
    for (size_t j = 0; j < q; ++j) change += (next.var[j] - g.var[j]) * (next.var[j] - g.var[j]);
    next.iterations = it;
    g = std::move(next);
    if (std::sqrt(change) <= tol) break;
  }
  return g;
}

// Adjusted Rand index by enumerating every pair of items.
inline double ari_by_pairs(const std::vector<int>& a, const std::vector<int>& b) {
  const size_t n = a.size();
  double both = 0, only_a = 0, only_b = 0, total = 0;
  for (size_t i = 0; i < n; ++i)
    for (size_t j = i + 1; j < n; ++j) {
      const bool sa = a[i] == a[j];
      const bool sb = b[i] == b[j];
      both += sa && sb;
      only_a += sa;
      only_b += sb;
      total += 1;
    }
  const double expected = only_a * only_b / total;
  const double max_index = 0.5 * (only_a + only_b);
  if (max_index == expected) return 1.0;
  return (both - expected) / (max_index - expected);
}

}  // namespace oracle
