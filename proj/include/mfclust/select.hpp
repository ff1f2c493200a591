#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mfclust/em.hpp"

namespace mfclust {

struct SearchGrid {
  std::vector<int> m_values{1, 2, 3, 4, 5, 6};
  std::vector<double> gamma_values{0.5, 1.0, 1.5, 2.0};
  std::vector<double> lambda_multipliers{0, 0.5, 1, 2, 3, 5, 7, 10, 15, 20};
  std::vector<PenaltyKind> kinds{PenaltyKind::group};

  // multipliers * n^(1/3)
  std::vector<double> lambdas(int n) const;
  void validate() const;
};

// d_e = m + q + m q - n_0 - 1
int effective_dof(const FitResult& fit);
// 2 * unpenalized observed NLL + log(n q) * d_e
double adjusted_bic(const FitResult& fit, int n, int q);

struct SelectionRow {
  PenaltyKind kind = PenaltyKind::none;
  int m = 0;
  double lambda = 0.0;
  double gamma = 0.0;  // 0 marks a phase-1 (unit weight) row
  double bic = 0.0;
  double plain_nll = 0.0;
  int n_zero = 0;
  int n_removed = 0;
  int iterations = 0;
  bool converged = false;
  double max_objective_increase = 0.0;  // largest step-to-step rise of the penalized objective
  std::string failure;  // non-empty when the point could not be fitted
};

struct ChosenModel {
  PenaltyKind kind = PenaltyKind::none;
  int m = 0;
  double lambda = 0.0;
  double gamma = 0.0;
};

struct PilotMeans {
  PenaltyKind kind = PenaltyKind::none;
  int m = 0;
  double lambda = 0.0;  // phase-1 lambda the means came from
  Eigen::MatrixXd means;
};

struct SelectionReport {
  FitResult best;
  ChosenModel chosen;
  std::vector<SelectionRow> rows;
  std::vector<PilotMeans> pilots;
  int n = 0;
  int p = 0;
  int q_c = 0;
};

// True when a should be preferred to b: smaller BIC, then smaller m, lambda,
// gamma, then penalty kind order.
bool row_precedes(const SelectionRow& a, const SelectionRow& b);

struct TwoPhaseResult {
  FitResult best;                // min-BIC phase-2 fit
  SelectionRow best_row;
  FitResult phase1_best;
  SelectionRow phase1_row;
  Eigen::MatrixXd reference_means;  // penalized means of phase1_best
  std::vector<SelectionRow> rows;   // phase 1 then phase 2
};

// Seed used for every fit with m clusters inside a search.
std::uint64_t cluster_seed(std::uint64_t seed, int m);

TwoPhaseResult two_phase_fit(const CoefficientMatrix& b, int m, PenaltyKind kind, double gamma,
                             const SearchGrid& grid, std::uint64_t seed, const EmOptions& options = {});

SelectionReport model_search(const CoefficientMatrix& b, const SearchGrid& grid, std::uint64_t seed,
                             int threads = 1, const EmOptions& options = {});

}  // namespace mfclust
