#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "mfclust/fpca.hpp"

namespace mfclust {

using BoolMatrix = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

enum class PenaltyKind { none, individual, variable, group };

std::string to_string(PenaltyKind kind);
PenaltyKind parse_penalty_kind(std::string_view name);

// Gaussian mixture with a shared diagonal covariance.
struct MixtureParams {
  Eigen::VectorXd proportions;  // m
  Eigen::MatrixXd means;        // m x q
  Eigen::VectorXd variances;    // q
  BoolMatrix zero_mask;         // m x q, means set to zero by an active penalty

  int m() const { return static_cast<int>(means.rows()); }
  int q() const { return static_cast<int>(means.cols()); }
  void refresh_zero_mask() { zero_mask = means.array() == 0.0; }
};

// Penalty family with its tuning constants. Weights of +infinity pin the
// corresponding means (or blocks) to zero whenever lambda > 0.
struct PenaltySpec {
  PenaltyKind kind = PenaltyKind::none;
  double lambda = 0.0;
  double gamma = 0.0;
  Eigen::MatrixXd weights;          // m x q, individual and variable penalties
  Eigen::VectorXd group_weights;    // m, group penalty
  Eigen::MatrixXd reference_means;  // pilot means the weights were built from (empty for unit weights)

  static PenaltySpec none(int m, int q);
  // gamma = 0: every weight is 1.
  static PenaltySpec unit(PenaltyKind kind, double lambda, int m, int q);
  // w_kj = 1/|ref_kj|^gamma, or w_k = 1/||ref_k||^gamma for the group penalty.
  static PenaltySpec adaptive(PenaltyKind kind, double lambda, double gamma, const Eigen::MatrixXd& reference_means);

  void validate(int m, int q) const;
};

struct EStepResult {
  Eigen::MatrixXd responsibilities;  // n x m
  Eigen::VectorXd proportions;       // column means of responsibilities
  double log_likelihood = 0.0;       // observed-data log-likelihood of the input parameters
};

// n x m matrix of log(pi_k) + log f_k(b_i).
Eigen::MatrixXd log_weighted_densities(const CoefficientMatrix& b, const MixtureParams& params);

EStepResult e_step(const CoefficientMatrix& b, const MixtureParams& params);

struct VarianceUpdate {
  Eigen::VectorXd variances;
  std::vector<int> floored;  // columns clamped to the 1e-8 floor
};

inline constexpr double kVarianceFloor = 1e-8;

VarianceUpdate update_variances(const CoefficientMatrix& b, const Eigen::MatrixXd& tau, const Eigen::MatrixXd& means);

// Responsibility-weighted cluster means.
Eigen::MatrixXd unpenalized_means(const CoefficientMatrix& b, const Eigen::MatrixXd& tau);

Eigen::MatrixXd update_means_individual(const CoefficientMatrix& b, const Eigen::MatrixXd& tau,
                                        const Eigen::VectorXd& variances, const PenaltySpec& spec);

// Ties in argmax_k |current_means(k, j)| go to the lowest cluster index.
Eigen::MatrixXd update_means_variable(const CoefficientMatrix& b, const Eigen::MatrixXd& tau,
                                      const Eigen::VectorXd& variances, const PenaltySpec& spec,
                                      const Eigen::MatrixXd& current_means);

Eigen::MatrixXd update_means_group(const CoefficientMatrix& b, const Eigen::MatrixXd& tau,
                                   const Eigen::VectorXd& variances, const PenaltySpec& spec,
                                   const Eigen::MatrixXd& current_means);

Eigen::MatrixXd update_means(const CoefficientMatrix& b, const Eigen::MatrixXd& tau, const Eigen::VectorXd& variances,
                             const PenaltySpec& spec, const Eigen::MatrixXd& current_means);

// p_lambda(theta) evaluated at `means`.
double penalty_value(const Eigen::MatrixXd& means, const PenaltySpec& spec, int q_c);

struct ObjectiveValue {
  double complete = 0.0;  // -sum_ik tau_ik {log pi_k + log f_k} + penalty
  double observed = 0.0;  // -sum_i log g(b_i) + penalty
  double penalty = 0.0;
  double plain_observed = 0.0;  // observed form without the penalty
};

ObjectiveValue penalized_nll(const CoefficientMatrix& b, const MixtureParams& params, const PenaltySpec& spec,
                             const Eigen::MatrixXd& tau);

struct EmOptions {
  double tol = 1e-4;
  int max_iter = 500;
  int restarts = 3;          // extra attempts after an empty-cluster collapse
  int kmeans_restarts = 10;
};

struct FitResult {
  MixtureParams params;
  Eigen::MatrixXd responsibilities;
  std::vector<int> hard_labels;
  double penalized_nll = 0.0;  // observed-data form
  double plain_nll = 0.0;
  int n_zero_means = 0;
  std::vector<int> removed_sensors;
  int iterations = 0;
  bool converged = false;
  bool collapsed = false;  // a cluster emptied and no restart recovered
  int attempts = 1;
  std::vector<double> objective_trace;  // observed penalized objective per iterate
  std::vector<std::string> warnings;
};

// k-means partition (k-means++ seeding, kmeans_restarts runs) turned into
// mixture parameters; variances are pooled within-cluster, floored at 1e-6.
MixtureParams initialize(const CoefficientMatrix& b, int m, std::uint64_t seed, int kmeans_restarts = 10);

// EM from fixed starting values. Never throws on cluster collapse; the
// result is flagged collapsed and non-converged instead.
FitResult run_em_from(const CoefficientMatrix& b, const MixtureParams& init, const PenaltySpec& spec,
                      const EmOptions& options = {});

// Full fit: initialization from `seed`, restarting with derived seeds after
// a collapse. `first_init`, when given, replaces the first initialization.
FitResult run_em(const CoefficientMatrix& b, int m, const PenaltySpec& spec, std::uint64_t seed,
                 const EmOptions& options = {}, const MixtureParams* first_init = nullptr);

std::vector<int> hard_labels(const Eigen::MatrixXd& tau);
std::vector<int> removed_sensors(const MixtureParams& params, int p, int q_c);
// Columns j whose means are penalized to zero in every cluster.
int count_zero_columns(const MixtureParams& params);

}  // namespace mfclust
