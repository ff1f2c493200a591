#include "mfclust/select.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <stdexcept>

#include "mfclust/errors.hpp"
#include "mfclust/parallel.hpp"
#include "mfclust/random.hpp"

namespace mfclust {

std::vector<double> SearchGrid::lambdas(int n) const {
  const double scale = std::cbrt(static_cast<double>(n));
  std::vector<double> out;
  out.reserve(lambda_multipliers.size());
  for (double c : lambda_multipliers) out.push_back(c * scale);
  return out;
}

void SearchGrid::validate() const {
  if (m_values.empty() || lambda_multipliers.empty() || kinds.empty())
    throw std::invalid_argument("search grid: m, lambda and penalty lists must be nonempty");
  for (int m : m_values)
    if (m < 1) throw std::invalid_argument("search grid: m values must be >= 1");
  for (double c : lambda_multipliers)
    if (!(c >= 0.0) || !std::isfinite(c)) throw std::invalid_argument("search grid: lambda multipliers must be >= 0");
  for (double g : gamma_values)
    if (!(g >= 0.0) || !std::isfinite(g)) throw std::invalid_argument("search grid: gamma values must be >= 0");
}

int effective_dof(const FitResult& fit) {
  const int m = fit.params.m();
  const int q = fit.params.q();
  return m + q + m * q - fit.n_zero_means - 1;
}

double adjusted_bic(const FitResult& fit, int n, int q) {
  return 2.0 * fit.plain_nll + std::log(static_cast<double>(n) * q) * effective_dof(fit);
}

bool row_precedes(const SelectionRow& a, const SelectionRow& b) {
  if (a.bic != b.bic) return a.bic < b.bic;
  if (a.m != b.m) return a.m < b.m;
  if (a.lambda != b.lambda) return a.lambda < b.lambda;
  if (a.gamma != b.gamma) return a.gamma < b.gamma;
  return static_cast<int>(a.kind) < static_cast<int>(b.kind);
}

std::uint64_t cluster_seed(std::uint64_t seed, int m) { return derive_seed(seed, 0x5e1ec7ULL, static_cast<std::uint64_t>(m)); }

namespace {

struct Point {
  SelectionRow row;
  std::optional<FitResult> fit;
};

bool usable(const SelectionRow& r) { return r.failure.empty() && r.converged && std::isfinite(r.bic); }

// Index of the preferred usable row among `idx`, or -1.
long pick(const std::vector<Point>& points, const std::vector<std::size_t>& idx) {
  long best = -1;
  for (std::size_t i : idx) {
    if (!usable(points[i].row)) continue;
    if (best < 0 || row_precedes(points[i].row, points[static_cast<std::size_t>(best)].row))
      best = static_cast<long>(i);
  }
  return best;
}

Point evaluate(const CoefficientMatrix& b, int m, const PenaltySpec& spec, std::uint64_t seed,
               const MixtureParams& init, const EmOptions& options) {
  Point pt;
  pt.row.kind = spec.kind;
  pt.row.m = m;
  pt.row.lambda = spec.lambda;
  pt.row.gamma = spec.gamma;
  try {
    FitResult fit = run_em(b, m, spec, seed, options, &init);
    pt.row.bic = adjusted_bic(fit, b.n(), b.q());
    pt.row.plain_nll = fit.plain_nll;
    pt.row.n_zero = fit.n_zero_means;
    pt.row.n_removed = static_cast<int>(fit.removed_sensors.size());
    pt.row.iterations = fit.iterations;
    pt.row.converged = fit.converged;
    for (size_t t = 1; t < fit.objective_trace.size(); ++t)
      pt.row.max_objective_increase =
          std::max(pt.row.max_objective_increase, fit.objective_trace[t] - fit.objective_trace[t - 1]);
    if (fit.collapsed) pt.row.failure = "cluster collapsed after all restarts";
    pt.fit = std::move(fit);
  } catch (const std::exception& e) {
    pt.row.failure = e.what();
  }
  return pt;
}

Point failed(PenaltyKind kind, int m, double lambda, double gamma, const std::string& why) {
  Point pt;
  pt.row.kind = kind;
  pt.row.m = m;
  pt.row.lambda = lambda;
  pt.row.gamma = gamma;
  pt.row.failure = why;
  return pt;
}

Point relabel(const Point& src, PenaltyKind kind, double gamma) {
  Point pt = src;
  pt.row.kind = kind;
  pt.row.gamma = gamma;
  return pt;
}

struct SearchState {
  std::vector<Point> points;
  std::vector<PilotMeans> pilots;
  // (kind, m) -> point indices, phase 1 and phase 2 by gamma
  struct Block {
    PenaltyKind kind;
    int m;
    std::vector<std::size_t> phase1;
    std::vector<std::pair<double, std::vector<std::size_t>>> phase2;
    long phase1_best = -1;
  };
  std::vector<Block> blocks;
};

// Every (kind, m, lambda) at unit weights, then every (kind, m, gamma,
// lambda) at adaptive weights built from the phase-1 winner. Fits at
// lambda = 0 do not depend on kind or weights, so one per m is shared.
SearchState run_search(const CoefficientMatrix& b, const SearchGrid& grid, std::uint64_t seed, int threads,
                       const EmOptions& options) {
  grid.validate();
  const std::vector<double> lambdas = grid.lambdas(b.n());
  const std::size_t nm = grid.m_values.size();

  std::vector<std::optional<MixtureParams>> inits(nm);
  std::vector<std::string> init_errors(nm);
  parallel_for(nm, threads, [&](std::size_t i) {
    try {
      inits[i] = initialize(b, grid.m_values[i], cluster_seed(seed, grid.m_values[i]), options.kmeans_restarts);
    } catch (const std::exception& e) {
      init_errors[i] = e.what();
    }
  });

  const bool has_zero = std::find(lambdas.begin(), lambdas.end(), 0.0) != lambdas.end();
  std::vector<Point> unpenalized(nm);
  if (has_zero) {
    parallel_for(nm, threads, [&](std::size_t i) {
      const int m = grid.m_values[i];
      unpenalized[i] = inits[i] ? evaluate(b, m, PenaltySpec::none(m, b.q()), cluster_seed(seed, m), *inits[i], options)
                                : failed(PenaltyKind::none, m, 0.0, 0.0, init_errors[i]);
    });
  }

  SearchState st;
  struct Job {
    std::size_t slot;
    std::size_t mi;
    PenaltyKind kind;
    double lambda;
    double gamma;
    const Eigen::MatrixXd* reference;
  };

  auto run_jobs = [&](const std::vector<Job>& jobs) {
    parallel_for(jobs.size(), threads, [&](std::size_t j) {
      const Job& job = jobs[j];
      const int m = grid.m_values[job.mi];
      if (!inits[job.mi]) {
        st.points[job.slot] = failed(job.kind, m, job.lambda, job.gamma, init_errors[job.mi]);
        return;
      }
      const PenaltySpec spec = job.reference ? PenaltySpec::adaptive(job.kind, job.lambda, job.gamma, *job.reference)
                                             : PenaltySpec::unit(job.kind, job.lambda, m, b.q());
      st.points[job.slot] = evaluate(b, m, spec, cluster_seed(seed, m), *inits[job.mi], options);
    });
  };

  // Phase 1.
  std::vector<Job> jobs;
  for (PenaltyKind kind : grid.kinds)
    for (std::size_t mi = 0; mi < nm; ++mi) {
      SearchState::Block blk{kind, grid.m_values[mi], {}, {}, -1};
      for (double lambda : lambdas) {
        const std::size_t slot = st.points.size();
        blk.phase1.push_back(slot);
        if (lambda == 0.0) {
          st.points.push_back(relabel(unpenalized[mi], kind, 0.0));
        } else {
          st.points.emplace_back();
          jobs.push_back({slot, mi, kind, lambda, 0.0, nullptr});
        }
      }
      st.blocks.push_back(std::move(blk));
    }
  run_jobs(jobs);

  // Pilot means from each phase-1 winner.
  st.pilots.reserve(st.blocks.size());
  for (auto& blk : st.blocks) {
    blk.phase1_best = pick(st.points, blk.phase1);
    PilotMeans pilot{blk.kind, blk.m, 0.0, {}};
    if (blk.phase1_best >= 0) {
      const Point& w = st.points[static_cast<std::size_t>(blk.phase1_best)];
      pilot.lambda = w.row.lambda;
      pilot.means = w.fit->params.means;
    }
    st.pilots.push_back(std::move(pilot));
  }

  // Phase 2.
  jobs.clear();
  for (std::size_t bi = 0; bi < st.blocks.size(); ++bi) {
    auto& blk = st.blocks[bi];
    const std::size_t mi = static_cast<std::size_t>(
        std::find(grid.m_values.begin(), grid.m_values.end(), blk.m) - grid.m_values.begin());
    for (double gamma : grid.gamma_values) {
      std::vector<std::size_t> idx;
      for (double lambda : lambdas) {
        const std::size_t slot = st.points.size();
        idx.push_back(slot);
        if (blk.phase1_best < 0) {
          st.points.push_back(failed(blk.kind, blk.m, lambda, gamma, "no converged phase-1 fit"));
        } else if (lambda == 0.0) {
          st.points.push_back(relabel(unpenalized[mi], blk.kind, gamma));
        } else {
          st.points.emplace_back();
          jobs.push_back({slot, mi, blk.kind, lambda, gamma, &st.pilots[bi].means});
        }
      }
      blk.phase2.emplace_back(gamma, std::move(idx));
    }
  }
  run_jobs(jobs);
  return st;
}

std::string failure_summary(const std::vector<Point>& points) {
  std::ostringstream os;
  os << "no grid point produced a converged fit";
  int shown = 0;
  for (const auto& pt : points) {
    if (shown == 10) {
      os << "; ...";
      break;
    }
    os << "; m=" << pt.row.m << " lambda=" << pt.row.lambda << " gamma=" << pt.row.gamma << ": "
       << (pt.row.failure.empty() ? std::string("not converged") : pt.row.failure);
    ++shown;
  }
  return os.str();
}

}  // namespace

TwoPhaseResult two_phase_fit(const CoefficientMatrix& b, int m, PenaltyKind kind, double gamma,
                             const SearchGrid& grid, std::uint64_t seed, const EmOptions& options) {
  SearchGrid g = grid;
  g.m_values = {m};
  g.kinds = {kind};
  g.gamma_values = {gamma};
  SearchState st = run_search(b, g, seed, 1, options);
  const auto& blk = st.blocks.front();
  if (blk.phase1_best < 0) throw NumericalError(failure_summary(st.points));
  const long best = pick(st.points, blk.phase2.front().second);
  if (best < 0) throw NumericalError(failure_summary(st.points));

  TwoPhaseResult out;
  out.best = *st.points[static_cast<std::size_t>(best)].fit;
  out.best_row = st.points[static_cast<std::size_t>(best)].row;
  out.phase1_best = *st.points[static_cast<std::size_t>(blk.phase1_best)].fit;
  out.phase1_row = st.points[static_cast<std::size_t>(blk.phase1_best)].row;
  out.reference_means = st.pilots.front().means;
  for (const auto& pt : st.points) out.rows.push_back(pt.row);
  return out;
}

SelectionReport model_search(const CoefficientMatrix& b, const SearchGrid& grid, std::uint64_t seed, int threads,
                             const EmOptions& options) {
  SearchState st = run_search(b, grid, seed, threads, options);
  std::vector<std::size_t> all(st.points.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  const long best = pick(st.points, all);
  if (best < 0) throw NumericalError(failure_summary(st.points));

  SelectionReport rep;
  const Point& w = st.points[static_cast<std::size_t>(best)];
  rep.best = *w.fit;
  rep.chosen = {w.row.kind, w.row.m, w.row.lambda, w.row.gamma};
  rep.rows.reserve(st.points.size());
  for (const auto& pt : st.points) rep.rows.push_back(pt.row);
  rep.pilots = std::move(st.pilots);
  rep.n = b.n();
  rep.p = b.p();
  rep.q_c = b.q_c();
  return rep;
}

}  // namespace mfclust
