// Serial reference vs OpenMP fan-out for the two parallel kernels: the
// model-search grid and the replicate loop. Results must match exactly.
#include <chrono>
#include <cstdio>
#include <cstdlib>

#include "mfclust/fpca.hpp"
#include "mfclust/parallel.hpp"
#include "mfclust/simbench.hpp"

using namespace mfclust;

namespace {

template <class F>
double seconds(F&& f) {
  const auto t0 = std::chrono::steady_clock::now();
  f();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

int main(int argc, char** argv) {
  const int threads = argc > 1 ? std::atoi(argv[1]) : default_thread_count();
  const int reps = argc > 2 ? std::atoi(argv[2]) : 4;
  const DesignConstants c = read_design_constants(default_design_path());
  const FunctionalDataSet data = generate_dataset(make_design(c, 200, 2, 16, 1.5, 11));
  TransformOptions topt;
  topt.q_c = 3;
  const CoefficientMatrix b = run_transform(data, topt).coefficients;

  SelectionReport serial, parallel;
  const double t_serial = seconds([&] { serial = model_search(b, SearchGrid{}, 5, 1); });
  const double t_parallel = seconds([&] { parallel = model_search(b, SearchGrid{}, 5, threads); });
  bool same = serial.rows.size() == parallel.rows.size();
  for (size_t i = 0; same && i < serial.rows.size(); ++i) same = serial.rows[i].bic == parallel.rows[i].bic;
  std::printf("model_search  rows=%zu  serial %.2fs  threads=%d %.2fs  speedup %.2fx  identical=%s\n",
              serial.rows.size(), t_serial, threads, t_parallel, t_serial / t_parallel, same ? "yes" : "NO");

  ScenarioConfig cfg;
  cfg.levels = {200};
  cfg.reps = reps;
  cfg.kinds = {PenaltyKind::group};
  ScenarioResult rs, rp;
  cfg.threads = 1;
  const double s_serial = seconds([&] { rs = run_scenario(cfg, c); });
  cfg.threads = threads;
  const double s_parallel = seconds([&] { rp = run_scenario(cfg, c); });
  bool same_rep = rs.records.size() == rp.records.size();
  for (size_t i = 0; same_rep && i < rs.records.size(); ++i)
    same_rep = rs.records[i].ari == rp.records[i].ari && rs.records[i].m_hat == rp.records[i].m_hat;
  std::printf("run_scenario  reps=%d  serial %.2fs  threads=%d %.2fs  speedup %.2fx  identical=%s\n", reps, s_serial,
              threads, s_parallel, s_serial / s_parallel, same_rep ? "yes" : "NO");
  return same && same_rep ? 0 : 1;
}
