#include "mfclust/simbench.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "mfclust/bspline.hpp"
#include "mfclust/errors.hpp"
#include "mfclust/fpca.hpp"
#include "mfclust/parallel.hpp"
#include "mfclust/random.hpp"

namespace mfclust {

using nlohmann::json;

std::vector<double> default_grid() {
  std::vector<double> g(31);
  for (int i = 0; i < 31; ++i) g[static_cast<size_t>(i)] = i;
  return g;
}

void SimulationDesign::validate() const {
  if (n < 2) throw std::invalid_argument("design: n must be >= 2");
  if (p_signal < 0 || p_noise < 0 || p_signal + p_noise < 1)
    throw std::invalid_argument("design: sensor counts must be >= 0 and not both zero");
  if (!(delta > 0.0) || !std::isfinite(delta)) throw std::invalid_argument("design: delta must be > 0");
  if (m_true < 1 || static_cast<int>(proportions.size()) != m_true)
    throw std::invalid_argument("design: proportions must have m_true entries");
  double total = 0.0;
  for (double p : proportions) {
    if (!(p >= 0.0)) throw std::invalid_argument("design: proportions must be >= 0");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("design: proportions must sum to 1");
  if (static_cast<int>(signal_means.size()) != p_signal || static_cast<int>(signal_variances.size()) != p_signal)
    throw std::invalid_argument("design: need mean and variance coefficients for every signal sensor");
  for (int s = 0; s < p_signal; ++s) {
    const auto& mu = signal_means[static_cast<size_t>(s)];
    const auto& var = signal_variances[static_cast<size_t>(s)];
    if (mu.rows() != m_true || mu.cols() != h || var.rows() != m_true || var.cols() != h)
      throw std::invalid_argument("design: signal coefficient blocks must be m_true x h");
    if ((var.array() < 0.0).any()) throw std::invalid_argument("design: variances must be >= 0");
  }
  if (!(noise_variance >= 0.0)) throw std::invalid_argument("design: noise variance must be >= 0");
  if (grid.size() < 2) throw std::invalid_argument("design: grid needs at least two points");
}

namespace {

Eigen::MatrixXd grid_design(const SimulationDesign& d) {
  const BasisSpec basis = build_basis(d.grid.front(), d.grid.back(), d.h, d.order);
  return design_matrix(basis, d.grid);
}

}  // namespace

double standardized_separation(const SimulationDesign& design, int s) {
  const Eigen::MatrixXd bm = grid_design(design);
  const Eigen::MatrixXd curves = design.signal_means[static_cast<size_t>(s)] * bm.transpose();  // m x tau
  const Eigen::MatrixXd within =
      (design.signal_variances[static_cast<size_t>(s)] / design.delta) * bm.cwiseAbs2().transpose();
  double within_var = 0.0;
  for (int k = 0; k < design.m_true; ++k) within_var += design.proportions[static_cast<size_t>(k)] * within.row(k).mean();
  double total = 0.0;
  int pairs = 0;
  for (int k = 0; k < design.m_true; ++k)
    for (int l = k + 1; l < design.m_true; ++l) {
      total += std::sqrt((curves.row(k) - curves.row(l)).squaredNorm() / static_cast<double>(curves.cols()));
      ++pairs;
    }
  if (pairs == 0) return 0.0;
  return total / pairs / std::sqrt(within_var);
}

DesignConstants calibrate_design(std::uint64_t master_seed, int p_signal, double target, double calibration_delta,
                                 int m_true, int h, int order) {
  if (!(target > 0.0)) throw std::invalid_argument("calibration target must be > 0");
  DesignConstants c;
  c.master_seed = master_seed;
  c.target_separation = target;
  c.calibration_delta = calibration_delta;
  c.m_true = m_true;
  c.h = h;
  c.order = order;
  std::mt19937_64 rng(master_seed);
  std::normal_distribution<double> z(0.0, 1.0);
  std::vector<Eigen::MatrixXd> raw;
  for (int s = 0; s < p_signal; ++s) {
    Eigen::MatrixXd mu(m_true, h);
    for (int i = 0; i < mu.size(); ++i) mu.data()[i] = z(rng);
    raw.push_back(mu);
  }
  // Separation is linear in the spread, so one common factor hits the
  // target on average; each sensor is then rescaled exactly.
  c.signal_means = raw;
  SimulationDesign d = make_design(c, 10, p_signal, 0, calibration_delta, 0);
  double mean_sep = 0.0;
  for (int s = 0; s < p_signal; ++s) {
    const double sep = standardized_separation(d, s);
    mean_sep += sep / p_signal;
    c.signal_means[static_cast<size_t>(s)] = raw[static_cast<size_t>(s)] * (target / sep);
  }
  c.spread = target / mean_sep;
  return c;
}

void write_design_constants(const DesignConstants& c, const std::string& path) {
  json j;
  j["schema_version"] = c.schema_version;
  j["master_seed"] = c.master_seed;
  j["spread"] = c.spread;
  j["target_separation"] = c.target_separation;
  j["calibration_delta"] = c.calibration_delta;
  j["m_true"] = c.m_true;
  j["h"] = c.h;
  j["order"] = c.order;
  json means = json::array();
  for (const auto& mu : c.signal_means) {
    json rows = json::array();
    for (int k = 0; k < mu.rows(); ++k) {
      std::vector<double> r;
      for (int l = 0; l < mu.cols(); ++l) r.push_back(mu(k, l));
      rows.push_back(r);
    }
    means.push_back(rows);
  }
  j["signal_means"] = means;
  std::ofstream out(path);
  if (!out) throw DataError("cannot write design file " + path);
  out << j.dump(2) << "\n";
  if (!out) throw DataError("failed writing design file " + path);
}

DesignConstants read_design_constants(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open design file " + path);
  json j;
  try {
    in >> j;
    DesignConstants c;
    c.schema_version = j.at("schema_version").get<int>();
    if (c.schema_version != 1)
      throw DataError("design file " + path + ": unsupported schema_version " + std::to_string(c.schema_version));
    c.master_seed = j.at("master_seed").get<std::uint64_t>();
    c.spread = j.at("spread").get<double>();
    c.target_separation = j.at("target_separation").get<double>();
    c.calibration_delta = j.at("calibration_delta").get<double>();
    c.m_true = j.at("m_true").get<int>();
    c.h = j.at("h").get<int>();
    c.order = j.at("order").get<int>();
    for (const auto& sensor : j.at("signal_means")) {
      Eigen::MatrixXd mu(c.m_true, c.h);
      if (static_cast<int>(sensor.size()) != c.m_true) throw DataError("design file " + path + ": bad mean block");
      for (int k = 0; k < c.m_true; ++k) {
        const auto row = sensor.at(static_cast<size_t>(k)).get<std::vector<double>>();
        if (static_cast<int>(row.size()) != c.h) throw DataError("design file " + path + ": bad mean block");
        for (int l = 0; l < c.h; ++l) mu(k, l) = row[static_cast<size_t>(l)];
      }
      c.signal_means.push_back(mu);
    }
    return c;
  } catch (const json::exception& e) {
    throw DataError("design file " + path + ": " + e.what());
  }
}

std::string default_design_path() { return std::string(MFCLUST_SOURCE_DIR) + "/config/simulation_design.json"; }

SimulationDesign make_design(const DesignConstants& c, int n, int p_signal, int p_noise, double delta,
                             std::uint64_t seed) {
  if (p_signal > static_cast<int>(c.signal_means.size()))
    throw std::invalid_argument("design constants hold " + std::to_string(c.signal_means.size()) +
                                " signal sensors, " + std::to_string(p_signal) + " requested");
  SimulationDesign d;
  d.n = n;
  d.p_signal = p_signal;
  d.p_noise = p_noise;
  d.delta = delta;
  d.m_true = c.m_true;
  d.proportions.assign(static_cast<size_t>(c.m_true), 1.0 / c.m_true);
  d.h = c.h;
  d.order = c.order;
  d.grid = default_grid();
  d.signal_means.assign(c.signal_means.begin(), c.signal_means.begin() + p_signal);
  d.signal_variances.assign(static_cast<size_t>(p_signal), Eigen::MatrixXd::Ones(c.m_true, c.h));
  d.noise_variance = 1.0;
  d.seed = seed;
  return d;
}

FunctionalDataSet generate_dataset(const SimulationDesign& design) {
  design.validate();
  const Eigen::MatrixXd bm = grid_design(design);
  const int p = design.p_signal + design.p_noise;
  std::mt19937_64 rng(design.seed);
  std::normal_distribution<double> z(0.0, 1.0);
  std::discrete_distribution<int> pick(design.proportions.begin(), design.proportions.end());

  FunctionalDataSet data;
  data.times = design.grid;
  for (int s = 0; s < design.p_signal; ++s) data.sensor_names.push_back("S" + std::to_string(s + 1));
  for (int s = 0; s < design.p_noise; ++s) data.sensor_names.push_back("N" + std::to_string(s + 1));
  std::vector<Eigen::MatrixXd> coeffs(static_cast<size_t>(p), Eigen::MatrixXd(design.n, design.h));
  const double noise_sd = std::sqrt(design.noise_variance / design.delta);
  for (int i = 0; i < design.n; ++i) {
    data.obs_ids.push_back("obs" + std::to_string(i + 1));
    const int k = pick(rng);
    data.labels.push_back(k);
    for (int s = 0; s < p; ++s) {
      auto& c = coeffs[static_cast<size_t>(s)];
      for (int l = 0; l < design.h; ++l) {
        if (s < design.p_signal) {
          const double mu = design.signal_means[static_cast<size_t>(s)](k, l);
          const double var = design.signal_variances[static_cast<size_t>(s)](k, l) / design.delta;
          c(i, l) = mu + std::sqrt(var) * z(rng);
        } else {
          c(i, l) = noise_sd * z(rng);
        }
      }
    }
  }
  for (int s = 0; s < p; ++s) data.curves.push_back(coeffs[static_cast<size_t>(s)] * bm.transpose());
  FunctionalDataSet out = standardize(data).data;
  out.labels = data.labels;
  return out;
}

double ari(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("ari: label sequences differ in length");
  if (a.size() < 2) throw std::invalid_argument("ari: need at least two items");
  std::map<std::pair<int, int>, double> cells;
  std::map<int, double> rows, cols;
  for (size_t i = 0; i < a.size(); ++i) {
    cells[{a[i], b[i]}] += 1;
    rows[a[i]] += 1;
    cols[b[i]] += 1;
  }
  const auto c2 = [](double x) { return x * (x - 1) / 2; };
  double index = 0, sa = 0, sb = 0;
  for (const auto& [_, v] : cells) index += c2(v);
  for (const auto& [_, v] : rows) sa += c2(v);
  for (const auto& [_, v] : cols) sb += c2(v);
  const double expected = sa * sb / c2(static_cast<double>(a.size()));
  const double max_index = 0.5 * (sa + sb);
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

double mae_m(const std::vector<int>& estimates, int m_true) {
  if (estimates.empty()) throw std::invalid_argument("mae_m: no estimates");
  double s = 0.0;
  for (int m : estimates) s += std::abs(m - m_true);
  return s / static_cast<double>(estimates.size());
}

RemovalCounts removal_counts(const std::vector<int>& removed, const std::vector<int>& signal,
                             const std::vector<int>& noise, int zero_columns) {
  const std::set<int> sig(signal.begin(), signal.end());
  const std::set<int> noi(noise.begin(), noise.end());
  RemovalCounts r;
  for (int s : std::set<int>(removed.begin(), removed.end())) {
    if (sig.count(s)) ++r.falsely;
    else if (noi.count(s)) ++r.correct;
    else throw std::invalid_argument("removal_counts: unknown sensor " + std::to_string(s));
  }
  r.variables_removed = zero_columns;
  return r;
}

std::string to_string(Scenario s) {
  switch (s) {
    case Scenario::sample_size: return "sample_size";
    case Scenario::noise_ratio: return "noise_ratio";
    case Scenario::signal_strength: return "signal_strength";
  }
  return "?";
}

Scenario parse_scenario(std::string_view name) {
  std::string key(name);
  std::replace(key.begin(), key.end(), '-', '_');
  for (auto s : {Scenario::sample_size, Scenario::noise_ratio, Scenario::signal_strength})
    if (key == to_string(s)) return s;
  throw std::invalid_argument("unknown scenario '" + std::string(name) +
                              "' (expected sample-size, noise-ratio or signal-strength)");
}

namespace {

std::uint64_t replicate_seed(const ScenarioConfig& cfg, int level_index, int rep) {
  return derive_seed(cfg.seed, static_cast<std::uint64_t>(level_index) + 1, static_cast<std::uint64_t>(rep) + 1);
}

}  // namespace

SimulationDesign scenario_design(const ScenarioConfig& cfg, const DesignConstants& c, double level, int level_index,
                                 int rep) {
  int n = cfg.n, p_noise = cfg.p_noise;
  double delta = cfg.delta;
  switch (cfg.scenario) {
    case Scenario::sample_size: n = static_cast<int>(std::lround(level)); break;
    case Scenario::noise_ratio: p_noise = static_cast<int>(std::lround(level)); break;
    case Scenario::signal_strength: delta = level; break;
  }
  return make_design(c, n, cfg.p_signal, p_noise, delta, replicate_seed(cfg, level_index, rep));
}

std::vector<ReplicateRecord> run_replicate(const ScenarioConfig& cfg, const DesignConstants& c, double level,
                                           int level_index, int rep) {
  std::vector<PenaltyKind> kinds = cfg.kinds;
  if (cfg.include_baseline) kinds.push_back(PenaltyKind::none);
  std::vector<ReplicateRecord> out;
  for (auto kind : kinds) {
    ReplicateRecord r;
    r.scenario = cfg.scenario;
    r.level = level;
    r.rep = rep;
    r.kind = kind;
    out.push_back(r);
  }
  try {
    const SimulationDesign design = scenario_design(cfg, c, level, level_index, rep);
    const FunctionalDataSet data = generate_dataset(design);
    TransformOptions topt;
    topt.n_basis = design.h;
    topt.order = design.order;
    topt.q_c = cfg.q_c;
    const TransformResult tr = run_transform(data, topt);
    std::vector<int> signal, noise;
    for (int s = 0; s < design.p_signal; ++s) signal.push_back(s);
    for (int s = 0; s < design.p_noise; ++s) noise.push_back(design.p_signal + s);
    const std::uint64_t search_seed = derive_seed(design.seed, 0xb1cULL);
    for (auto& r : out) {
      try {
        SearchGrid grid = cfg.grid;
        grid.kinds = {r.kind};
        if (r.kind == PenaltyKind::none) {
          grid.lambda_multipliers = {0.0};
          grid.gamma_values.clear();
        }
        const SelectionReport rep_ = model_search(tr.coefficients, grid, search_seed, 1);
        r.m_hat = rep_.chosen.m;
        r.lambda = rep_.chosen.lambda;
        r.gamma = rep_.chosen.gamma;
        r.ari = ari(data.labels, rep_.best.hard_labels);
        const auto counts =
            removal_counts(rep_.best.removed_sensors, signal, noise, count_zero_columns(rep_.best.params));
        r.correct = counts.correct;
        r.falsely = counts.falsely;
        r.variables_removed = counts.variables_removed;
        for (const auto& row : rep_.rows) {
          if (!row.failure.empty() && row.iterations == 0) continue;
          ++r.fits;
          r.max_objective_increase = std::max(r.max_objective_increase, row.max_objective_increase);
        }
      } catch (const std::exception& e) {
        r.failure = e.what();
      }
    }
  } catch (const std::exception& e) {
    for (auto& r : out) r.failure = e.what();
  }
  return out;
}

double quantile(std::vector<double> values, double prob) {
  if (values.empty()) return std::nan("");
  std::sort(values.begin(), values.end());
  const double pos = prob * static_cast<double>(values.size() - 1);
  const size_t lo = static_cast<size_t>(std::floor(pos));
  const size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

std::vector<BenchmarkRow> aggregate(const ScenarioConfig& cfg, const std::vector<ReplicateRecord>& records,
                                    int m_true) {
  std::vector<PenaltyKind> kinds = cfg.kinds;
  if (cfg.include_baseline) kinds.push_back(PenaltyKind::none);
  std::vector<BenchmarkRow> rows;
  for (double level : cfg.levels)
    for (auto kind : kinds) {
      BenchmarkRow row;
      row.scenario = cfg.scenario;
      row.level = level;
      row.kind = kind;
      std::ostringstream id;
      id << to_string(cfg.scenario) << "=" << level;
      row.scenario_id = id.str();
      std::vector<int> m_hats;
      std::vector<double> aris;
      for (const auto& r : records) {
        if (r.level != level || r.kind != kind) continue;
        if (!r.failure.empty()) {
          ++row.failures;
          continue;
        }
        m_hats.push_back(r.m_hat);
        aris.push_back(r.ari);
        row.mean_variables_removed += r.variables_removed;
        row.mean_correct += r.correct;
        row.mean_falsely += r.falsely;
      }
      row.reps = static_cast<int>(m_hats.size());
      if (row.reps > 0) {
        row.mae = mae_m(m_hats, m_true);
        row.mean_variables_removed /= row.reps;
        row.mean_correct /= row.reps;
        row.mean_falsely /= row.reps;
        row.ari_median = quantile(aris, 0.5);
        row.ari_q1 = quantile(aris, 0.25);
        row.ari_q3 = quantile(aris, 0.75);
      } else {
        row.mae = row.ari_median = row.ari_q1 = row.ari_q3 = std::nan("");
      }
      rows.push_back(row);
    }
  return rows;
}

ScenarioResult run_scenario(const ScenarioConfig& cfg, const DesignConstants& c,
                            const std::function<void(const ReplicateRecord&)>& on_record) {
  if (cfg.reps < 1) throw std::invalid_argument("scenario: reps must be >= 1");
  if (cfg.levels.empty()) throw std::invalid_argument("scenario: no levels");
  const size_t nl = cfg.levels.size();
  const size_t jobs = nl * static_cast<size_t>(cfg.reps);
  std::vector<std::vector<ReplicateRecord>> slots(jobs);
  std::mutex mu;
  parallel_for(jobs, cfg.threads, [&](size_t j) {
    const int li = static_cast<int>(j / static_cast<size_t>(cfg.reps));
    const int rep = static_cast<int>(j % static_cast<size_t>(cfg.reps));
    slots[j] = run_replicate(cfg, c, cfg.levels[static_cast<size_t>(li)], li, rep);
    if (on_record) {
      std::lock_guard<std::mutex> lock(mu);
      for (const auto& r : slots[j]) on_record(r);
    }
  });
  ScenarioResult res;
  for (auto& s : slots)
    for (auto& r : s) res.records.push_back(std::move(r));
  res.rows = aggregate(cfg, res.records, c.m_true);
  return res;
}

}  // namespace mfclust
