#include "mfclust/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "mfclust/dataio.hpp"
#include "mfclust/errors.hpp"
#include "mfclust/parallel.hpp"
#include "mfclust/simbench.hpp"

namespace mfclust {

namespace {

struct FpcaArgs {
  int n_basis = 12;
  int order = 3;
  int q_c = 0;
  double alpha = 0.8;
  double beta = 0.8;
};

void add_fpca_options(CLI::App* cmd, FpcaArgs& a) {
  cmd->add_option("--n-basis", a.n_basis, "B-spline basis size")->capture_default_str()->check(CLI::PositiveNumber);
  cmd->add_option("--order", a.order, "B-spline order (degree + 1)")->capture_default_str()->check(CLI::PositiveNumber);
  cmd->add_option("--qc", a.q_c, "components per sensor; 0 applies the alpha/beta rule")->capture_default_str();
  cmd->add_option("--alpha", a.alpha, "share of sensors that must pass beta")->capture_default_str()->check(
      CLI::Range(0.0, 1.0));
  cmd->add_option("--beta", a.beta, "variance share per sensor")->capture_default_str()->check(CLI::Range(0.0, 1.0));
}

TransformOptions transform_options(const FpcaArgs& a, int threads) {
  TransformOptions o;
  o.n_basis = a.n_basis;
  o.order = a.order;
  o.q_c = a.q_c;
  o.alpha = a.alpha;
  o.beta = a.beta;
  o.threads = threads;
  return o;
}

int resolve_threads(int t) { return t > 0 ? t : default_thread_count(); }

std::vector<PenaltyKind> parse_kinds(const std::vector<std::string>& names) {
  std::vector<PenaltyKind> out;
  for (const auto& n : names) out.push_back(parse_penalty_kind(n));
  if (out.empty()) throw std::invalid_argument("no penalty given");
  return out;
}

void print_variance_table(std::ostream& out, const TransformResult& tr) {
  const int show = std::min<int>(5, static_cast<int>(tr.models.front().variance_explained.size()));
  out << "sensor";
  for (int l = 1; l <= show; ++l) out << "\tcum" << l;
  out << "\n";
  for (const auto& m : tr.models) {
    out << m.sensor;
    char buf[32];
    for (int l = 0; l < show; ++l) {
      std::snprintf(buf, sizeof buf, "\t%.3f", m.variance_explained(l));
      out << buf;
    }
    out << "\n";
  }
  out << "q_c = " << tr.selection.q_c << " (" << tr.selection.fraction * 100 << "% of sensors above beta"
      << (tr.selection.satisfied ? "" : "; rule not satisfied at n_basis") << ")\n";
}

std::string join_names(const std::vector<int>& idx, const std::vector<std::string>& names) {
  std::string s;
  for (int i : idx) s += (s.empty() ? "" : ",") + names[static_cast<size_t>(i)];
  return s.empty() ? "-" : s;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Clustering of multi-sensor functional data with sensor selection", "mfclust"};
  app.set_config("--config", "", "TOML/INI file with option values; flags override it");
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "worker threads (0: MFCLUST_THREADS or all processors)")
      ->envname("MFCLUST_THREADS")
      ->check(CLI::NonNegativeNumber);

  // transform
  auto* tcmd = app.add_subcommand("transform", "standardize curves, fit per-sensor FPCA, write scores");
  std::string t_input, t_scores, t_model;
  FpcaArgs t_fpca;
  tcmd->add_option("--input", t_input, "long CSV obs_id,sensor_id,time,value")->required();
  tcmd->add_option("--scores-out", t_scores, "score CSV")->required();
  tcmd->add_option("--fpca-out", t_model, "FPCA model JSON")->required();
  add_fpca_options(tcmd, t_fpca);

  // fit
  auto* fcmd = app.add_subcommand("fit", "model search over m, lambda and gamma");
  std::string f_input, f_scores, f_fpca_model, f_out = ".";
  FpcaArgs f_fpca;
  std::vector<std::string> f_penalty{"group"};
  SearchGrid f_grid;
  std::uint64_t f_seed = 1;
  EmOptions f_em;
  auto* f_in_opt = fcmd->add_option("--input", f_input, "long CSV of raw curves");
  auto* f_sc_opt = fcmd->add_option("--scores", f_scores, "score CSV written by transform");
  f_in_opt->excludes(f_sc_opt);
  fcmd->add_option("--fpca-model", f_fpca_model, "FPCA JSON to embed when fitting from scores")->needs(f_sc_opt);
  add_fpca_options(fcmd, f_fpca);
  fcmd->add_option("--penalty", f_penalty, "individual, variable, group or none (comma list)")->delimiter(',');
  fcmd->add_option("--m-grid,--m", f_grid.m_values, "cluster counts")->delimiter(',');
  fcmd->add_option("--gamma-grid", f_grid.gamma_values, "adaptive-weight exponents")->delimiter(',');
  fcmd->add_option("--lambda-grid", f_grid.lambda_multipliers, "lambda multipliers of n^(1/3)")->delimiter(',');
  fcmd->add_option("--seed", f_seed, "random seed")->capture_default_str();
  fcmd->add_option("--tol", f_em.tol, "EM convergence tolerance")->capture_default_str();
  fcmd->add_option("--max-iter", f_em.max_iter, "EM iteration limit")->capture_default_str();
  fcmd->add_option("--out-dir", f_out, "directory for model_<penalty>.json, assignments_<penalty>.csv, "
                                       "removed_<penalty>.txt")
      ->capture_default_str();

  // predict
  auto* pcmd = app.add_subcommand("predict", "assign observations with a fitted model");
  std::string p_model, p_input, p_scores, p_out;
  pcmd->add_option("--model", p_model, "model JSON written by fit")->required();
  auto* p_in_opt = pcmd->add_option("--input", p_input, "long CSV of raw curves");
  auto* p_sc_opt = pcmd->add_option("--scores", p_scores, "score CSV");
  p_in_opt->excludes(p_sc_opt);
  pcmd->add_option("--out", p_out, "assignments CSV")->required();

  // simulate
  auto* scmd = app.add_subcommand("simulate", "generate a synthetic dataset");
  int s_n = 200, s_ps = 2, s_pn = 16;
  double s_delta = 1.5;
  std::uint64_t s_seed = 1;
  std::string s_design = default_design_path(), s_out, s_truth;
  scmd->add_option("--n", s_n, "observations")->capture_default_str();
  scmd->add_option("--p-signal", s_ps, "signal sensors")->capture_default_str();
  scmd->add_option("--p-noise", s_pn, "noisy sensors")->capture_default_str();
  scmd->add_option("--delta", s_delta, "signal-strength divisor")->capture_default_str();
  scmd->add_option("--seed", s_seed, "random seed")->capture_default_str();
  scmd->add_option("--design", s_design, "frozen design constants")->capture_default_str();
  scmd->add_option("--out", s_out, "long CSV")->required();
  scmd->add_option("--truth", s_truth, "truth JSON (labels, sensor roles, design echo)")->required();

  // benchmark
  auto* bcmd = app.add_subcommand("benchmark", "factor-sweep simulation study");
  std::string b_scenario = "sample-size", b_out, b_reps_out, b_design = default_design_path();
  ScenarioConfig b_cfg;
  std::vector<std::string> b_penalty{"group", "variable", "individual"};
  bool b_no_baseline = false;
  bcmd->add_option("--scenario", b_scenario, "sample-size, noise-ratio or signal-strength")->capture_default_str();
  bcmd->add_option("--levels", b_cfg.levels, "levels of the varied factor (default: four standard levels per scenario)")
      ->delimiter(',');
  bcmd->add_option("--reps", b_cfg.reps, "replicates per level")->capture_default_str()->check(CLI::PositiveNumber);
  bcmd->add_option("--penalty", b_penalty, "penalties besides the unpenalized baseline")->delimiter(',');
  bcmd->add_flag("--no-baseline", b_no_baseline, "skip clustering without penalty");
  bcmd->add_option("--seed", b_cfg.seed, "master seed")->capture_default_str();
  bcmd->add_option("--n", b_cfg.n, "sample size when not varied")->capture_default_str();
  bcmd->add_option("--p-noise", b_cfg.p_noise, "noisy sensors when not varied")->capture_default_str();
  bcmd->add_option("--delta", b_cfg.delta, "signal strength when not varied")->capture_default_str();
  bcmd->add_option("--qc", b_cfg.q_c, "FPCs per sensor")->capture_default_str();
  bcmd->add_option("--m-grid", b_cfg.grid.m_values, "cluster counts")->delimiter(',');
  bcmd->add_option("--gamma-grid", b_cfg.grid.gamma_values, "adaptive-weight exponents")->delimiter(',');
  bcmd->add_option("--lambda-grid", b_cfg.grid.lambda_multipliers, "lambda multipliers")->delimiter(',');
  bcmd->add_option("--design", b_design, "frozen design constants")->capture_default_str();
  bcmd->add_option("--out", b_out, "summary CSV")->required();
  bcmd->add_option("--replicates-out", b_reps_out, "replicate-level CSV")->required();

  // design
  auto* dcmd = app.add_subcommand("design", "draw and calibrate frozen simulation constants");
  std::uint64_t d_seed = 20240611;
  double d_target = 2.0, d_delta = 1.5;
  int d_ps = 2;
  std::string d_out;
  dcmd->add_option("--master-seed", d_seed, "seed for the cluster mean coefficients")->capture_default_str();
  dcmd->add_option("--target", d_target, "standardized between-cluster separation")->capture_default_str();
  dcmd->add_option("--delta", d_delta, "delta at which the target holds")->capture_default_str();
  dcmd->add_option("--p-signal", d_ps, "signal sensors to draw")->capture_default_str();
  dcmd->add_option("--out", d_out, "design JSON")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    const int nthreads = resolve_threads(threads);
    if (*tcmd) {
      const FunctionalDataSet raw = read_long_csv(t_input);
      out << "read " << raw.n() << " observations, " << raw.p() << " sensors, " << raw.tau() << " time points\n";
      const TransformResult tr = run_transform(raw, transform_options(t_fpca, nthreads));
      print_variance_table(out, tr);
      write_scores(raw.obs_ids, tr.coefficients, t_scores);
      write_fpca_models(tr.models, t_model);
      read_scores(t_scores);
      read_fpca_models(t_model);
      return kExitOk;
    }

    if (*fcmd) {
      if (f_input.empty() && f_scores.empty()) throw std::invalid_argument("fit needs --input or --scores");
      const std::vector<PenaltyKind> kinds = parse_kinds(f_penalty);
      std::vector<std::string> obs_ids;
      CoefficientMatrix b;
      std::vector<SensorFpcaModel> models;
      if (!f_input.empty()) {
        const FunctionalDataSet raw = read_long_csv(f_input);
        const TransformResult tr = run_transform(raw, transform_options(f_fpca, nthreads));
        out << "q_c = " << tr.selection.q_c << ", q = " << tr.coefficients.q() << "\n";
        obs_ids = raw.obs_ids;
        b = tr.coefficients;
        models = tr.models;
      } else {
        ScoreTable st = read_scores(f_scores);
        obs_ids = st.obs_ids;
        b = st.coefficients;
        if (!f_fpca_model.empty()) models = read_fpca_models(f_fpca_model);
      }
      std::filesystem::create_directories(f_out);
      for (PenaltyKind kind : kinds) {
        SearchGrid grid = f_grid;
        grid.kinds = {kind};
        if (kind == PenaltyKind::none) {
          grid.lambda_multipliers = {0.0};
          grid.gamma_values.clear();
        }
        ModelFile mf;
        mf.report = model_search(b, grid, f_seed, nthreads, f_em);
        mf.fpca = models;
        mf.sensor_names = b.sensor_names();
        const std::string name = to_string(kind);
        const std::string model_path = (std::filesystem::path(f_out) / ("model_" + name + ".json")).string();
        const std::string assign_path = (std::filesystem::path(f_out) / ("assignments_" + name + ".csv")).string();
        const std::string removed_path = (std::filesystem::path(f_out) / ("removed_" + name + ".txt")).string();
        write_model(mf, model_path);
        const FitResult& fit = mf.report.best;
        write_assignments(obs_ids, fit.hard_labels, fit.responsibilities, assign_path);
        std::string removed;
        for (int s : fit.removed_sensors) removed += b.sensor_names()[static_cast<size_t>(s)] + "\n";
        write_text_atomic(removed_path, removed);
        read_model(model_path);
        read_assignments(assign_path);
        int usable = 0;
        for (const auto& r : mf.report.rows) usable += r.converged && r.failure.empty();
        out << name << ": m = " << mf.report.chosen.m << ", lambda = " << mf.report.chosen.lambda
            << ", gamma = " << mf.report.chosen.gamma << ", BIC = " << adjusted_bic(fit, b.n(), b.q())
            << ", zero means = " << fit.n_zero_means << ", removed sensors = "
            << join_names(fit.removed_sensors, b.sensor_names()) << " (" << usable << "/" << mf.report.rows.size()
            << " grid points usable)\n";
      }
      return kExitOk;
    }

    if (*pcmd) {
      if (p_input.empty() && p_scores.empty()) throw std::invalid_argument("predict needs --input or --scores");
      const ModelFile mf = read_model(p_model);
      std::vector<std::string> obs_ids;
      CoefficientMatrix b;
      if (!p_input.empty()) {
        if (mf.fpca.empty()) throw DataError(p_model + " has no FPCA models; predict from --scores instead");
        const FunctionalDataSet raw = read_long_csv(p_input);
        FunctionalDataSet sub = raw;
        sub.sensor_names.clear();
        sub.curves.clear();
        for (const auto& m : mf.fpca) {
          const int s = raw.sensor_index(m.sensor);
          if (s < 0) throw DataError(p_input + " has no sensor " + m.sensor);
          sub.sensor_names.push_back(m.sensor);
          sub.curves.push_back(raw.curves[static_cast<size_t>(s)]);
        }
        obs_ids = raw.obs_ids;
        b = apply_transform(sub, mf.fpca);
      } else {
        ScoreTable st = read_scores(p_scores);
        if (st.coefficients.sensor_names() != mf.sensor_names || st.coefficients.q_c() != mf.report.q_c)
          throw DataError(p_scores + " does not match the model's sensors and components");
        obs_ids = st.obs_ids;
        b = st.coefficients;
      }
      const EStepResult es = e_step(b, mf.report.best.params);
      write_assignments(obs_ids, hard_labels(es.responsibilities), es.responsibilities, p_out);
      read_assignments(p_out);
      out << "assigned " << b.n() << " observations to " << mf.report.chosen.m << " clusters\n";
      return kExitOk;
    }

    if (*scmd) {
      const DesignConstants c = read_design_constants(s_design);
      const SimulationDesign d = make_design(c, s_n, s_ps, s_pn, s_delta, s_seed);
      const FunctionalDataSet data = generate_dataset(d);
      write_long_csv(data, s_out);
      write_truth(d, data, s_truth);
      read_long_csv(s_out);
      out << "wrote " << data.n() << " observations, " << data.p() << " sensors (" << d.p_signal << " signal), "
          << data.tau() << " time points\n";
      return kExitOk;
    }

    if (*bcmd) {
      b_cfg.scenario = parse_scenario(b_scenario);
      if (b_cfg.levels.empty()) {
        switch (b_cfg.scenario) {
          case Scenario::sample_size: b_cfg.levels = {50, 200, 350, 500}; break;
          case Scenario::noise_ratio: b_cfg.levels = {8, 16, 32, 64}; break;
          case Scenario::signal_strength: b_cfg.levels = {1, 1.5, 2, 2.5}; break;
        }
      }
      b_cfg.kinds = parse_kinds(b_penalty);
      b_cfg.include_baseline = !b_no_baseline;
      b_cfg.threads = nthreads;
      const DesignConstants c = read_design_constants(b_design);
      ReplicateWriter writer(b_reps_out);
      const ScenarioResult res = run_scenario(b_cfg, c, [&](const ReplicateRecord& r) { writer.write(r); });
      write_benchmark_rows(res.rows, b_out);
      read_benchmark_rows(b_out);
      read_replicate_records(b_reps_out);
      char buf[256];
      std::snprintf(buf, sizeof buf, "%-22s %-11s %7s %9s %9s %9s %8s %5s\n", "scenario", "penalty", "MAE(m)",
                    "var.rm", "correct", "falsely", "ARI.med", "fail");
      out << buf;
      for (const auto& r : res.rows) {
        std::snprintf(buf, sizeof buf, "%-22s %-11s %7.2f %9.2f %9.2f %9.2f %8.3f %5d\n", r.scenario_id.c_str(),
                      to_string(r.kind).c_str(), r.mae, r.mean_variables_removed, r.mean_correct, r.mean_falsely,
                      r.ari_median, r.failures);
        out << buf;
      }
      return kExitOk;
    }

    if (*dcmd) {
      const DesignConstants c = calibrate_design(d_seed, d_ps, d_target, d_delta);
      write_design_constants(c, d_out);
      read_design_constants(d_out);
      out << "spread " << c.spread << " for target separation " << d_target << " at delta " << d_delta << "\n";
      return kExitOk;
    }
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

int run_cli(int argc, const char* const* argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace mfclust
