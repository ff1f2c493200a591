#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "mfclust/fpca.hpp"
#include "mfclust/simbench.hpp"
#include "oracles.hpp"

using namespace mfclust;

namespace {

DesignConstants frozen() { return read_design_constants(default_design_path()); }

}  // namespace

TEST_CASE("frozen design file matches its recorded calibration") {
  const DesignConstants c = frozen();
  const DesignConstants again = calibrate_design(c.master_seed, 2, c.target_separation, c.calibration_delta);
  REQUIRE(c.signal_means.size() == 2);
  for (size_t s = 0; s < 2; ++s) CHECK((c.signal_means[s] - again.signal_means[s]).cwiseAbs().maxCoeff() < 1e-12);
  const SimulationDesign d = make_design(c, 200, 2, 16, c.calibration_delta, 1);
  for (int s = 0; s < 2; ++s) CHECK(standardized_separation(d, s) == doctest::Approx(c.target_separation).epsilon(1e-9));
  CHECK_THROWS_AS(make_design(c, 200, 3, 16, 1.5, 1), std::invalid_argument);
}

TEST_CASE("design validation") {
  SimulationDesign d = make_design(frozen(), 50, 2, 4, 1.5, 1);
  CHECK_NOTHROW(d.validate());
  auto bad = d;
  bad.delta = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = d;
  bad.proportions = {0.5, 0.3, 0.3};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = d;
  bad.p_noise = -1;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("generator: names, shapes, standardization and determinism") {
  const SimulationDesign d = make_design(frozen(), 40, 2, 3, 1.5, 99);
  const FunctionalDataSet a = generate_dataset(d);
  CHECK(a.n() == 40);
  CHECK(a.p() == 5);
  CHECK(a.tau() == 31);
  CHECK(a.sensor_names == std::vector<std::string>{"S1", "S2", "N1", "N2", "N3"});
  CHECK(a.labels.size() == 40);
  for (const auto& c : a.curves) {
    CHECK(std::abs(c.mean()) < 1e-12);
    CHECK(std::abs((c.array() - c.mean()).square().mean() - 1.0) < 1e-12);
  }
  const FunctionalDataSet b = generate_dataset(d);
  for (int s = 0; s < 5; ++s) CHECK(a.curves[static_cast<size_t>(s)] == b.curves[static_cast<size_t>(s)]);
  CHECK(a.labels == b.labels);
  SimulationDesign other = d;
  other.seed = 100;
  CHECK(generate_dataset(other).curves[0] != a.curves[0]);
}

TEST_CASE("cluster shares follow the proportions") {
  const FunctionalDataSet data = generate_dataset(make_design(frozen(), 10000, 1, 0, 1.5, 5));
  int counts[3] = {0, 0, 0};
  for (int k : data.labels) ++counts[k];
  for (int k = 0; k < 3; ++k) CHECK(std::abs(counts[k] / 10000.0 - 1.0 / 3) <= 0.02);
}

TEST_CASE("noisy sensors have the same mean curve in every cluster") {
  // Differences are judged in standard errors: with unit pointwise spread
  // and ~333 curves per cluster, one standard error is already ~0.08.
  const FunctionalDataSet data = generate_dataset(make_design(frozen(), 1000, 1, 2, 1.5, 6));
  for (int s = 1; s < 3; ++s) {
    const auto& c = data.curves[static_cast<size_t>(s)];
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(3, data.tau()), sq = sum;
    Eigen::Vector3d counts = Eigen::Vector3d::Zero();
    for (int i = 0; i < data.n(); ++i) {
      const int k = data.labels[static_cast<size_t>(i)];
      sum.row(k) += c.row(i);
      sq.row(k) += c.row(i).cwiseAbs2();
      counts(k) += 1;
    }
    for (int k = 0; k < 3; ++k)
      for (int l = k + 1; l < 3; ++l)
        for (int t = 0; t < data.tau(); ++t) {
          const double mk = sum(k, t) / counts(k), ml = sum(l, t) / counts(l);
          const double vk = sq(k, t) / counts(k) - mk * mk, vl = sq(l, t) / counts(l) - ml * ml;
          CHECK(std::abs(mk - ml) < 4.0 * std::sqrt(vk / counts(k) + vl / counts(l)));
        }
  }
}

TEST_CASE("huge delta collapses curves onto their cluster mean curves") {
  const FunctionalDataSet data = generate_dataset(make_design(frozen(), 90, 2, 0, 1e6, 7));
  for (int s = 0; s < 2; ++s) {
    Eigen::MatrixXd means = Eigen::MatrixXd::Zero(3, data.tau());
    Eigen::Vector3d counts = Eigen::Vector3d::Zero();
    const auto& c = data.curves[static_cast<size_t>(s)];
    for (int i = 0; i < data.n(); ++i) {
      means.row(data.labels[static_cast<size_t>(i)]) += c.row(i);
      counts(data.labels[static_cast<size_t>(i)]) += 1;
    }
    for (int k = 0; k < 3; ++k) means.row(k) /= counts(k);
    double spread = 0.0;
    for (int i = 0; i < data.n(); ++i)
      spread = std::max(spread, (c.row(i) - means.row(data.labels[static_cast<size_t>(i)])).cwiseAbs().maxCoeff());
    CHECK(spread < 0.01);
  }
}

TEST_CASE("adjusted Rand index") {
  CHECK(ari({0, 0, 1, 1}, {0, 0, 1, 1}) == 1.0);
  CHECK(ari({0, 0, 1, 1, 2}, {7, 7, 3, 3, 5}) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(ari({0, 0, 1, 1}, {0, 1, 0, 1}) == doctest::Approx(oracle::ari_by_pairs({0, 0, 1, 1}, {0, 1, 0, 1})).epsilon(1e-14));
  CHECK(ari({0, 0, 1, 1}, {0, 1, 0, 1}) == doctest::Approx(-0.5));
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> lab(0, 3);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<int> a(30), b(30);
    for (int i = 0; i < 30; ++i) {
      a[static_cast<size_t>(i)] = lab(rng);
      b[static_cast<size_t>(i)] = lab(rng);
    }
    const double v = ari(a, b);
    CHECK(v == doctest::Approx(oracle::ari_by_pairs(a, b)).epsilon(1e-12));
    CHECK(v >= -1.0);
    CHECK(v <= 1.0);
    std::vector<int> renamed(a);
    for (auto& x : renamed) x = 10 - 3 * x;
    CHECK(ari(a, renamed) == doctest::Approx(1.0).epsilon(1e-15));
  }
  CHECK_THROWS_AS(ari({0, 1}, {0}), std::invalid_argument);
  CHECK_THROWS_AS(ari({0}, {0}), std::invalid_argument);
}

TEST_CASE("mean absolute error of the cluster count") {
  CHECK(mae_m({3, 3, 3}, 3) == 0.0);
  CHECK(mae_m({2, 3, 4}, 3) == doctest::Approx(2.0 / 3).epsilon(1e-15));
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> m(2, 4);
  std::vector<int> draws(200);
  int c2 = 0, c4 = 0;
  for (auto& d : draws) {
    d = m(rng);
    c2 += d == 2;
    c4 += d == 4;
  }
  CHECK(mae_m(draws, 3) == doctest::Approx((c2 + c4) / 200.0).epsilon(1e-14));
  CHECK_THROWS_AS(mae_m({}, 3), std::invalid_argument);
}

TEST_CASE("removal counts") {
  std::vector<int> signal{0, 1}, noise;
  for (int s = 2; s < 18; ++s) noise.push_back(s);
  auto r = removal_counts(noise, signal, noise, 48);
  CHECK(r.correct == 16);
  CHECK(r.falsely == 0);
  CHECK(r.variables_removed == 48);
  r = removal_counts({}, signal, noise, 0);
  CHECK((r.correct == 0 && r.falsely == 0 && r.variables_removed == 0));
  r = removal_counts({1, 4, 9}, signal, noise, 9);
  CHECK(r.correct == 2);
  CHECK(r.falsely == 1);
  CHECK_THROWS_AS(removal_counts({20}, signal, noise, 0), std::invalid_argument);
}

TEST_CASE("quantiles interpolate linearly") {
  CHECK(quantile({3, 1, 2}, 0.5) == 2.0);
  CHECK(quantile({1, 2, 3, 4}, 0.5) == 2.5);
  CHECK(quantile({1, 2, 3, 4, 5}, 0.25) == 2.0);
  CHECK(std::isnan(quantile({}, 0.5)));
}

TEST_CASE("scenario runs are deterministic and respect count bounds") {
  ScenarioConfig cfg;
  cfg.scenario = Scenario::noise_ratio;
  cfg.levels = {4};
  cfg.reps = 2;
  cfg.n = 60;
  cfg.kinds = {PenaltyKind::group};
  cfg.grid.m_values = {2, 3};
  cfg.grid.gamma_values = {1.0};
  cfg.grid.lambda_multipliers = {0, 1, 3};
  const DesignConstants c = frozen();
  const auto a = run_scenario(cfg, c);
  const auto b = run_scenario(cfg, c);
  REQUIRE(a.rows.size() == 2);  // group and the unpenalized baseline
  REQUIRE(a.records.size() == 4);
  for (size_t i = 0; i < a.records.size(); ++i) {
    CHECK(a.records[i].m_hat == b.records[i].m_hat);
    CHECK(a.records[i].ari == b.records[i].ari);
    CHECK(a.records[i].correct <= 4);
    CHECK(a.records[i].falsely <= 2);
    CHECK(a.records[i].failure.empty());
  }
  for (size_t i = 0; i < a.rows.size(); ++i) {
    CHECK(a.rows[i].mae == b.rows[i].mae);
    CHECK(a.rows[i].mae >= 0.0);
    CHECK(a.rows[i].reps == 2);
    CHECK(a.rows[i].scenario_id == "noise_ratio=4");
  }
  CHECK(a.rows[1].kind == PenaltyKind::none);
  CHECK(a.rows[1].mean_correct == 0.0);
  cfg.threads = 2;
  const auto par = run_scenario(cfg, c);
  for (size_t i = 0; i < a.records.size(); ++i) CHECK(par.records[i].ari == a.records[i].ari);
}

TEST_CASE("System-B analog needs three components per sensor") {
  const FunctionalDataSet data = generate_systemb_analog({});
  CHECK(data.p() == 42);
  TransformOptions opt;
  const TransformResult tr = run_transform(data, opt);
  CHECK(tr.selection.q_c == 3);
  CHECK(tr.selection.fraction >= 0.8);
  CHECK(tr.selection.fraction < 0.87);
  CHECK(tr.coefficients.q() == 126);
}
