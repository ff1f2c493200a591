#include <cstdio>
#include <fstream>
#include <random>

#include "doctest.h"
#include "mfclust/dataio.hpp"
#include "mfclust/errors.hpp"
#include "tmpdir.hpp"

using namespace mfclust;

namespace {

std::string error_of(const std::string& path) {
  try {
    read_long_csv(path);
  } catch (const DataError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("long csv: small complete file") {
  const auto path = test_path("small.csv");
  write_file(path, "obs_id,sensor_id,time,value\na,x,0,1\na,x,1,2\na,x,2,3\nb,x,2,6\nb,x,0,4\nb,x,1,5\n");
  const auto d = read_long_csv(path);
  CHECK(d.n() == 2);
  CHECK(d.p() == 1);
  CHECK(d.tau() == 3);
  CHECK(d.obs_ids == std::vector<std::string>{"a", "b"});
  CHECK(d.curves[0](1, 0) == 4.0);
  CHECK(d.curves[0](1, 2) == 6.0);
}

TEST_CASE("long csv: ingestion errors") {
  const auto path = test_path("bad.csv");
  write_file(path, "obs_id,sensor_id,time,value\na,x,0,1\na,x,1,2\nb,x,0,4\n");
  const auto msg = error_of(path);
  CHECK(msg.find("missing") != std::string::npos);
  CHECK(msg.find("(b, x, 1)") != std::string::npos);

  write_file(path, "obs_id,sensor_id,time,value\na,x,0,1\na,x,0,2\n");
  CHECK(error_of(path).find("duplicate record (a, x, 0)") != std::string::npos);

  write_file(path, "obs_id,sensor_id,time,value\na,x,zero,1\n");
  CHECK(error_of(path).find("not a number") != std::string::npos);

  write_file(path, "obs,sensor,time,value\na,x,0,1\n");
  CHECK(error_of(path).find("header") != std::string::npos);

  write_file(path, "obs_id,sensor_id,time,value\n");
  CHECK(error_of(path).find("no data") != std::string::npos);

  CHECK_THROWS_AS(read_long_csv(test_path("does_not_exist.csv")), DataError);

  std::string many = "obs_id,sensor_id,time,value\n";
  for (int i = 0; i < 12; ++i) many += "o" + std::to_string(i) + ",x,0,1\n";
  many += "o0,x,1,1\n";
  write_file(path, many);
  const auto m = error_of(path);
  CHECK(m.find("11 missing") != std::string::npos);
  CHECK(m.find("(o10, x, 1)") != std::string::npos);
  CHECK(m.find("(o11, x, 1)") == std::string::npos);
}

TEST_CASE("long csv round trip") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> z;
  FunctionalDataSet d;
  d.obs_ids = {"u1", "u2", "u3"};
  d.sensor_names = {"temp", "flow"};
  d.times = {0.0, 0.1, 0.25, 1.0 / 3.0};
  for (int s = 0; s < 2; ++s) {
    Eigen::MatrixXd c(3, 4);
    for (int i = 0; i < c.size(); ++i) c.data()[i] = z(rng) * 1e3;
    d.curves.push_back(c);
  }
  const auto path = test_path("roundtrip.csv");
  write_long_csv(d, path);
  const auto back = read_long_csv(path);
  CHECK(back.obs_ids == d.obs_ids);
  CHECK(back.sensor_names == d.sensor_names);
  CHECK(back.times == d.times);
  for (int s = 0; s < 2; ++s) CHECK(back.curves[static_cast<size_t>(s)] == d.curves[static_cast<size_t>(s)]);
}

TEST_CASE("score table round trip") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> z;
  Eigen::MatrixXd x(4, 6);
  for (int i = 0; i < x.size(); ++i) x.data()[i] = z(rng);
  const CoefficientMatrix b(x, 3, 2, {"a", "b_fpc", "c"});
  const auto path = test_path("scores.csv");
  write_scores({"1", "2", "3", "4"}, b, path);
  const auto t = read_scores(path);
  CHECK(t.coefficients.scores() == x);
  CHECK(t.coefficients.p() == 3);
  CHECK(t.coefficients.q_c() == 2);
  CHECK(t.coefficients.sensor_names() == std::vector<std::string>{"a", "b_fpc", "c"});
  CHECK(t.obs_ids.size() == 4);
}

TEST_CASE("model round trip and prediction") {
  const auto c = read_design_constants(default_design_path());
  const FunctionalDataSet data = generate_dataset(make_design(c, 90, 2, 3, 1.5, 3));
  TransformOptions topt;
  topt.q_c = 3;
  const auto tr = run_transform(data, topt);
  SearchGrid g;
  g.m_values = {2, 3};
  g.gamma_values = {1.0};
  g.lambda_multipliers = {0, 1, 5};
  ModelFile mf;
  mf.fpca = tr.models;
  mf.sensor_names = data.sensor_names;
  mf.report = model_search(tr.coefficients, g, 5);
  const auto path = test_path("model.json");
  write_model(mf, path);
  const ModelFile back = read_model(path);

  const auto& a = mf.report.best.params;
  const auto& b = back.report.best.params;
  CHECK(a.means == b.means);
  CHECK(a.variances == b.variances);
  CHECK(a.proportions == b.proportions);
  CHECK((a.zero_mask == b.zero_mask).all());
  CHECK(back.report.chosen.m == mf.report.chosen.m);
  CHECK(back.report.chosen.lambda == mf.report.chosen.lambda);
  CHECK(back.report.chosen.gamma == mf.report.chosen.gamma);
  CHECK(back.report.chosen.kind == mf.report.chosen.kind);
  REQUIRE(back.report.rows.size() == mf.report.rows.size());
  for (size_t i = 0; i < back.report.rows.size(); ++i) {
    CHECK(back.report.rows[i].bic == mf.report.rows[i].bic);
    CHECK(back.report.rows[i].n_zero == mf.report.rows[i].n_zero);
  }
  REQUIRE(back.fpca.size() == mf.fpca.size());
  for (size_t s = 0; s < back.fpca.size(); ++s) {
    CHECK(back.fpca[s].eigen_coeffs == mf.fpca[s].eigen_coeffs);
    CHECK(back.fpca[s].mean_coeffs == mf.fpca[s].mean_coeffs);
    CHECK(back.fpca[s].standardization.sd == mf.fpca[s].standardization.sd);
    CHECK(back.fpca[s].basis.knots == mf.fpca[s].basis.knots);
  }

  const auto before = hard_labels(e_step(apply_transform(data, mf.fpca), a).responsibilities);
  const auto after = hard_labels(e_step(apply_transform(data, back.fpca), b).responsibilities);
  CHECK(before == after);
  CHECK(before == mf.report.best.hard_labels);
}

TEST_CASE("model files: version and corruption errors") {
  const auto path = test_path("future.json");
  write_file(path, R"({"schema_version": 99, "fpca": [], "mixture": {}, "selection_table": [], "chosen": {}})");
  try {
    read_model(path);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("schema_version 99") != std::string::npos);
  }
  write_file(path, "{ not json");
  CHECK_THROWS_AS(read_model(path), DataError);
  write_file(path, R"({"schema_version": 1})");
  CHECK_THROWS_AS(read_model(path), DataError);
}

TEST_CASE("assignments round trip") {
  const auto path = test_path("assign.csv");
  write_assignments({"a", "b"}, {0, 0}, Eigen::MatrixXd::Ones(2, 1), path);
  auto a = read_assignments(path);
  CHECK(a.responsibilities.cols() == 1);
  CHECK(a.responsibilities(1, 0) == 1.0);
  CHECK(a.labels == std::vector<int>{0, 0});

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.01, 1);
  Eigen::MatrixXd tau(20, 3);
  for (int i = 0; i < tau.size(); ++i) tau.data()[i] = u(rng);
  for (int i = 0; i < 20; ++i) tau.row(i) /= tau.row(i).sum();
  const auto labels = hard_labels(tau);
  std::vector<std::string> ids;
  for (int i = 0; i < 20; ++i) ids.push_back("o" + std::to_string(i));
  write_assignments(ids, labels, tau, path);
  a = read_assignments(path);
  CHECK(a.labels == labels);
  CHECK(hard_labels(a.responsibilities) == labels);
  for (int i = 0; i < 20; ++i) CHECK(std::abs(a.responsibilities.row(i).sum() - 1.0) < 1e-8);
  CHECK_THROWS_AS(write_assignments({}, {}, Eigen::MatrixXd(0, 2), path), std::invalid_argument);
}

TEST_CASE("benchmark outputs round trip and partial replicate files stay valid") {
  BenchmarkRow r;
  r.scenario_id = "sample_size=50";
  r.level = 50;
  r.kind = PenaltyKind::group;
  r.mae = 0.36;
  r.ari_median = 0.9;
  r.reps = 50;
  const auto rows_path = test_path("rows.csv");
  write_benchmark_rows({r, r}, rows_path);
  const auto rows = read_benchmark_rows(rows_path);
  REQUIRE(rows.size() == 2);
  CHECK(rows[1].mae == 0.36);
  CHECK(rows[1].kind == PenaltyKind::group);

  const auto rec_path = test_path("reps.csv");
  {
    ReplicateWriter w(rec_path);
    ReplicateRecord rec;
    rec.level = 50;
    rec.kind = PenaltyKind::variable;
    rec.m_hat = 3;
    rec.ari = 0.75;
    w.write(rec);
    rec.rep = 1;
    rec.failure = "cluster 2 is empty, restart failed";
    w.write(rec);
    // Reading while the writer is still open sees only whole lines.
    const auto partial = read_replicate_records(rec_path);
    CHECK(partial.size() == 2);
  }
  const auto recs = read_replicate_records(rec_path);
  REQUIRE(recs.size() == 2);
  CHECK(recs[0].ari == 0.75);
  CHECK(recs[1].failure.find("restart failed") != std::string::npos);
}
