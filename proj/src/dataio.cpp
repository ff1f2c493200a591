#include "mfclust/dataio.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <limits>
#include <map>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "mfclust/bspline.hpp"
#include "mfclust/errors.hpp"

namespace mfclust {

using nlohmann::json;

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void write_text_atomic(const std::string& path, const std::string& contents) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path);
    out << contents;
    out.flush();
    if (!out) throw DataError("failed writing " + path);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw DataError("cannot move " + tmp + " to " + path + ": " + ec.message());
}

namespace {

std::string trim(std::string s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string::npos) return "";
  s = s.substr(b, s.find_last_not_of(ws) - b + 1);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_number(const std::string& s, const std::string& where) {
  if (s == "nan" || s == "NaN") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE)
    throw DataError(where + ": '" + s + "' is not a number");
  return v;
}

int parse_int(const std::string& s, const std::string& where) {
  const double v = parse_number(s, where);
  if (v != std::floor(v) || std::abs(v) > 1e9) throw DataError(where + ": '" + s + "' is not an integer");
  return static_cast<int>(v);
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  return in;
}

// Reads the header and checks it against `expected` (a prefix when
// `prefix_only`).
std::vector<std::string> read_header(std::istream& in, const std::string& path, const std::vector<std::string>& expected,
                                     bool prefix_only) {
  std::string line;
  if (!std::getline(in, line)) throw DataError(path + ": empty file");
  auto h = split(line);
  bool ok = prefix_only ? h.size() >= expected.size() : h.size() == expected.size();
  for (size_t i = 0; ok && i < expected.size(); ++i) ok = h[i] == expected[i];
  if (!ok) {
    std::string want;
    for (const auto& e : expected) want += (want.empty() ? "" : ",") + e;
    throw DataError(path + ": header must " + (prefix_only ? "start with " : "be ") + want);
  }
  return h;
}

}  // namespace

FunctionalDataSet read_long_csv(const std::string& path) {
  auto in = open_input(path);
  read_header(in, path, {"obs_id", "sensor_id", "time", "value"}, false);
  std::vector<std::string> obs, sensors;
  std::unordered_map<std::string, int> obs_index, sensor_index;
  std::map<double, int> time_set;
  struct Cell {
    int obs, sensor;
    double time, value;
  };
  std::vector<Cell> cells;
  std::string line;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto f = split(line);
    const std::string where = path + " line " + std::to_string(lineno);
    if (f.size() != 4) throw DataError(where + ": expected 4 fields, found " + std::to_string(f.size()));
    if (f[0].empty() || f[1].empty()) throw DataError(where + ": empty identifier");
    auto [oi, onew] = obs_index.try_emplace(f[0], static_cast<int>(obs.size()));
    if (onew) obs.push_back(f[0]);
    auto [si, snew] = sensor_index.try_emplace(f[1], static_cast<int>(sensors.size()));
    if (snew) sensors.push_back(f[1]);
    const double t = parse_number(f[2], where);
    const double v = parse_number(f[3], where);
    if (!std::isfinite(t) || !std::isfinite(v)) throw DataError(where + ": non-finite time or value");
    time_set.emplace(t, 0);
    cells.push_back({oi->second, si->second, t, v});
  }
  if (cells.empty()) throw DataError(path + ": no data rows");
  std::vector<double> times;
  for (auto& [t, idx] : time_set) {
    idx = static_cast<int>(times.size());
    times.push_back(t);
  }
  const int n = static_cast<int>(obs.size()), p = static_cast<int>(sensors.size()), tau = static_cast<int>(times.size());
  FunctionalDataSet data;
  data.obs_ids = obs;
  data.sensor_names = sensors;
  data.times = times;
  data.curves.assign(static_cast<size_t>(p), Eigen::MatrixXd::Constant(n, tau, std::numeric_limits<double>::quiet_NaN()));
  std::vector<char> seen(static_cast<size_t>(n) * p * tau, 0);
  for (const auto& c : cells) {
    const int ti = time_set.at(c.time);
    auto& flag = seen[(static_cast<size_t>(c.obs) * p + c.sensor) * tau + ti];
    if (flag)
      throw DataError(path + ": duplicate record (" + obs[static_cast<size_t>(c.obs)] + ", " +
                      sensors[static_cast<size_t>(c.sensor)] + ", " + format_double(c.time) + ")");
    flag = 1;
    data.curves[static_cast<size_t>(c.sensor)](c.obs, ti) = c.value;
  }
  if (cells.size() != seen.size()) {
    std::ostringstream msg;
    const size_t missing = seen.size() - cells.size();
    msg << path << ": " << missing << " missing cells; the grid must be complete. First missing:";
    int shown = 0;
    for (int i = 0; i < n && shown < 10; ++i)
      for (int s = 0; s < p && shown < 10; ++s)
        for (int t = 0; t < tau && shown < 10; ++t)
          if (!seen[(static_cast<size_t>(i) * p + s) * tau + t]) {
            msg << " (" << obs[static_cast<size_t>(i)] << ", " << sensors[static_cast<size_t>(s)] << ", "
                << format_double(times[static_cast<size_t>(t)]) << ")";
            ++shown;
          }
    throw DataError(msg.str());
  }
  validate_dataset(data);
  return data;
}

void write_long_csv(const FunctionalDataSet& data, const std::string& path) {
  validate_dataset(data);
  std::string s = "obs_id,sensor_id,time,value\n";
  for (int i = 0; i < data.n(); ++i)
    for (int k = 0; k < data.p(); ++k)
      for (int t = 0; t < data.tau(); ++t) {
        s += data.obs_ids[static_cast<size_t>(i)];
        s += ',';
        s += data.sensor_names[static_cast<size_t>(k)];
        s += ',';
        s += format_double(data.times[static_cast<size_t>(t)]);
        s += ',';
        s += format_double(data.curves[static_cast<size_t>(k)](i, t));
        s += '\n';
      }
  write_text_atomic(path, s);
}

void write_scores(const std::vector<std::string>& obs_ids, const CoefficientMatrix& b, const std::string& path) {
  if (static_cast<int>(obs_ids.size()) != b.n()) throw std::invalid_argument("write_scores: obs id count mismatch");
  std::string s = "obs_id";
  for (int j = 0; j < b.q(); ++j) {
    const auto [sensor, comp] = b.sensor_component(j);
    s += "," + b.sensor_names()[static_cast<size_t>(sensor)] + "_fpc" + std::to_string(comp + 1);
  }
  s += '\n';
  for (int i = 0; i < b.n(); ++i) {
    s += obs_ids[static_cast<size_t>(i)];
    for (int j = 0; j < b.q(); ++j) s += "," + format_double(b.scores()(i, j));
    s += '\n';
  }
  write_text_atomic(path, s);
}

ScoreTable read_scores(const std::string& path) {
  auto in = open_input(path);
  const auto h = read_header(in, path, {"obs_id"}, true);
  std::vector<std::string> sensors;
  std::vector<int> comps;
  for (size_t j = 1; j < h.size(); ++j) {
    const auto pos = h[j].rfind("_fpc");
    if (pos == std::string::npos || pos == 0) throw DataError(path + ": column '" + h[j] + "' is not <sensor>_fpc<l>");
    const std::string sensor = h[j].substr(0, pos);
    const int comp = parse_int(h[j].substr(pos + 4), path + " header");
    if (sensors.empty() || sensors.back() != sensor) sensors.push_back(sensor);
    comps.push_back(comp);
  }
  if (sensors.empty()) throw DataError(path + ": no score columns");
  const int q = static_cast<int>(comps.size());
  const int p = static_cast<int>(sensors.size());
  if (q % p != 0) throw DataError(path + ": sensors have different component counts");
  const int qc = q / p;
  for (int j = 0; j < q; ++j)
    if (comps[static_cast<size_t>(j)] != j % qc + 1) throw DataError(path + ": score columns out of order");
  std::vector<std::string> ids;
  std::vector<std::vector<double>> rows;
  std::string line;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto f = split(line);
    const std::string where = path + " line " + std::to_string(lineno);
    if (static_cast<int>(f.size()) != q + 1) throw DataError(where + ": wrong field count");
    ids.push_back(f[0]);
    std::vector<double> r;
    for (int j = 0; j < q; ++j) r.push_back(parse_number(f[static_cast<size_t>(j) + 1], where));
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw DataError(path + ": no score rows");
  Eigen::MatrixXd x(static_cast<int>(rows.size()), q);
  for (int i = 0; i < x.rows(); ++i)
    for (int j = 0; j < q; ++j) x(i, j) = rows[static_cast<size_t>(i)][static_cast<size_t>(j)];
  return {ids, CoefficientMatrix(x, p, qc, sensors)};
}

// ---- model JSON

namespace {

json num(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }
double get_num(const json& j) { return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>(); }

json vec_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(num(v(i)));
  return a;
}
Eigen::VectorXd vec_from(const json& a) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(a.size()));
  for (size_t i = 0; i < a.size(); ++i) v(static_cast<Eigen::Index>(i)) = get_num(a[i]);
  return v;
}
json mat_json(const Eigen::MatrixXd& m) {
  json a = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) a.push_back(vec_json(m.row(r).transpose()));
  return a;
}
Eigen::MatrixXd mat_from(const json& a) {
  if (a.empty()) return {};
  const size_t cols = a[0].size();
  Eigen::MatrixXd m(static_cast<Eigen::Index>(a.size()), static_cast<Eigen::Index>(cols));
  for (size_t r = 0; r < a.size(); ++r) {
    if (a[r].size() != cols) throw DataError("ragged matrix");
    for (size_t c = 0; c < cols; ++c) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = get_num(a[r][c]);
  }
  return m;
}
json mask_json(const BoolMatrix& m) {
  json a = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(static_cast<bool>(m(r, c)));
    a.push_back(row);
  }
  return a;
}
BoolMatrix mask_from(const json& a, Eigen::Index rows, Eigen::Index cols) {
  if (static_cast<Eigen::Index>(a.size()) != rows) throw DataError("zero_mask shape mismatch");
  BoolMatrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    if (static_cast<Eigen::Index>(a[static_cast<size_t>(r)].size()) != cols) throw DataError("zero_mask shape mismatch");
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = a[static_cast<size_t>(r)][static_cast<size_t>(c)].get<bool>();
  }
  return m;
}

json fpca_json(const SensorFpcaModel& m) {
  return {{"sensor", m.sensor},
          {"basis",
           {{"domain_lo", m.basis.domain_lo},
            {"domain_hi", m.basis.domain_hi},
            {"order", m.basis.order},
            {"n_basis", m.basis.n_basis},
            {"knots", m.basis.knots}}},
          {"times", m.times},
          {"mean_coeffs", vec_json(m.mean_coeffs)},
          {"eigen_coeffs", mat_json(m.eigen_coeffs)},
          {"eigenvalues", vec_json(m.eigenvalues)},
          {"variance_explained", vec_json(m.variance_explained)},
          {"standardization", {{"mean", m.standardization.mean}, {"sd", m.standardization.sd}}}};
}

SensorFpcaModel fpca_from(const json& j) {
  SensorFpcaModel m;
  m.sensor = j.at("sensor").get<std::string>();
  const auto& b = j.at("basis");
  m.basis.domain_lo = b.at("domain_lo").get<double>();
  m.basis.domain_hi = b.at("domain_hi").get<double>();
  m.basis.order = b.at("order").get<int>();
  m.basis.n_basis = b.at("n_basis").get<int>();
  m.basis.knots = b.at("knots").get<std::vector<double>>();
  validate_basis(m.basis);
  m.times = j.at("times").get<std::vector<double>>();
  m.mean_coeffs = vec_from(j.at("mean_coeffs"));
  m.eigen_coeffs = mat_from(j.at("eigen_coeffs"));
  m.eigenvalues = vec_from(j.at("eigenvalues"));
  m.variance_explained = vec_from(j.at("variance_explained"));
  m.standardization.mean = j.at("standardization").at("mean").get<double>();
  m.standardization.sd = j.at("standardization").at("sd").get<double>();
  if (m.mean_coeffs.size() != m.basis.n_basis || m.eigen_coeffs.rows() != m.basis.n_basis ||
      m.eigenvalues.size() != m.eigen_coeffs.cols())
    throw DataError("FPCA model for sensor " + m.sensor + " has inconsistent shapes");
  m.gram = gram_matrix(m.basis);
  return m;
}

json row_json(const SelectionRow& r) {
  return {{"kind", to_string(r.kind)}, {"m", r.m},
          {"lambda", r.lambda},        {"gamma", r.gamma},
          {"bic", num(r.bic)},         {"plain_nll", num(r.plain_nll)},
          {"n_zero", r.n_zero},        {"n_removed", r.n_removed},
          {"iterations", r.iterations}, {"converged", r.converged},
          {"max_objective_increase", num(r.max_objective_increase)},
          {"failure", r.failure}};
}

SelectionRow row_from(const json& j) {
  SelectionRow r;
  r.kind = parse_penalty_kind(j.at("kind").get<std::string>());
  r.m = j.at("m").get<int>();
  r.lambda = j.at("lambda").get<double>();
  r.gamma = j.at("gamma").get<double>();
  r.bic = get_num(j.at("bic"));
  r.plain_nll = get_num(j.at("plain_nll"));
  r.n_zero = j.at("n_zero").get<int>();
  r.n_removed = j.at("n_removed").get<int>();
  r.iterations = j.at("iterations").get<int>();
  r.converged = j.at("converged").get<bool>();
  r.max_objective_increase = get_num(j.value("max_objective_increase", json(0.0)));
  r.failure = j.at("failure").get<std::string>();
  return r;
}

}  // namespace

void write_model(const ModelFile& model, const std::string& path) {
  const auto& rep = model.report;
  const auto& fit = rep.best;
  json j;
  j["schema_version"] = kModelSchemaVersion;
  j["sensor_names"] = model.sensor_names;
  json f = json::array();
  for (const auto& m : model.fpca) f.push_back(fpca_json(m));
  j["fpca"] = f;
  j["mixture"] = {{"proportions", vec_json(fit.params.proportions)},
                  {"means", mat_json(fit.params.means)},
                  {"variances", vec_json(fit.params.variances)},
                  {"zero_mask", mask_json(fit.params.zero_mask)},
                  {"n_zero_means", fit.n_zero_means},
                  {"removed_sensors", fit.removed_sensors},
                  {"penalized_nll", num(fit.penalized_nll)},
                  {"plain_nll", num(fit.plain_nll)},
                  {"iterations", fit.iterations},
                  {"converged", fit.converged},
                  {"attempts", fit.attempts},
                  {"warnings", fit.warnings}};
  json table = json::array();
  for (const auto& r : rep.rows) table.push_back(row_json(r));
  j["selection_table"] = table;
  json pilots = json::array();
  for (const auto& p : rep.pilots)
    pilots.push_back({{"kind", to_string(p.kind)}, {"m", p.m}, {"lambda", p.lambda}, {"means", mat_json(p.means)}});
  j["chosen"] = {{"kind", to_string(rep.chosen.kind)},
                 {"m", rep.chosen.m},
                 {"lambda", rep.chosen.lambda},
                 {"gamma", rep.chosen.gamma},
                 {"n", rep.n},
                 {"p", rep.p},
                 {"q_c", rep.q_c},
                 {"pilots", pilots}};
  write_text_atomic(path, j.dump(1) + "\n");
}

ModelFile read_model(const std::string& path) {
  auto in = open_input(path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError(path + ": corrupted model file (" + e.what() + ")");
  }
  try {
    if (!j.contains("schema_version")) throw DataError(path + ": corrupted model file (no schema_version)");
    const int version = j.at("schema_version").get<int>();
    if (version != kModelSchemaVersion)
      throw DataError(path + ": model schema_version " + std::to_string(version) + " is not supported (expected " +
                      std::to_string(kModelSchemaVersion) + ")");
    ModelFile out;
    out.sensor_names = j.at("sensor_names").get<std::vector<std::string>>();
    for (const auto& f : j.at("fpca")) out.fpca.push_back(fpca_from(f));
    auto& rep = out.report;
    const auto& c = j.at("chosen");
    rep.chosen = {parse_penalty_kind(c.at("kind").get<std::string>()), c.at("m").get<int>(),
                  c.at("lambda").get<double>(), c.at("gamma").get<double>()};
    rep.n = c.at("n").get<int>();
    rep.p = c.at("p").get<int>();
    rep.q_c = c.at("q_c").get<int>();
    for (const auto& p : c.at("pilots"))
      rep.pilots.push_back({parse_penalty_kind(p.at("kind").get<std::string>()), p.at("m").get<int>(),
                            p.at("lambda").get<double>(), mat_from(p.at("means"))});
    for (const auto& r : j.at("selection_table")) rep.rows.push_back(row_from(r));
    const auto& mx = j.at("mixture");
    auto& fit = rep.best;
    fit.params.proportions = vec_from(mx.at("proportions"));
    fit.params.means = mat_from(mx.at("means"));
    fit.params.variances = vec_from(mx.at("variances"));
    fit.params.zero_mask = mask_from(mx.at("zero_mask"), fit.params.means.rows(), fit.params.means.cols());
    fit.n_zero_means = mx.at("n_zero_means").get<int>();
    fit.removed_sensors = mx.at("removed_sensors").get<std::vector<int>>();
    fit.penalized_nll = get_num(mx.at("penalized_nll"));
    fit.plain_nll = get_num(mx.at("plain_nll"));
    fit.iterations = mx.at("iterations").get<int>();
    fit.converged = mx.at("converged").get<bool>();
    fit.attempts = mx.at("attempts").get<int>();
    fit.warnings = mx.at("warnings").get<std::vector<std::string>>();

    const int m = fit.params.m(), q = fit.params.q();
    if (m != rep.chosen.m || fit.params.proportions.size() != m || fit.params.variances.size() != q ||
        q != rep.p * rep.q_c || static_cast<int>(out.sensor_names.size()) != rep.p)
      throw DataError(path + ": mixture shapes do not match the chosen model");
    if (!out.fpca.empty()) {
      if (static_cast<int>(out.fpca.size()) != rep.p) throw DataError(path + ": FPCA model count does not match p");
      for (const auto& f : out.fpca)
        if (f.q_c() != rep.q_c) throw DataError(path + ": FPCA component count does not match q_c");
    }
    return out;
  } catch (const json::exception& e) {
    throw DataError(path + ": corrupted model file (" + e.what() + ")");
  }
}

void write_fpca_models(const std::vector<SensorFpcaModel>& models, const std::string& path) {
  json j;
  j["schema_version"] = kModelSchemaVersion;
  json f = json::array();
  for (const auto& m : models) f.push_back(fpca_json(m));
  j["fpca"] = f;
  write_text_atomic(path, j.dump(1) + "\n");
}

std::vector<SensorFpcaModel> read_fpca_models(const std::string& path) {
  auto in = open_input(path);
  try {
    json j;
    in >> j;
    const int version = j.at("schema_version").get<int>();
    if (version != kModelSchemaVersion)
      throw DataError(path + ": FPCA schema_version " + std::to_string(version) + " is not supported");
    std::vector<SensorFpcaModel> out;
    for (const auto& f : j.at("fpca")) out.push_back(fpca_from(f));
    if (out.empty()) throw DataError(path + ": no FPCA models");
    return out;
  } catch (const json::exception& e) {
    throw DataError(path + ": corrupted FPCA file (" + e.what() + ")");
  }
}

// ---- assignments

void write_assignments(const std::vector<std::string>& obs_ids, const std::vector<int>& labels,
                       const Eigen::MatrixXd& tau, const std::string& path) {
  if (obs_ids.empty()) throw std::invalid_argument("write_assignments: no observations");
  if (obs_ids.size() != labels.size() || static_cast<Eigen::Index>(obs_ids.size()) != tau.rows())
    throw std::invalid_argument("write_assignments: row count mismatch");
  std::string s = "obs_id,label";
  for (Eigen::Index k = 0; k < tau.cols(); ++k) s += ",resp_" + std::to_string(k + 1);
  s += '\n';
  for (size_t i = 0; i < obs_ids.size(); ++i) {
    s += obs_ids[i] + "," + std::to_string(labels[i] + 1);
    for (Eigen::Index k = 0; k < tau.cols(); ++k) s += "," + format_double(tau(static_cast<Eigen::Index>(i), k));
    s += '\n';
  }
  write_text_atomic(path, s);
}

Assignments read_assignments(const std::string& path) {
  auto in = open_input(path);
  const auto h = read_header(in, path, {"obs_id", "label"}, true);
  const int m = static_cast<int>(h.size()) - 2;
  if (m < 1) throw DataError(path + ": no responsibility columns");
  for (int k = 0; k < m; ++k)
    if (h[static_cast<size_t>(k) + 2] != "resp_" + std::to_string(k + 1))
      throw DataError(path + ": responsibility columns must be resp_1..resp_m");
  Assignments a;
  std::vector<std::vector<double>> rows;
  std::string line;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto f = split(line);
    const std::string where = path + " line " + std::to_string(lineno);
    if (static_cast<int>(f.size()) != m + 2) throw DataError(where + ": wrong field count");
    a.obs_ids.push_back(f[0]);
    const int label = parse_int(f[1], where);
    if (label < 1 || label > m) throw DataError(where + ": label out of range");
    a.labels.push_back(label - 1);
    std::vector<double> r;
    double total = 0.0;
    for (int k = 0; k < m; ++k) {
      r.push_back(parse_number(f[static_cast<size_t>(k) + 2], where));
      total += r.back();
    }
    if (std::abs(total - 1.0) > 1e-8) throw DataError(where + ": responsibilities do not sum to 1");
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw DataError(path + ": no assignment rows");
  a.responsibilities.resize(static_cast<Eigen::Index>(rows.size()), m);
  for (size_t i = 0; i < rows.size(); ++i)
    for (int k = 0; k < m; ++k) a.responsibilities(static_cast<Eigen::Index>(i), k) = rows[i][static_cast<size_t>(k)];
  return a;
}

// ---- benchmark output

namespace {

const std::vector<std::string> kRowHeader{"scenario_id", "scenario",  "level",    "penalty",  "mae_m",
                                          "mean_variables_removed",   "mean_removed_correctly",
                                          "mean_removed_falsely",     "ari_median", "ari_q1", "ari_q3",
                                          "reps",        "failures"};
const std::vector<std::string> kRecordHeader{"scenario", "level",   "rep",     "penalty",           "m_hat",
                                             "lambda",   "gamma",   "ari",     "removed_correctly", "removed_falsely",
                                             "variables_removed",   "failure"};

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + v[i];
  return s;
}

// Failure messages must stay on one CSV field.
std::string clean(std::string s) {
  for (auto& c : s)
    if (c == ',' || c == '\n' || c == '\r' || c == '"') c = ';';
  return s;
}

std::string record_line(const ReplicateRecord& r) {
  return join({to_string(r.scenario), format_double(r.level), std::to_string(r.rep), to_string(r.kind),
               std::to_string(r.m_hat), format_double(r.lambda), format_double(r.gamma), format_double(r.ari),
               std::to_string(r.correct), std::to_string(r.falsely), std::to_string(r.variables_removed),
               clean(r.failure)}) +
         "\n";
}

}  // namespace

void write_benchmark_rows(const std::vector<BenchmarkRow>& rows, const std::string& path) {
  std::string s = join(kRowHeader) + "\n";
  for (const auto& r : rows)
    s += join({r.scenario_id, to_string(r.scenario), format_double(r.level), to_string(r.kind), format_double(r.mae),
               format_double(r.mean_variables_removed), format_double(r.mean_correct), format_double(r.mean_falsely),
               format_double(r.ari_median), format_double(r.ari_q1), format_double(r.ari_q3), std::to_string(r.reps),
               std::to_string(r.failures)}) +
         "\n";
  write_text_atomic(path, s);
}

std::vector<BenchmarkRow> read_benchmark_rows(const std::string& path) {
  auto in = open_input(path);
  read_header(in, path, kRowHeader, false);
  std::vector<BenchmarkRow> out;
  std::string line;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto f = split(line);
    const std::string where = path + " line " + std::to_string(lineno);
    if (f.size() != kRowHeader.size()) throw DataError(where + ": wrong field count");
    BenchmarkRow r;
    r.scenario_id = f[0];
    r.scenario = parse_scenario(f[1]);
    r.level = parse_number(f[2], where);
    r.kind = parse_penalty_kind(f[3]);
    r.mae = parse_number(f[4], where);
    r.mean_variables_removed = parse_number(f[5], where);
    r.mean_correct = parse_number(f[6], where);
    r.mean_falsely = parse_number(f[7], where);
    r.ari_median = parse_number(f[8], where);
    r.ari_q1 = parse_number(f[9], where);
    r.ari_q3 = parse_number(f[10], where);
    r.reps = parse_int(f[11], where);
    r.failures = parse_int(f[12], where);
    out.push_back(r);
  }
  return out;
}

ReplicateWriter::ReplicateWriter(const std::string& path) : out_(path, std::ios::trunc), path_(path) {
  if (!out_) throw DataError("cannot write " + path);
  out_ << join(kRecordHeader) << "\n" << std::flush;
}

void ReplicateWriter::write(const ReplicateRecord& r) {
  const std::string line = record_line(r);
  out_.write(line.data(), static_cast<std::streamsize>(line.size()));
  out_.flush();
  if (!out_) throw DataError("failed writing " + path_);
}

std::vector<ReplicateRecord> read_replicate_records(const std::string& path) {
  auto in = open_input(path);
  read_header(in, path, kRecordHeader, false);
  std::vector<ReplicateRecord> out;
  std::string line;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto f = split(line);
    const std::string where = path + " line " + std::to_string(lineno);
    if (f.size() != kRecordHeader.size()) throw DataError(where + ": wrong field count");
    ReplicateRecord r;
    r.scenario = parse_scenario(f[0]);
    r.level = parse_number(f[1], where);
    r.rep = parse_int(f[2], where);
    r.kind = parse_penalty_kind(f[3]);
    r.m_hat = parse_int(f[4], where);
    r.lambda = parse_number(f[5], where);
    r.gamma = parse_number(f[6], where);
    r.ari = parse_number(f[7], where);
    r.correct = parse_int(f[8], where);
    r.falsely = parse_int(f[9], where);
    r.variables_removed = parse_int(f[10], where);
    r.failure = f[11];
    out.push_back(r);
  }
  return out;
}

void write_truth(const SimulationDesign& d, const FunctionalDataSet& data, const std::string& path) {
  json j;
  j["schema_version"] = 1;
  std::vector<std::string> signal, noise;
  for (int s = 0; s < d.p_signal; ++s) signal.push_back(data.sensor_names[static_cast<size_t>(s)]);
  for (int s = 0; s < d.p_noise; ++s) noise.push_back(data.sensor_names[static_cast<size_t>(d.p_signal + s)]);
  j["signal_sensors"] = signal;
  j["noise_sensors"] = noise;
  json labels = json::object();
  for (int i = 0; i < data.n(); ++i)
    labels[data.obs_ids[static_cast<size_t>(i)]] = data.labels[static_cast<size_t>(i)] + 1;
  j["labels"] = labels;
  j["design"] = {{"n", d.n},
                 {"p_signal", d.p_signal},
                 {"p_noise", d.p_noise},
                 {"delta", d.delta},
                 {"m_true", d.m_true},
                 {"proportions", d.proportions},
                 {"h", d.h},
                 {"order", d.order},
                 {"grid", d.grid},
                 {"noise_variance", d.noise_variance},
                 {"seed", d.seed}};
  write_text_atomic(path, j.dump(1) + "\n");
}

}  // namespace mfclust
