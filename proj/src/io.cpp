#include "mnsid/io.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace mnsid {

json to_json(const Matrix& M) {
  json rows = json::array();
  for (Index i = 0; i < M.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const json& j, const std::string& what) {
  if (!j.is_array()) throw ConfigError(what + ": expected a nested array");
  const Index rows = Index(j.size());
  if (rows == 0) return Matrix(0, 0);
  if (!j[0].is_array()) throw ConfigError(what + ": expected rows as arrays");
  const Index cols = Index(j[0].size());
  Matrix M(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    const json& row = j[std::size_t(i)];
    if (!row.is_array() || Index(row.size()) != cols) throw ConfigError(what + ": ragged rows");
    for (Index c = 0; c < cols; ++c) {
      const json& v = row[std::size_t(c)];
      if (!v.is_number()) throw ConfigError(what + ": non-numeric entry");
      M(i, c) = v.get<double>();
    }
  }
  return M;
}

Vector vector_from_json(const json& j, const std::string& what) {
  if (j.is_array() && (j.empty() || !j[0].is_array())) {
    Vector v(Index(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
      if (!j[i].is_number()) throw ConfigError(what + ": non-numeric entry");
      v(Index(i)) = j[i].get<double>();
    }
    return v;
  }
  const Matrix M = matrix_from_json(j, what);
  if (M.cols() != 1) throw ConfigError(what + ": expected a column");
  return M.col(0);
}

json to_json(const InputSchedule& s) {
  json nu = json::array(), Ubar = json::array();
  for (const Vector& v : s.nu) nu.push_back(to_json(Matrix(v)));
  for (const Matrix& U : s.Ubar) Ubar.push_back(to_json(U));
  return {{"ell", s.ell()}, {"m", s.m()},           {"law", to_string(s.law)},
          {"mean_law", s.mean_law}, {"cov_law", s.cov_law}, {"seed", s.seed},
          {"nu", nu}, {"Ubar", Ubar}};
}

InputSchedule schedule_from_json(const json& j) {
  try {
    InputSchedule s;
    for (const json& v : j.at("nu")) s.nu.push_back(vector_from_json(v, "schedule.nu"));
    for (const json& U : j.at("Ubar")) s.Ubar.push_back(matrix_from_json(U, "schedule.Ubar"));
    if (j.contains("law")) s.law = component_law_from_string(j.at("law").get<std::string>());
    s.mean_law = j.value("mean_law", s.mean_law);
    s.cov_law = j.value("cov_law", s.cov_law);
    s.seed = j.value("seed", std::uint64_t{0});
    validate_schedule(s);
    return s;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("schedule: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

json to_json(const RolloutSet& set) {
  json rs = json::array();
  for (const Rollout& r : set.rollouts) {
    json o = {{"x", to_json(r.x)}, {"u", to_json(r.u)}};
    if (r.diverged) {
      o["diverged"] = true;
      o["steps"] = r.steps;
    }
    rs.push_back(std::move(o));
  }
  return {{"n", set.n},   {"m", set.m},       {"ell", set.ell},
          {"n_r", set.n_r()}, {"seed", set.seed}, {"schedule", to_json(set.schedule)},
          {"rollouts", rs}};
}

RolloutSet rollouts_from_json(const json& j) {
  try {
    RolloutSet set;
    set.n = j.at("n").get<Index>();
    set.m = j.at("m").get<Index>();
    set.ell = j.at("ell").get<Index>();
    set.seed = j.value("seed", std::uint64_t{0});
    set.schedule = schedule_from_json(j.at("schedule"));
    for (const json& o : j.at("rollouts")) {
      Rollout r;
      r.x = matrix_from_json(o.at("x"), "rollout.x");
      r.u = matrix_from_json(o.at("u"), "rollout.u");
      if (r.x.rows() != set.n || r.x.cols() != set.ell + 1 || r.u.rows() != set.m || r.u.cols() != set.ell)
        throw ConfigError("rollout: shape does not match n, m, ell");
      r.diverged = o.value("diverged", false);
      r.steps = o.value("steps", set.ell);
      set.rollouts.push_back(std::move(r));
    }
    if (j.contains("n_r") && j.at("n_r").get<Index>() != set.n_r())
      throw ConfigError("rollouts: n_r does not match the number of rollouts");
    return set;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("rollouts: ") + e.what());
  }
}

json to_json(const MultNoiseSystem& sys) {
  json j = {{"A", to_json(sys.A)}, {"B", to_json(sys.B)}};
  if (std::holds_alternative<ZeroNoise>(sys.noise)) {
    j["noise"] = "zero";
  } else {
    ComponentLaw law = ComponentLaw::Uniform;
    if (auto* c = std::get_if<CovarianceNoise>(&sys.noise)) law = c->law;
    if (auto* e = std::get_if<EigenStructuredNoise>(&sys.noise)) law = e->law;
    j["noise"] = {{"Sigma_A", to_json(sys.Sigma_A)}, {"Sigma_B", to_json(sys.Sigma_B)}, {"law", to_string(law)}};
  }
  return j;
}

MultNoiseSystem system_from_json(const json& j) {
  try {
    const Matrix A = matrix_from_json(j.at("A"), "system.A");
    const Matrix B = matrix_from_json(j.at("B"), "system.B");
    const json& nz = j.contains("noise") ? j.at("noise") : json("zero");
    if (nz.is_string() && nz.get<std::string>() == "zero") return make_system(A, B, ZeroNoise{});
    CovarianceNoise c;
    c.Sigma_A = matrix_from_json(nz.at("Sigma_A"), "system.noise.Sigma_A");
    c.Sigma_B = matrix_from_json(nz.at("Sigma_B"), "system.noise.Sigma_B");
    if (nz.contains("law")) c.law = component_law_from_string(nz.at("law").get<std::string>());
    return make_system(A, B, c);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("system: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

namespace {

json to_json(const LsDiagnostics& d) {
  return {{"lambda_min", d.lambda_min}, {"lambda_max", d.lambda_max}, {"used_pseudoinverse", d.used_pseudoinverse}};
}

}  // namespace

json to_json(const EstimationResult& r) {
  json j = {{"A_hat", to_json(r.A_hat)},
            {"B_hat", to_json(r.B_hat)},
            {"SigmaA_tilde_hat", to_json(r.SigmaA_tilde_hat)},
            {"SigmaB_tilde_hat", to_json(r.SigmaB_tilde_hat)},
            {"diagnostics",
             {{"n_r", r.diagnostics.n_r},
              {"nominal", to_json(r.diagnostics.nominal)},
              {"covariance", to_json(r.diagnostics.covariance)}}}};
  if (r.errors) {
    j["errors"] = {{"err_AB", r.errors->err_AB},
                   {"err_Sigma", r.errors->err_Sigma},
                   {"err_AB_normalized", r.errors->err_AB_normalized},
                   {"err_Sigma_normalized", r.errors->err_Sigma_normalized}};
  }
  return j;
}

json to_json(const EquivalenceClass& ec) {
  return {{"n", ec.n},
          {"m", ec.m},
          {"SigmaA_tilde", to_json(ec.SigmaA_tilde)},
          {"SigmaB_tilde", to_json(ec.SigmaB_tilde)},
          {"d_alpha", ec.d_alpha},
          {"d_beta", ec.d_beta},
          {"base_SigmaA", to_json(ec.base_SigmaA)},
          {"base_SigmaB", to_json(ec.base_SigmaB)}};
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << '\n';
}

void CsvTable::add_row(std::vector<std::string> row) {
  if (row.size() != header.size()) throw std::logic_error("CsvTable: row width differs from header");
  rows.push_back(std::move(row));
}

Index CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return Index(i);
  throw ConfigError("csv: no column " + name);
}

double CsvTable::number(std::size_t row, const std::string& name) const {
  return parse_double(rows.at(row).at(std::size_t(column(name))));
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw ConfigError("csv: not a number: " + s);
  }
  if (used != s.size()) throw ConfigError("csv: not a number: " + s);
  return v;
}

void write_csv(const std::string& path, const CsvTable& t) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << cells[i];
    out << '\n';
  };
  line(t.header);
  for (const auto& r : t.rows) line(r);
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path);
  auto split = [](const std::string& s) {
    std::vector<std::string> cells;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!s.empty() && s.back() == ',') cells.emplace_back();
    return cells;
  };
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw ConfigError(path + ": empty csv");
  t.header = split(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto cells = split(line);
    if (cells.size() != t.header.size()) throw ConfigError(path + ": ragged csv row");
    t.rows.push_back(std::move(cells));
  }
  return t;
}

CsvTable trajectory_csv(const MomentTrajectory& tr, Index n) {
  CsvTable t;
  t.header = trajectory_header(n);
  for (std::size_t s = 0; s < tr.mu.size(); ++s) {
    std::vector<std::string> row{std::to_string(s)};
    for (Index i = 0; i < tr.mu[s].size(); ++i) row.push_back(format_double(tr.mu[s](i)));
    for (Index i = 0; i < tr.Xt[s].size(); ++i) row.push_back(format_double(tr.Xt[s](i)));
    t.add_row(std::move(row));
  }
  return t;
}

void ensure_directory(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create " + dir + ": " + ec.message());
}

}  // namespace mnsid
