#include "mnsid/harness.h"

#include "mnsid/baselines.h"
#include "mnsid/identifiability.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <numeric>
#include <set>
#include <thread>

namespace mnsid {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();

Matrix reference_SigmaA() {
  Matrix S(4, 4);
  S << 8, -2, 0, 0,
      -2, 16, 2, 0,
       0, 2, 2, 0,
       0, 0, 0, 8;
  return S / 40.0;
}

Matrix reference_SigmaB() {
  Matrix S(2, 2);
  S << 5, -2,
      -2, 20;
  return S / 40.0;
}

Matrix upper_A(double rho) {
  Matrix A(2, 2);
  A << rho, 0.2,
       0.0, rho;
  return A;
}

Matrix reference_B() {
  Matrix B(2, 1);
  B << 0.8, 1.0;
  return B;
}

double elapsed_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string label_file_part(std::string s) {
  for (char& c : s)
    if (c == '/' || c == ' ') c = '_';
  return s;
}

void require_excitation(const Preset& p, const InputSchedule& s) {
  const RegressionMatrices R = assemble_population(p.system, s, p.init);
  const ExcitationReport ex = check_excitation(R, p.system.n(), p.system.m());
  if (!ex.pass_Z || !ex.pass_D)
    throw AssertionFailure("designed schedule fails the excitation check for preset " + p.name);
}

// Errors of a rollout set that may contain diverged rollouts.
RunRecord estimate_record(const MultNoiseSystem& sys, const InputSchedule& sched, const InitialState& init,
                          Index n_r, std::uint64_t seed) {
  RunRecord rec;
  rec.n_r = n_r;
  rec.samples = n_r * sched.ell();
  rec.seed = seed;
  const RolloutSet set = simulate_rollouts(sys, sched, init, n_r, seed, 1);
  if (set.any_diverged()) {
    rec.diverged = true;
    rec.err = {kInf, kInf, kInf, kInf};
    return rec;
  }
  rec.err = estimation_errors(estimate_from_rollouts(set, 1), sys);
  return rec;
}

void write_report_files(ExperimentReport& r, const std::string& dir) {
  if (dir.empty()) return;
  ensure_directory(dir);
  const std::string rec = dir + "/" + r.experiment + "_records.csv";
  const std::string cur = dir + "/" + r.experiment + "_curves.csv";
  write_csv(rec, records_csv(r.records));
  write_csv(cur, curves_csv(r.curves));
  r.files.push_back(rec);
  r.files.push_back(cur);
}

void write_summary(const ExperimentReport& r, const std::string& dir, json extra = json::object()) {
  if (dir.empty()) return;
  json j = summary_json(r);
  for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
  write_json_file(dir + "/" + r.experiment + "_summary.json", j);
}

const std::set<std::string> kInputLaws = {"gaussian", "uniform", "deterministic"};

// Keeps the slopes of the requested metric families.
std::vector<Slope> select_metrics(std::vector<Slope> slopes, const std::vector<std::string>& metrics) {
  const bool spectral = std::find(metrics.begin(), metrics.end(), "spectral") != metrics.end();
  const bool normalized = std::find(metrics.begin(), metrics.end(), "normalized") != metrics.end();
  std::erase_if(slopes, [&](const Slope& s) {
    const bool is_norm = s.metric.ends_with("_normalized");
    return is_norm ? !normalized : !spectral;
  });
  return slopes;
}

}  // namespace

std::vector<std::string> preset_names() {
  return {"paper-4.1",        "paper-4.1-additive", "paper-4.2-nonoise", "paper-4.2-rho0.6",
          "paper-4.2-rho0.8", "paper-4.2-rho1.0"};
}

Preset make_preset(const std::string& name, double additive_sigma2) {
  Preset p;
  p.name = name;
  p.init = InitialState::fixed(Vector::Zero(2));
  // Uniform components keep the noise a.s. bounded.
  const CovarianceNoise noise{reference_SigmaA(), reference_SigmaB(), ComponentLaw::Uniform};
  if (name == "paper-4.1") {
    p.system = make_system(upper_A(1.0), reference_B(), noise);
  } else if (name == "paper-4.1-additive") {
    if (!(additive_sigma2 > 0)) throw ConfigError("additive_sigma2 must be positive");
    const MultNoiseSystem base = make_system(upper_A(1.0), reference_B(), noise);
    p.system = embed_additive_noise(base, additive_sigma2 * Matrix::Identity(2, 2));
    p.ell = 6;
    p.additive = true;
  } else if (name == "paper-4.2-nonoise") {
    p.system = make_system(upper_A(0.6), reference_B(), ZeroNoise{});
  } else if (name == "paper-4.2-rho0.6") {
    p.system = make_system(upper_A(0.6), reference_B(), noise);
  } else if (name == "paper-4.2-rho0.8") {
    p.system = make_system(upper_A(0.8), reference_B(), noise);
  } else if (name == "paper-4.2-rho1.0") {
    p.system = make_system(upper_A(1.0), reference_B(), noise);
  } else {
    throw ConfigError("unknown preset '" + name + "'");
  }
  return p;
}

namespace {

template <typename T>
T get_checked(const json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config.") + key + ": " + e.what());
  }
}

}  // namespace

ExperimentConfig config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config: expected a JSON object");
  static const std::set<std::string> known = {
      "preset", "system", "ell", "design", "design_seed", "input_laws", "n_r_grid", "seed", "seeds",
      "reps", "metrics", "out_dir", "threads", "additive_sigma2", "eps_AB", "eps_Sigma",
      "bound_envelope", "eps_max", "bound_points", "systems", "alpha"};
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key())) throw ConfigError("config: unknown key '" + it.key() + "'");

  ExperimentConfig c;
  if (j.contains("preset")) c.preset = get_checked<std::string>(j, "preset");
  if (j.contains("system")) c.system = j.at("system");
  if (j.contains("ell")) c.ell = get_checked<Index>(j, "ell");
  if (j.contains("design")) {
    const json& d = j.at("design");
    static const std::set<std::string> dkeys = {"mean_law", "mean_lo", "mean_hi", "cov_law", "wishart_scale"};
    for (auto it = d.begin(); it != d.end(); ++it)
      if (!dkeys.count(it.key())) throw ConfigError("config.design: unknown key '" + it.key() + "'");
    if (d.contains("mean_law")) c.design.mean_law = get_checked<std::string>(d, "mean_law");
    if (d.contains("mean_lo")) c.design.mean_lo = get_checked<double>(d, "mean_lo");
    if (d.contains("mean_hi")) c.design.mean_hi = get_checked<double>(d, "mean_hi");
    if (d.contains("cov_law")) c.design.cov_law = get_checked<std::string>(d, "cov_law");
    if (d.contains("wishart_scale")) c.design.wishart_scale = get_checked<double>(d, "wishart_scale");
  }
  if (j.contains("design_seed")) c.design_seed = get_checked<std::uint64_t>(j, "design_seed");
  if (j.contains("input_laws")) c.input_laws = get_checked<std::vector<std::string>>(j, "input_laws");
  if (j.contains("n_r_grid")) c.n_r_grid = get_checked<std::vector<Index>>(j, "n_r_grid");
  if (j.contains("seed")) c.seed = get_checked<std::uint64_t>(j, "seed");
  if (j.contains("seeds")) c.seeds = get_checked<std::vector<std::uint64_t>>(j, "seeds");
  if (j.contains("reps")) c.reps = get_checked<Index>(j, "reps");
  if (j.contains("metrics")) c.metrics = get_checked<std::vector<std::string>>(j, "metrics");
  if (j.contains("out_dir")) c.out_dir = get_checked<std::string>(j, "out_dir");
  if (j.contains("threads")) c.threads = get_checked<int>(j, "threads");
  if (j.contains("additive_sigma2")) c.additive_sigma2 = get_checked<double>(j, "additive_sigma2");
  if (j.contains("eps_AB")) c.eps_AB = get_checked<std::vector<double>>(j, "eps_AB");
  if (j.contains("eps_Sigma")) c.eps_Sigma = get_checked<std::vector<double>>(j, "eps_Sigma");
  if (j.contains("bound_envelope")) c.bound_envelope = get_checked<bool>(j, "bound_envelope");
  if (j.contains("eps_max")) c.eps_max = get_checked<double>(j, "eps_max");
  if (j.contains("bound_points")) c.bound_points = get_checked<Index>(j, "bound_points");
  if (j.contains("systems")) c.systems = get_checked<std::vector<std::string>>(j, "systems");
  if (j.contains("alpha")) c.alpha = get_checked<double>(j, "alpha");
  if (!c.seeds.empty() && !j.contains("reps")) c.reps = Index(c.seeds.size());
  validate(c);
  return c;
}

json to_json(const ExperimentConfig& c) {
  json j = {{"preset", c.preset},
            {"ell", c.ell},
            {"design",
             {{"mean_law", c.design.mean_law},
              {"mean_lo", c.design.mean_lo},
              {"mean_hi", c.design.mean_hi},
              {"cov_law", c.design.cov_law},
              {"wishart_scale", c.design.wishart_scale}}},
            {"design_seed", c.design_seed},
            {"input_laws", c.input_laws},
            {"n_r_grid", c.n_r_grid},
            {"seed", c.seed},
            {"seeds", c.seeds},
            {"reps", c.reps},
            {"metrics", c.metrics},
            {"out_dir", c.out_dir},
            {"threads", c.threads},
            {"additive_sigma2", c.additive_sigma2},
            {"eps_AB", c.eps_AB},
            {"eps_Sigma", c.eps_Sigma},
            {"bound_envelope", c.bound_envelope},
            {"eps_max", c.eps_max},
            {"bound_points", c.bound_points},
            {"systems", c.systems},
            {"alpha", c.alpha}};
  if (c.system) j["system"] = *c.system;
  return j;
}

void validate(const ExperimentConfig& c) {
  if (!c.system) {
    const auto names = preset_names();
    if (std::find(names.begin(), names.end(), c.preset) == names.end())
      throw ConfigError("unknown preset '" + c.preset + "'");
  }
  if (c.ell < 0) throw ConfigError("ell must be >= 0");
  if (c.n_r_grid.empty()) throw ConfigError("n_r_grid must not be empty");
  for (std::size_t i = 0; i < c.n_r_grid.size(); ++i) {
    if (c.n_r_grid[i] < 1) throw ConfigError("n_r_grid entries must be >= 1");
    if (i > 0 && c.n_r_grid[i] <= c.n_r_grid[i - 1]) throw ConfigError("n_r_grid must be strictly ascending");
  }
  if (c.reps < 1) throw ConfigError("reps must be >= 1");
  if (!c.seeds.empty() && Index(c.seeds.size()) != c.reps)
    throw ConfigError("seeds must list exactly one seed per repetition");
  if (c.threads < 1) throw ConfigError("threads must be >= 1");
  if (c.input_laws.empty()) throw ConfigError("input_laws must not be empty");
  for (const auto& law : c.input_laws)
    if (!kInputLaws.count(law)) throw ConfigError("unknown input law '" + law + "'");
  for (const auto& m : c.metrics)
    if (m != "spectral" && m != "normalized") throw ConfigError("unknown metric '" + m + "'");
  for (double e : c.eps_AB)
    if (!(e > 0)) throw ConfigError("eps_AB entries must be positive");
  for (double e : c.eps_Sigma)
    if (!(e > 0)) throw ConfigError("eps_Sigma entries must be positive");
  if (!(c.eps_max > 0 && c.eps_max <= 1)) throw ConfigError("eps_max must be in (0, 1]");
  if (c.bound_points < 1) throw ConfigError("bound_points must be >= 1");
  if (!(c.additive_sigma2 > 0)) throw ConfigError("additive_sigma2 must be positive");
  if (!std::isfinite(c.alpha)) throw ConfigError("alpha must be finite");
  const auto names = preset_names();
  for (const auto& s : c.systems)
    if (std::find(names.begin(), names.end(), s) == names.end()) throw ConfigError("unknown system '" + s + "'");
  if (c.design.mean_law != "uniform" && c.design.mean_law != "gaussian")
    throw ConfigError("design.mean_law must be uniform or gaussian");
  if (c.design.cov_law != "wishart" && c.design.cov_law != "deterministic" && c.design.cov_law != "identity")
    throw ConfigError("design.cov_law must be wishart, deterministic or identity");
  if (!(c.design.mean_lo <= c.design.mean_hi)) throw ConfigError("design.mean_lo must not exceed mean_hi");
  if (!(c.design.wishart_scale > 0)) throw ConfigError("design.wishart_scale must be positive");
}

std::vector<std::uint64_t> repetition_seeds(const ExperimentConfig& cfg) {
  if (!cfg.seeds.empty()) return cfg.seeds;
  std::vector<std::uint64_t> out;
  for (Index r = 0; r < cfg.reps; ++r) out.push_back(hash_combine(cfg.seed, std::uint64_t(r)));
  return out;
}

Preset resolve_preset(const ExperimentConfig& cfg) {
  Preset p;
  if (cfg.system) {
    p.name = "custom";
    p.system = system_from_json(*cfg.system);
    p.init = InitialState::fixed(Vector::Zero(p.system.n()));
    p.m_design = p.system.m();
  } else {
    p = make_preset(cfg.preset, cfg.additive_sigma2);
  }
  if (cfg.ell > 0) p.ell = cfg.ell;
  return p;
}

InputSchedule preset_schedule(const Preset& p, const ExperimentConfig& cfg, const std::string& law) {
  if (!kInputLaws.count(law)) throw ConfigError("unknown input law '" + law + "'");
  InputDesign d = cfg.design;
  if (law == "deterministic") {
    d.cov_law = "deterministic";
  } else {
    d.input_law = component_law_from_string(law);
  }
  InputSchedule s;
  try {
    s = design_inputs(p.m_design, p.ell, d, cfg.design_seed);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return p.additive ? augment_with_constant(s) : s;
}

void parallel_for(Index count, int threads, const std::function<void(Index)>& fn) {
  const Index workers = std::min<Index>(std::max(1, threads), count);
  if (workers <= 1) {
    for (Index i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  std::vector<std::thread> pool;
  for (Index w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (Index i = w; i < count; i += workers) fn(i);
      } catch (...) {
        errors[std::size_t(w)] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

const CurvePoint& ExperimentReport::point(const std::string& label, Index n_r) const {
  for (const auto& c : curves)
    if (c.label == label && c.n_r == n_r) return c;
  throw std::out_of_range("no curve point " + label + " at n_r=" + std::to_string(n_r));
}

double ExperimentReport::slope(const std::string& label, const std::string& metric) const {
  for (const auto& s : slopes)
    if (s.label == label && s.metric == metric) return s.value;
  throw std::out_of_range("no slope " + label + "/" + metric);
}

double median(std::vector<double> v) {
  if (v.empty()) return kNaN;
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < std::min(x.size(), y.size()); ++i) {
    if (x[i] > 0 && y[i] > 0 && std::isfinite(x[i]) && std::isfinite(y[i])) {
      lx.push_back(std::log(x[i]));
      ly.push_back(std::log(y[i]));
    }
  }
  if (lx.size() < 2) return kNaN;
  const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / double(lx.size());
  const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / double(ly.size());
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  return sxx > 0 ? sxy / sxx : kNaN;
}

std::vector<CurvePoint> summarize(const std::vector<RunRecord>& records) {
  std::vector<CurvePoint> out;
  std::vector<std::vector<const RunRecord*>> groups;
  for (const auto& r : records) {
    auto it = std::find_if(out.begin(), out.end(),
                           [&](const CurvePoint& c) { return c.label == r.label && c.n_r == r.n_r; });
    if (it == out.end()) {
      CurvePoint c;
      c.label = r.label;
      c.n_r = r.n_r;
      c.samples = r.samples;
      out.push_back(c);
      groups.emplace_back();
      it = out.end() - 1;
    }
    groups[std::size_t(it - out.begin())].push_back(&r);
  }
  for (std::size_t g = 0; g < out.size(); ++g) {
    CurvePoint& c = out[g];
    std::vector<double> ab, sg, abn, sgn;
    for (const RunRecord* r : groups[g]) {
      ab.push_back(r->err.err_AB);
      sg.push_back(r->err.err_Sigma);
      abn.push_back(r->err.err_AB_normalized);
      sgn.push_back(r->err.err_Sigma_normalized);
      if (r->diverged) ++c.diverged;
    }
    auto mean = [](const std::vector<double>& v) {
      return std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
    };
    c.count = Index(ab.size());
    c.mean_AB = mean(ab);
    c.median_AB = median(ab);
    c.mean_Sigma = mean(sg);
    c.median_Sigma = median(sg);
    c.mean_AB_normalized = mean(abn);
    c.median_AB_normalized = median(abn);
    c.mean_Sigma_normalized = mean(sgn);
    c.median_Sigma_normalized = median(sgn);
  }
  return out;
}

std::vector<Slope> curve_slopes(const std::vector<CurvePoint>& curves) {
  std::vector<std::string> labels;
  for (const auto& c : curves)
    if (std::find(labels.begin(), labels.end(), c.label) == labels.end()) labels.push_back(c.label);
  using Field = double CurvePoint::*;
  const std::vector<std::pair<std::string, Field>> fields = {
      {"median_AB", &CurvePoint::median_AB},
      {"median_Sigma", &CurvePoint::median_Sigma},
      {"mean_AB", &CurvePoint::mean_AB},
      {"mean_Sigma", &CurvePoint::mean_Sigma},
      {"median_AB_normalized", &CurvePoint::median_AB_normalized},
      {"median_Sigma_normalized", &CurvePoint::median_Sigma_normalized}};
  std::vector<Slope> out;
  for (const auto& label : labels) {
    for (const auto& [name, field] : fields) {
      std::vector<double> x, y;
      for (const auto& c : curves) {
        if (c.label != label) continue;
        x.push_back(double(c.n_r));
        y.push_back(c.*field);
      }
      out.push_back({label, name, loglog_slope(x, y)});
    }
  }
  return out;
}

ExperimentReport run_convergence(const ExperimentConfig& cfg) {
  validate(cfg);
  const auto t0 = std::chrono::steady_clock::now();
  const Preset p = resolve_preset(cfg);
  const auto seeds = repetition_seeds(cfg);
  std::vector<InputSchedule> schedules;
  for (const auto& law : cfg.input_laws) {
    schedules.push_back(preset_schedule(p, cfg, law));
    require_excitation(p, schedules.back());
  }
  const Index L = Index(cfg.input_laws.size());
  const Index N = Index(cfg.n_r_grid.size());
  const Index R = Index(seeds.size());
  std::vector<RunRecord> records(std::size_t(L * N * R));
  parallel_for(L * N * R, cfg.threads, [&](Index i) {
    const Index l = i / (N * R);
    const Index k = (i / R) % N;
    const Index r = i % R;
    const Index n_r = cfg.n_r_grid[std::size_t(k)];
    RunRecord rec = estimate_record(p.system, schedules[std::size_t(l)], p.init, n_r,
                                    hash_combine(seeds[std::size_t(r)], std::uint64_t(n_r)));
    rec.label = cfg.input_laws[std::size_t(l)];
    records[std::size_t(i)] = std::move(rec);
  });

  ExperimentReport rep;
  rep.experiment = "convergence";
  rep.records = std::move(records);
  rep.curves = summarize(rep.records);
  rep.slopes = select_metrics(curve_slopes(rep.curves), cfg.metrics);
  write_report_files(rep, cfg.out_dir);
  rep.runtime_seconds = elapsed_since(t0);
  write_summary(rep, cfg.out_dir, {{"preset", p.name}});
  return rep;
}

TailReport run_tail_frequency(const ExperimentConfig& cfg) {
  validate(cfg);
  if (cfg.reps < 100) throw ConfigError("tail frequencies need reps >= 100");
  const auto t0 = std::chrono::steady_clock::now();
  const Preset p = resolve_preset(cfg);
  const bool has_uniform = std::find(cfg.input_laws.begin(), cfg.input_laws.end(), "uniform") != cfg.input_laws.end();
  const std::string law = has_uniform ? "uniform" : cfg.input_laws.front();
  const InputSchedule sched = preset_schedule(p, cfg, law);
  require_excitation(p, sched);
  const auto seeds = repetition_seeds(cfg);
  const Index N = Index(cfg.n_r_grid.size());
  const Index R = Index(seeds.size());

  TailReport out;
  out.base.experiment = "tail";
  out.base.records.resize(std::size_t(N * R));
  parallel_for(N * R, cfg.threads, [&](Index i) {
    const Index n_r = cfg.n_r_grid[std::size_t(i / R)];
    RunRecord rec = estimate_record(p.system, sched, p.init, n_r,
                                    hash_combine(seeds[std::size_t(i % R)], std::uint64_t(n_r)));
    rec.label = law;
    out.base.records[std::size_t(i)] = std::move(rec);
  });
  out.base.curves = summarize(out.base.records);
  out.base.slopes = select_metrics(curve_slopes(out.base.curves), cfg.metrics);

  auto errors_at = [&](Index k, double EstimationErrors::*field) {
    std::vector<double> v;
    for (Index r = 0; r < R; ++r) v.push_back(out.base.records[std::size_t(k * R + r)].err.*field);
    return v;
  };
  auto frequency = [](const std::vector<double>& v, double eps) {
    Index c = 0;
    for (double e : v)
      if (!(e <= eps)) ++c;  // diverged (inf / nan) counts as exceeding
    return double(c) / double(v.size());
  };

  struct Metric {
    std::string name;
    double EstimationErrors::*field;
    std::vector<double> eps;
  };
  std::vector<Metric> metrics = {{"AB", &EstimationErrors::err_AB_normalized, cfg.eps_AB},
                                 {"Sigma", &EstimationErrors::err_Sigma_normalized, cfg.eps_Sigma}};
  for (auto& m : metrics)
    if (m.eps.empty()) m.eps.push_back(median(errors_at(0, m.field)));

  if (cfg.bound_envelope) {
    if (!p.system.bounded || sched.law != ComponentLaw::Uniform)
      throw ConfigError("bound envelope needs bounded noise and the uniform input law");
    const SystemBoundConstants k = lemma1_constants(bound_inputs_for(p.system, sched, p.init));
    std::vector<BoundContext> ctx;
    double range_AB = kInf, range_eta = kInf;
    for (Index n_r : cfg.n_r_grid) {
      ctx.push_back(make_bound_context(p.system, sched, p.init, k, n_r, cfg.eps_max));
      range_AB = std::min(range_AB, delta_AB_range(ctx.back()));
      range_eta = std::min(range_eta, eta_range(ctx.back()));
    }
    for (Index g = 1; g <= cfg.bound_points; ++g) {
      // The ranges are open at the top, so the grid stays strictly inside.
      const double eAB = range_AB * double(g) / double(cfg.bound_points + 1);
      const double eS = range_eta * double(g) / double(cfg.bound_points + 1);
      for (Index kk = 0; kk < N; ++kk) {
        const LogBound bAB = delta_AB(ctx[std::size_t(kk)], eAB);
        const LogBound bS = eta(ctx[std::size_t(kk)], eS);
        out.rows.push_back({"AB_abs", eAB, cfg.n_r_grid[std::size_t(kk)],
                            frequency(errors_at(kk, &EstimationErrors::err_AB), eAB), bAB.reported(), bAB.in_range});
        out.rows.push_back({"Sigma_abs", eS, cfg.n_r_grid[std::size_t(kk)],
                            frequency(errors_at(kk, &EstimationErrors::err_Sigma), eS), bS.reported(), bS.in_range});
      }
    }
  }

  for (const auto& m : metrics) {
    for (double eps : m.eps) {
      std::vector<double> logp, nr;
      for (Index kk = 0; kk < N; ++kk) {
        const double f = frequency(errors_at(kk, m.field), eps);
        out.rows.push_back({m.name, eps, cfg.n_r_grid[std::size_t(kk)], f, kNaN, false});
        if (f > 0) {
          logp.push_back(std::log(f));
          nr.push_back(double(cfg.n_r_grid[std::size_t(kk)]));
        }
      }
      double slope = kNaN;
      if (nr.size() >= 2) {
        const double mx = std::accumulate(nr.begin(), nr.end(), 0.0) / double(nr.size());
        const double my = std::accumulate(logp.begin(), logp.end(), 0.0) / double(logp.size());
        double sxy = 0, sxx = 0;
        for (std::size_t i = 0; i < nr.size(); ++i) {
          sxy += (nr[i] - mx) * (logp[i] - my);
          sxx += (nr[i] - mx) * (nr[i] - mx);
        }
        slope = sxy / sxx;
      }
      out.log_slopes.push_back({m.name, format_double(eps), slope});
    }
  }

  write_report_files(out.base, cfg.out_dir);
  if (!cfg.out_dir.empty()) {
    const std::string f = cfg.out_dir + "/tail_frequencies.csv";
    write_csv(f, tail_csv(out.rows));
    out.base.files.push_back(f);
  }
  out.base.runtime_seconds = elapsed_since(t0);
  json lj = json::array();
  for (const auto& s : out.log_slopes) lj.push_back({{"metric", s.label}, {"eps", s.metric}, {"slope", s.value}});
  write_summary(out.base, cfg.out_dir, {{"preset", p.name}, {"input_law", law}, {"log_frequency_slopes", lj}});
  return out;
}

EquivalenceReport run_equivalence_demo(const ExperimentConfig& cfg) {
  validate(cfg);
  const Preset p = resolve_preset(cfg);
  const Index n = p.system.n();
  const Index m = p.system.m();
  const InputSchedule sched = preset_schedule(p, cfg, "uniform");
  require_excitation(p, sched);
  const Vector mu0 = p.init.mean();
  const Vector X0 = svec(p.init.second_moment());

  EquivalenceReport out;
  out.alpha = cfg.alpha;
  const LiftedDynamics L = lift(p.system);
  out.exact = propagate_second(L, sched, mu0, X0);

  const EquivalenceClass ec = make_class(L.SigmaA_tilde, L.SigmaB_tilde, n, m);
  const ClassMember member = sigma_from_class(ec, Vector::Constant(ec.d_alpha, cfg.alpha), Vector::Zero(ec.d_beta));
  out.member_psd = member.psd_A && member.psd_B;
  out.member = propagate_second(lift(p.system.A, p.system.B, member.Sigma_A, member.Sigma_B), sched, mu0, X0);

  out.n_r = cfg.n_r_grid.back();
  const EstimationResult est = mals(p.system, sched, p.init, out.n_r, repetition_seeds(cfg).front(), cfg.threads);
  LiftedDynamics Lh = lift_nominal(est.A_hat, est.B_hat);
  Lh.SigmaA_tilde = est.SigmaA_tilde_hat;
  Lh.SigmaB_tilde = est.SigmaB_tilde_hat;
  out.estimated = propagate_second(Lh, sched, mu0, X0);

  double scale = 0.0, diff_est = 0.0;
  for (std::size_t t = 0; t < out.exact.Xt.size(); ++t) {
    out.max_abs_diff_member = std::max(
        {out.max_abs_diff_member, (out.member.Xt[t] - out.exact.Xt[t]).cwiseAbs().maxCoeff(),
         (out.member.mu[t] - out.exact.mu[t]).cwiseAbs().maxCoeff()});
    scale = std::max(scale, out.exact.Xt[t].norm());
    diff_est = std::max(diff_est, (out.estimated.Xt[t] - out.exact.Xt[t]).norm());
  }
  out.max_rel_diff_estimated = scale > 0 ? diff_est / scale : diff_est;

  if (!cfg.out_dir.empty()) {
    ensure_directory(cfg.out_dir);
    const std::vector<std::pair<std::string, const MomentTrajectory*>> parts = {
        {"exact", &out.exact}, {"member", &out.member}, {"estimated", &out.estimated}};
    for (const auto& [name, tr] : parts) {
      const std::string f = cfg.out_dir + "/equivalence_" + name + ".csv";
      write_csv(f, trajectory_csv(*tr, n));
      out.files.push_back(f);
    }
    write_json_file(cfg.out_dir + "/equivalence_summary.json",
                    {{"preset", p.name},
                     {"alpha", out.alpha},
                     {"member_psd", out.member_psd},
                     {"n_r", out.n_r},
                     {"max_abs_diff_member", out.max_abs_diff_member},
                     {"max_rel_diff_estimated", out.max_rel_diff_estimated},
                     {"member_Sigma_A", to_json(member.Sigma_A)},
                     {"class", to_json(ec)},
                     {"files", out.files}});
  }
  return out;
}

ExperimentReport run_baseline_comparison(const ExperimentConfig& cfg) {
  validate(cfg);
  const auto t0 = std::chrono::steady_clock::now();
  const auto seeds = repetition_seeds(cfg);
  const std::vector<std::string> algorithms = {"MALS", "RLS", "RLSp"};
  const Index S = Index(cfg.systems.size());
  const Index A = Index(algorithms.size());
  const Index N = Index(cfg.n_r_grid.size());
  const Index R = Index(seeds.size());

  std::vector<Preset> presets;
  std::vector<InputSchedule> schedules;
  for (const auto& name : cfg.systems) {
    Preset p = make_preset(name, cfg.additive_sigma2);
    if (cfg.ell > 0) p.ell = cfg.ell;
    schedules.push_back(preset_schedule(p, cfg, "gaussian"));
    require_excitation(p, schedules.back());
    presets.push_back(std::move(p));
  }

  std::vector<RunRecord> records(std::size_t(S * A * N * R));
  auto slot = [&](Index s, Index a, Index k, Index r) { return std::size_t(((s * A + a) * N + k) * R + r); };
  parallel_for(S * A * R, cfg.threads, [&](Index i) {
    const Index s = i / (A * R);
    const Index a = (i / R) % A;
    const Index r = i % R;
    const Preset& p = presets[std::size_t(s)];
    const InputSchedule& sched = schedules[std::size_t(s)];
    const std::string label = cfg.systems[std::size_t(s)] + "/" + algorithms[std::size_t(a)];
    const std::uint64_t seed = seeds[std::size_t(r)];
    if (a == 0) {
      for (Index k = 0; k < N; ++k) {
        const Index n_r = cfg.n_r_grid[std::size_t(k)];
        RunRecord rec = estimate_record(p.system, sched, p.init, n_r, hash_combine(seed, std::uint64_t(n_r)));
        rec.label = label;
        records[slot(s, a, k, r)] = std::move(rec);
      }
      return;
    }
    const Index T = p.ell * cfg.n_r_grid.back();
    const InputSchedule long_sched =
        a == 1 ? standard_gaussian_schedule(p.system.m(), T) : make_periodic_schedule(sched, T);
    const std::uint64_t traj_seed = hash_combine(seed, std::uint64_t(0x524c53 + a));
    const Rollout traj = simulate_rollouts(p.system, long_sched, p.init, 1, traj_seed, 1).rollouts.front();
    std::vector<Index> checkpoints;
    for (Index n_r : cfg.n_r_grid) checkpoints.push_back(p.ell * n_r);
    const auto snaps = rls_estimates(traj, p.system.n(), p.system.m(), checkpoints);
    const LiftedDynamics L = lift(p.system);
    Matrix AB(p.system.n(), p.system.n() + p.system.m());
    AB << p.system.A, p.system.B;
    Matrix Sg(L.SigmaA_tilde.rows(), L.SigmaA_tilde.cols() + L.SigmaB_tilde.cols());
    Sg << L.SigmaA_tilde, L.SigmaB_tilde;
    const double nAB = spectral_norm(AB), nS = spectral_norm(Sg);
    for (Index k = 0; k < N; ++k) {
      const RlsSnapshot& snap = snaps[std::size_t(k)];
      const Index n_r = cfg.n_r_grid[std::size_t(k)];
      if (snap.samples != p.ell * n_r)
        throw AssertionFailure("sample-count parity violated for " + label + " at n_r=" + std::to_string(n_r));
      const BaselineErrors e = baseline_errors(snap, p.system);
      RunRecord rec;
      rec.label = label;
      rec.n_r = n_r;
      rec.samples = snap.samples;
      rec.seed = traj_seed;
      rec.diverged = snap.diverged;
      rec.err = {e.err_AB, e.err_Sigma, nAB > 0 ? e.err_AB / nAB : e.err_AB, nS > 0 ? e.err_Sigma / nS : e.err_Sigma};
      records[slot(s, a, k, r)] = std::move(rec);
    }
  });

  ExperimentReport rep;
  rep.experiment = "baselines";
  rep.records = std::move(records);
  for (Index k = 0; k < N; ++k)
    for (Index s = 0; s < S; ++s)
      for (Index r = 0; r < R; ++r) {
        const Index expected = rep.records[slot(s, 0, k, r)].samples;
        for (Index a = 1; a < A; ++a)
          if (rep.records[slot(s, a, k, r)].samples != expected)
            throw AssertionFailure("sample counts differ across algorithms");
      }
  rep.curves = summarize(rep.records);
  rep.slopes = select_metrics(curve_slopes(rep.curves), cfg.metrics);
  write_report_files(rep, cfg.out_dir);
  if (!cfg.out_dir.empty()) {
    for (const auto& sys : cfg.systems)
      for (const auto& alg : algorithms) {
        const std::string label = sys + "/" + alg;
        const std::string f = cfg.out_dir + "/baselines_" + label_file_part(label) + ".csv";
        write_csv(f, error_curve_csv(rep.curves, label));
        rep.files.push_back(f);
      }
  }
  rep.runtime_seconds = elapsed_since(t0);
  write_summary(rep, cfg.out_dir);
  return rep;
}

CsvTable records_csv(const std::vector<RunRecord>& records) {
  CsvTable t;
  t.header = {"label", "n_r", "samples", "seed", "err_AB", "err_Sigma", "err_AB_normalized",
              "err_Sigma_normalized", "diverged"};
  for (const auto& r : records)
    t.add_row({r.label, std::to_string(r.n_r), std::to_string(r.samples), std::to_string(r.seed),
               format_double(r.err.err_AB), format_double(r.err.err_Sigma),
               format_double(r.err.err_AB_normalized), format_double(r.err.err_Sigma_normalized),
               r.diverged ? "1" : "0"});
  return t;
}

CsvTable curves_csv(const std::vector<CurvePoint>& curves) {
  CsvTable t;
  t.header = {"label", "n_r", "samples", "count", "diverged", "mean_AB", "median_AB", "mean_Sigma",
              "median_Sigma", "mean_AB_normalized", "median_AB_normalized", "mean_Sigma_normalized",
              "median_Sigma_normalized"};
  for (const auto& c : curves)
    t.add_row({c.label, std::to_string(c.n_r), std::to_string(c.samples), std::to_string(c.count),
               std::to_string(c.diverged), format_double(c.mean_AB), format_double(c.median_AB),
               format_double(c.mean_Sigma), format_double(c.median_Sigma), format_double(c.mean_AB_normalized),
               format_double(c.median_AB_normalized), format_double(c.mean_Sigma_normalized),
               format_double(c.median_Sigma_normalized)});
  return t;
}

CsvTable error_curve_csv(const std::vector<CurvePoint>& curves, const std::string& label) {
  CsvTable t;
  t.header = {"samples", "err_AB", "err_Sigma", "diverged"};
  for (const auto& c : curves) {
    if (c.label != label) continue;
    t.add_row({std::to_string(c.samples), format_double(c.mean_AB), format_double(c.mean_Sigma),
               format_double(double(c.diverged) / double(c.count))});
  }
  return t;
}

CsvTable tail_csv(const std::vector<TailRow>& rows) {
  CsvTable t;
  t.header = {"metric", "epsilon", "n_r", "frequency", "bound", "bound_in_range"};
  for (const auto& r : rows)
    t.add_row({r.metric, format_double(r.eps), std::to_string(r.n_r), format_double(r.frequency),
               format_double(r.bound), r.bound_in_range ? "1" : "0"});
  return t;
}

CsvTable delta_curve_csv(const BoundContext& c, const std::vector<double>& eps) {
  CsvTable t;
  t.header = {"epsilon", "delta_Y", "delta_YZ", "delta_ZZ", "delta_AB"};
  for (double e : eps) {
    const DeltaFamily f = delta_family(c, e);
    t.add_row({format_double(e), format_double(f.Y.value()), format_double(f.YZ.value()),
               format_double(f.ZZ.value()), format_double(f.AB.value())});
  }
  return t;
}

CsvTable eta_curve_csv(const BoundContext& c, const std::vector<double>& eps) {
  CsvTable t;
  t.header = {"epsilon", "eta_D", "eta_C", "eta_CD", "eta_DD", "eta"};
  for (double e : eps) {
    const EtaFamily f = eta_family(c, e);
    t.add_row({format_double(e), format_double(f.D.value()), format_double(f.C.value()),
               format_double(f.CD.value()), format_double(f.DD.value()), format_double(f.total.value())});
  }
  return t;
}

json summary_json(const ExperimentReport& r) {
  json curves = json::array();
  for (const auto& c : r.curves)
    curves.push_back({{"label", c.label},
                      {"n_r", c.n_r},
                      {"samples", c.samples},
                      {"count", c.count},
                      {"diverged", c.diverged},
                      {"mean_AB", c.mean_AB},
                      {"median_AB", c.median_AB},
                      {"mean_Sigma", c.mean_Sigma},
                      {"median_Sigma", c.median_Sigma}});
  json slopes = json::array();
  for (const auto& s : r.slopes)
    slopes.push_back({{"label", s.label}, {"metric", s.metric}, {"slope", std::isfinite(s.value) ? json(s.value) : json()}});
  return {{"experiment", r.experiment},
          {"runtime_seconds", r.runtime_seconds},
          {"curves", curves},
          {"slopes", slopes},
          {"files", r.files}};
}

}  // namespace mnsid
