// Command-line front end: simulate, estimate, inspect and run experiments.
// Exit codes: 0 success, 2 configuration error, 3 failed invariant, 1 anything else.

#include "mnsid/baselines.h"
#include "mnsid/bounds.h"
#include "mnsid/harness.h"
#include "mnsid/identifiability.h"
#include "mnsid/io.h"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>

using namespace mnsid;

namespace {

struct GlobalFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<Index> reps;
  std::optional<std::string> preset;
  std::optional<int> threads;
};

ExperimentConfig load_config(const GlobalFlags& g) {
  ExperimentConfig cfg;
  if (!g.config.empty()) cfg = config_from_json(read_json_file(g.config));
  if (g.preset) {
    cfg.preset = *g.preset;
    cfg.system.reset();
  }
  if (g.seed) {
    cfg.seed = *g.seed;
    cfg.seeds.clear();
  }
  if (g.reps) {
    cfg.reps = *g.reps;
    cfg.seeds.clear();
  }
  if (g.out) cfg.out_dir = *g.out;
  if (g.threads) cfg.threads = *g.threads;
  validate(cfg);
  return cfg;
}

void print_report(const ExperimentReport& r) {
  std::printf("%-28s %8s %12s %12s %12s %12s %5s\n", "label", "n_r", "mean_AB", "median_AB", "mean_Sigma",
              "median_Sigma", "div");
  for (const auto& c : r.curves)
    std::printf("%-28s %8lld %12.4e %12.4e %12.4e %12.4e %5lld\n", c.label.c_str(), static_cast<long long>(c.n_r),
                c.mean_AB, c.median_AB, c.mean_Sigma, c.median_Sigma, static_cast<long long>(c.diverged));
  for (const auto& s : r.slopes)
    if (s.metric.rfind("median_", 0) == 0) std::printf("slope %s %s = %.3f\n", s.label.c_str(), s.metric.c_str(), s.value);
  for (const auto& f : r.files) std::printf("wrote %s\n", f.c_str());
  std::printf("runtime %.2f s\n", r.runtime_seconds);
}

int cmd_simulate(const ExperimentConfig& cfg, Index n_r, const std::string& law) {
  const Preset p = resolve_preset(cfg);
  const InputSchedule s = preset_schedule(p, cfg, law);
  const RolloutSet set = simulate_rollouts(p.system, s, p.init, n_r, cfg.seed, cfg.threads);
  ensure_directory(cfg.out_dir);
  const std::string f = cfg.out_dir + "/rollouts.json";
  write_json_file(f, to_json(set));
  std::printf("%lld rollouts of length %lld, diverged: %s\nwrote %s\n", static_cast<long long>(set.n_r()),
              static_cast<long long>(set.ell), set.any_diverged() ? "yes" : "no", f.c_str());
  return 0;
}

int cmd_estimate(const ExperimentConfig& cfg, const std::string& rollouts_file, Index n_r, const std::string& law) {
  const Preset p = resolve_preset(cfg);
  RolloutSet set;
  if (!rollouts_file.empty()) {
    set = rollouts_from_json(read_json_file(rollouts_file));
  } else {
    set = simulate_rollouts(p.system, preset_schedule(p, cfg, law), p.init, n_r, cfg.seed, cfg.threads);
  }
  if (set.any_diverged()) throw AssertionFailure("rollout set contains diverged rollouts");
  EstimationResult r = estimate_from_rollouts(set, cfg.threads);
  if (set.n == p.system.n() && set.m == p.system.m()) r.errors = estimation_errors(r, p.system);
  ensure_directory(cfg.out_dir);
  const std::string f = cfg.out_dir + "/estimate.json";
  write_json_file(f, to_json(r));
  std::cout << "A_hat =\n" << r.A_hat << "\nB_hat =\n" << r.B_hat << '\n';
  if (r.errors)
    std::printf("err_AB = %.4e, err_Sigma = %.4e (vs %s)\n", r.errors->err_AB, r.errors->err_Sigma, p.name.c_str());
  std::printf("wrote %s\n", f.c_str());
  return 0;
}

int cmd_oracle(const ExperimentConfig& cfg, const std::string& law) {
  const Preset p = resolve_preset(cfg);
  const InputSchedule s = preset_schedule(p, cfg, law);
  const LiftedDynamics L = lift(p.system);
  const MomentTrajectory tr = propagate_second(L, s, p.init.mean(), svec(p.init.second_moment()));
  const ExcitationReport ex = check_excitation(assemble(tr, s, L), p.system.n(), p.system.m());
  ensure_directory(cfg.out_dir);
  const std::string f = cfg.out_dir + "/oracle_trajectory.csv";
  write_csv(f, trajectory_csv(tr, p.system.n()));
  write_json_file(cfg.out_dir + "/oracle_summary.json",
                  {{"preset", p.name},
                   {"SigmaA_tilde", to_json(L.SigmaA_tilde)},
                   {"SigmaB_tilde", to_json(L.SigmaB_tilde)},
                   {"schedule", to_json(s)},
                   {"second_moment_spectral_radius", second_moment_spectral_radius(L)},
                   {"controllable", controllable(p.system.A, p.system.B)},
                   {"excitation",
                    {{"rank_Z", ex.rank_Z},
                     {"lambda_min_ZZ", ex.lambda_min_ZZ},
                     {"rank_D", ex.rank_D},
                     {"lambda_min_DD", ex.lambda_min_DD},
                     {"pass_Z", ex.pass_Z},
                     {"pass_D", ex.pass_D}}}});
  std::cout << "SigmaA_tilde =\n" << L.SigmaA_tilde << "\nSigmaB_tilde =\n" << L.SigmaB_tilde << '\n';
  std::printf("excitation: Z %s, D %s\nwrote %s\n", ex.pass_Z ? "pass" : "FAIL", ex.pass_D ? "pass" : "FAIL", f.c_str());
  if (!ex.pass_Z || !ex.pass_D) throw AssertionFailure("excitation check failed");
  return 0;
}

int cmd_identifiability(const ExperimentConfig& cfg) {
  const Preset p = resolve_preset(cfg);
  const Index n = p.system.n(), m = p.system.m();
  const LiftedDynamics L = lift(p.system);
  const EquivalenceClass ec = make_class(L.SigmaA_tilde, L.SigmaB_tilde, n, m);
  const UniquenessVerdict v = classify_uniqueness(n, m, p.system.Sigma_A, p.system.Sigma_B);
  const ClassMember mem = sigma_from_class(ec, Vector::Constant(ec.d_alpha, cfg.alpha), Vector::Zero(ec.d_beta));
  ensure_directory(cfg.out_dir);
  const std::string f = cfg.out_dir + "/class.json";
  json j = to_json(ec);
  j["verdict"] = to_string(v.overall);
  j["reasons"] = v.reasons;
  j["member"] = {{"alpha", cfg.alpha}, {"Sigma_A", to_json(mem.Sigma_A)}, {"psd_A", mem.psd_A}, {"psd_B", mem.psd_B}};
  write_json_file(f, j);
  std::printf("d_alpha = %lld, d_beta = %lld, verdict: %s\n", static_cast<long long>(ec.d_alpha),
              static_cast<long long>(ec.d_beta), to_string(v.overall).c_str());
  std::cout << "Sigma_A(alpha=" << cfg.alpha << ") =\n" << mem.Sigma_A << '\n';
  std::printf("wrote %s\n", f.c_str());
  return 0;
}

int cmd_bounds(const ExperimentConfig& cfg, Index n_r, Index points) {
  const Preset p = resolve_preset(cfg);
  if (!p.system.bounded) throw ConfigError("bounds need a bounded-noise system");
  const InputSchedule s = preset_schedule(p, cfg, "uniform");
  const SystemBoundConstants k = lemma1_constants(bound_inputs_for(p.system, s, p.init));
  const BoundContext c = make_bound_context(p.system, s, p.init, k, n_r, cfg.eps_max);
  const double rd = delta_AB_range(c), re = eta_range(c);
  std::vector<double> ed, ee;
  for (Index i = 1; i <= points; ++i) {
    ed.push_back(rd * double(i) / double(points + 1));
    ee.push_back(re * double(i) / double(points + 1));
  }
  ensure_directory(cfg.out_dir);
  write_csv(cfg.out_dir + "/bounds_delta.csv", delta_curve_csv(c, ed));
  write_csv(cfg.out_dir + "/bounds_eta.csv", eta_curve_csv(c, ee));
  write_json_file(cfg.out_dir + "/bounds_summary.json",
                  {{"preset", p.name},
                   {"n_r", n_r},
                   {"eps_max", cfg.eps_max},
                   {"delta_AB_range", rd},
                   {"eta_range", re},
                   {"c_A", k.c_A},
                   {"c_B", k.c_B},
                   {"c_M", k.c_M},
                   {"c_N", k.c_N},
                   {"c_F", k.c_F},
                   {"c_W", k.c_W}});
  std::printf("delta_AB range (0, %.4e], eta range (0, %.4e]\n", rd, re);
  std::printf("delta_AB(%.3e) = %.4e, eta(%.3e) = %.4e\n", rd, delta_AB(c, rd).value(), re, eta(c, re).value());
  std::printf("wrote %s/bounds_delta.csv and bounds_eta.csv\n", cfg.out_dir.c_str());
  return 0;
}

int cmd_experiment(const ExperimentConfig& cfg, const std::string& kind) {
  if (kind == "convergence") {
    print_report(run_convergence(cfg));
  } else if (kind == "tail") {
    const TailReport t = run_tail_frequency(cfg);
    print_report(t.base);
    for (const auto& s : t.log_slopes)
      std::printf("log-frequency slope %s eps=%s: %.4e per rollout\n", s.label.c_str(), s.metric.c_str(), s.value);
    for (const auto& r : t.rows)
      if (!std::isnan(r.bound) && r.frequency > r.bound)
        throw AssertionFailure("observed frequency exceeds the bound for " + r.metric);
  } else if (kind == "equivalence") {
    const EquivalenceReport e = run_equivalence_demo(cfg);
    std::printf("alpha = %g (member PSD: %s)\nmax |member - exact| = %.3e\nmax relative estimate gap = %.3e at n_r = %lld\n",
                e.alpha, e.member_psd ? "yes" : "no", e.max_abs_diff_member, e.max_rel_diff_estimated,
                static_cast<long long>(e.n_r));
    for (const auto& f : e.files) std::printf("wrote %s\n", f.c_str());
    if (e.max_abs_diff_member > 1e-12) throw AssertionFailure("equivalent covariances gave different dynamics");
  } else if (kind == "baselines") {
    print_report(run_baseline_comparison(cfg));
  } else {
    throw ConfigError("unknown experiment '" + kind + "'");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multiplicative-noise system identification from independent rollouts"};
  app.require_subcommand(1);
  app.fallthrough();  // global options may also follow the subcommand
  GlobalFlags g;
  app.add_option("--config", g.config, "JSON experiment config")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "base seed");
  app.add_option("--out", g.out, "output directory");
  app.add_option("--reps", g.reps, "repetitions")->check(CLI::PositiveNumber);
  app.add_option("--preset", g.preset, "system preset");
  app.add_option("--threads", g.threads, "worker threads")->check(CLI::PositiveNumber);

  Index n_r = 1000, points = 10;
  std::string law = "gaussian", rollouts_file, kind;

  auto* sim = app.add_subcommand("simulate", "simulate rollouts and write them as JSON");
  sim->add_option("--n-r", n_r, "number of rollouts")->check(CLI::PositiveNumber);
  sim->add_option("--law", law, "input law: gaussian, uniform, deterministic");

  auto* est = app.add_subcommand("estimate", "run the estimator on rollouts");
  est->add_option("--rollouts", rollouts_file, "rollout JSON (simulated from the preset when absent)")
      ->check(CLI::ExistingFile);
  est->add_option("--n-r", n_r, "rollouts to simulate when no file is given")->check(CLI::PositiveNumber);
  est->add_option("--law", law, "input law when simulating");

  auto* ora = app.add_subcommand("oracle", "exact moment trajectory and excitation check");
  ora->add_option("--law", law, "input law");

  auto* idf = app.add_subcommand("identifiability", "equivalence class of the noise covariances");

  auto* bnd = app.add_subcommand("bounds", "evaluate the finite-sample bound families");
  bnd->add_option("--n-r", n_r, "number of rollouts")->check(CLI::PositiveNumber);
  bnd->add_option("--points", points, "grid points")->check(CLI::PositiveNumber);

  auto* exp = app.add_subcommand("experiment", "run an experiment");
  exp->add_option("kind", kind, "convergence | tail | equivalence | baselines")
      ->required()
      ->check(CLI::IsMember({"convergence", "tail", "equivalence", "baselines"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    const ExperimentConfig cfg = load_config(g);
    if (sim->parsed()) return cmd_simulate(cfg, n_r, law);
    if (est->parsed()) return cmd_estimate(cfg, rollouts_file, n_r, law);
    if (ora->parsed()) return cmd_oracle(cfg, law);
    if (idf->parsed()) return cmd_identifiability(cfg);
    if (bnd->parsed()) return cmd_bounds(cfg, n_r, points);
    return cmd_experiment(cfg, kind);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const AssertionFailure& e) {
    std::fprintf(stderr, "assertion failed: %s\n", e.what());
    return 3;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "invalid input: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
