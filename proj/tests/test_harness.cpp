#include "mnsid/harness.h"

#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace mnsid;

namespace {

std::string scratch_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("mnsid_test_" + name);
  std::filesystem::remove_all(p);
  return p.string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.n_r_grid = {100, 1000};
  c.reps = 3;
  c.out_dir = "";
  return c;
}

}  // namespace

TEST(Config, DefaultsFromEmptyObject) {
  const ExperimentConfig c = config_from_json(json::object());
  EXPECT_EQ(c.preset, "paper-4.1");
  EXPECT_EQ(c.reps, 50);
  EXPECT_EQ(c.design_seed, 2021u);
  EXPECT_EQ(c.n_r_grid.size(), 4u);
  EXPECT_EQ(repetition_seeds(c).size(), 50u);
}

TEST(Config, RoundTripsThroughJson) {
  json j = {{"preset", "paper-4.2-rho0.8"}, {"n_r_grid", {10, 20}}, {"seeds", {5, 6, 7}},
            {"design", {{"cov_law", "identity"}}}, {"threads", 2}, {"alpha", 0.5}};
  const ExperimentConfig c = config_from_json(j);
  EXPECT_EQ(c.reps, 3);
  EXPECT_EQ(repetition_seeds(c), (std::vector<std::uint64_t>{5, 6, 7}));
  const ExperimentConfig d = config_from_json(to_json(c));
  EXPECT_EQ(to_json(d), to_json(c));
  EXPECT_EQ(d.design.cov_law, "identity");
}

TEST(Config, RejectsBadInput) {
  EXPECT_THROW(config_from_json(json{{"reeps", 3}}), ConfigError);
  EXPECT_THROW(config_from_json(json{{"reps", "many"}}), ConfigError);
  EXPECT_THROW(config_from_json(json{{"reps", 0}}), ConfigError);
  EXPECT_THROW(config_from_json(json{{"preset", "nope"}}), ConfigError);
  EXPECT_THROW(config_from_json(json{{"n_r_grid", {100, 10}}}), ConfigError);
  EXPECT_THROW(config_from_json(json{{"input_laws", {"cauchy"}}}), ConfigError);
  EXPECT_THROW(config_from_json(json{{"seeds", {1, 2}}, {"reps", 3}}), ConfigError);
  EXPECT_THROW(config_from_json(json{{"design", {{"wishart", 1}}}}), ConfigError);
  EXPECT_THROW(config_from_json(json::array()), ConfigError);
  EXPECT_THROW(config_from_json(json{{"eps_max", 2.0}}), ConfigError);
}

TEST(Presets, AllBuildAndExcite) {
  for (const std::string& name : preset_names()) {
    const Preset p = make_preset(name);
    EXPECT_TRUE(p.system.bounded) << name;
    ExperimentConfig cfg;
    for (const std::string law : {"gaussian", "uniform", "deterministic"}) {
      const InputSchedule s = preset_schedule(p, cfg, law);
      EXPECT_EQ(s.m(), p.system.m()) << name;
      const ExcitationReport ex =
          check_excitation(assemble_population(p.system, s, p.init), p.system.n(), p.system.m());
      EXPECT_TRUE(ex.pass_Z && ex.pass_D) << name << " " << law;
    }
  }
  EXPECT_THROW(make_preset("paper-9"), ConfigError);
  const Preset add = make_preset("paper-4.1-additive", 0.2);
  EXPECT_EQ(add.system.m(), 2);
  EXPECT_EQ(add.system.Sigma_B.bottomRightCorner(2, 2), 0.2 * Matrix::Identity(2, 2));
}

TEST(Io, CsvRoundTripIsExact) {
  const std::string dir = scratch_dir("csv");
  ensure_directory(dir);
  CsvTable t;
  t.header = {"a", "b"};
  t.add_row({format_double(0.1), format_double(1.0 / 3.0)});
  t.add_row({format_double(std::numeric_limits<double>::infinity()), format_double(std::nan(""))});
  t.add_row({format_double(-1e-300), format_double(123456789.0)});
  write_csv(dir + "/t.csv", t);
  const CsvTable r = read_csv(dir + "/t.csv");
  EXPECT_EQ(r.header, t.header);
  EXPECT_EQ(r.rows, t.rows);
  EXPECT_EQ(r.number(0, "a"), 0.1);
  EXPECT_EQ(r.number(0, "b"), 1.0 / 3.0);
  EXPECT_TRUE(std::isinf(r.number(1, "a")));
  EXPECT_TRUE(std::isnan(r.number(1, "b")));
  EXPECT_EQ(r.number(2, "a"), -1e-300);
  EXPECT_THROW(r.column("c"), ConfigError);
}

TEST(Io, RolloutsAndSystemsRoundTrip) {
  const Preset p = make_preset("paper-4.1");
  const InputSchedule s = preset_schedule(p, ExperimentConfig{}, "uniform");
  const RolloutSet set = simulate_rollouts(p.system, s, p.init, 5, 9);
  const RolloutSet back = rollouts_from_json(json::parse(to_json(set).dump()));
  ASSERT_EQ(back.n_r(), 5);
  for (Index k = 0; k < 5; ++k) {
    EXPECT_EQ(back.rollouts[k].x, set.rollouts[k].x);
    EXPECT_EQ(back.rollouts[k].u, set.rollouts[k].u);
  }
  EXPECT_EQ(back.schedule.nu[2], s.nu[2]);
  const MultNoiseSystem sys = system_from_json(json::parse(to_json(p.system).dump()));
  EXPECT_EQ(sys.A, p.system.A);
  EXPECT_EQ(sys.Sigma_A, p.system.Sigma_A);
  EXPECT_THROW(system_from_json(json{{"A", {{1, 2}, {3}}}, {"B", {{1}, {1}}}, {"noise", "zero"}}), ConfigError);
}

TEST(Parallel, EachIndexOnceAndErrorsPropagate) {
  std::vector<std::atomic<int>> hits(97);
  parallel_for(97, 5, [&](Index i) { hits[std::size_t(i)]++; });
  for (auto& h : hits) EXPECT_EQ(h.load(), 1);
  EXPECT_THROW(parallel_for(10, 3, [](Index i) {
                 if (i == 7) throw std::runtime_error("boom");
               }),
               std::runtime_error);
}

TEST(Stats, MedianAndSlope) {
  EXPECT_EQ(median({3, 1, 2}), 2.0);
  EXPECT_EQ(median({4, 1, 2, 3}), 2.5);
  EXPECT_TRUE(std::isnan(median({})));
  std::vector<double> x{1e2, 1e3, 1e4}, y;
  for (double v : x) y.push_back(3.0 / std::sqrt(v));
  EXPECT_NEAR(loglog_slope(x, y), -0.5, 1e-12);
  y[1] = std::numeric_limits<double>::infinity();
  EXPECT_NEAR(loglog_slope(x, y), -0.5, 1e-12);
}

TEST(Experiments, ConvergenceIsThreadIndependent) {
  ExperimentConfig c = small_config();
  const std::string d1 = scratch_dir("conv1"), d4 = scratch_dir("conv4");
  c.out_dir = d1;
  const ExperimentReport a = run_convergence(c);
  c.threads = 4;
  c.out_dir = d4;
  const ExperimentReport b = run_convergence(c);
  ASSERT_EQ(a.records.size(), 3u * 2u * 3u);
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    EXPECT_EQ(a.records[i].label, b.records[i].label);
    EXPECT_EQ(a.records[i].err.err_AB, b.records[i].err.err_AB);
    EXPECT_EQ(a.records[i].err.err_Sigma, b.records[i].err.err_Sigma);
  }
  for (const std::string f : {"convergence_records.csv", "convergence_curves.csv"})
    EXPECT_EQ(slurp(d1 + "/" + f), slurp(d4 + "/" + f)) << f;
  EXPECT_FALSE(slurp(d1 + "/convergence_records.csv").empty());
  EXPECT_NO_THROW(a.point("uniform", 1000));
  EXPECT_EQ(a.point("uniform", 1000).samples, 4000);
}

TEST(Experiments, TailNeedsEnoughRepetitions) {
  ExperimentConfig c = small_config();
  EXPECT_THROW(run_tail_frequency(c), ConfigError);
}

TEST(Experiments, EquivalentMemberReproducesMoments) {
  ExperimentConfig c = small_config();
  const EquivalenceReport r = run_equivalence_demo(c);
  EXPECT_TRUE(r.member_psd);
  EXPECT_LE(r.max_abs_diff_member, 1e-12);
  EXPECT_LT(r.max_rel_diff_estimated, 1.0);
  EXPECT_EQ(r.n_r, 1000);
}

TEST(Experiments, BaselinesUseMatchedSampleCounts) {
  ExperimentConfig c = small_config();
  c.systems = {"paper-4.2-nonoise"};
  c.input_laws = {"uniform"};
  c.reps = 2;
  const ExperimentReport r = run_baseline_comparison(c);
  for (const std::string alg : {"MALS", "RLS", "RLSp"}) {
    const CurvePoint& p = r.point("paper-4.2-nonoise/" + alg, 1000);
    EXPECT_EQ(p.samples, 4000) << alg;
    EXPECT_EQ(p.count, 2) << alg;
  }
  EXPECT_LT(r.point("paper-4.2-nonoise/RLS", 1000).mean_AB, 1e-6);
}
