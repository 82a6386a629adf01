#include "sprcfd/harness.hpp"

#include <gtest/gtest.h>

#include <cstring>
#include <sstream>

namespace sprcfd::harness {
namespace {

// Scaled-down setup: 1 s rotor period, 80 s runs, fault at 50 s.
RunConfig small(Mode mode, std::uint64_t seed = 1) {
  RunConfig c;
  c.mode = mode;
  c.load_case = plant::LoadCaseId::LC3;
  c.plant.rotor_period_samples = 100;
  c.sprc.period = 100;
  c.sprc.past_window = 20;
  c.duration = 80.0;
  c.fault_time = 50.0;
  c.tune.max_duration = 80.0;
  c.metrics.window = 20.0;
  c.seed = seed;
  c.validate();
  return c;
}

bool same_rows(const TimeSeries& a, const TimeSeries& b) {
  if (a.rows.size() != b.rows.size()) return false;
  for (std::size_t i = 0; i < a.rows.size(); ++i)
    if (std::memcmp(a.rows[i].data(), b.rows[i].data(), sizeof(Row)) != 0) return false;
  return true;
}

TEST(Config, Defaults) {
  const auto c = parse_config(json::object());
  EXPECT_EQ(c.mode, Mode::Proposed);
  EXPECT_EQ(c.load_case, plant::LoadCaseId::LC3);
  EXPECT_EQ(c.samples(), 140000);
  EXPECT_EQ(c.fault_sample(), 90000);
  EXPECT_EQ(c.period(), 625);
  EXPECT_EQ(c.sprc.past_window, 100);
  ASSERT_TRUE(c.fault);
  EXPECT_EQ(c.fault_descriptor()->stuck_angle, 10.0);
  EXPECT_EQ(c.fault_descriptor()->blade, 3);
}

TEST(Config, ParsesSections) {
  const auto c = parse_config(json::parse(R"({
    "mode": "sprc_only", "load_case": "LC1", "seed": 7, "fault": {"blade": 2, "stuck_angle": 15},
    "sprc": {"p": 50, "Q_diag": [1,1,1,2,2,2], "R_diag": [0.5, 0.5], "beta": 0.2},
    "fdi": {"noise_interpretation": "std"}, "prbs": {"amplitude": 1.0}
  })"));
  EXPECT_EQ(c.mode, Mode::SprcOnly);
  EXPECT_EQ(c.load_case, plant::LoadCaseId::LC1);
  EXPECT_EQ(c.seed, 7u);
  EXPECT_EQ(c.fault->blade, 2);
  EXPECT_EQ(c.fault_descriptor()->stuck_angle, 15.0);
  EXPECT_EQ(c.sprc.past_window, 50);
  EXPECT_EQ(c.sprc.Q(4, 4), 2.0);
  EXPECT_EQ(c.sprc.R(1, 1), 0.5);
  EXPECT_EQ(c.fdi.noise_std(), 1.5);
  EXPECT_EQ(c.prbs.amplitude, 1.0);
}

TEST(Config, NoiseVarianceInterpretation) {
  const auto c = parse_config(json::object());
  EXPECT_NEAR(c.fdi.noise_std(), std::sqrt(1.5), 1e-15);
}

TEST(Config, NullFaultMeansHealthy) {
  const auto c = parse_config(json::parse(R"({"fault": null, "mode": "baseline"})"));
  EXPECT_FALSE(c.fault);
  EXPECT_FALSE(c.fault_descriptor());
}

TEST(Config, RejectsBadInput) {
  EXPECT_THROW(parse_config(json::parse(R"({"typo": 1})")), std::invalid_argument);
  EXPECT_THROW(parse_config(json::parse(R"({"sprc": {"lambda": 1}})")), std::invalid_argument);
  EXPECT_THROW(parse_config(json::parse(R"({"sprc": {"Q_diag": [1,2]}})")), std::invalid_argument);
  EXPECT_THROW(parse_config(json::parse(R"({"fault": {"blade": 4}})")), std::invalid_argument);
  EXPECT_THROW(parse_config(json::parse(R"({"fault_time": 2000})")), std::invalid_argument);
  EXPECT_THROW(parse_config(json::parse(R"({"load_case": "LC9"})")), std::invalid_argument);
  EXPECT_THROW(parse_config(json::parse(R"({"mode": "fast"})")), std::invalid_argument);
}

TEST(Config, JsonRoundTrip) {
  auto c = small(Mode::SprcOnly, 5);
  c.fault->stuck_angle = 12.5;
  const auto back = parse_config(config_to_json(c));
  EXPECT_EQ(config_to_json(back), config_to_json(c));
  EXPECT_EQ(config_hash(back), config_hash(c));
}

TEST(Config, HashIgnoresSeedModeAndTiming) {
  const auto a = small(Mode::SprcOnly, 1);
  auto b = small(Mode::Proposed, 2);
  b.duration = 70.0;
  EXPECT_EQ(config_hash(a), config_hash(b));
  b.sprc.beta = 0.2;
  EXPECT_NE(config_hash(a), config_hash(b));
  auto c = small(Mode::SprcOnly, 1);
  c.load_case = plant::LoadCaseId::LC1;
  EXPECT_NE(config_hash(a), config_hash(c));
}

TEST(Metrics, VarianceAndReduction) {
  EXPECT_DOUBLE_EQ(variance(std::vector<double>{1, 3}), 1.0);
  EXPECT_THROW(variance(std::vector<double>{1}), std::invalid_argument);
  std::array<std::vector<double>, kBlades> base, half, same;
  for (int l = 0; l < kBlades; ++l)
    for (int i = 0; i < 100; ++i) {
      const double v = (i % 2 ? 1.0 : -1.0) * (l + 1);
      base[l].push_back(v);
      half[l].push_back(0.5 * v);
      same[l].push_back(v);
    }
  const auto m = load_reduction_metrics(half, base);
  for (int l = 0; l < kBlades; ++l) EXPECT_NEAR(m.per_blade[l], 75.0, 1e-12);
  EXPECT_NEAR(m.cumulative, 75.0, 1e-12);
  EXPECT_NEAR(load_reduction_metrics(same, base).cumulative, 0.0, 1e-12);
  const auto ex = load_reduction_metrics(half, base, 3);
  EXPECT_FALSE(ex.included[2]);
  EXPECT_TRUE(std::isnan(ex.per_blade[2]));
  auto flat = base;
  for (auto& v : flat) std::fill(v.begin(), v.end(), 2.0);
  EXPECT_THROW(load_reduction_metrics(half, flat), std::invalid_argument);
}

TEST(Metrics, ConvergenceTime) {
  std::vector<Vector> th(20, Vector::Constant(2, 1.0));
  auto r = convergence_time(th, 0, 0, 0.01, 0.1, 5);
  EXPECT_TRUE(r.degenerate);
  ASSERT_TRUE(r.periods);
  EXPECT_EQ(*r.periods, 0);

  std::vector<Vector> g;
  for (int j = 0; j < 40; ++j) g.push_back(Vector::Constant(2, 1.0 - std::pow(0.5, j)));
  r = convergence_time(g, 0, 2, 0.01, 0.1, 3);
  EXPECT_FALSE(r.degenerate);
  ASSERT_TRUE(r.period);
  // 0.5^(j+1) < 0.01 (1 - 0.5^j) first holds at j = 6
  EXPECT_EQ(*r.period, 6);
  EXPECT_EQ(*r.periods, 6);

  std::vector<Vector> osc;
  for (int j = 0; j < 40; ++j) osc.push_back(Vector::Constant(2, j % 2 ? 1.0 : 1.1));
  EXPECT_FALSE(convergence_time(osc, 0, 0, 0.01, 0.1, 3).periods);
}

class SmallRuns : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    baseline_ = new SimulationResult(run_simulation(small(Mode::Baseline)));
    sprc_only_ = new SimulationResult(run_simulation(small(Mode::SprcOnly)));
  }
  static void TearDownTestSuite() {
    delete baseline_;
    delete sprc_only_;
  }
  static SimulationResult* baseline_;
  static SimulationResult* sprc_only_;
};
SimulationResult* SmallRuns::baseline_ = nullptr;
SimulationResult* SmallRuns::sprc_only_ = nullptr;

TEST_F(SmallRuns, BaselineHasNoSprcContribution) {
  for (const auto& r : baseline_->series.rows) {
    for (int l = 0; l < kBlades; ++l) {
      EXPECT_EQ(r[col::sprc1 + l], 0.0);
      EXPECT_EQ(r[col::theta1s + 2 * l], 0.0);
    }
    if (r[col::k] < 5000) {
      EXPECT_EQ(r[col::uref1], 19.0);
    }
  }
}

TEST_F(SmallRuns, DetectsTheStuckBlade) {
  for (const auto* res : {baseline_, sprc_only_}) {
    EXPECT_EQ(res->report.d_fd, 3);
    ASSERT_TRUE(res->report.detection_delay);
    EXPECT_GE(*res->report.detection_delay, 0);
    EXPECT_LT(*res->report.detection_delay, 100);
    EXPECT_FALSE(res->report.false_alarm);
  }
}

TEST_F(SmallRuns, StuckBladeHoldsItsAngle) {
  const auto& rows = sprc_only_->series.rows;
  for (std::size_t k = 5000; k < rows.size(); ++k) EXPECT_EQ(rows[k][col::utilde3], 10.0);
}

TEST_F(SmallRuns, SprcReducesHealthyLoads) {
  const auto wb = baseline_->report.window_begin, we = baseline_->report.window_end;
  const auto red = load_reduction_metrics(window_loads(sprc_only_->series, wb, we),
                                          window_loads(baseline_->series, wb, we), 3);
  EXPECT_GT(red.cumulative, 40.0);
}

TEST_F(SmallRuns, CsvRoundTripIsExact) {
  std::stringstream ss;
  write_csv(ss, sprc_only_->series);
  const auto back = read_csv(ss);
  EXPECT_TRUE(same_rows(back, sprc_only_->series));
  EXPECT_EQ(back.meta.mode, Mode::SprcOnly);
  EXPECT_EQ(back.meta.k0, 5000);
  EXPECT_EQ(back.meta.P, 100);
  EXPECT_EQ(back.meta.fault_blade, 3);
  const auto rep = compute_report(back, small(Mode::SprcOnly).metrics);
  EXPECT_EQ(report_to_json(rep), report_to_json(sprc_only_->report));
}

TEST_F(SmallRuns, CsvRejectsGarbage) {
  std::stringstream bad("k,t\n1,2\n");
  EXPECT_THROW(read_csv(bad), std::runtime_error);
  std::stringstream ss;
  write_csv(ss, baseline_->series);
  std::string text = ss.str();
  text += "1,2,3\n";
  std::stringstream trunc(text);
  EXPECT_THROW(read_csv(trunc), std::runtime_error);
}

TEST_F(SmallRuns, DeterministicPerSeed) {
  const auto again = run_simulation(small(Mode::SprcOnly));
  EXPECT_TRUE(same_rows(again.series, sprc_only_->series));
  const auto other = run_simulation(small(Mode::SprcOnly, 2));
  EXPECT_FALSE(same_rows(other.series, sprc_only_->series));
}

TEST_F(SmallRuns, ForkMatchesGenuineProposedRun) {
  // Any bank entry with matching dimensions exercises the switch path.
  const auto cfg = small(Mode::SprcOnly);
  Simulator probe(cfg);
  probe.run_until(cfg.fault_sample());
  supervisor::BankEntry e;
  e.fault_index = 3;
  e.load_case = cfg.load_case;
  e.config_hash = config_hash(cfg);
  e.P = cfg.sprc.period;
  e.p = cfg.sprc.past_window;
  e.forgetting = cfg.sprc.forgetting;
  for (int l = 0; l < kBlades; ++l) {
    e.xi[l] = probe.controller()->markov().row(l);
    e.theta[l] = probe.controller()->law(l).theta;
  }
  auto bank = std::make_shared<supervisor::PretunedBank>();
  bank->put(e);

  auto pcfg = cfg;
  pcfg.mode = Mode::Proposed;
  auto genuine = run_simulation(pcfg, bank);
  ASSERT_GE(genuine.series.meta.switch_sample, 0);

  Simulator sim(cfg, bank);
  while (!sim.finished() && sim.fdi().decision().d_fd == 0) sim.step();
  Simulator fork = sim;
  fork.set_mode(Mode::Proposed);
  fork.run();
  auto forked = finish(fork);
  EXPECT_EQ(forked.series.meta.switch_sample, genuine.series.meta.switch_sample);
  EXPECT_TRUE(same_rows(forked.series, genuine.series));

  sim.run();
  EXPECT_TRUE(same_rows(finish(sim).series, sprc_only_->series));
}

TEST(Simulator, ProposedNeedsBank) {
  EXPECT_THROW(Simulator(small(Mode::Proposed)), std::invalid_argument);
  auto healthy = small(Mode::Proposed);
  healthy.fault.reset();
  EXPECT_NO_THROW(Simulator{healthy});
}

TEST(Simulator, SetModeRestrictions) {
  Simulator b(small(Mode::Baseline));
  EXPECT_THROW(b.set_mode(Mode::SprcOnly), std::invalid_argument);
  Simulator s(small(Mode::SprcOnly));
  EXPECT_THROW(s.set_mode(Mode::Proposed), std::invalid_argument);
}

TEST(Simulator, MissingBankEntryKeepsRunning) {
  auto cfg = small(Mode::Proposed);
  auto res = run_simulation(cfg, std::make_shared<supervisor::PretunedBank>());
  ASSERT_TRUE(res.events.switch_event);
  EXPECT_FALSE(res.events.switch_event->applied);
  EXPECT_LT(res.series.meta.switch_sample, 0);
  EXPECT_EQ(res.series.rows.size(), 8000u);
}

TEST(Simulator, NoiseFreeSurrogateRejectsOnePerRev) {
  auto cfg = small(Mode::SprcOnly);
  cfg.fault.reset();
  cfg.plant.noise_enabled = false;
  cfg.fdi.noise_enabled = false;
  cfg.duration = 120.0;
  cfg.fault_time = 100.0;
  cfg.prbs.in_baseline = false;
  auto base = cfg;
  base.mode = Mode::Baseline;
  const auto a = run_simulation(base);
  const auto b = run_simulation(cfg);
  for (int l = 0; l < kBlades; ++l) EXPECT_LT(b.report.blades[l].psd_1p, 0.1 * a.report.blades[l].psd_1p) << l;
}

}  // namespace
}  // namespace sprcfd::harness
