#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include <nlohmann/json.hpp>

#include "bess/analysis.hpp"
#include "bess/load_profile.hpp"
#include "oracles.hpp"

using namespace bess;

namespace {

LoadProfile small_year(double scale = 1.0) {
  SyntheticLoadSpec spec;
  spec.days = 3;
  spec.base_w = 4e6;
  spec.valley_depth_w = 2e6;
  spec.morning_peak_w = 1.5e6;
  spec.evening_peak_w = 2e6;
  auto p = synth_load(spec, 5);
  for (auto& v : p.values_w) v *= scale;
  return p;
}

} // namespace

TEST_SUITE("analysis") {

TEST_CASE("box stats examples") {
  const std::vector<double> five = {5, 3, 1, 4, 2};
  const auto b = box_stats(five);
  CHECK(b.min == 1);
  CHECK(b.median == 3);
  CHECK(b.max == 5);
  const std::vector<double> c(7, 2.5);
  const auto bc = box_stats(c);
  CHECK(bc.min == 2.5);
  CHECK(bc.q1 == 2.5);
  CHECK(bc.q3 == 2.5);
  std::vector<double> hundred(100);
  std::iota(hundred.begin(), hundred.end(), 1.0);
  const auto bh = box_stats(hundred);
  CHECK(bh.q1 == doctest::Approx(25.75));
  CHECK(bh.q3 == doctest::Approx(75.25));
  CHECK(bh.median == doctest::Approx(50.5));
  CHECK_THROWS(box_stats(std::vector<double>{}));
}

TEST_CASE("quantiles match the order-statistic oracle") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g(0.0, 10.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> v(1 + trial * 3);
    for (auto& x : v) x = g(rng);
    auto s = v;
    std::sort(s.begin(), s.end());
    const auto b = box_stats(v);
    CHECK(b.q1 == doctest::Approx(oracle::quantile(s, 0.25)));
    CHECK(b.median == doctest::Approx(oracle::quantile(s, 0.5)));
    CHECK(b.q3 == doctest::Approx(oracle::quantile(s, 0.75)));
    CHECK(b.min <= b.q1);
    CHECK(b.q1 <= b.median);
    CHECK(b.median <= b.q3);
    CHECK(b.q3 <= b.max);
  }
}

TEST_CASE("depth sweep energy identities") {
  const auto load = small_year();
  DepthSweepOptions o;
  o.threads = 2;
  const auto reports = depth_sweep(load, {0.5e6, 1e6}, ClusterParams{}, o);
  REQUIRE(reports.size() == 2);
  CHECK(reports[0].cluster_count == 10);
  CHECK(reports[1].cluster_count == 20);
  for (const auto& r : reports) {
    CHECK(r.operating_samples > 0);
    CHECK(std::abs(r.e_loss_wh - (r.e_ss_wh + r.e_ts_wh)) <= 1e-9 * r.e_loss_wh);
    CHECK(r.e_ts_wh <= 0.0);
    CHECK(r.ts_reduction_fraction == doctest::Approx(std::abs(r.e_ts_wh) / r.e_ss_wh));
    double s = 0.0;
    for (double x : r.component_shares) {
      CHECK(x >= 0.0);
      CHECK(x <= 1.0);
      s += x;
    }
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.p_clu_stats.max <= 50000.0 * (1 + 1e-9));
    CHECK(r.p_clu_stats.min >= -50000.0 * (1 + 1e-9));
  }
  CHECK_THROWS(depth_sweep(load, {0.525e6 + 1.0}, ClusterParams{}, o));
  CHECK_THROWS(depth_sweep(load, {-1e6}, ClusterParams{}, o));
}

TEST_CASE("steady-state energy ignores idle samples") {
  const auto load = small_year();
  auto cfg = PlantConfig::uniform(10);
  Plant plant(cfg);
  SimulationOptions so;
  so.record_steps = true;
  so.schedule.power_depth_w = 0.5e6;
  const auto sim = simulate(load, plant, so);
  double all = 0.0, operating = 0.0;
  for (const auto& s : sim.steps) {
    all += s.cluster_ss_w * sim.dt_s / 3600.0 * 10.0;
    if (s.cluster_power_w != 0.0) operating += s.cluster_ss_w * sim.dt_s / 3600.0 * 10.0;
  }
  CHECK(all == operating);
  CHECK(all == doctest::Approx(plant.cumulative().battery_steady_wh).epsilon(1e-9));
}

TEST_CASE("transient fraction is invariant to duplicating the plant") {
  DepthSweepOptions o;
  const auto a = depth_sweep(small_year(1.0), {0.5e6}, ClusterParams{}, o);
  const auto b = depth_sweep(small_year(2.0), {1e6}, ClusterParams{}, o);
  CHECK(b[0].ts_reduction_fraction == doctest::Approx(a[0].ts_reduction_fraction).epsilon(1e-6));
  CHECK(b[0].p_clu_stats.median == doctest::Approx(a[0].p_clu_stats.median).epsilon(1e-6));
}

TEST_CASE("constant full power collapses the cluster power box") {
  SimulationResult sim;
  sim.dt_s = 60.0;
  for (int i = 0; i < 50; ++i) {
    StepRecord s;
    s.cluster_power_w = 50000.0;
    s.cluster_loss_w = s.cluster_ss_w = 1000.0;
    sim.steps.push_back(s);
  }
  sim.steps.push_back({});
  Plant plant(PlantConfig::uniform(2));
  const auto r = summarize_depth(sim, plant, 1e5);
  CHECK(r.operating_samples == 50);
  CHECK(r.p_clu_stats.min == 50000.0);
  CHECK(r.p_clu_stats.max == 50000.0);
  CHECK(r.dp_dt_stats.min == 0.0);
  CHECK(r.dp_dt_stats.max == 0.0);
}

TEST_CASE("step efficiency") {
  CHECK(*step_efficiency(10.0, 9.0) == doctest::Approx(0.9));
  CHECK(*step_efficiency(-9.0, -10.0) == doctest::Approx(0.9));
  CHECK_FALSE(step_efficiency(0.0, 0.0).has_value());
  CHECK_FALSE(step_efficiency(10.0, -1.0).has_value());
}

TEST_CASE("scatter forms a band at equal power") {
  auto cfg = PlantConfig::uniform(1);
  Plant a(cfg), b(cfg);
  b.set_states({{0.5, {-60.0, 0.0}}});
  std::vector<StepRecord> steps;
  for (Plant* p : {&a, &b}) {
    const auto r = p->evaluate(40000.0, {{1.0}}, 60.0);
    StepRecord s;
    s.actual_w = r.p_actual_w;
    s.grid_wh = r.ledger.grid_wh;
    s.stored_wh = r.ledger.stored_wh;
    steps.push_back(s);
  }
  const auto sc = efficiency_scatter(steps);
  const auto& chr = sc[0].direction == FlowDirection::charge ? sc[0] : sc[1];
  REQUIRE(chr.points.size() == 2);
  CHECK(chr.points[0].power_w == doctest::Approx(chr.points[1].power_w));
  CHECK(std::abs(chr.points[0].efficiency - chr.points[1].efficiency) > 1e-6);
  for (const auto& p : chr.points) {
    CHECK(p.efficiency > 0.0);
    CHECK(p.efficiency < 1.0);
  }
  REQUIRE(chr.median_curve.size() == 1);
  CHECK(chr.median_curve[0].count == 2);
}

TEST_CASE("identical steps give a single scatter point") {
  StepRecord s;
  s.actual_w = -30000.0;
  s.grid_wh = -400.0;
  s.stored_wh = -480.0;
  std::vector<StepRecord> steps(5, s);
  const auto sc = efficiency_scatter(steps);
  const auto& dis = sc[0].direction == FlowDirection::discharge ? sc[0] : sc[1];
  CHECK(dis.points.size() == 5);
  REQUIRE(dis.median_curve.size() == 1);
  CHECK(dis.median_curve[0].median == doctest::Approx(400.0 / 480.0));
}

TEST_CASE("adding points at the median leaves it unchanged") {
  std::mt19937_64 rng(19);
  std::uniform_real_distribution<double> eff(0.6, 0.95), pw(0.0, 1e6);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<EfficiencyPoint> pts(5 + trial);
    for (auto& p : pts) p = {pw(rng), eff(rng)};
    const auto before = median_curve(pts, 1e5);
    auto more = pts;
    for (const auto& b : before)
      for (int k = 0; k < 3; ++k) more.push_back({0.5 * (b.lo_w + b.hi_w), b.median});
    const auto after = median_curve(more, 1e5);
    REQUIRE(after.size() == before.size());
    for (std::size_t i = 0; i < before.size(); ++i) {
      CHECK(after[i].median == doctest::Approx(before[i].median).epsilon(1e-15));
      CHECK(after[i].count == before[i].count + 3);
    }
  }
}

TEST_CASE("ledger report shares, totals and deltas") {
  Plant plant(PlantConfig::uniform(3));
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> cmd(-150000.0, 150000.0);
  for (int i = 0; i < 500; ++i) plant.step(cmd(rng), {{1.0 / 3, 1.0 / 3, 1.0 / 3}}, 60.0);
  const auto run = plant.cumulative();
  const auto r = component_ledger_report(run);
  double share = 0.0;
  for (const char* c : {"transformer", "acdc", "dcdc", "battery"}) share += ledger_row(r, c).share;
  CHECK(share == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(ledger_row(r, "battery").loss_wh ==
        doctest::Approx(ledger_row(r, "battery_ohmic").loss_wh + ledger_row(r, "battery_polarization").loss_wh));
  CHECK(ledger_row(r, "total").loss_wh == doctest::Approx(run.total_loss_wh()));
  CHECK(ledger_row(r, "total").efficiency ==
        doctest::Approx(ledger_row(r, "transformer").efficiency * ledger_row(r, "acdc").efficiency *
                        ledger_row(r, "dcdc").efficiency * ledger_row(r, "battery").efficiency));
  for (const auto& row : r.rows) {
    CHECK(row.efficiency > 0.0);
    CHECK(row.efficiency <= 1.0);
    CHECK_FALSE(row.delta_loss_wh.has_value());
  }
  CHECK_THROWS(ledger_row(r, "nope"));

  auto better = run;
  better.acdc_wh -= 10.0;
  better.grid_wh -= 10.0;
  const auto d = component_ledger_report(better, run);
  CHECK(*ledger_row(d, "acdc").delta_loss_wh == doctest::Approx(-10.0));
  CHECK(*ledger_row(d, "total").delta_loss_wh == doctest::Approx(-10.0));
  CHECK(*ledger_row(d, "transformer").delta_loss_wh == doctest::Approx(0.0));

  auto shorter = run;
  shorter.duration_s /= 2;
  CHECK_THROWS_AS(component_ledger_report(shorter, run), HorizonMismatch);

  nlohmann::json j = r;
  CHECK(j.at("rows").size() == r.rows.size());
}

TEST_CASE("zero-power day only pays the no-load loss") {
  Plant plant(PlantConfig::uniform(4));
  for (int i = 0; i < 1440; ++i) plant.step(0.0, {{0.25, 0.25, 0.25, 0.25}}, 60.0);
  const auto r = component_ledger_report(plant.cumulative());
  CHECK(ledger_row(r, "transformer").loss_wh == doctest::Approx(5000.0 * 24));
  CHECK(ledger_row(r, "transformer").share == doctest::Approx(1.0));
  for (const char* c : {"acdc", "dcdc", "battery"}) CHECK(ledger_row(r, c).loss_wh == 0.0);
}

} // TEST_SUITE
