#include <doctest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "mlpath/mc.hpp"
#include "mlpath/models.hpp"

#include "oracles.hpp"

using namespace mlpath;

namespace {
const DriftModel kOu = preset_drift("ou", 1.0);
const DriftModel kZero = preset_drift("zero");
}  // namespace

TEST_CASE("simulate: deterministic Euler flow at eps = 0") {
  TimeGrid g(1.0, 10000);
  auto e = simulate(kOu, 0.0, g, 1, 5, 1.0);
  CHECK(e.paths.front().values.back() == doctest::Approx(std::exp(-1.0)).epsilon(1e-3));
  // Against an RK4 oracle rather than the closed form.
  CHECK(e.paths.front().values.back() ==
        doctest::Approx(oracles::rk4_flow(kOu.b, 1.0, 1.0, 1000)).epsilon(1e-3));
}

TEST_CASE("simulate: variance, determinism, scaling, threads") {
  TimeGrid g(1.0, 16);
  const std::int64_t n = 100000;
  auto e = simulate(kZero, 1.0, g, n, 42);
  REQUIRE(e.materialized);
  double mean = 0.0;
  for (const auto& p : e.paths) mean += p.values.back();
  mean /= n;
  double var = 0.0;
  for (const auto& p : e.paths) {
    const double d = p.values.back() - mean;
    var += d * d;
  }
  var /= (n - 1);
  CHECK(var == doctest::Approx(1.0).epsilon(0.02));

  auto e2 = simulate(kZero, 1.0, g, 100, 42);
  auto e3 = simulate(kZero, 1.0, g, 100, 42);
  for (std::size_t i = 0; i < 100; ++i)
    CHECK(e2.paths[i].values == e3.paths[i].values);

  // Matched seeds, doubled eps, zero drift: exact factor-2 paths.
  auto half = simulate(kZero, 0.5, g, 100, 42);
  for (std::size_t i = 0; i < 100; ++i)
    for (std::size_t j = 0; j < half.paths[i].values.size(); ++j)
      CHECK(e2.paths[i].values[j] == 2.0 * half.paths[i].values[j]);

  auto t1 = simulate(kOu, 0.7, g, 999, 7, 0.0, 1);
  auto t2 = simulate(kOu, 0.7, g, 999, 7, 0.0, 2);
  for (std::size_t i = 0; i < t1.paths.size(); ++i)
    CHECK(t1.paths[i].values == t2.paths[i].values);

  CHECK_THROWS_AS(simulate(kZero, 1.0, g, 0, 1), std::invalid_argument);
  CHECK_THROWS_AS(simulate(kZero, -1.0, g, 1, 1), std::invalid_argument);
}

TEST_CASE("small_ball_ratio basics") {
  TimeGrid g(1.0, 4);
  auto e = simulate(kZero, 1.0, g, 20000, 3);
  auto z = constant_path(g, 0.0);

  // Same center twice: the ratio is exactly one.
  auto same = small_ball_ratio(e, z, z, 0.5);
  CHECK(same.point_estimate == 1.0);
  CHECK(same.hits1 == same.hits2);
  CHECK(same.hits_both == same.hits1);

  // Far center: zero hits is a flag, not a crash.
  auto far = small_ball_ratio(e, constant_path(g, 50.0), z, 0.5);
  CHECK(far.flag_undefined);
  CHECK(far.hits1 == 0);

  auto tiny = small_ball_ratio(e, z, z, 1e-6);
  CHECK(tiny.flag_low_hits);

  TimeGrid g2(1.0, 5);
  CHECK_THROWS_AS(small_ball_ratio(e, constant_path(g2, 0.0), z, 0.5),
                  std::invalid_argument);
}

TEST_CASE("small_ball_ladder: streamed and materialized counting agree") {
  TimeGrid g(1.0, 4);
  auto e = simulate(kOu, 0.8, g, 30000, 17);
  REQUIRE(e.materialized);
  Ensemble streamed = e;
  streamed.materialized = false;
  streamed.paths.clear();
  auto z1 = linear_path(g, 0.0, 0.4);
  auto z2 = constant_path(g, 0.0);
  const std::vector<double> ladder{0.8, 0.6, 0.4};
  auto a = small_ball_ladder(e, z1, z2, ladder);
  auto b = small_ball_ladder(streamed, z1, z2, ladder);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].hits1 == b[i].hits1);
    CHECK(a[i].hits2 == b[i].hits2);
    CHECK(a[i].hits_both == b[i].hits_both);
  }

  // Counting is thread-count independent.
  auto c1 = small_ball_ladder(streamed, z1, z2, ladder, 1);
  auto c2 = small_ball_ladder(streamed, z1, z2, ladder, 2);
  for (std::size_t i = 0; i < c1.size(); ++i) {
    CHECK(c1[i].hits1 == c2[i].hits1);
    CHECK(c1[i].point_estimate == c2[i].point_estimate);
  }
}

TEST_CASE("small_ball_ratio: scalar Gaussian oracle coverage") {
  // One-interval grid: z(1) ~ N(0,1). Ratio of delta-balls at 1 and 0 has the
  // error-function closed form.
  TimeGrid g(1.0, 1);
  const double delta = 0.1;
  const double oracle = (oracles::normal_cdf(1.0 + delta) - oracles::normal_cdf(1.0 - delta)) /
                        (oracles::normal_cdf(delta) - oracles::normal_cdf(-delta));
  auto z1 = linear_path(g, 0.0, 1.0);
  auto z2 = constant_path(g, 0.0);

  auto e = simulate(kZero, 1.0, g, 400000, 2024);
  auto est = small_ball_ratio(e, z1, z2, delta);
  CHECK_FALSE(est.flag_undefined);
  CHECK(est.ci_low <= oracle);
  CHECK(oracle <= est.ci_high);

  // Coverage calibration across 50 seeds: the 95% interval must cover the
  // oracle at least 90% of the time.
  int covered = 0;
  for (std::uint64_t s = 0; s < 50; ++s) {
    auto trial = simulate(kZero, 1.0, g, 20000, 9000 + s);
    auto r = small_ball_ratio(trial, z1, z2, delta);
    if (!r.flag_undefined && r.ci_low <= oracle && oracle <= r.ci_high) ++covered;
  }
  CHECK(covered >= 45);
}

TEST_CASE("default delta ladder") {
  TimeGrid g(1.0, 4);
  auto ladder = default_delta_ladder(linear_path(g, 0.0, 1.0), constant_path(g, 0.0), 1.0);
  REQUIRE(ladder.size() == 4);
  CHECK(ladder[0] == doctest::Approx(0.8));
  CHECK(ladder[3] == doctest::Approx(0.3));
}

TEST_CASE("ldp_rate: terminal event against the Gaussian tail") {
  TimeGrid g(1.0, 16);
  const std::vector<double> eps{1.0, 0.7, 0.5};
  auto rate = ldp_rate(kZero, event_terminal_at_least(1.0), eps, 200000, 31, g);
  REQUIRE(rate.entries.size() == 3);
  for (const auto& e : rate.entries) {
    REQUIRE(e.defined);
    const double target = e.eps * e.eps * std::log(oracles::normal_tail(1.0 / e.eps));
    CHECK(std::fabs(e.scaled_log - target) <= 3.0 * e.se);
  }

  // Whole space: probability one, rate zero.
  auto trivial = ldp_rate(kZero, event_whole_space(), {1.0, 0.5, 0.25}, 1000, 1, g);
  for (const auto& e : trivial.entries) {
    CHECK(e.p_hat == 1.0);
    CHECK(e.scaled_log == 0.0);
  }
  CHECK(trivial.extrapolation_defined);
  CHECK(trivial.extrapolated == doctest::Approx(0.0));

  // Unreachable event at tiny eps: flagged, not fatal.
  auto flagged = ldp_rate(kZero, event_terminal_at_least(1.0), {1.0, 0.1}, 2000, 3, g);
  CHECK(flagged.entries[1].defined == false);
  CHECK(flagged.entries[1].p_hat == 0.0);
  CHECK(flagged.extrapolation_defined);  // falls back to the defined entries

  CHECK_THROWS_AS(ldp_rate(kZero, event_whole_space(), {0.5, 0.5}, 10, 1, g),
                  std::invalid_argument);
}

TEST_CASE("ldp_rate: sup event against the reflection principle") {
  TimeGrid g(1.0, 512);
  const std::vector<double> eps{1.0, 0.8};
  auto rate = ldp_rate(kZero, event_sup_at_least(1.0), eps, 100000, 77, g);
  for (const auto& e : rate.entries) {
    REQUIRE(e.defined);
    const double cont = e.eps * e.eps * std::log(2.0 * oracles::normal_tail(1.0 / e.eps));
    // Discrete monitoring undershoots the continuum barrier probability by
    // O(sqrt(dt)); allow that bias on top of the MC band.
    CHECK(std::fabs(e.scaled_log - cont) <= 3.0 * e.se + 0.06);
    CHECK(e.scaled_log <= cont + 3.0 * e.se);
  }
}

TEST_CASE("fw_infimum_over_event") {
  TimeGrid g(1.0, 200);
  CHECK(fw_infimum_over_event(kZero, EventShape::terminal_at_least, 1.0, g) ==
        doctest::Approx(0.5).epsilon(2e-4));
  CHECK(fw_infimum_over_event(kZero, EventShape::sup_at_least, 1.0, g) ==
        doctest::Approx(0.5).epsilon(2e-3));
  CHECK(fw_infimum_over_event(kZero, EventShape::terminal_at_least, 0.0, g) == 0.0);
  CHECK(fw_infimum_over_event(kZero, EventShape::sup_at_least, -1.0, g) == 0.0);

  // OU: cost of pinned transport to y grows like y^2, so the infimum over
  // {z(1) >= 1} is the pinned value at y = 1.
  const double pinned =
      (std::exp(2.0) - 1.0) / (4.0 * std::sinh(1.0) * std::sinh(1.0));
  CHECK(fw_infimum_over_event(kOu, EventShape::terminal_at_least, 1.0, g) ==
        doctest::Approx(pinned).epsilon(1e-3));
}

TEST_CASE("girsanov reweighting: unit mean") {
  TimeGrid g(1.0, 128);
  auto wm = girsanov_weight_mean(kOu, 1.0, g, 100000, 11);
  CHECK(std::fabs(wm.mean - 1.0) <= 3.0 * wm.se);
  CHECK(wm.se < 0.01);

  // Thread independence of the compensated reduction.
  auto a = girsanov_weight_mean(kOu, 0.5, g, 20000, 12, StochasticScheme::ito_left, 1);
  auto b = girsanov_weight_mean(kOu, 0.5, g, 20000, 12, StochasticScheme::ito_left, 2);
  CHECK(a.mean == b.mean);
  CHECK(a.se == b.se);
}

TEST_CASE("ensemble csv export") {
  TimeGrid g(1.0, 2);
  auto e = simulate(kZero, 1.0, g, 3, 1);
  std::ostringstream os;
  write_ensemble_csv(e, os);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  CHECK(line == "sample_id,t,value");
  int rows = 0;
  while (std::getline(is, line)) ++rows;
  CHECK(rows == 3 * 3);
}
