#include <doctest.h>

#include <array>
#include <cmath>

#include <nlohmann/json.hpp>

#include "pfrlab/failure.hpp"

using namespace pfrlab;

TEST_CASE("sampled warning row sums to one exactly") {
  FailureRanges ranges;
  Rng rng(3);
  for (int i = 0; i < 100; ++i) {
    const TransitionConfig cfg = sample_episode_config(ranges, rng);
    CHECK(cfg.stay_warning + cfg.to_critical + cfg.to_normal == 1.0);
    CHECK(cfg.stay_normal + cfg.to_warning == 1.0);
  }
}

TEST_CASE("sampler is deterministic for a fixed seed") {
  FailureRanges ranges;
  Rng a(10), b(10);
  const TransitionConfig c1 = sample_episode_config(ranges, a);
  const TransitionConfig c2 = sample_episode_config(ranges, b);
  CHECK(c1.to_warning == c2.to_warning);
  CHECK(c1.to_critical == c2.to_critical);
  CHECK(c1.to_normal == c2.to_normal);
}

TEST_CASE("sampled probabilities concentrate on the range midpoints") {
  // Monte-Carlo oracle over the sampler itself.
  FailureRanges ranges;
  Rng rng(1234);
  const int draws = 10000;
  double warn = 0.0, crit = 0.0, rep = 0.0;
  for (int i = 0; i < draws; ++i) {
    const TransitionConfig cfg = sample_episode_config(ranges, rng);
    warn += cfg.to_warning;
    crit += cfg.to_critical;
    rep += cfg.to_normal;
  }
  CHECK(std::abs(warn / draws - (0.02 + 0.10) / 2) < 0.02);
  CHECK(std::abs(crit / draws - (0.10 + 0.40) / 2) < 0.02);
  CHECK(std::abs(rep / draws - (0.10 + 0.40) / 2) < 0.02);
}

TEST_CASE("invalid ranges are rejected at load") {
  FailureRanges ranges;
  ranges.critical_prob_max = 0.7;
  ranges.repair_prob_max = 0.7;  // warning row could go negative
  CHECK_THROWS_AS(ranges.validate(), std::invalid_argument);
  FailureRanges bad;
  bad.warn_prob_min = 0.5;
  bad.warn_prob_max = 0.2;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("degenerate stay probability pins the state") {
  TransitionConfig cfg;
  cfg.stay_normal = 1.0;
  cfg.to_warning = 0.0;
  Rng rng(8);
  HealthState s;
  for (int i = 0; i < 50; ++i) {
    s = step_health(s, cfg, rng);
    CHECK(s.kind == Health::normal);
  }
}

TEST_CASE("fresh warnings are forced to persist for the dwell minimum") {
  TransitionConfig cfg;
  cfg.min_warning_dwell = 2;
  Rng rng(8);
  HealthState s{Health::warning, 1};
  for (int i = 0; i < 200; ++i) {
    const HealthState next = step_health(s, cfg, rng);
    CHECK(next.kind == Health::warning);  // dwell 1 < 2, forced
    CHECK(next.warning_dwell == 2);
  }
}

TEST_CASE("escalated critical probability follows the linear growth rule") {
  TransitionConfig cfg;
  cfg.to_critical = 0.2;
  cfg.min_warning_dwell = 2;
  CHECK(escalated_critical_prob(cfg, 2) == doctest::Approx(0.2));
  CHECK(escalated_critical_prob(cfg, 3) == doctest::Approx(0.4));
  CHECK(escalated_critical_prob(cfg, 4) == doctest::Approx(0.6));
  CHECK(escalated_critical_prob(cfg, 7) == doctest::Approx(1.0));  // clamped
}

TEST_CASE("escalation empirically yields the effective critical probability") {
  // Monte-Carlo over one step from (warning, dwell 4) with base 0.2.
  TransitionConfig cfg;
  cfg.stay_warning = 0.5;
  cfg.to_critical = 0.2;
  cfg.to_normal = 0.3;
  cfg.min_warning_dwell = 2;
  Rng rng(99);
  const int draws = 100000;
  int criticals = 0;
  for (int i = 0; i < draws; ++i) {
    const HealthState next = step_health({Health::warning, 4}, cfg, rng);
    if (next.kind == Health::critical) ++criticals;
  }
  CHECK(std::abs(double(criticals) / draws - 0.6) < 0.01);
}

TEST_CASE("escalation mass is taken from staying first, then from repair") {
  TransitionConfig cfg;
  cfg.stay_warning = 0.2;
  cfg.to_critical = 0.3;
  cfg.to_normal = 0.5;
  cfg.min_warning_dwell = 1;
  // dwell 2: extra = 0.3, removes all of stay (0.2) and 0.1 of repair.
  Rng rng(4);
  const int draws = 200000;
  std::array<int, 3> counts{};  // warning, critical, normal
  for (int i = 0; i < draws; ++i) {
    const HealthState next = step_health({Health::warning, 2}, cfg, rng);
    if (next.kind == Health::warning) ++counts[0];
    if (next.kind == Health::critical) ++counts[1];
    if (next.kind == Health::normal) ++counts[2];
  }
  CHECK(std::abs(counts[0] / double(draws) - 0.0) < 0.005);
  CHECK(std::abs(counts[1] / double(draws) - 0.6) < 0.005);
  CHECK(std::abs(counts[2] / double(draws) - 0.4) < 0.005);
}

TEST_CASE("critical is absorbing until recovery") {
  TransitionConfig cfg;
  Rng rng(6);
  HealthState s{Health::critical, 0};
  for (int i = 0; i < 100; ++i) {
    s = step_health(s, cfg, rng);
    CHECK(s.kind == Health::critical);
  }
  const HealthState recovered = recover(s);
  CHECK(recovered.kind == Health::normal);
  CHECK(recovered.warning_dwell == 0);
}

TEST_CASE("recover rejects non-critical states") {
  CHECK_THROWS_AS(recover({Health::normal, 0}), std::logic_error);
  CHECK_THROWS_AS(recover({Health::warning, 2}), std::logic_error);
}

TEST_CASE("recovered VNF persists under a pinned normal row") {
  TransitionConfig cfg;
  cfg.stay_normal = 1.0;
  cfg.to_warning = 0.0;
  Rng rng(2);
  HealthState s = recover({Health::critical, 0});
  s = step_health(s, cfg, rng);
  CHECK(s.kind == Health::normal);
}

TEST_CASE("no trajectory contains a direct normal to critical step") {
  FailureRanges ranges;
  Rng cfg_rng(21);
  Rng rng(22);
  for (int episode = 0; episode < 20; ++episode) {
    const TransitionConfig cfg = sample_episode_config(ranges, cfg_rng);
    HealthState s;
    Health prev = s.kind;
    for (int t = 0; t < 2000; ++t) {
      s = step_health(s, cfg, rng);
      if (prev == Health::normal) CHECK(s.kind != Health::critical);
      if (s.kind == Health::critical) s = recover(s);  // keep the chain moving
      prev = s.kind;
    }
  }
}

TEST_CASE("every completed warning run lasts at least the dwell minimum") {
  FailureRanges ranges;
  Rng cfg_rng(31);
  Rng rng(32);
  const TransitionConfig cfg = sample_episode_config(ranges, cfg_rng);
  HealthState s;
  int run = 0;
  for (int t = 0; t < 50000; ++t) {
    const HealthState next = step_health(s, cfg, rng);
    if (next.kind == Health::warning) {
      ++run;
    } else {
      if (run > 0) CHECK(run >= cfg.min_warning_dwell);
      run = 0;
    }
    s = next.kind == Health::critical ? recover(next) : next;
  }
}

TEST_CASE("conditional critical frequency is non-decreasing in dwell") {
  TransitionConfig cfg;
  cfg.stay_warning = 0.6;
  cfg.to_critical = 0.15;
  cfg.to_normal = 0.25;
  cfg.min_warning_dwell = 2;
  Rng rng(55);
  const int draws = 200000;
  double prev_rate = -1.0;
  for (int dwell = 2; dwell <= 8; ++dwell) {
    int crit = 0;
    for (int i = 0; i < draws; ++i) {
      if (step_health({Health::warning, dwell}, cfg, rng).kind == Health::critical) ++crit;
    }
    const double rate = double(crit) / draws;
    CHECK(rate >= prev_rate - 0.01);
    prev_rate = rate;
  }
  CHECK(prev_rate > 0.95);  // saturated by dwell 8 with base 0.15
}

TEST_CASE("one-step frequencies from normal match the configured row") {
  TransitionConfig cfg;
  cfg.stay_normal = 0.93;
  cfg.to_warning = 0.07;
  Rng rng(61);
  const int draws = 100000;
  int warns = 0;
  for (int i = 0; i < draws; ++i) {
    if (step_health({Health::normal, 0}, cfg, rng).kind == Health::warning) ++warns;
  }
  CHECK(std::abs(double(warns) / draws - 0.07) < 0.02);
}

TEST_CASE("transition config serializes and round trips") {
  TransitionConfig cfg;
  cfg.stay_normal = 0.9;
  cfg.to_warning = 0.1;
  const TransitionConfig back = TransitionConfig::from_json(cfg.to_json());
  CHECK(back.stay_normal == cfg.stay_normal);
  CHECK(back.min_warning_dwell == cfg.min_warning_dwell);
}
