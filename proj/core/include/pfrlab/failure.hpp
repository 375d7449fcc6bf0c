#pragma once

#include <stdexcept>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "pfrlab/rng.hpp"

namespace pfrlab {

// Health states, encoded 1..3 in observations and logs.
enum class Health : int { normal = 1, warning = 2, critical = 3 };

const char* to_string(Health h);
Health health_from_string(const std::string& s);

struct HealthState {
  Health kind = Health::normal;
  int warning_dwell = 0;  // slots spent in warning since entry, 0 outside warning
};

// One-slot transition probabilities. Normal never jumps straight to critical;
// critical is absorbing until a recovery completes.
struct TransitionConfig {
  double stay_normal = 0.95;    // normal -> normal
  double to_warning = 0.05;     // normal -> warning
  double stay_warning = 0.5;    // warning -> warning (after the dwell minimum)
  double to_critical = 0.25;    // warning -> critical, base value before escalation
  double to_normal = 0.25;      // warning -> normal
  int min_warning_dwell = 2;    // slots a fresh warning is forced to persist

  void validate() const;
  nlohmann::json to_json() const;
  static TransitionConfig from_json(const nlohmann::json& j);
};

// Sampling ranges for per-episode transition regimes.
struct FailureRanges {
  double warn_prob_min = 0.02;
  double warn_prob_max = 0.10;
  double critical_prob_min = 0.10;
  double critical_prob_max = 0.40;
  double repair_prob_min = 0.10;
  double repair_prob_max = 0.40;
  int min_warning_dwell = 2;

  void validate() const;
};

// Draws a fresh transition regime for an episode. stay_warning absorbs the
// remaining probability mass so the warning row sums to one exactly.
TransitionConfig sample_episode_config(const FailureRanges& ranges, Rng& rng);

// Effective warning->critical probability after `dwell` slots in warning.
// Grows linearly once the dwell minimum is met, clamped to 1.
double escalated_critical_prob(const TransitionConfig& cfg, int dwell);

// Advances one slot. A warning younger than the dwell minimum stays put; an
// eligible warning escalates: the extra critical mass is taken from
// stay_warning first, then from to_normal.
HealthState step_health(const HealthState& state, const TransitionConfig& cfg, Rng& rng);

// Completes a recovery: critical -> normal. Throws on any other state.
HealthState recover(const HealthState& state);

}  // namespace pfrlab
