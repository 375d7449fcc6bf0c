#include "pfrlab/failure.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

namespace pfrlab {

const char* to_string(Health h) {
  switch (h) {
    case Health::normal: return "normal";
    case Health::warning: return "warning";
    case Health::critical: return "critical";
  }
  return "unknown";
}

Health health_from_string(const std::string& s) {
  if (s == "normal") return Health::normal;
  if (s == "warning") return Health::warning;
  if (s == "critical") return Health::critical;
  throw std::invalid_argument("unknown health state: " + s);
}

void TransitionConfig::validate() const {
  auto in01 = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!in01(stay_normal) || !in01(to_warning) || !in01(stay_warning) ||
      !in01(to_critical) || !in01(to_normal)) {
    throw std::invalid_argument("transition probabilities must lie in [0, 1]");
  }
  if (std::abs(stay_normal + to_warning - 1.0) > 1e-12) {
    throw std::invalid_argument("normal-row probabilities must sum to 1");
  }
  if (std::abs(stay_warning + to_critical + to_normal - 1.0) > 1e-12) {
    throw std::invalid_argument("warning-row probabilities must sum to 1");
  }
  if (min_warning_dwell < 1) {
    throw std::invalid_argument("min_warning_dwell must be >= 1");
  }
}

nlohmann::json TransitionConfig::to_json() const {
  return {{"stay_normal", stay_normal},
          {"to_warning", to_warning},
          {"stay_warning", stay_warning},
          {"to_critical", to_critical},
          {"to_normal", to_normal},
          {"min_warning_dwell", min_warning_dwell}};
}

TransitionConfig TransitionConfig::from_json(const nlohmann::json& j) {
  TransitionConfig cfg;
  cfg.stay_normal = j.at("stay_normal").get<double>();
  cfg.to_warning = j.at("to_warning").get<double>();
  cfg.stay_warning = j.at("stay_warning").get<double>();
  cfg.to_critical = j.at("to_critical").get<double>();
  cfg.to_normal = j.at("to_normal").get<double>();
  cfg.min_warning_dwell = j.at("min_warning_dwell").get<int>();
  cfg.validate();
  return cfg;
}

void FailureRanges::validate() const {
  auto range_ok = [](double lo, double hi) {
    return lo >= 0.0 && hi <= 1.0 && lo <= hi;
  };
  if (!range_ok(warn_prob_min, warn_prob_max) ||
      !range_ok(critical_prob_min, critical_prob_max) ||
      !range_ok(repair_prob_min, repair_prob_max)) {
    throw std::invalid_argument("failure probability ranges must satisfy 0 <= min <= max <= 1");
  }
  if (critical_prob_max + repair_prob_max > 1.0 + 1e-12) {
    throw std::invalid_argument(
        "critical_prob_max + repair_prob_max must not exceed 1 (warning row simplex)");
  }
  if (min_warning_dwell < 1) throw std::invalid_argument("min_warning_dwell must be >= 1");
}

namespace {
// Snapping draws onto a dyadic grid keeps every row sum exactly 1.0 in any
// summation order (all terms are multiples of 2^-30, well within the
// double mantissa).
double quantize(double x) { return std::ldexp(std::round(std::ldexp(x, 30)), -30); }
}  // namespace

TransitionConfig sample_episode_config(const FailureRanges& ranges, Rng& rng) {
  ranges.validate();
  TransitionConfig cfg;
  cfg.to_warning = quantize(rng.uniform(ranges.warn_prob_min, ranges.warn_prob_max));
  cfg.stay_normal = 1.0 - cfg.to_warning;
  cfg.to_critical = quantize(rng.uniform(ranges.critical_prob_min, ranges.critical_prob_max));
  cfg.to_normal = quantize(rng.uniform(ranges.repair_prob_min, ranges.repair_prob_max));
  cfg.stay_warning = 1.0 - cfg.to_critical - cfg.to_normal;
  cfg.min_warning_dwell = ranges.min_warning_dwell;
  cfg.validate();
  return cfg;
}

double escalated_critical_prob(const TransitionConfig& cfg, int dwell) {
  const int over = std::max(0, dwell - cfg.min_warning_dwell);
  return std::min(1.0, cfg.to_critical * (1.0 + over));
}

HealthState step_health(const HealthState& state, const TransitionConfig& cfg, Rng& rng) {
  switch (state.kind) {
    case Health::normal: {
      if (rng.uniform01() < cfg.stay_normal) return {Health::normal, 0};
      return {Health::warning, 1};
    }
    case Health::warning: {
      if (state.warning_dwell < cfg.min_warning_dwell) {
        return {Health::warning, state.warning_dwell + 1};
      }
      const double p_crit = escalated_critical_prob(cfg, state.warning_dwell);
      const double extra = p_crit - cfg.to_critical;
      const double p_stay = std::max(0.0, cfg.stay_warning - extra);
      const double leftover = extra - (cfg.stay_warning - p_stay);
      const double p_norm = std::max(0.0, cfg.to_normal - leftover);
      const double u = rng.uniform01();
      if (u < p_stay) return {Health::warning, state.warning_dwell + 1};
      if (u < p_stay + p_crit) return {Health::critical, 0};
      (void)p_norm;
      return {Health::normal, 0};
    }
    case Health::critical:
      // Absorbing until the recovery procedure completes.
      return {Health::critical, 0};
  }
  throw std::logic_error("invalid health state");
}

HealthState recover(const HealthState& state) {
  if (state.kind != Health::critical) {
    throw std::logic_error("recover() called on a non-critical VNF");
  }
  return {Health::normal, 0};
}

}  // namespace pfrlab
