#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "pfrlab/failure.hpp"
#include "pfrlab/rng.hpp"

namespace pfrlab {

struct MonitoringConfig {
  double slot_duration = 1.0;    // AoI increment per slot (normalized)
  double max_age_normal = 2.0;   // scheduling threshold per state, in ages
  double max_age_warning = 2.0;
  double max_age_critical = 1.0;
  double report_loss_prob = 0.0;
  double age_cap = 8.0;          // observation encoding cap; the infinity
                                 // sentinel maps onto this value

  double max_age(Health h) const {
    switch (h) {
      case Health::normal: return max_age_normal;
      case Health::warning: return max_age_warning;
      case Health::critical: return max_age_critical;
    }
    return max_age_normal;
  }
  void validate() const;
};

// Event-triggered plus schedule-based reporting with per-VNF age tracking.
// Age starts at infinity (nothing reported yet), drops to one slot duration
// on a delivered report and grows by one slot duration otherwise.
class AoiTracker {
 public:
  AoiTracker(int vnf_count, MonitoringConfig cfg);

  // Called once per slot, after health transitions. A VNF reports when its
  // state differs from the last tick's state or when its age would otherwise
  // exceed the current state's threshold. Reports are dropped independently
  // with the configured loss probability. Returns the delivered-report set.
  std::vector<bool> tick(const std::vector<Health>& true_states, Rng& rng);

  // Number of VNFs whose age exceeds the threshold of their current state.
  int freshness_violations(const std::vector<Health>& true_states) const;

  double age(int v) const { return age_.at(v); }
  bool ever_reported(int v) const { return last_reported_[v].has_value(); }
  std::optional<Health> last_reported(int v) const { return last_reported_.at(v); }
  int vnf_count() const { return static_cast<int>(age_.size()); }
  const MonitoringConfig& config() const { return cfg_; }

 private:
  MonitoringConfig cfg_;
  std::vector<double> age_;                        // +inf until first report
  std::vector<std::optional<Health>> last_reported_;
  std::vector<std::optional<Health>> last_seen_;   // state at the previous tick
};

// Fixed observation layout, versioned via a schema hash so checkpoints can
// refuse mismatched inputs. Per VNF: reported-state one-hot (3), normalized
// age (1), backup flag (1), normalized statelet backlog (1); then one
// available-ratio entry per (node, resource type).
struct ObservationSchema {
  int version = 1;
  int vnf_count = 0;
  int node_count = 0;
  int resource_types = 0;
  double age_cap = 8.0;
  double backlog_cap_slots = 10.0;

  int length() const { return vnf_count * 6 + node_count * resource_types; }
  std::string canonical() const;
  std::uint64_t hash() const;
  nlohmann::json to_json() const;
};

struct ObservationInputs {
  const AoiTracker* tracker = nullptr;
  const std::vector<bool>* has_backup = nullptr;
  const std::vector<double>* backlog_slots = nullptr;  // backlog / one slot's statelet volume
  const std::vector<double>* node_ratios = nullptr;    // node-major, resource-minor
};

std::vector<double> build_observation(const ObservationSchema& schema,
                                      const ObservationInputs& in);

}  // namespace pfrlab
