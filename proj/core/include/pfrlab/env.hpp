#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pfrlab/failure.hpp"
#include "pfrlab/monitoring.hpp"
#include "pfrlab/net_model.hpp"
#include "pfrlab/rng.hpp"

namespace pfrlab {

// Per-VNF action kinds. `place` = launch a backup instance and reroute
// (recovery steps one and two), `sync` = statelet synchronization (step
// three), `remove` = release the backup and its sync link.
enum class VnfAction : int { noop = 0, place = 1, remove = 2, sync = 3 };
constexpr int kActionArity = 4;

const char* to_string(VnfAction a);
VnfAction action_from_string(const std::string& s);

enum class RecoveryClass : int { none = 0, proactive = 1, reactive = 2 };
const char* to_string(RecoveryClass c);

struct RewardConfig {
  double sla_penalty_weight = 1.0;        // scales the unprotected-critical cost
  double false_alarm_penalty_weight = 1.0;
  double sla_cost_weight = 1.0;           // weights of the three cost terms
  double resource_cost_weight = 1.0;
  double false_alarm_cost_weight = 1.0;
  double bonus_remove_in_normal = 1.0;
  double bonus_place_in_warning = 1.0;
  double bonus_recover_in_critical = 1.0;
  double bonus_proactive_recovery = 100.0;
  double sync_slack_epsilon = 1e-6;       // non-critical delay bound guard

  void validate() const;
};

struct RewardBreakdown {
  double sla = 0.0;          // unprotected criticals, weighted
  double resource = 0.0;     // backup holding cost
  double false_alarm = 0.0;  // recovery-decision mismatches
  double cost = 0.0;         // negative weighted sum of the three terms
  double shaping = 0.0;      // behavior bonuses
  double total = 0.0;        // cost + shaping
};

struct StateletConfig {
  double bits_per_packet = 100.0;  // statelet volume per processed packet
  double seconds_per_slot = 1.0;
};

// Everything recorded about one VNF in one slot; the trajectory log and the
// accuracy metrics both read these fields.
struct VnfSlotRecord {
  Health true_state = Health::normal;
  int dwell = 0;                        // warning dwell of the true state
  std::optional<Health> reported;       // freshest delivered report
  double age = 0.0;                     // +inf encoded as null in the log
  bool reported_now = false;
  VnfAction action = VnfAction::noop;
  bool is_critical = false;             // cost-model critical indicator
  bool ran_recovery = false;            // recovery-decision indicator
  bool had_backup = false;              // backup existed at slot start
  bool has_backup = false;              // backup exists at slot end
  RecoveryClass recovery = RecoveryClass::none;
  bool infeasible = false;              // action degraded to a no-op
  bool placed = false;                  // a backup was allocated this slot
  bool released = false;                // a backup was released this slot
  double backlog_bits = 0.0;            // statelet backlog at slot end
  double sync_bandwidth_mbps = 0.0;     // granted sync bandwidth at slot end
  double recovery_delay_s = 0.0;        // sync delay of a completed recovery
  bool sla_delay_violated = false;      // recovery delay exceeded the budget
};

struct SlotRecord {
  int slot = 0;
  RewardBreakdown reward;
  std::vector<VnfSlotRecord> vnfs;
  int freshness_violations = 0;
};

struct SlotOutcome {
  std::vector<double> observation;
  RewardBreakdown reward;
  bool done = false;
  SlotRecord record;
};

struct EnvConfig {
  SubstrateConfig substrate;
  SfcConfig sfc;
  FailureRanges failure;
  MonitoringConfig monitoring;
  RewardConfig reward;
  StateletConfig statelet;
  int episode_length = 100;
  bool reuse_embedding = false;  // keep one embedding across episodes
  bool audit = false;            // scan network invariants every slot

  void validate() const;
  int vnf_count() const { return sfc.chains * sfc.vnfs_per_chain; }
  ObservationSchema observation_schema() const;
};

// Slot-stepped recovery environment. Each step runs the fixed phase order:
// health transitions, monitoring tick, per-VNF actions, statelet dynamics,
// reward, observation.
class RecoveryEnv {
 public:
  explicit RecoveryEnv(EnvConfig cfg, std::uint64_t seed = 1);

  SlotOutcome reset();
  SlotOutcome reset(std::uint64_t seed);
  SlotOutcome step(const std::vector<VnfAction>& actions);

  // Split-phase stepping: begin_slot() runs health transitions and the
  // monitoring tick and exposes the post-transition truth. This is the
  // privileged path used by oracle baselines and white-box tests; learned
  // policies go through step(), which sees only the monitored observation.
  const std::vector<HealthState>& begin_slot();
  SlotOutcome finish_slot(const std::vector<VnfAction>& actions);

  int slot() const { return slot_; }
  bool done() const { return slot_ >= cfg_.episode_length; }
  const EnvConfig& config() const { return cfg_; }
  const ObservationSchema& schema() const { return schema_; }
  const NetworkState& network_state() const { return state_; }
  const TransitionConfig& transitions() const { return transitions_; }
  const AoiTracker& tracker() const { return *tracker_; }
  const std::vector<HealthState>& true_health() const { return health_; }
  std::vector<bool> backup_flags() const;
  std::uint64_t episode_seed() const { return episode_seed_; }

  // Synchronization delay for a VNF holding a backup: backlog over granted
  // bandwidth, in seconds. Throws if no sync link exists.
  double sync_delay_s(int v) const;
  // Minimum bandwidth keeping the delay within the chain's downtime budget.
  double min_recovery_bandwidth_mbps(int v) const;

 private:
  std::vector<double> make_observation() const;
  int pick_backup_node(VnfKey key) const;
  void apply_action(int v, VnfAction action, VnfSlotRecord& rec);

  EnvConfig cfg_;
  ObservationSchema schema_;
  Rng rng_;
  std::uint64_t seed_ = 1;
  std::uint64_t episode_seed_ = 1;
  long episode_index_ = 0;

  NetworkState state_;
  std::vector<SfcInstance> pristine_sfcs_;  // embedding as produced at reset
  TransitionConfig transitions_;
  std::vector<HealthState> health_;
  std::unique_ptr<AoiTracker> tracker_;
  std::vector<double> backlog_bits_;
  std::vector<bool> reported_now_;
  int slot_ = 0;
  bool mid_slot_ = false;
  std::vector<bool> had_backup_;  // backup present at the start of this slot
};

}  // namespace pfrlab
