#include "pfrlab/env.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace pfrlab {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

const char* to_string(VnfAction a) {
  switch (a) {
    case VnfAction::noop: return "noop";
    case VnfAction::place: return "place";
    case VnfAction::remove: return "remove";
    case VnfAction::sync: return "sync";
  }
  return "unknown";
}

VnfAction action_from_string(const std::string& s) {
  if (s == "noop") return VnfAction::noop;
  if (s == "place") return VnfAction::place;
  if (s == "remove") return VnfAction::remove;
  if (s == "sync") return VnfAction::sync;
  throw std::invalid_argument("unknown action: " + s);
}

const char* to_string(RecoveryClass c) {
  switch (c) {
    case RecoveryClass::none: return "none";
    case RecoveryClass::proactive: return "proactive";
    case RecoveryClass::reactive: return "reactive";
  }
  return "unknown";
}

void RewardConfig::validate() const {
  const double all[] = {sla_penalty_weight, false_alarm_penalty_weight, sla_cost_weight,
                        resource_cost_weight, false_alarm_cost_weight,
                        bonus_remove_in_normal, bonus_place_in_warning,
                        bonus_recover_in_critical, bonus_proactive_recovery};
  for (double w : all) {
    if (w < 0.0) throw std::invalid_argument("reward weights must be non-negative");
  }
  if (sync_slack_epsilon <= 0.0) throw std::invalid_argument("sync_slack_epsilon must be positive");
}

void EnvConfig::validate() const {
  if (substrate.nfv_count < 2) throw std::invalid_argument("substrate needs >= 2 NFV nodes");
  if (substrate.node_count < substrate.nfv_count) {
    throw std::invalid_argument("node_count must be >= nfv_count");
  }
  if (episode_length < 1) throw std::invalid_argument("episode_length must be >= 1");
  if (statelet.bits_per_packet < 0.0 || statelet.seconds_per_slot <= 0.0) {
    throw std::invalid_argument("invalid statelet configuration");
  }
  failure.validate();
  monitoring.validate();
  reward.validate();
}

ObservationSchema EnvConfig::observation_schema() const {
  ObservationSchema s;
  s.vnf_count = vnf_count();
  s.node_count = substrate.node_count;
  s.resource_types = substrate.resource_types;
  s.age_cap = monitoring.age_cap;
  return s;
}

RecoveryEnv::RecoveryEnv(EnvConfig cfg, std::uint64_t seed)
    : cfg_(std::move(cfg)), schema_(cfg_.observation_schema()), rng_(seed), seed_(seed) {
  cfg_.validate();
  reset(seed);
}

SlotOutcome RecoveryEnv::reset(std::uint64_t seed) {
  seed_ = seed;
  rng_.reseed(seed);
  episode_index_ = 0;
  return reset();
}

SlotOutcome RecoveryEnv::reset() {
  episode_seed_ = mix_seed(seed_, {0x5eedu, static_cast<std::uint64_t>(episode_index_)});
  ++episode_index_;
  Rng episode_rng(episode_seed_);

  const bool rebuild = pristine_sfcs_.empty() || !cfg_.reuse_embedding;
  if (rebuild) {
    PhysicalNetwork net = build_network(cfg_.substrate);
    pristine_sfcs_ = embed_sfcs_random(net, cfg_.sfc, episode_rng);
    state_ = NetworkState(std::move(net), pristine_sfcs_);
  } else {
    state_ = NetworkState(build_network(cfg_.substrate), pristine_sfcs_);
  }

  transitions_ = sample_episode_config(cfg_.failure, episode_rng);
  rng_ = Rng(mix_seed(episode_seed_, {0x51a75u}));

  const int v = cfg_.vnf_count();
  health_.assign(v, HealthState{});
  tracker_ = std::make_unique<AoiTracker>(v, cfg_.monitoring);
  backlog_bits_.assign(v, 0.0);
  reported_now_.assign(v, false);
  had_backup_.assign(v, false);
  slot_ = 0;
  mid_slot_ = false;

  SlotOutcome out;
  out.observation = make_observation();
  out.done = false;
  out.record.slot = 0;
  out.record.vnfs.resize(v);
  for (int i = 0; i < v; ++i) {
    auto& rec = out.record.vnfs[i];
    rec.true_state = health_[i].kind;
    rec.age = tracker_->age(i);
  }
  return out;
}

std::vector<bool> RecoveryEnv::backup_flags() const {
  std::vector<bool> flags(cfg_.vnf_count(), false);
  for (int v = 0; v < cfg_.vnf_count(); ++v) {
    flags[v] = state_.has_backup(state_.vnf_key(v));
  }
  return flags;
}

const std::vector<HealthState>& RecoveryEnv::begin_slot() {
  if (done()) throw std::logic_error("episode finished; call reset()");
  if (mid_slot_) throw std::logic_error("begin_slot() called twice in one slot");
  mid_slot_ = true;

  // Phase 1: health transitions.
  for (auto& h : health_) h = step_health(h, transitions_, rng_);

  // Snapshot the backup indicator before any action of this slot.
  had_backup_ = backup_flags();

  // Phase 2: monitoring tick against the post-transition truth.
  std::vector<Health> truth(health_.size());
  for (std::size_t v = 0; v < health_.size(); ++v) truth[v] = health_[v].kind;
  reported_now_ = tracker_->tick(truth, rng_);
  return health_;
}

SlotOutcome RecoveryEnv::step(const std::vector<VnfAction>& actions) {
  begin_slot();
  return finish_slot(actions);
}

int RecoveryEnv::pick_backup_node(VnfKey key) const {
  int best = -1;
  double best_residual = -1.0;
  for (const auto& node : state_.network().nodes()) {
    if (!node.is_nfv) continue;
    if (state_.check_backup(key, node.id) != PlacementError::none) continue;
    double aggregate = 0.0;
    for (int p = 0; p < state_.network().resource_types(); ++p) {
      aggregate += state_.residual(node.id, p);
    }
    if (aggregate > best_residual) {
      best_residual = aggregate;
      best = node.id;
    }
  }
  return best;
}

double RecoveryEnv::sync_delay_s(int v) const {
  const auto* bp = state_.backup(state_.vnf_key(v));
  if (bp == nullptr) throw std::logic_error("sync delay queried without a sync link");
  if (backlog_bits_[v] <= 0.0) return 0.0;
  return backlog_bits_[v] / (bp->sync_bandwidth_mbps * 1e6);
}

double RecoveryEnv::min_recovery_bandwidth_mbps(int v) const {
  const auto key = state_.vnf_key(v);
  const double downtime = state_.sfcs().at(key.sfc).max_downtime_s;
  return backlog_bits_[v] / downtime / 1e6;
}

void RecoveryEnv::apply_action(int v, VnfAction action, VnfSlotRecord& rec) {
  const VnfKey key = state_.vnf_key(v);
  const bool critical = rec.true_state == Health::critical;
  const bool backup = state_.has_backup(key);
  rec.action = action;

  auto run_recovery = [&](bool proactive) {
    // Step three: reconfigure the sync link so the backlog drains within the
    // downtime budget, then hand the service over to the backup.
    const double target = std::max(state_.spec(key).sync_baseline_mbps,
                                   min_recovery_bandwidth_mbps(v));
    const double granted = state_.raise_sync_bandwidth(key, target);
    rec.recovery_delay_s = backlog_bits_[v] <= 0.0 ? 0.0 : backlog_bits_[v] / (granted * 1e6);
    const double budget = state_.sfcs().at(key.sfc).max_downtime_s;
    rec.sla_delay_violated = rec.recovery_delay_s > budget + 1e-12;
    state_.consume_backup_for_recovery(key);
    backlog_bits_[v] = 0.0;
    health_[v] = recover(health_[v]);
    rec.recovery = proactive ? RecoveryClass::proactive : RecoveryClass::reactive;
  };

  switch (action) {
    case VnfAction::noop:
      break;
    case VnfAction::place: {
      if (backup) {
        rec.infeasible = true;  // one backup per VNF
        break;
      }
      if (critical) {
        // No backup was pre-placed: run all three recovery stages now.
        rec.ran_recovery = true;
        const int node = pick_backup_node(key);
        if (node < 0) {
          rec.infeasible = true;
          break;
        }
        if (state_.allocate_backup(key, node) != PlacementError::none) {
          rec.infeasible = true;
          break;
        }
        run_recovery(/*proactive=*/false);
        break;
      }
      const int node = pick_backup_node(key);
      if (node < 0) {
        rec.infeasible = true;
        break;
      }
      if (state_.allocate_backup(key, node) != PlacementError::none) {
        rec.infeasible = true;
        break;
      }
      rec.placed = true;
      break;
    }
    case VnfAction::remove: {
      if (!backup) {
        rec.infeasible = true;
        break;
      }
      state_.release_backup(key);
      backlog_bits_[v] = 0.0;
      rec.released = true;
      break;
    }
    case VnfAction::sync: {
      rec.ran_recovery = true;
      if (!critical) {
        rec.infeasible = true;  // nothing to recover; counted as a decision anyway
        break;
      }
      if (backup) {
        run_recovery(/*proactive=*/rec.had_backup);
      } else {
        const int node = pick_backup_node(key);
        if (node < 0) {
          rec.infeasible = true;
          break;
        }
        if (state_.allocate_backup(key, node) != PlacementError::none) {
          rec.infeasible = true;
          break;
        }
        run_recovery(/*proactive=*/false);
      }
      break;
    }
  }
}

SlotOutcome RecoveryEnv::finish_slot(const std::vector<VnfAction>& actions) {
  if (!mid_slot_) throw std::logic_error("finish_slot() without begin_slot()");
  mid_slot_ = false;
  const int v_count = cfg_.vnf_count();
  if (static_cast<int>(actions.size()) != v_count) {
    throw std::invalid_argument("expected one action per VNF");
  }
  ++slot_;

  SlotRecord record;
  record.slot = slot_;
  record.vnfs.resize(v_count);

  std::vector<Health> truth(v_count);
  for (int v = 0; v < v_count; ++v) {
    auto& rec = record.vnfs[v];
    rec.true_state = health_[v].kind;
    rec.dwell = health_[v].warning_dwell;
    rec.reported = tracker_->last_reported(v);
    rec.age = tracker_->age(v);
    rec.reported_now = reported_now_[v];
    rec.is_critical = health_[v].kind == Health::critical;
    rec.had_backup = had_backup_[v];
    truth[v] = health_[v].kind;
  }
  record.freshness_violations = tracker_->freshness_violations(truth);

  // Phase 3: apply actions in VNF order.
  for (int v = 0; v < v_count; ++v) apply_action(v, actions[v], record.vnfs[v]);

  // Phase 4: statelet dynamics for every VNF still holding a backup.
  for (int v = 0; v < v_count; ++v) {
    const VnfKey key = state_.vnf_key(v);
    const auto* bp = state_.backup(key);
    if (bp == nullptr) continue;
    const double inflow = cfg_.statelet.bits_per_packet *
                          state_.sfcs().at(key.sfc).traffic_pkts_per_s *
                          cfg_.statelet.seconds_per_slot;
    const double drain = bp->sync_bandwidth_mbps * 1e6 * cfg_.statelet.seconds_per_slot;
    backlog_bits_[v] = std::max(0.0, backlog_bits_[v] + inflow - drain);
  }

  // Phase 5: reward.
  RewardBreakdown reward;
  const RewardConfig& rc = cfg_.reward;
  for (int v = 0; v < v_count; ++v) {
    auto& rec = record.vnfs[v];
    const VnfSpec& spec = state_.spec(state_.vnf_key(v));
    const double rho = rec.is_critical ? 1.0 : 0.0;
    const double m = rec.had_backup ? 1.0 : 0.0;
    reward.sla += rc.sla_penalty_weight * rho * (1.0 - m);
    const double hold = rec.true_state == Health::normal    ? spec.hold_cost_normal
                        : rec.true_state == Health::warning ? spec.hold_cost_warning
                                                            : spec.hold_cost_critical;
    reward.resource += hold * m * spec.backup_unit_cost;
    const bool xor_term = rec.is_critical != rec.ran_recovery;
    reward.false_alarm += rc.false_alarm_penalty_weight * (xor_term ? 1.0 : 0.0);

    if (rec.released && rec.true_state == Health::normal) {
      reward.shaping += rc.bonus_remove_in_normal;
    }
    if (rec.placed && rec.true_state == Health::warning) {
      reward.shaping += rc.bonus_place_in_warning;
    }
    if (rec.recovery != RecoveryClass::none) {
      reward.shaping += rc.bonus_recover_in_critical;
    }
    if (rec.recovery == RecoveryClass::proactive) {
      reward.shaping += rc.bonus_proactive_recovery;
    }
  }
  reward.cost = -rc.sla_cost_weight * reward.sla - rc.resource_cost_weight * reward.resource -
                rc.false_alarm_cost_weight * reward.false_alarm;
  reward.total = reward.cost + reward.shaping;
  record.reward = reward;

  // End-of-slot per-VNF network facts.
  for (int v = 0; v < v_count; ++v) {
    auto& rec = record.vnfs[v];
    const auto* bp = state_.backup(state_.vnf_key(v));
    rec.has_backup = bp != nullptr;
    rec.backlog_bits = backlog_bits_[v];
    rec.sync_bandwidth_mbps = bp == nullptr ? 0.0 : bp->sync_bandwidth_mbps;
  }

  if (cfg_.audit) state_.check_invariants();

  // Phase 6: observation.
  SlotOutcome out;
  out.observation = make_observation();
  out.reward = reward;
  out.done = done();
  out.record = std::move(record);
  return out;
}

std::vector<double> RecoveryEnv::make_observation() const {
  const int v_count = cfg_.vnf_count();
  std::vector<bool> backups = backup_flags();
  std::vector<double> backlog_slots(v_count, 0.0);
  for (int v = 0; v < v_count; ++v) {
    const VnfKey key = state_.vnf_key(v);
    const double per_slot = cfg_.statelet.bits_per_packet *
                            state_.sfcs().at(key.sfc).traffic_pkts_per_s *
                            cfg_.statelet.seconds_per_slot;
    backlog_slots[v] = per_slot > 0.0 ? backlog_bits_[v] / per_slot : 0.0;
  }
  std::vector<double> ratios;
  ratios.reserve(schema_.node_count * schema_.resource_types);
  for (int n = 0; n < schema_.node_count; ++n) {
    for (int p = 0; p < schema_.resource_types; ++p) {
      ratios.push_back(state_.available_ratio(n, p));
    }
  }
  ObservationInputs in;
  in.tracker = tracker_.get();
  in.has_backup = &backups;
  in.backlog_slots = &backlog_slots;
  in.node_ratios = &ratios;
  return build_observation(schema_, in);
}

}  // namespace pfrlab
