#include "pfrlab/metrics.hpp"

#include <stdexcept>

#include <nlohmann/json.hpp>

namespace pfrlab {

namespace {
std::optional<double> ratio(long num, long den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}
}  // namespace

std::optional<double> AccuracyReport::csa() const { return ratio(critical_correct, critical_total); }
std::optional<double> AccuracyReport::wsa() const { return ratio(warning_correct, warning_total); }
std::optional<double> AccuracyReport::nsa() const { return ratio(normal_correct, normal_total); }
std::optional<double> AccuracyReport::pfr_accuracy() const { return ratio(proactive, recoveries); }
std::optional<double> AccuracyReport::rfr_accuracy() const { return ratio(reactive, recoveries); }

void AccuracyReport::add(const AccuracyReport& other) {
  critical_total += other.critical_total;
  critical_correct += other.critical_correct;
  warning_total += other.warning_total;
  warning_correct += other.warning_correct;
  normal_total += other.normal_total;
  normal_correct += other.normal_correct;
  recoveries += other.recoveries;
  proactive += other.proactive;
  reactive += other.reactive;
  false_alarm_total += other.false_alarm_total;
  return_total += other.return_total;
  episodes += other.episodes;
}

nlohmann::json AccuracyReport::to_json() const {
  nlohmann::json j;
  j["counts"] = {{"critical_total", critical_total},
                 {"critical_correct", critical_correct},
                 {"warning_total", warning_total},
                 {"warning_correct", warning_correct},
                 {"normal_total", normal_total},
                 {"normal_correct", normal_correct},
                 {"recoveries", recoveries},
                 {"proactive", proactive},
                 {"reactive", reactive}};
  auto put = [&](const char* key, std::optional<double> v) {
    j[key] = v ? nlohmann::json(*v) : nlohmann::json(nullptr);
  };
  put("csa", csa());
  put("wsa", wsa());
  put("nsa", nsa());
  put("pfr_accuracy", pfr_accuracy());
  put("rfr_accuracy", rfr_accuracy());
  j["false_alarm_total"] = false_alarm_total;
  j["episodes"] = episodes;
  j["mean_return"] = mean_return();
  return j;
}

AccuracyReport score_episode(const EpisodeTrace& trace) {
  AccuracyReport r;
  r.episodes = 1;
  for (const auto& slot : trace.slots) {
    r.return_total += slot.reward.total;
    r.false_alarm_total += slot.reward.false_alarm;
    for (const auto& v : slot.vnfs) {
      switch (v.true_state) {
        case Health::critical:
          ++r.critical_total;
          if (v.ran_recovery) ++r.critical_correct;
          break;
        case Health::warning:
          ++r.warning_total;
          if (v.action == VnfAction::place) ++r.warning_correct;
          break;
        case Health::normal:
          ++r.normal_total;
          if (v.had_backup ? v.action == VnfAction::remove : v.action == VnfAction::noop) {
            ++r.normal_correct;
          }
          break;
      }
      if (v.recovery != RecoveryClass::none) {
        ++r.recoveries;
        if (v.recovery == RecoveryClass::proactive) ++r.proactive;
        else ++r.reactive;
      }
    }
  }
  return r;
}

std::vector<VnfAction> Policy::act_privileged(const RecoveryEnv&) {
  throw std::logic_error("policy has no privileged mode");
}

std::vector<VnfAction> RandomPolicy::act(const SlotOutcome& prev) {
  std::vector<VnfAction> actions(prev.record.vnfs.size());
  for (auto& a : actions) a = static_cast<VnfAction>(rng_.uniform_int(kActionArity));
  return actions;
}

std::vector<VnfAction> OraclePolicy::act(const SlotOutcome&) {
  throw std::logic_error("oracle acts through the privileged interface");
}

std::vector<VnfAction> OraclePolicy::act_privileged(const RecoveryEnv& env) {
  const auto& health = env.true_health();
  const auto backups = env.backup_flags();
  std::vector<VnfAction> actions(health.size(), VnfAction::noop);
  for (std::size_t v = 0; v < health.size(); ++v) {
    switch (health[v].kind) {
      case Health::critical: actions[v] = VnfAction::sync; break;
      case Health::warning: actions[v] = VnfAction::place; break;
      case Health::normal: actions[v] = backups[v] ? VnfAction::remove : VnfAction::noop; break;
    }
  }
  return actions;
}

std::vector<VnfAction> ReactivePolicy::act(const SlotOutcome& prev) {
  std::vector<VnfAction> actions(prev.record.vnfs.size(), VnfAction::noop);
  for (std::size_t v = 0; v < prev.record.vnfs.size(); ++v) {
    const auto& reported = prev.record.vnfs[v].reported;
    if (reported && *reported == Health::critical) actions[v] = VnfAction::sync;
  }
  return actions;
}

void NetPolicy::begin_episode(std::uint64_t seed) {
  state_ = net_->initial_state(1);
  rng_.reseed(seed);
}

std::vector<VnfAction> NetPolicy::act(const SlotOutcome& prev) {
  const auto& spec = net_->spec();
  Eigen::MatrixXd x(1, spec.input_width);
  if (static_cast<int>(prev.observation.size()) != spec.input_width) {
    throw std::invalid_argument("observation width does not match the policy input");
  }
  for (int i = 0; i < spec.input_width; ++i) x(0, i) = prev.observation[i];
  const Eigen::MatrixXd out = net_->step(x, state_);
  ActionDistribution dist(out.leftCols(spec.head_count * spec.head_arity), spec.head_count,
                          spec.head_arity);
  const std::vector<int> picks = greedy_ ? dist.mode_row(0) : dist.sample_row(0, rng_);
  std::vector<VnfAction> actions(picks.size());
  for (std::size_t v = 0; v < picks.size(); ++v) actions[v] = static_cast<VnfAction>(picks[v]);
  return actions;
}

EpisodeTrace run_episode(RecoveryEnv& env, Policy& policy, std::uint64_t episode_seed) {
  SlotOutcome outcome = env.reset(episode_seed);
  policy.begin_episode(mix_seed(episode_seed, {0xac710u}));
  EpisodeTrace trace = begin_trace(env);
  while (!env.done()) {
    if (policy.privileged()) {
      env.begin_slot();
      outcome = env.finish_slot(policy.act_privileged(env));
    } else {
      outcome = env.step(policy.act(outcome));
    }
    trace.slots.push_back(outcome.record);
  }
  return trace;
}

EvaluationResult evaluate(Policy& policy, const EnvConfig& cfg, std::uint64_t seed_base,
                          int episodes, bool keep_traces) {
  RecoveryEnv env(cfg, seed_base);
  EvaluationResult result;
  for (int e = 0; e < episodes; ++e) {
    EpisodeTrace trace =
        run_episode(env, policy, mix_seed(seed_base, {0xe7a1ull, static_cast<std::uint64_t>(e)}));
    result.report.add(score_episode(trace));
    if (keep_traces) result.traces.push_back(std::move(trace));
  }
  return result;
}

EvaluationResult robustness_probe(Policy& policy, const EnvConfig& cfg,
                                  std::uint64_t fresh_seed_base, int episodes) {
  return evaluate(policy, cfg, fresh_seed_base, episodes);
}

std::map<int, DwellRate> dwell_conditional_bp_rate(const std::vector<EpisodeTrace>& traces) {
  std::map<int, DwellRate> rates;
  for (const auto& trace : traces) {
    for (const auto& slot : trace.slots) {
      for (const auto& v : slot.vnfs) {
        if (v.true_state != Health::warning) continue;
        auto& r = rates[v.dwell];
        ++r.occurrences;
        if (v.action == VnfAction::place) ++r.placements;
      }
    }
  }
  return rates;
}

}  // namespace pfrlab
