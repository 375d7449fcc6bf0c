#include "pfrlab/trajectory.hpp"

#include <cmath>
#include <istream>
#include <limits>
#include <ostream>

#include <nlohmann/json.hpp>

namespace pfrlab {

namespace {
using nlohmann::json;
constexpr double kInf = std::numeric_limits<double>::infinity();

json age_to_json(double age) {
  if (std::isinf(age)) return nullptr;  // never reported
  return age;
}

double age_from_json(const json& j) { return j.is_null() ? kInf : j.get<double>(); }

json vnf_record_to_json(const VnfSlotRecord& r) {
  json j;
  j["state"] = to_string(r.true_state);
  j["dwell"] = r.dwell;
  j["reported"] = r.reported ? json(to_string(*r.reported)) : json(nullptr);
  j["age"] = age_to_json(r.age);
  j["reported_now"] = r.reported_now;
  j["action"] = to_string(r.action);
  j["critical"] = r.is_critical;
  j["ran_recovery"] = r.ran_recovery;
  j["had_backup"] = r.had_backup;
  j["has_backup"] = r.has_backup;
  j["recovery"] = to_string(r.recovery);
  j["infeasible"] = r.infeasible;
  j["placed"] = r.placed;
  j["released"] = r.released;
  j["backlog_bits"] = r.backlog_bits;
  j["sync_bandwidth_mbps"] = r.sync_bandwidth_mbps;
  j["recovery_delay_s"] = r.recovery_delay_s;
  j["sla_delay_violated"] = r.sla_delay_violated;
  return j;
}

VnfSlotRecord vnf_record_from_json(const json& j) {
  VnfSlotRecord r;
  r.true_state = health_from_string(j.at("state").get<std::string>());
  r.dwell = j.at("dwell").get<int>();
  if (!j.at("reported").is_null()) {
    r.reported = health_from_string(j.at("reported").get<std::string>());
  }
  r.age = age_from_json(j.at("age"));
  r.reported_now = j.at("reported_now").get<bool>();
  r.action = action_from_string(j.at("action").get<std::string>());
  r.is_critical = j.at("critical").get<bool>();
  r.ran_recovery = j.at("ran_recovery").get<bool>();
  r.had_backup = j.at("had_backup").get<bool>();
  r.has_backup = j.at("has_backup").get<bool>();
  const std::string rc = j.at("recovery").get<std::string>();
  r.recovery = rc == "proactive" ? RecoveryClass::proactive
               : rc == "reactive" ? RecoveryClass::reactive
                                  : RecoveryClass::none;
  r.infeasible = j.at("infeasible").get<bool>();
  r.placed = j.at("placed").get<bool>();
  r.released = j.at("released").get<bool>();
  r.backlog_bits = j.at("backlog_bits").get<double>();
  r.sync_bandwidth_mbps = j.at("sync_bandwidth_mbps").get<double>();
  r.recovery_delay_s = j.at("recovery_delay_s").get<double>();
  r.sla_delay_violated = j.at("sla_delay_violated").get<bool>();
  return r;
}

json reward_to_json(const RewardBreakdown& r) {
  return {{"sla", r.sla},        {"resource", r.resource}, {"false_alarm", r.false_alarm},
          {"cost", r.cost},      {"shaping", r.shaping},   {"total", r.total}};
}

RewardBreakdown reward_from_json(const json& j) {
  RewardBreakdown r;
  r.sla = j.at("sla").get<double>();
  r.resource = j.at("resource").get<double>();
  r.false_alarm = j.at("false_alarm").get<double>();
  r.cost = j.at("cost").get<double>();
  r.shaping = j.at("shaping").get<double>();
  r.total = j.at("total").get<double>();
  return r;
}
}  // namespace

EpisodeTrace begin_trace(const RecoveryEnv& env) {
  EpisodeTrace t;
  t.seed = env.episode_seed();
  t.transitions = env.transitions();
  t.reward = env.config().reward;
  t.monitoring = env.config().monitoring;
  const auto& state = env.network_state();
  for (int v = 0; v < state.vnf_count(); ++v) {
    const VnfSpec& spec = state.spec(state.vnf_key(v));
    t.backup_unit_cost.push_back(spec.backup_unit_cost);
    t.hold_cost_normal.push_back(spec.hold_cost_normal);
    t.hold_cost_warning.push_back(spec.hold_cost_warning);
    t.hold_cost_critical.push_back(spec.hold_cost_critical);
  }
  t.network_json = state.to_json().dump();
  return t;
}

void write_trace(std::ostream& os, const EpisodeTrace& trace) {
  json header;
  header["type"] = "header";
  header["seed"] = trace.seed;
  header["transitions"] = trace.transitions.to_json();
  header["reward"] = {{"sla_penalty_weight", trace.reward.sla_penalty_weight},
                      {"false_alarm_penalty_weight", trace.reward.false_alarm_penalty_weight},
                      {"sla_cost_weight", trace.reward.sla_cost_weight},
                      {"resource_cost_weight", trace.reward.resource_cost_weight},
                      {"false_alarm_cost_weight", trace.reward.false_alarm_cost_weight},
                      {"bonus_remove_in_normal", trace.reward.bonus_remove_in_normal},
                      {"bonus_place_in_warning", trace.reward.bonus_place_in_warning},
                      {"bonus_recover_in_critical", trace.reward.bonus_recover_in_critical},
                      {"bonus_proactive_recovery", trace.reward.bonus_proactive_recovery}};
  header["monitoring"] = {{"slot_duration", trace.monitoring.slot_duration},
                          {"max_age_normal", trace.monitoring.max_age_normal},
                          {"max_age_warning", trace.monitoring.max_age_warning},
                          {"max_age_critical", trace.monitoring.max_age_critical},
                          {"report_loss_prob", trace.monitoring.report_loss_prob}};
  header["backup_unit_cost"] = trace.backup_unit_cost;
  header["hold_cost_normal"] = trace.hold_cost_normal;
  header["hold_cost_warning"] = trace.hold_cost_warning;
  header["hold_cost_critical"] = trace.hold_cost_critical;
  header["network"] = json::parse(trace.network_json);
  os << header.dump() << '\n';

  for (const auto& slot : trace.slots) {
    json j;
    j["type"] = "slot";
    j["slot"] = slot.slot;
    j["reward"] = reward_to_json(slot.reward);
    j["freshness_violations"] = slot.freshness_violations;
    auto& vnfs = j["vnfs"] = json::array();
    for (const auto& rec : slot.vnfs) vnfs.push_back(vnf_record_to_json(rec));
    os << j.dump() << '\n';
  }
}

std::vector<EpisodeTrace> read_traces(std::istream& is) {
  std::vector<EpisodeTrace> traces;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    const std::string type = j.at("type").get<std::string>();
    if (type == "header") {
      EpisodeTrace t;
      t.seed = j.at("seed").get<std::uint64_t>();
      t.transitions = TransitionConfig::from_json(j.at("transitions"));
      const auto& r = j.at("reward");
      t.reward.sla_penalty_weight = r.at("sla_penalty_weight").get<double>();
      t.reward.false_alarm_penalty_weight = r.at("false_alarm_penalty_weight").get<double>();
      t.reward.sla_cost_weight = r.at("sla_cost_weight").get<double>();
      t.reward.resource_cost_weight = r.at("resource_cost_weight").get<double>();
      t.reward.false_alarm_cost_weight = r.at("false_alarm_cost_weight").get<double>();
      t.reward.bonus_remove_in_normal = r.at("bonus_remove_in_normal").get<double>();
      t.reward.bonus_place_in_warning = r.at("bonus_place_in_warning").get<double>();
      t.reward.bonus_recover_in_critical = r.at("bonus_recover_in_critical").get<double>();
      t.reward.bonus_proactive_recovery = r.at("bonus_proactive_recovery").get<double>();
      const auto& m = j.at("monitoring");
      t.monitoring.slot_duration = m.at("slot_duration").get<double>();
      t.monitoring.max_age_normal = m.at("max_age_normal").get<double>();
      t.monitoring.max_age_warning = m.at("max_age_warning").get<double>();
      t.monitoring.max_age_critical = m.at("max_age_critical").get<double>();
      t.monitoring.report_loss_prob = m.at("report_loss_prob").get<double>();
      t.backup_unit_cost = j.at("backup_unit_cost").get<std::vector<double>>();
      t.hold_cost_normal = j.at("hold_cost_normal").get<std::vector<double>>();
      t.hold_cost_warning = j.at("hold_cost_warning").get<std::vector<double>>();
      t.hold_cost_critical = j.at("hold_cost_critical").get<std::vector<double>>();
      t.network_json = j.at("network").dump();
      traces.push_back(std::move(t));
    } else if (type == "slot") {
      if (traces.empty()) throw std::runtime_error("slot record before any header");
      SlotRecord slot;
      slot.slot = j.at("slot").get<int>();
      slot.reward = reward_from_json(j.at("reward"));
      slot.freshness_violations = j.at("freshness_violations").get<int>();
      for (const auto& rec : j.at("vnfs")) slot.vnfs.push_back(vnf_record_from_json(rec));
      traces.back().slots.push_back(std::move(slot));
    } else {
      throw std::runtime_error("unknown trajectory record type: " + type);
    }
  }
  return traces;
}

}  // namespace pfrlab
