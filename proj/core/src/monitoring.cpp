#include "pfrlab/monitoring.hpp"

#include <algorithm>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace pfrlab {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}
}  // namespace

void MonitoringConfig::validate() const {
  if (slot_duration <= 0.0) throw std::invalid_argument("slot_duration must be positive");
  if (max_age_normal < slot_duration || max_age_warning < slot_duration ||
      max_age_critical < slot_duration) {
    throw std::invalid_argument("age thresholds must be at least one slot duration");
  }
  if (report_loss_prob < 0.0 || report_loss_prob > 1.0) {
    throw std::invalid_argument("report_loss_prob must lie in [0, 1]");
  }
  if (age_cap < slot_duration) throw std::invalid_argument("age_cap must cover one slot");
}

AoiTracker::AoiTracker(int vnf_count, MonitoringConfig cfg)
    : cfg_(cfg),
      age_(vnf_count, kInf),
      last_reported_(vnf_count),
      last_seen_(vnf_count) {
  cfg_.validate();
}

std::vector<bool> AoiTracker::tick(const std::vector<Health>& true_states, Rng& rng) {
  if (static_cast<int>(true_states.size()) != vnf_count()) {
    throw std::invalid_argument("true_states size mismatch");
  }
  std::vector<bool> delivered(vnf_count(), false);
  for (int v = 0; v < vnf_count(); ++v) {
    const Health now = true_states[v];
    const bool changed = !last_seen_[v].has_value() || *last_seen_[v] != now;
    const double grown = age_[v] == kInf ? kInf : age_[v] + cfg_.slot_duration;
    const bool scheduled = grown > cfg_.max_age(now);
    if (changed || scheduled) {
      const bool lost = cfg_.report_loss_prob > 0.0 && rng.bernoulli(cfg_.report_loss_prob);
      if (!lost) {
        delivered[v] = true;
        age_[v] = cfg_.slot_duration;
        last_reported_[v] = now;
      } else {
        age_[v] = grown;
      }
    } else {
      age_[v] = grown;
    }
    last_seen_[v] = now;
  }
  return delivered;
}

int AoiTracker::freshness_violations(const std::vector<Health>& true_states) const {
  int count = 0;
  for (int v = 0; v < vnf_count(); ++v) {
    if (age_[v] > cfg_.max_age(true_states[v])) ++count;
  }
  return count;
}

std::string ObservationSchema::canonical() const {
  std::ostringstream os;
  os << "observation/v" << version << "|vnfs=" << vnf_count << "|nodes=" << node_count
     << "|resources=" << resource_types << "|age_cap=" << age_cap
     << "|backlog_cap=" << backlog_cap_slots
     << "|vnf_block=state3,age1,backup1,backlog1|node_block=ratios";
  return os.str();
}

std::uint64_t ObservationSchema::hash() const { return fnv1a(canonical()); }

nlohmann::json ObservationSchema::to_json() const {
  nlohmann::json j;
  j["version"] = version;
  j["vnf_count"] = vnf_count;
  j["node_count"] = node_count;
  j["resource_types"] = resource_types;
  j["age_cap"] = age_cap;
  j["backlog_cap_slots"] = backlog_cap_slots;
  j["length"] = length();
  j["canonical"] = canonical();
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash()));
  j["hash"] = std::string(buf);
  j["layout"] = nlohmann::json::array(
      {{{"block", "vnf"}, {"repeat", vnf_count},
        {"features", {"reported_normal", "reported_warning", "reported_critical",
                      "age_normalized", "backup_present", "backlog_normalized"}}},
       {{"block", "node"}, {"repeat", node_count * resource_types},
        {"features", {"available_ratio"}}}});
  return j;
}

std::vector<double> build_observation(const ObservationSchema& schema,
                                      const ObservationInputs& in) {
  const AoiTracker& tracker = *in.tracker;
  if (tracker.vnf_count() != schema.vnf_count) {
    throw std::invalid_argument("tracker does not match observation schema");
  }
  std::vector<double> obs;
  obs.reserve(schema.length());
  for (int v = 0; v < schema.vnf_count; ++v) {
    const auto reported = tracker.last_reported(v);
    obs.push_back(reported && *reported == Health::normal ? 1.0 : 0.0);
    obs.push_back(reported && *reported == Health::warning ? 1.0 : 0.0);
    obs.push_back(reported && *reported == Health::critical ? 1.0 : 0.0);
    const double age = std::min(tracker.age(v), schema.age_cap);
    obs.push_back(age / schema.age_cap);
    obs.push_back((*in.has_backup)[v] ? 1.0 : 0.0);
    obs.push_back(std::min((*in.backlog_slots)[v], schema.backlog_cap_slots) /
                  schema.backlog_cap_slots);
  }
  obs.insert(obs.end(), in.node_ratios->begin(), in.node_ratios->end());
  if (static_cast<int>(obs.size()) != schema.length()) {
    throw std::logic_error("observation length mismatch");
  }
  return obs;
}

}  // namespace pfrlab
