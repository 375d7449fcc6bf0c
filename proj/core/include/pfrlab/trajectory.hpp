#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "pfrlab/env.hpp"

namespace pfrlab {

// One complete episode: the sampled regime plus every slot record. This is
// what the scorer consumes and what the line-delimited log round-trips.
struct EpisodeTrace {
  std::uint64_t seed = 0;
  TransitionConfig transitions;
  RewardConfig reward;
  MonitoringConfig monitoring;
  // Per-VNF constants needed to recompute costs offline.
  std::vector<double> backup_unit_cost;
  std::vector<double> hold_cost_normal;
  std::vector<double> hold_cost_warning;
  std::vector<double> hold_cost_critical;
  std::string network_json;  // topology + embedding snapshot at reset

  std::vector<SlotRecord> slots;

  int vnf_count() const { return static_cast<int>(backup_unit_cost.size()); }
};

// Captures the per-episode constants from a freshly reset environment.
EpisodeTrace begin_trace(const RecoveryEnv& env);

// Line-delimited log: one header object, then one object per slot.
void write_trace(std::ostream& os, const EpisodeTrace& trace);
std::vector<EpisodeTrace> read_traces(std::istream& is);

}  // namespace pfrlab
