#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "pfrlab/rng.hpp"

namespace pfrlab {

// Non-negative per-resource-type amounts (CPU/memory/storage in abstract units).
class ResourceVector {
 public:
  ResourceVector() = default;
  explicit ResourceVector(std::vector<double> amounts);
  static ResourceVector uniform(int types, double amount);

  int types() const { return static_cast<int>(amounts_.size()); }
  double operator[](int p) const { return amounts_.at(p); }
  double& operator[](int p) { return amounts_.at(p); }
  const std::vector<double>& amounts() const { return amounts_; }

  bool fits_within(const ResourceVector& budget, double slack = 1e-9) const;

 private:
  std::vector<double> amounts_;
};

struct PhysicalNode {
  int id = -1;
  bool is_nfv = true;
  ResourceVector capacity;  // maximum customizable amount per resource type
};

struct PhysicalLink {
  int id = -1;
  int a = -1, b = -1;            // endpoint node ids, a < b
  double bandwidth_mbps = 0.0;   // capacity
};

struct SubstrateConfig {
  int node_count = 5;
  int nfv_count = 5;
  int resource_types = 3;
  double node_capacity = 100.0;      // per resource type
  double link_bandwidth_mbps = 1000.0;
};

class PhysicalNetwork {
 public:
  PhysicalNetwork() = default;

  const std::vector<PhysicalNode>& nodes() const { return nodes_; }
  const std::vector<PhysicalLink>& links() const { return links_; }
  const PhysicalLink& link(int id) const { return links_.at(id); }
  int resource_types() const { return resource_types_; }

  std::optional<int> link_between(int m, int n) const;
  // Shortest path by hop count, ties broken toward the lowest predecessor id.
  // Returns the link-id sequence from `from` to `to`, empty if from == to.
  std::vector<int> shortest_path(int from, int to) const;

  friend PhysicalNetwork build_network(const SubstrateConfig& cfg);

 private:
  std::vector<PhysicalNode> nodes_;
  std::vector<PhysicalLink> links_;
  std::map<std::pair<int, int>, int> link_index_;
  int resource_types_ = 0;
};

// Fully connected substrate; the first nfv_count nodes host VNFs, the rest
// are forwarding-only. Rejects nfv_count < 2 (a backup always needs a node
// distinct from its active's).
PhysicalNetwork build_network(const SubstrateConfig& cfg);

// Per-VNF spec: backup footprint, sync-link baseline bandwidth, holding cost.
struct VnfSpec {
  int sfc = -1;       // chain index k
  int position = -1;  // position h within the chain
  ResourceVector backup_demand;
  double sync_baseline_mbps = 10.0;
  double backup_unit_cost = 1.0;
  // Holding-cost factor per health state (normal, warning, critical).
  double hold_cost_normal = 1.0;
  double hold_cost_warning = 0.1;
  double hold_cost_critical = 0.0;
};

struct SfcInstance {
  int id = -1;
  std::vector<VnfSpec> vnfs;
  double max_downtime_s = 0.5;       // tolerable service interruption
  double traffic_pkts_per_s = 500.0;
  std::vector<int> embedding;        // vnfs[h] -> hosting node id
};

struct SfcConfig {
  int chains = 3;
  int vnfs_per_chain = 3;
  double backup_demand_min = 5.0;
  double backup_demand_max = 20.0;
  double sync_baseline_mbps = 10.0;
  double backup_unit_cost = 1.0;
  double hold_cost_normal = 1.0;
  double hold_cost_warning = 0.1;
  double hold_cost_critical = 0.0;
  double traffic_rate_min = 100.0;
  double traffic_rate_max = 1000.0;
  double max_downtime_min_s = 0.1;
  double max_downtime_max_s = 0.5;
  int embed_retries = 64;
};

// Identifies a VNF globally as (chain, position).
struct VnfKey {
  int sfc = -1;
  int position = -1;
  auto operator<=>(const VnfKey&) const = default;
};

enum class PlacementError {
  none,
  capacity_exceeded,    // node residual capacity would go negative
  bandwidth_exceeded,   // sync-path residual bandwidth would go negative
  anti_affinity,        // backup co-located with its own active instance
  duplicate_backup,     // a backup already exists for this VNF
  no_backup_present,    // release requested but nothing is placed
  no_nfv_node,          // target is a forwarding-only node
};

const char* to_string(PlacementError e);

struct BackupPlacement {
  int node = -1;
  std::vector<int> sync_route;   // link ids, active node -> backup node
  double sync_bandwidth_mbps = 0.0;
};

// Substrate + embedded chains + backup/sync-link reservations. Residuals are
// recomputed from the live reservation registry in canonical order, so an
// allocate/release pair restores the state exactly.
class NetworkState {
 public:
  NetworkState() = default;
  NetworkState(PhysicalNetwork net, std::vector<SfcInstance> sfcs);

  const PhysicalNetwork& network() const { return net_; }
  const std::vector<SfcInstance>& sfcs() const { return sfcs_; }
  int vnf_count() const { return static_cast<int>(flat_.size()); }
  VnfKey vnf_key(int flat_index) const { return flat_.at(flat_index); }
  int flat_index(VnfKey key) const;
  const VnfSpec& spec(VnfKey key) const;
  int active_node(VnfKey key) const;

  bool has_backup(VnfKey key) const { return backups_.count(key) > 0; }
  const BackupPlacement* backup(VnfKey key) const;

  // Residual capacity of node n for resource p, after all reservations.
  double residual(int node, int resource) const;
  double residual_bandwidth(int link) const;
  // Available ratio W in [0, 1].
  double available_ratio(int node, int resource) const;
  double available_link_ratio(int link) const;

  // Feasibility probe for a backup of `key` on `node`; does not mutate.
  PlacementError check_backup(VnfKey key, int node) const;
  // Reserves node resources and routes the sync link (shortest path from the
  // active node, baseline bandwidth). Returns none on success.
  PlacementError allocate_backup(VnfKey key, int node);
  PlacementError release_backup(VnfKey key);

  // Raises the sync-link bandwidth toward `target_mbps`, limited by the
  // residual bandwidth on every route link. Returns the granted total.
  double raise_sync_bandwidth(VnfKey key, double target_mbps);

  // Recovery consumption: the backup becomes the active instance. The old
  // active footprint is freed, the embedding is rewritten to the backup node
  // and the sync link is torn down.
  void consume_backup_for_recovery(VnfKey key);

  // Scans every node, link and VNF; throws std::logic_error on any violated
  // capacity, anti-affinity or single-backup constraint.
  void check_invariants() const;

  nlohmann::json to_json() const;

 private:
  void rebuild_flat();

  PhysicalNetwork net_;
  std::vector<SfcInstance> sfcs_;
  std::vector<VnfKey> flat_;
  std::map<VnfKey, BackupPlacement> backups_;
};

// Places every VNF of every chain on a random feasible NFV node (stand-in for
// an embedding optimizer). Deterministic given the rng seed; restarts on a
// dead end and throws std::runtime_error after cfg.embed_retries attempts.
std::vector<SfcInstance> embed_sfcs_random(const PhysicalNetwork& net,
                                           const SfcConfig& cfg, Rng& rng);

}  // namespace pfrlab
