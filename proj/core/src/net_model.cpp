#include "pfrlab/net_model.hpp"

#include <algorithm>
#include <deque>
#include <limits>

#include <nlohmann/json.hpp>

namespace pfrlab {

namespace {
constexpr double kSlack = 1e-9;
}

ResourceVector::ResourceVector(std::vector<double> amounts) : amounts_(std::move(amounts)) {
  for (double a : amounts_) {
    if (a < 0.0) throw std::invalid_argument("resource amount must be non-negative");
  }
}

ResourceVector ResourceVector::uniform(int types, double amount) {
  return ResourceVector(std::vector<double>(static_cast<std::size_t>(types), amount));
}

bool ResourceVector::fits_within(const ResourceVector& budget, double slack) const {
  if (types() != budget.types()) return false;
  for (int p = 0; p < types(); ++p) {
    if (amounts_[p] > budget[p] + slack) return false;
  }
  return true;
}

const char* to_string(PlacementError e) {
  switch (e) {
    case PlacementError::none: return "none";
    case PlacementError::capacity_exceeded: return "node capacity exceeded";
    case PlacementError::bandwidth_exceeded: return "sync-path bandwidth exceeded";
    case PlacementError::anti_affinity: return "backup co-located with its active instance";
    case PlacementError::duplicate_backup: return "backup already placed for this VNF";
    case PlacementError::no_backup_present: return "no backup placed for this VNF";
    case PlacementError::no_nfv_node: return "target node hosts no VNFs";
  }
  return "unknown";
}

PhysicalNetwork build_network(const SubstrateConfig& cfg) {
  if (cfg.nfv_count < 2) {
    throw std::invalid_argument(
        "at least 2 NFV nodes are required: a backup must live on a node "
        "distinct from its active instance");
  }
  if (cfg.node_count < cfg.nfv_count) {
    throw std::invalid_argument("node_count must be >= nfv_count");
  }
  if (cfg.resource_types < 1) throw std::invalid_argument("resource_types must be >= 1");

  PhysicalNetwork net;
  net.resource_types_ = cfg.resource_types;
  net.nodes_.reserve(cfg.node_count);
  for (int n = 0; n < cfg.node_count; ++n) {
    PhysicalNode node;
    node.id = n;
    node.is_nfv = n < cfg.nfv_count;
    node.capacity = node.is_nfv ? ResourceVector::uniform(cfg.resource_types, cfg.node_capacity)
                                : ResourceVector::uniform(cfg.resource_types, 0.0);
    net.nodes_.push_back(std::move(node));
  }
  for (int m = 0; m < cfg.node_count; ++m) {
    for (int n = m + 1; n < cfg.node_count; ++n) {
      PhysicalLink link;
      link.id = static_cast<int>(net.links_.size());
      link.a = m;
      link.b = n;
      link.bandwidth_mbps = cfg.link_bandwidth_mbps;
      net.link_index_[{m, n}] = link.id;
      net.links_.push_back(link);
    }
  }
  return net;
}

std::optional<int> PhysicalNetwork::link_between(int m, int n) const {
  if (m == n) return std::nullopt;
  if (m > n) std::swap(m, n);
  auto it = link_index_.find({m, n});
  if (it == link_index_.end()) return std::nullopt;
  return it->second;
}

std::vector<int> PhysicalNetwork::shortest_path(int from, int to) const {
  if (from == to) return {};
  const int n = static_cast<int>(nodes_.size());
  std::vector<int> parent(n, -1);
  std::vector<int> via_link(n, -1);
  std::vector<bool> seen(n, false);
  std::deque<int> queue;
  seen[from] = true;
  queue.push_back(from);
  while (!queue.empty()) {
    const int u = queue.front();
    queue.pop_front();
    if (u == to) break;
    // Neighbors visited in ascending node id: with BFS this fixes the
    // tie-break to the lowest-id predecessor at equal depth.
    for (int v = 0; v < n; ++v) {
      if (seen[v]) continue;
      auto l = link_between(u, v);
      if (!l) continue;
      seen[v] = true;
      parent[v] = u;
      via_link[v] = *l;
      queue.push_back(v);
    }
  }
  if (!seen[to]) throw std::runtime_error("substrate is disconnected");
  std::vector<int> path;
  for (int v = to; v != from; v = parent[v]) path.push_back(via_link[v]);
  std::reverse(path.begin(), path.end());
  return path;
}

NetworkState::NetworkState(PhysicalNetwork net, std::vector<SfcInstance> sfcs)
    : net_(std::move(net)), sfcs_(std::move(sfcs)) {
  rebuild_flat();
}

void NetworkState::rebuild_flat() {
  flat_.clear();
  for (const auto& sfc : sfcs_) {
    for (const auto& vnf : sfc.vnfs) flat_.push_back({vnf.sfc, vnf.position});
  }
}

int NetworkState::flat_index(VnfKey key) const {
  for (int i = 0; i < static_cast<int>(flat_.size()); ++i) {
    if (flat_[i] == key) return i;
  }
  throw std::out_of_range("unknown VNF key");
}

const VnfSpec& NetworkState::spec(VnfKey key) const {
  return sfcs_.at(key.sfc).vnfs.at(key.position);
}

int NetworkState::active_node(VnfKey key) const {
  return sfcs_.at(key.sfc).embedding.at(key.position);
}

const BackupPlacement* NetworkState::backup(VnfKey key) const {
  auto it = backups_.find(key);
  return it == backups_.end() ? nullptr : &it->second;
}

double NetworkState::residual(int node, int resource) const {
  double used = 0.0;
  for (const auto& key : flat_) {
    if (active_node(key) == node) used += spec(key).backup_demand[resource];
  }
  for (const auto& [key, bp] : backups_) {
    if (bp.node == node) used += spec(key).backup_demand[resource];
  }
  return net_.nodes().at(node).capacity[resource] - used;
}

double NetworkState::residual_bandwidth(int link) const {
  double used = 0.0;
  for (const auto& [key, bp] : backups_) {
    (void)key;
    for (int l : bp.sync_route) {
      if (l == link) used += bp.sync_bandwidth_mbps;
    }
  }
  return net_.link(link).bandwidth_mbps - used;
}

double NetworkState::available_ratio(int node, int resource) const {
  const double cap = net_.nodes().at(node).capacity[resource];
  if (cap <= 0.0) return 0.0;
  return std::clamp(residual(node, resource) / cap, 0.0, 1.0);
}

double NetworkState::available_link_ratio(int link) const {
  const double cap = net_.link(link).bandwidth_mbps;
  if (cap <= 0.0) return 0.0;
  return std::clamp(residual_bandwidth(link) / cap, 0.0, 1.0);
}

PlacementError NetworkState::check_backup(VnfKey key, int node) const {
  if (backups_.count(key)) return PlacementError::duplicate_backup;
  if (!net_.nodes().at(node).is_nfv) return PlacementError::no_nfv_node;
  if (node == active_node(key)) return PlacementError::anti_affinity;
  const VnfSpec& s = spec(key);
  for (int p = 0; p < net_.resource_types(); ++p) {
    if (s.backup_demand[p] > residual(node, p) + kSlack) {
      return PlacementError::capacity_exceeded;
    }
  }
  const auto route = net_.shortest_path(active_node(key), node);
  for (int l : route) {
    if (s.sync_baseline_mbps > residual_bandwidth(l) + kSlack) {
      return PlacementError::bandwidth_exceeded;
    }
  }
  return PlacementError::none;
}

PlacementError NetworkState::allocate_backup(VnfKey key, int node) {
  const PlacementError err = check_backup(key, node);
  if (err != PlacementError::none) return err;
  BackupPlacement bp;
  bp.node = node;
  bp.sync_route = net_.shortest_path(active_node(key), node);
  bp.sync_bandwidth_mbps = spec(key).sync_baseline_mbps;
  backups_.emplace(key, std::move(bp));
  return PlacementError::none;
}

PlacementError NetworkState::release_backup(VnfKey key) {
  auto it = backups_.find(key);
  if (it == backups_.end()) return PlacementError::no_backup_present;
  backups_.erase(it);
  return PlacementError::none;
}

double NetworkState::raise_sync_bandwidth(VnfKey key, double target_mbps) {
  auto it = backups_.find(key);
  if (it == backups_.end()) throw std::logic_error("no sync link to reconfigure");
  BackupPlacement& bp = it->second;
  if (target_mbps <= bp.sync_bandwidth_mbps) return bp.sync_bandwidth_mbps;
  double headroom = std::numeric_limits<double>::infinity();
  for (int l : bp.sync_route) headroom = std::min(headroom, residual_bandwidth(l));
  if (bp.sync_route.empty()) headroom = 0.0;
  const double extra = std::min(target_mbps - bp.sync_bandwidth_mbps, std::max(0.0, headroom));
  bp.sync_bandwidth_mbps += extra;
  return bp.sync_bandwidth_mbps;
}

void NetworkState::consume_backup_for_recovery(VnfKey key) {
  auto it = backups_.find(key);
  if (it == backups_.end()) throw std::logic_error("recovery without a backup in place");
  const int new_node = it->second.node;
  backups_.erase(it);
  sfcs_.at(key.sfc).embedding.at(key.position) = new_node;
}

void NetworkState::check_invariants() const {
  for (const auto& node : net_.nodes()) {
    for (int p = 0; p < net_.resource_types(); ++p) {
      const double r = residual(node.id, p);
      if (r < -kSlack) {
        throw std::logic_error("node capacity constraint violated on node " +
                               std::to_string(node.id));
      }
      if (!node.is_nfv && node.capacity[p] == 0.0 && r < -kSlack) {
        throw std::logic_error("forwarding-only node is hosting load");
      }
    }
  }
  for (const auto& link : net_.links()) {
    if (residual_bandwidth(link.id) < -kSlack) {
      throw std::logic_error("link bandwidth constraint violated on link " +
                             std::to_string(link.id));
    }
  }
  for (const auto& key : flat_) {
    auto it = backups_.find(key);
    if (it == backups_.end()) continue;
    if (it->second.node == active_node(key)) {
      throw std::logic_error("anti-affinity violated: backup shares the active node");
    }
    if (!net_.nodes().at(it->second.node).is_nfv) {
      throw std::logic_error("backup placed on a forwarding-only node");
    }
  }
  // std::map keys are unique, so the single-backup constraint holds by
  // construction; hosting on non-NFV nodes is checked above.
}

nlohmann::json NetworkState::to_json() const {
  nlohmann::json j;
  j["resource_types"] = net_.resource_types();
  auto& nodes = j["nodes"] = nlohmann::json::array();
  for (const auto& n : net_.nodes()) {
    nodes.push_back({{"id", n.id}, {"nfv", n.is_nfv}, {"capacity", n.capacity.amounts()}});
  }
  auto& links = j["links"] = nlohmann::json::array();
  for (const auto& l : net_.links()) {
    links.push_back({{"id", l.id}, {"a", l.a}, {"b", l.b}, {"bandwidth_mbps", l.bandwidth_mbps}});
  }
  auto& chains = j["sfcs"] = nlohmann::json::array();
  for (const auto& s : sfcs_) {
    nlohmann::json c;
    c["id"] = s.id;
    c["max_downtime_s"] = s.max_downtime_s;
    c["traffic_pkts_per_s"] = s.traffic_pkts_per_s;
    c["embedding"] = s.embedding;
    auto& vnfs = c["vnfs"] = nlohmann::json::array();
    for (const auto& v : s.vnfs) {
      vnfs.push_back({{"sfc", v.sfc},
                      {"position", v.position},
                      {"backup_demand", v.backup_demand.amounts()},
                      {"sync_baseline_mbps", v.sync_baseline_mbps},
                      {"backup_unit_cost", v.backup_unit_cost},
                      {"hold_cost", {v.hold_cost_normal, v.hold_cost_warning, v.hold_cost_critical}}});
    }
    chains.push_back(std::move(c));
  }
  auto& bks = j["backups"] = nlohmann::json::array();
  for (const auto& [key, bp] : backups_) {
    bks.push_back({{"sfc", key.sfc},
                   {"position", key.position},
                   {"node", bp.node},
                   {"sync_route", bp.sync_route},
                   {"sync_bandwidth_mbps", bp.sync_bandwidth_mbps}});
  }
  return j;
}

std::vector<SfcInstance> embed_sfcs_random(const PhysicalNetwork& net,
                                           const SfcConfig& cfg, Rng& rng) {
  if (cfg.chains < 1 || cfg.vnfs_per_chain < 1) {
    throw std::invalid_argument("chains and vnfs_per_chain must be >= 1");
  }
  std::vector<int> nfv_nodes;
  for (const auto& n : net.nodes()) {
    if (n.is_nfv) nfv_nodes.push_back(n.id);
  }

  for (int attempt = 0; attempt < cfg.embed_retries; ++attempt) {
    std::vector<SfcInstance> sfcs;
    std::vector<std::vector<double>> used(
        net.nodes().size(), std::vector<double>(net.resource_types(), 0.0));
    bool ok = true;
    for (int k = 0; k < cfg.chains && ok; ++k) {
      SfcInstance sfc;
      sfc.id = k;
      sfc.max_downtime_s = rng.uniform(cfg.max_downtime_min_s, cfg.max_downtime_max_s);
      sfc.traffic_pkts_per_s = rng.uniform(cfg.traffic_rate_min, cfg.traffic_rate_max);
      for (int h = 0; h < cfg.vnfs_per_chain && ok; ++h) {
        VnfSpec spec;
        spec.sfc = k;
        spec.position = h;
        std::vector<double> demand(net.resource_types());
        for (auto& d : demand) d = rng.uniform(cfg.backup_demand_min, cfg.backup_demand_max);
        spec.backup_demand = ResourceVector(std::move(demand));
        spec.sync_baseline_mbps = cfg.sync_baseline_mbps;
        spec.backup_unit_cost = cfg.backup_unit_cost;
        spec.hold_cost_normal = cfg.hold_cost_normal;
        spec.hold_cost_warning = cfg.hold_cost_warning;
        spec.hold_cost_critical = cfg.hold_cost_critical;

        std::vector<int> feasible;
        for (int n : nfv_nodes) {
          bool fits = true;
          for (int p = 0; p < net.resource_types(); ++p) {
            if (used[n][p] + spec.backup_demand[p] > net.nodes()[n].capacity[p] + 1e-9) {
              fits = false;
              break;
            }
          }
          if (fits) feasible.push_back(n);
        }
        if (feasible.empty()) {
          ok = false;
          break;
        }
        const int node = feasible[rng.uniform_int(feasible.size())];
        for (int p = 0; p < net.resource_types(); ++p) used[node][p] += spec.backup_demand[p];
        sfc.embedding.push_back(node);
        sfc.vnfs.push_back(std::move(spec));
      }
      sfcs.push_back(std::move(sfc));
    }
    if (ok) return sfcs;
  }
  throw std::runtime_error("random embedding failed: no feasible assignment found");
}

}  // namespace pfrlab
