#include <doctest.h>

#include <set>

#include <nlohmann/json.hpp>

#include "pfrlab/net_model.hpp"
#include "pfrlab/rng.hpp"

using namespace pfrlab;

namespace {
NetworkState default_state(std::uint64_t seed = 7) {
  SubstrateConfig sub;
  PhysicalNetwork net = build_network(sub);
  SfcConfig sfc;
  Rng rng(seed);
  auto sfcs = embed_sfcs_random(net, sfc, rng);
  return NetworkState(std::move(net), std::move(sfcs));
}
}  // namespace

TEST_CASE("fully connected substrate with default scale") {
  SubstrateConfig cfg;
  PhysicalNetwork net = build_network(cfg);
  CHECK(net.nodes().size() == 5);
  CHECK(net.links().size() == 10);  // complete graph on 5 nodes
  for (const auto& n : net.nodes()) CHECK(n.is_nfv);
  NetworkState state(net, {});
  for (const auto& n : net.nodes()) {
    for (int p = 0; p < net.resource_types(); ++p) {
      CHECK(state.available_ratio(n.id, p) == doctest::Approx(1.0));
    }
  }
  for (const auto& l : net.links()) CHECK(state.available_link_ratio(l.id) == doctest::Approx(1.0));
}

TEST_CASE("minimal admissible substrate") {
  SubstrateConfig cfg;
  cfg.node_count = 2;
  cfg.nfv_count = 2;
  PhysicalNetwork net = build_network(cfg);
  CHECK(net.links().size() == 1);
  CHECK(net.nodes()[0].is_nfv);
  CHECK(net.nodes()[1].is_nfv);
}

TEST_CASE("a single NFV node cannot satisfy anti-affinity") {
  SubstrateConfig cfg;
  cfg.node_count = 2;
  cfg.nfv_count = 1;
  CHECK_THROWS_AS(build_network(cfg), std::invalid_argument);
}

TEST_CASE("random embedding places every VNF") {
  SubstrateConfig sub;
  PhysicalNetwork net = build_network(sub);
  SfcConfig sfc;
  Rng rng(42);
  auto sfcs = embed_sfcs_random(net, sfc, rng);
  REQUIRE(sfcs.size() == 3);
  int placed = 0;
  for (const auto& s : sfcs) {
    REQUIRE(s.embedding.size() == 3);
    for (int node : s.embedding) {
      CHECK(net.nodes().at(node).is_nfv);
      ++placed;
    }
  }
  CHECK(placed == 9);
}

TEST_CASE("embedding is deterministic for a fixed seed") {
  SubstrateConfig sub;
  SfcConfig sfc;
  Rng a(123), b(123);
  auto net1 = build_network(sub);
  auto net2 = build_network(sub);
  auto s1 = embed_sfcs_random(net1, sfc, a);
  auto s2 = embed_sfcs_random(net2, sfc, b);
  REQUIRE(s1.size() == s2.size());
  for (std::size_t k = 0; k < s1.size(); ++k) {
    CHECK(s1[k].embedding == s2[k].embedding);
    CHECK(s1[k].traffic_pkts_per_s == doctest::Approx(s2[k].traffic_pkts_per_s));
    CHECK(s1[k].max_downtime_s == doctest::Approx(s2[k].max_downtime_s));
  }
}

TEST_CASE("single VNF on a two node substrate") {
  SubstrateConfig sub;
  sub.node_count = 2;
  sub.nfv_count = 2;
  PhysicalNetwork net = build_network(sub);
  SfcConfig sfc;
  sfc.chains = 1;
  sfc.vnfs_per_chain = 1;
  Rng rng(5);
  auto sfcs = embed_sfcs_random(net, sfc, rng);
  REQUIRE(sfcs.size() == 1);
  REQUIRE(sfcs[0].vnfs.size() == 1);
}

TEST_CASE("backup cannot share its active node") {
  NetworkState state = default_state();
  const VnfKey key = state.vnf_key(0);
  CHECK(state.allocate_backup(key, state.active_node(key)) == PlacementError::anti_affinity);
  CHECK_FALSE(state.has_backup(key));
}

TEST_CASE("only one backup per VNF") {
  NetworkState state = default_state();
  const VnfKey key = state.vnf_key(0);
  int other = -1;
  for (const auto& n : state.network().nodes()) {
    if (n.id != state.active_node(key)) {
      other = n.id;
      break;
    }
  }
  REQUIRE(state.allocate_backup(key, other) == PlacementError::none);
  int third = -1;
  for (const auto& n : state.network().nodes()) {
    if (n.id != state.active_node(key) && n.id != other) {
      third = n.id;
      break;
    }
  }
  CHECK(state.allocate_backup(key, third) == PlacementError::duplicate_backup);
}

TEST_CASE("demand equal to the residual fills the node exactly") {
  SubstrateConfig sub;
  sub.node_count = 2;
  sub.nfv_count = 2;
  sub.resource_types = 1;
  sub.node_capacity = 50.0;
  PhysicalNetwork net = build_network(sub);

  SfcInstance sfc;
  sfc.id = 0;
  VnfSpec spec;
  spec.sfc = 0;
  spec.position = 0;
  spec.backup_demand = ResourceVector({12.5});
  sfc.vnfs.push_back(spec);
  sfc.embedding.push_back(0);
  NetworkState state(net, {sfc});

  // Node 1 is empty; shrink its capacity to exactly the demand via a second
  // active VNF? Simpler: the demand equals the full residual of node 1 when
  // the demand is the capacity.
  SfcInstance big;
  big.id = 1;
  VnfSpec bigspec;
  bigspec.sfc = 1;
  bigspec.position = 0;
  bigspec.backup_demand = ResourceVector({50.0 - 12.5});
  big.vnfs.push_back(bigspec);
  big.embedding.push_back(1);
  NetworkState state2(net, {sfc, big});

  const VnfKey key{0, 0};
  CHECK(state2.residual(1, 0) == doctest::Approx(12.5));
  CHECK(state2.allocate_backup(key, 1) == PlacementError::none);
  CHECK(state2.residual(1, 0) == doctest::Approx(0.0));
  CHECK(state2.available_ratio(1, 0) == doctest::Approx(0.0));
}

TEST_CASE("allocate then release restores the state exactly") {
  NetworkState state = default_state(99);
  const VnfKey key = state.vnf_key(4);

  std::vector<double> before_nodes, before_links;
  for (const auto& n : state.network().nodes()) {
    for (int p = 0; p < state.network().resource_types(); ++p) {
      before_nodes.push_back(state.residual(n.id, p));
    }
  }
  for (const auto& l : state.network().links()) {
    before_links.push_back(state.residual_bandwidth(l.id));
  }

  int node = -1;
  for (const auto& n : state.network().nodes()) {
    if (state.check_backup(key, n.id) == PlacementError::none) {
      node = n.id;
      break;
    }
  }
  REQUIRE(node >= 0);
  REQUIRE(state.allocate_backup(key, node) == PlacementError::none);
  REQUIRE(state.release_backup(key) == PlacementError::none);

  std::size_t i = 0;
  for (const auto& n : state.network().nodes()) {
    for (int p = 0; p < state.network().resource_types(); ++p) {
      CHECK(state.residual(n.id, p) == before_nodes[i++]);
    }
  }
  std::size_t l = 0;
  for (const auto& link : state.network().links()) {
    CHECK(state.residual_bandwidth(link.id) == before_links[l++]);
  }
}

TEST_CASE("release without a backup is rejected") {
  NetworkState state = default_state();
  CHECK(state.release_backup(state.vnf_key(0)) == PlacementError::no_backup_present);
}

TEST_CASE("randomized allocate/release bookkeeping audit") {
  NetworkState state = default_state(2024);
  Rng rng(77);
  const int vnfs = state.vnf_count();
  for (int step = 0; step < 1000; ++step) {
    const VnfKey key = state.vnf_key(static_cast<int>(rng.uniform_int(vnfs)));
    if (rng.bernoulli(0.5)) {
      const int node = static_cast<int>(rng.uniform_int(state.network().nodes().size()));
      (void)state.allocate_backup(key, node);  // any error leaves state untouched
    } else {
      (void)state.release_backup(key);
    }
    REQUIRE_NOTHROW(state.check_invariants());
    for (const auto& n : state.network().nodes()) {
      for (int p = 0; p < state.network().resource_types(); ++p) {
        const double w = state.available_ratio(n.id, p);
        REQUIRE(w >= 0.0);
        REQUIRE(w <= 1.0);
      }
    }
  }
}

TEST_CASE("sync link rides the shortest path with deterministic ties") {
  SubstrateConfig sub;
  sub.node_count = 4;
  sub.nfv_count = 4;
  PhysicalNetwork net = build_network(sub);
  // Full mesh: every pair is adjacent, so the path is the direct link.
  const auto path = net.shortest_path(0, 3);
  REQUIRE(path.size() == 1);
  CHECK(net.link(path[0]).a == 0);
  CHECK(net.link(path[0]).b == 3);
}

TEST_CASE("topology serializes with embedding and backups") {
  NetworkState state = default_state(11);
  const VnfKey key = state.vnf_key(0);
  for (const auto& n : state.network().nodes()) {
    if (state.check_backup(key, n.id) == PlacementError::none) {
      state.allocate_backup(key, n.id);
      break;
    }
  }
  const auto j = state.to_json();
  CHECK(j.at("nodes").size() == 5);
  CHECK(j.at("links").size() == 10);
  CHECK(j.at("sfcs").size() == 3);
  CHECK(j.at("backups").size() == 1);
}
