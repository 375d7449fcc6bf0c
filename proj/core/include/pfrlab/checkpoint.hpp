#pragma once

#include <cstdint>
#include <string>

#include "pfrlab/policy_net.hpp"

namespace pfrlab {

// Versioned policy checkpoint: architecture + flat parameters + the hash of
// the observation schema the policy was trained against. Loading refuses a
// mismatched schema so stale checkpoints cannot silently consume the wrong
// input layout.
struct Checkpoint {
  int format_version = 1;
  std::string agent_kind;            // "lstm_ppo", "lstm_sac", "ff_ppo", ...
  std::uint64_t observation_schema_hash = 0;
  ArchitectureSpec spec;
  Eigen::VectorXd params;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);
// Throws std::runtime_error naming both hashes when they differ.
void require_schema(const Checkpoint& ckpt, std::uint64_t expected_hash);

}  // namespace pfrlab
