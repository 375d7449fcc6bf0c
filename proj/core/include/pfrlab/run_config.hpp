#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "pfrlab/env.hpp"
#include "pfrlab/policy_net.hpp"

namespace pfrlab {

struct PpoConfig {
  int epochs = 25;
  double learning_rate = 4e-4;
  double entropy_coef = 1e-2;
  double value_coef = 1.0;
  double clip_ratio = 0.2;
  int parallel_envs = 32;
  bool normalize_advantage = true;
  double max_grad_norm = 0.5;  // 0 disables clipping
  // Epoch loop stops early once the mean approximate KL to the collection
  // policy exceeds this bound (0 disables the stop).
  double target_kl = 0.1;
  // Training-internal scaling of returns and value targets. Normalized
  // advantages make the surrogate objective invariant to it; it exists to
  // condition the value regression when raw returns span hundreds of units.
  double reward_scale = 0.01;

  void validate() const;
};

struct SacConfig {
  int epochs = 25;
  double learning_rate = 3e-4;
  double reward_scale = 1.0;
  int target_update_period = 1;
  double target_smoothing = 5e-3;  // polyak step toward the online weights
  int replay_capacity_episodes = 1000;
  int batch_episodes = 8;
  int parallel_envs = 16;
  int warmup_episodes = 16;  // minimum replay fill before updates start
  bool auto_temperature = true;
  double temperature = 0.2;           // used when auto tuning is off
  double target_entropy_ratio = 0.6;  // fraction of the maximum joint entropy
  double max_grad_norm = 0.0;

  void validate() const;
};

// "lstm_ppo" / "lstm_sac" use the recurrent default architecture; "ff_ppo" is
// the dropout feed-forward baseline without recurrence.
struct AgentConfig {
  std::string kind = "lstm_ppo";
  ArchitectureSpec architecture;  // input_width 0 = derive from the environment
  PpoConfig ppo;
  SacConfig sac;
  double discount = 0.99;

  void validate() const;
  bool uses_sac() const { return kind == "lstm_sac"; }
};

struct RunSection {
  long iterations = 1000;
  int eval_interval = 50;
  int eval_episodes = 50;
  int robustness_interval = 500;
  int robustness_episodes = 50;
  std::uint64_t master_seed = 1;
  std::string output_dir = "run";
  int threads = 1;
  int checkpoint_interval = 50;

  void validate() const;
};

struct RunConfig {
  EnvConfig env;
  AgentConfig agent;
  RunSection run;

  void validate() const;
  nlohmann::json to_json() const;
  // Rejects unknown keys anywhere in the document; missing keys keep their
  // defaults. Errors carry the offending field path.
  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig load_file(const std::string& path);

  // Architecture actually instantiated: fills input_width from the
  // environment schema and picks the per-kind default when none is given.
  ArchitectureSpec resolved_architecture() const;
};

// Default layer plans.
ArchitectureSpec default_recurrent_architecture(int vnf_count);
ArchitectureSpec default_feedforward_architecture(int vnf_count);

}  // namespace pfrlab
