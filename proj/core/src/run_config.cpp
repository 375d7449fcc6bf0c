#include "pfrlab/run_config.hpp"

#include <fstream>
#include <set>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace pfrlab {

namespace {
using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw std::invalid_argument("config error at '" + path + "': " + what);
}

// Applies present keys onto defaults and rejects anything unexpected.
class Section {
 public:
  Section(const json& j, std::string path, std::set<std::string> known)
      : j_(j), path_(std::move(path)), known_(std::move(known)) {
    if (!j_.is_object()) fail(path_, "expected an object");
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!known_.count(it.key())) fail(path_ + "." + it.key(), "unknown key");
    }
  }

  template <typename T>
  void get(const char* key, T& out) const {
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->get<T>();
    } catch (const json::exception& e) {
      fail(path_ + "." + key, e.what());
    }
  }

  bool has(const char* key) const { return j_.contains(key); }
  const json& sub(const char* key) const { return j_.at(key); }
  std::string subpath(const char* key) const { return path_ + "." + key; }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> known_;
};
}  // namespace

void PpoConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("ppo.epochs must be >= 1");
  if (learning_rate <= 0.0) throw std::invalid_argument("ppo.learning_rate must be positive");
  if (clip_ratio <= 0.0 || clip_ratio >= 1.0) {
    throw std::invalid_argument("ppo.clip_ratio must lie in (0, 1)");
  }
  if (parallel_envs < 1) throw std::invalid_argument("ppo.parallel_envs must be >= 1");
  if (entropy_coef < 0.0 || value_coef < 0.0 || max_grad_norm < 0.0) {
    throw std::invalid_argument("ppo coefficients must be non-negative");
  }
  if (reward_scale <= 0.0) throw std::invalid_argument("ppo.reward_scale must be positive");
  if (target_kl < 0.0) throw std::invalid_argument("ppo.target_kl must be non-negative");
}

void SacConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("sac.epochs must be >= 1");
  if (learning_rate <= 0.0) throw std::invalid_argument("sac.learning_rate must be positive");
  if (target_update_period < 1) throw std::invalid_argument("sac.target_update_period must be >= 1");
  if (target_smoothing <= 0.0 || target_smoothing > 1.0) {
    throw std::invalid_argument("sac.target_smoothing must lie in (0, 1]");
  }
  if (replay_capacity_episodes < 1 || batch_episodes < 1 || parallel_envs < 1) {
    throw std::invalid_argument("sac sizes must be >= 1");
  }
  if (batch_episodes > replay_capacity_episodes) {
    throw std::invalid_argument("sac.batch_episodes exceeds the replay capacity");
  }
  if (temperature <= 0.0) throw std::invalid_argument("sac.temperature must be positive");
  if (target_entropy_ratio <= 0.0 || target_entropy_ratio > 1.0) {
    throw std::invalid_argument("sac.target_entropy_ratio must lie in (0, 1]");
  }
  if (reward_scale <= 0.0) throw std::invalid_argument("sac.reward_scale must be positive");
}

void AgentConfig::validate() const {
  if (kind != "lstm_ppo" && kind != "lstm_sac" && kind != "ff_ppo") {
    throw std::invalid_argument("agent.kind must be lstm_ppo, lstm_sac or ff_ppo");
  }
  if (discount <= 0.0 || discount > 1.0) {
    throw std::invalid_argument("agent.discount must lie in (0, 1]");
  }
  ppo.validate();
  sac.validate();
}

void RunSection::validate() const {
  if (iterations < 1) throw std::invalid_argument("run.iterations must be >= 1");
  if (eval_interval < 1 || eval_episodes < 1) {
    throw std::invalid_argument("run.eval_interval and run.eval_episodes must be >= 1");
  }
  if (robustness_interval < 1 || robustness_episodes < 1) {
    throw std::invalid_argument("run.robustness settings must be >= 1");
  }
  if (threads < 1) throw std::invalid_argument("run.threads must be >= 1");
  if (checkpoint_interval < 1) throw std::invalid_argument("run.checkpoint_interval must be >= 1");
}

void RunConfig::validate() const {
  env.validate();
  agent.validate();
  run.validate();
  if (!agent.architecture.fc_pre.empty() || !agent.architecture.lstm.empty()) {
    ArchitectureSpec probe = resolved_architecture();
    probe.validate();
    if (agent.kind == "ff_ppo" && !probe.lstm.empty()) {
      throw std::invalid_argument("agent.kind ff_ppo cannot carry lstm layers");
    }
  }
}

ArchitectureSpec default_recurrent_architecture(int vnf_count) {
  ArchitectureSpec s;
  s.fc_pre = {512, 512};
  s.lstm = {100, 100};
  s.fc_post = {256, 256};
  s.head_count = vnf_count;
  s.head_arity = kActionArity;
  return s;
}

ArchitectureSpec default_feedforward_architecture(int vnf_count) {
  ArchitectureSpec s;
  s.fc_pre = {512, 512, 512, 512, 512, 512, 512, 512, 512, 512, 256, 128};
  s.dropout_pre = {0.4, 0.4, 0.4, 0.4, 0.4, 0.4, 0.4, 0.4, 0.4, 0.4, 0.2, 0.2};
  s.head_count = vnf_count;
  s.head_arity = kActionArity;
  return s;
}

ArchitectureSpec RunConfig::resolved_architecture() const {
  ArchitectureSpec s = agent.architecture;
  if (s.fc_pre.empty() && s.lstm.empty() && s.fc_post.empty()) {
    s = agent.kind == "ff_ppo" ? default_feedforward_architecture(env.vnf_count())
                               : default_recurrent_architecture(env.vnf_count());
  }
  s.head_count = env.vnf_count();
  s.head_arity = kActionArity;
  s.policy_heads = true;
  s.value_head = !agent.uses_sac();
  s.q_value_sets = 0;
  if (s.input_width == 0) s.input_width = env.observation_schema().length();
  return s;
}

nlohmann::json RunConfig::to_json() const {
  json j;
  j["substrate"] = {{"nodes", env.substrate.node_count},
                    {"nfv_nodes", env.substrate.nfv_count},
                    {"resource_types", env.substrate.resource_types},
                    {"node_capacity", env.substrate.node_capacity},
                    {"link_bandwidth_mbps", env.substrate.link_bandwidth_mbps}};
  j["sfc"] = {{"chains", env.sfc.chains},
              {"vnfs_per_chain", env.sfc.vnfs_per_chain},
              {"backup_demand_min", env.sfc.backup_demand_min},
              {"backup_demand_max", env.sfc.backup_demand_max},
              {"sync_baseline_mbps", env.sfc.sync_baseline_mbps},
              {"backup_unit_cost", env.sfc.backup_unit_cost},
              {"hold_cost_normal", env.sfc.hold_cost_normal},
              {"hold_cost_warning", env.sfc.hold_cost_warning},
              {"hold_cost_critical", env.sfc.hold_cost_critical},
              {"traffic_rate_min", env.sfc.traffic_rate_min},
              {"traffic_rate_max", env.sfc.traffic_rate_max},
              {"max_downtime_min_s", env.sfc.max_downtime_min_s},
              {"max_downtime_max_s", env.sfc.max_downtime_max_s},
              {"statelet_bits_per_packet", env.statelet.bits_per_packet},
              {"seconds_per_slot", env.statelet.seconds_per_slot}};
  j["failure"] = {{"min_warning_dwell", env.failure.min_warning_dwell},
                  {"warn_prob_min", env.failure.warn_prob_min},
                  {"warn_prob_max", env.failure.warn_prob_max},
                  {"critical_prob_min", env.failure.critical_prob_min},
                  {"critical_prob_max", env.failure.critical_prob_max},
                  {"repair_prob_min", env.failure.repair_prob_min},
                  {"repair_prob_max", env.failure.repair_prob_max}};
  j["monitoring"] = {{"max_age_normal", env.monitoring.max_age_normal},
                     {"max_age_warning", env.monitoring.max_age_warning},
                     {"max_age_critical", env.monitoring.max_age_critical},
                     {"report_loss_prob", env.monitoring.report_loss_prob},
                     {"slot_duration", env.monitoring.slot_duration},
                     {"age_cap", env.monitoring.age_cap}};
  j["reward"] = {{"sla_penalty_weight", env.reward.sla_penalty_weight},
                 {"false_alarm_penalty_weight", env.reward.false_alarm_penalty_weight},
                 {"sla_cost_weight", env.reward.sla_cost_weight},
                 {"resource_cost_weight", env.reward.resource_cost_weight},
                 {"false_alarm_cost_weight", env.reward.false_alarm_cost_weight},
                 {"bonus_remove_in_normal", env.reward.bonus_remove_in_normal},
                 {"bonus_place_in_warning", env.reward.bonus_place_in_warning},
                 {"bonus_recover_in_critical", env.reward.bonus_recover_in_critical},
                 {"bonus_proactive_recovery", env.reward.bonus_proactive_recovery},
                 {"sync_slack_epsilon", env.reward.sync_slack_epsilon}};
  json arch = nullptr;
  if (!agent.architecture.fc_pre.empty() || !agent.architecture.lstm.empty() ||
      !agent.architecture.fc_post.empty()) {
    arch = {{"fc_pre", agent.architecture.fc_pre},
            {"dropout_pre", agent.architecture.dropout_pre},
            {"lstm", agent.architecture.lstm},
            {"fc_post", agent.architecture.fc_post},
            {"dropout_post", agent.architecture.dropout_post},
            {"activation", std::string(to_string(agent.architecture.activation))}};
  }
  j["agent"] = {{"kind", agent.kind},
                {"discount", agent.discount},
                {"architecture", arch},
                {"ppo",
                 {{"epochs", agent.ppo.epochs},
                  {"learning_rate", agent.ppo.learning_rate},
                  {"entropy_coef", agent.ppo.entropy_coef},
                  {"value_coef", agent.ppo.value_coef},
                  {"clip_ratio", agent.ppo.clip_ratio},
                  {"parallel_envs", agent.ppo.parallel_envs},
                  {"normalize_advantage", agent.ppo.normalize_advantage},
                  {"max_grad_norm", agent.ppo.max_grad_norm},
                  {"reward_scale", agent.ppo.reward_scale},
                  {"target_kl", agent.ppo.target_kl}}},
                {"sac",
                 {{"epochs", agent.sac.epochs},
                  {"learning_rate", agent.sac.learning_rate},
                  {"reward_scale", agent.sac.reward_scale},
                  {"target_update_period", agent.sac.target_update_period},
                  {"target_smoothing", agent.sac.target_smoothing},
                  {"replay_capacity_episodes", agent.sac.replay_capacity_episodes},
                  {"batch_episodes", agent.sac.batch_episodes},
                  {"parallel_envs", agent.sac.parallel_envs},
                  {"warmup_episodes", agent.sac.warmup_episodes},
                  {"auto_temperature", agent.sac.auto_temperature},
                  {"temperature", agent.sac.temperature},
                  {"target_entropy_ratio", agent.sac.target_entropy_ratio},
                  {"max_grad_norm", agent.sac.max_grad_norm}}}};
  j["run"] = {{"episode_length", env.episode_length},
              {"reuse_embedding", env.reuse_embedding},
              {"audit", env.audit},
              {"iterations", run.iterations},
              {"eval_interval", run.eval_interval},
              {"eval_episodes", run.eval_episodes},
              {"robustness_interval", run.robustness_interval},
              {"robustness_episodes", run.robustness_episodes},
              {"master_seed", run.master_seed},
              {"output_dir", run.output_dir},
              {"threads", run.threads},
              {"checkpoint_interval", run.checkpoint_interval}};
  return j;
}

RunConfig RunConfig::from_json(const json& j) {
  RunConfig cfg;
  Section root(j, "config",
               {"substrate", "sfc", "failure", "monitoring", "reward", "agent", "run"});

  if (root.has("substrate")) {
    Section s(root.sub("substrate"), root.subpath("substrate"),
              {"nodes", "nfv_nodes", "resource_types", "node_capacity", "link_bandwidth_mbps"});
    s.get("nodes", cfg.env.substrate.node_count);
    s.get("nfv_nodes", cfg.env.substrate.nfv_count);
    s.get("resource_types", cfg.env.substrate.resource_types);
    s.get("node_capacity", cfg.env.substrate.node_capacity);
    s.get("link_bandwidth_mbps", cfg.env.substrate.link_bandwidth_mbps);
  }
  if (root.has("sfc")) {
    Section s(root.sub("sfc"), root.subpath("sfc"),
              {"chains", "vnfs_per_chain", "backup_demand_min", "backup_demand_max",
               "sync_baseline_mbps", "backup_unit_cost", "hold_cost_normal", "hold_cost_warning",
               "hold_cost_critical", "traffic_rate_min", "traffic_rate_max", "max_downtime_min_s",
               "max_downtime_max_s", "statelet_bits_per_packet", "seconds_per_slot"});
    s.get("chains", cfg.env.sfc.chains);
    s.get("vnfs_per_chain", cfg.env.sfc.vnfs_per_chain);
    s.get("backup_demand_min", cfg.env.sfc.backup_demand_min);
    s.get("backup_demand_max", cfg.env.sfc.backup_demand_max);
    s.get("sync_baseline_mbps", cfg.env.sfc.sync_baseline_mbps);
    s.get("backup_unit_cost", cfg.env.sfc.backup_unit_cost);
    s.get("hold_cost_normal", cfg.env.sfc.hold_cost_normal);
    s.get("hold_cost_warning", cfg.env.sfc.hold_cost_warning);
    s.get("hold_cost_critical", cfg.env.sfc.hold_cost_critical);
    s.get("traffic_rate_min", cfg.env.sfc.traffic_rate_min);
    s.get("traffic_rate_max", cfg.env.sfc.traffic_rate_max);
    s.get("max_downtime_min_s", cfg.env.sfc.max_downtime_min_s);
    s.get("max_downtime_max_s", cfg.env.sfc.max_downtime_max_s);
    s.get("statelet_bits_per_packet", cfg.env.statelet.bits_per_packet);
    s.get("seconds_per_slot", cfg.env.statelet.seconds_per_slot);
  }
  if (root.has("failure")) {
    Section s(root.sub("failure"), root.subpath("failure"),
              {"min_warning_dwell", "warn_prob_min", "warn_prob_max", "critical_prob_min",
               "critical_prob_max", "repair_prob_min", "repair_prob_max"});
    s.get("min_warning_dwell", cfg.env.failure.min_warning_dwell);
    s.get("warn_prob_min", cfg.env.failure.warn_prob_min);
    s.get("warn_prob_max", cfg.env.failure.warn_prob_max);
    s.get("critical_prob_min", cfg.env.failure.critical_prob_min);
    s.get("critical_prob_max", cfg.env.failure.critical_prob_max);
    s.get("repair_prob_min", cfg.env.failure.repair_prob_min);
    s.get("repair_prob_max", cfg.env.failure.repair_prob_max);
  }
  if (root.has("monitoring")) {
    Section s(root.sub("monitoring"), root.subpath("monitoring"),
              {"max_age_normal", "max_age_warning", "max_age_critical", "report_loss_prob",
               "slot_duration", "age_cap"});
    s.get("max_age_normal", cfg.env.monitoring.max_age_normal);
    s.get("max_age_warning", cfg.env.monitoring.max_age_warning);
    s.get("max_age_critical", cfg.env.monitoring.max_age_critical);
    s.get("report_loss_prob", cfg.env.monitoring.report_loss_prob);
    s.get("slot_duration", cfg.env.monitoring.slot_duration);
    s.get("age_cap", cfg.env.monitoring.age_cap);
  }
  if (root.has("reward")) {
    Section s(root.sub("reward"), root.subpath("reward"),
              {"sla_penalty_weight", "false_alarm_penalty_weight", "sla_cost_weight",
               "resource_cost_weight", "false_alarm_cost_weight", "bonus_remove_in_normal",
               "bonus_place_in_warning", "bonus_recover_in_critical", "bonus_proactive_recovery",
               "sync_slack_epsilon"});
    s.get("sla_penalty_weight", cfg.env.reward.sla_penalty_weight);
    s.get("false_alarm_penalty_weight", cfg.env.reward.false_alarm_penalty_weight);
    s.get("sla_cost_weight", cfg.env.reward.sla_cost_weight);
    s.get("resource_cost_weight", cfg.env.reward.resource_cost_weight);
    s.get("false_alarm_cost_weight", cfg.env.reward.false_alarm_cost_weight);
    s.get("bonus_remove_in_normal", cfg.env.reward.bonus_remove_in_normal);
    s.get("bonus_place_in_warning", cfg.env.reward.bonus_place_in_warning);
    s.get("bonus_recover_in_critical", cfg.env.reward.bonus_recover_in_critical);
    s.get("bonus_proactive_recovery", cfg.env.reward.bonus_proactive_recovery);
    s.get("sync_slack_epsilon", cfg.env.reward.sync_slack_epsilon);
  }
  if (root.has("agent")) {
    Section s(root.sub("agent"), root.subpath("agent"),
              {"kind", "discount", "architecture", "ppo", "sac"});
    s.get("kind", cfg.agent.kind);
    s.get("discount", cfg.agent.discount);
    if (s.has("architecture") && !s.sub("architecture").is_null()) {
      Section a(s.sub("architecture"), s.subpath("architecture"),
                {"fc_pre", "dropout_pre", "lstm", "fc_post", "dropout_post", "activation"});
      a.get("fc_pre", cfg.agent.architecture.fc_pre);
      a.get("dropout_pre", cfg.agent.architecture.dropout_pre);
      a.get("lstm", cfg.agent.architecture.lstm);
      a.get("fc_post", cfg.agent.architecture.fc_post);
      a.get("dropout_post", cfg.agent.architecture.dropout_post);
      std::string act = std::string(to_string(cfg.agent.architecture.activation));
      a.get("activation", act);
      cfg.agent.architecture.activation = activation_from_string(act);
    }
    if (s.has("ppo")) {
      Section p(s.sub("ppo"), s.subpath("ppo"),
                {"epochs", "learning_rate", "entropy_coef", "value_coef", "clip_ratio",
                 "parallel_envs", "normalize_advantage", "max_grad_norm", "reward_scale",
                 "target_kl"});
      p.get("epochs", cfg.agent.ppo.epochs);
      p.get("learning_rate", cfg.agent.ppo.learning_rate);
      p.get("entropy_coef", cfg.agent.ppo.entropy_coef);
      p.get("value_coef", cfg.agent.ppo.value_coef);
      p.get("clip_ratio", cfg.agent.ppo.clip_ratio);
      p.get("parallel_envs", cfg.agent.ppo.parallel_envs);
      p.get("normalize_advantage", cfg.agent.ppo.normalize_advantage);
      p.get("max_grad_norm", cfg.agent.ppo.max_grad_norm);
      p.get("reward_scale", cfg.agent.ppo.reward_scale);
      p.get("target_kl", cfg.agent.ppo.target_kl);
    }
    if (s.has("sac")) {
      Section p(s.sub("sac"), s.subpath("sac"),
                {"epochs", "learning_rate", "reward_scale", "target_update_period",
                 "target_smoothing", "replay_capacity_episodes", "batch_episodes",
                 "parallel_envs", "warmup_episodes", "auto_temperature", "temperature",
                 "target_entropy_ratio", "max_grad_norm"});
      p.get("epochs", cfg.agent.sac.epochs);
      p.get("learning_rate", cfg.agent.sac.learning_rate);
      p.get("reward_scale", cfg.agent.sac.reward_scale);
      p.get("target_update_period", cfg.agent.sac.target_update_period);
      p.get("target_smoothing", cfg.agent.sac.target_smoothing);
      p.get("replay_capacity_episodes", cfg.agent.sac.replay_capacity_episodes);
      p.get("batch_episodes", cfg.agent.sac.batch_episodes);
      p.get("parallel_envs", cfg.agent.sac.parallel_envs);
      p.get("warmup_episodes", cfg.agent.sac.warmup_episodes);
      p.get("auto_temperature", cfg.agent.sac.auto_temperature);
      p.get("temperature", cfg.agent.sac.temperature);
      p.get("target_entropy_ratio", cfg.agent.sac.target_entropy_ratio);
      p.get("max_grad_norm", cfg.agent.sac.max_grad_norm);
    }
  }
  if (root.has("run")) {
    Section s(root.sub("run"), root.subpath("run"),
              {"episode_length", "reuse_embedding", "audit", "iterations", "eval_interval",
               "eval_episodes", "robustness_interval", "robustness_episodes", "master_seed",
               "output_dir", "threads", "checkpoint_interval"});
    s.get("episode_length", cfg.env.episode_length);
    s.get("reuse_embedding", cfg.env.reuse_embedding);
    s.get("audit", cfg.env.audit);
    s.get("iterations", cfg.run.iterations);
    s.get("eval_interval", cfg.run.eval_interval);
    s.get("eval_episodes", cfg.run.eval_episodes);
    s.get("robustness_interval", cfg.run.robustness_interval);
    s.get("robustness_episodes", cfg.run.robustness_episodes);
    s.get("master_seed", cfg.run.master_seed);
    s.get("output_dir", cfg.run.output_dir);
    s.get("threads", cfg.run.threads);
    s.get("checkpoint_interval", cfg.run.checkpoint_interval);
  }
  cfg.validate();
  return cfg;
}

RunConfig RunConfig::load_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::invalid_argument("cannot open config file: " + path);
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw std::invalid_argument("config parse failure in " + path + ": " + e.what());
  }
  return from_json(j);
}

}  // namespace pfrlab
