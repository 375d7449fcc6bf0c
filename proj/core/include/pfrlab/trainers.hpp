#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pfrlab/env.hpp"
#include "pfrlab/metrics.hpp"
#include "pfrlab/policy_net.hpp"
#include "pfrlab/run_config.hpp"

namespace pfrlab {

// One collected episode: per-slot observation, joint action, reward and the
// collection-time policy outputs needed by the updates.
struct Trajectory {
  std::vector<std::vector<double>> observations;  // length T+1: s(0)..s(T)
  std::vector<std::vector<int>> actions;          // length T
  std::vector<double> rewards;                    // r_tot per slot
  std::vector<double> log_probs;                  // joint log pi at collection
  std::vector<double> values;                     // V(s(t)) at collection
  std::vector<bool> done;                         // true only at the last slot

  int length() const { return static_cast<int>(actions.size()); }
};

// Discounted suffix sums: R(t) = r(t) + gamma * R(t+1), R(T) = 0.
std::vector<double> episode_returns(const Trajectory& traj, double discount);

struct RolloutBatch {
  std::vector<Trajectory> episodes;
  std::uint64_t policy_version = 0;
  double mean_episode_return = 0.0;
};

// Runs one full episode per environment in lockstep, sampling from the
// current policy. Episode and action-sampling seeds derive statelessly from
// (seed, iteration, env index), so collection is reproducible and resumable.
RolloutBatch collect_rollouts(const RecurrentNet& net, std::vector<RecoveryEnv>& envs,
                              std::uint64_t seed, long iteration);

// Monte-Carlo advantage: returns minus the collection-time value baseline,
// optionally normalized to zero mean and unit variance over the whole batch.
// reward_scale multiplies the returns (training-internal scaling; with
// normalization on, the policy objective is invariant to it).
std::vector<std::vector<double>> compute_advantages(const RolloutBatch& batch, double discount,
                                                    bool normalize, double reward_scale = 1.0);

struct PpoReport {
  double policy_objective = 0.0;  // clipped surrogate, maximized
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
  double grad_norm = 0.0;
  double max_ratio_error = 0.0;  // |p - 1|, meaningful on the first epoch
  double approx_kl = 0.0;        // mean (p - 1) - log p against the collection policy
  int epochs_run = 0;
};

// Composite minimized loss -E[min(p A, clip(p) A)] + c1 (R - V)^2 - c2 H as a
// pure function of the parameters, with its analytic gradient on request.
// Dropout masks, when the architecture has any, derive from dropout_seed so
// repeated evaluations see the same stochastic network.
double ppo_composite_loss(const RecurrentNet& net, const RolloutBatch& batch,
                          const std::vector<std::vector<double>>& advantages,
                          const std::vector<std::vector<double>>& returns, const PpoConfig& cfg,
                          Eigen::VectorXd* grad, PpoReport* report,
                          std::uint64_t dropout_seed = 0);

// Clipped-surrogate update: cfg.epochs full-batch passes maximizing
// E[min(p A, clip(p) A)] - c1 (R - V)^2 + c2 H. Throws on non-finite losses
// and on a batch collected under a different parameter version.
PpoReport ppo_update(RecurrentNet& net, AdamOptimizer& opt, const RolloutBatch& batch,
                     const PpoConfig& cfg, double discount);

struct SacReport {
  double q_loss = 0.0;
  double actor_loss = 0.0;
  double entropy = 0.0;
  double temperature = 0.0;
  double grad_norm = 0.0;
};

struct SacBatchView {
  std::vector<const Trajectory*> episodes;
};

// Twin soft-Q regression loss against the entropy-regularized bootstrap
// target (targets are constants; the gradient flows through the online
// critic only).
double sac_critic_loss(const RecurrentNet& critic, const RecurrentNet& critic_target,
                       const RecurrentNet& actor, const SacBatchView& batch, double alpha,
                       double discount, double reward_scale, Eigen::VectorXd* grad);

// Per-head expected alpha*log(pi) - min(Q1, Q2) with the critic frozen.
double sac_actor_loss(const RecurrentNet& actor, const RecurrentNet& critic,
                      const SacBatchView& batch, double alpha, Eigen::VectorXd* grad,
                      double* mean_entropy);

// Discrete soft actor-critic over the factored action space. The critic
// carries twin per-(VNF, action) value heads on one trunk; joint values are
// sums over per-VNF entries. Replay holds whole episodes so the recurrent
// state is always rebuilt from the episode start.
class SacTrainer {
 public:
  SacTrainer(const ArchitectureSpec& actor_spec, const SacConfig& cfg, double discount,
             std::uint64_t seed);

  RecurrentNet& actor() { return actor_; }
  const RecurrentNet& actor() const { return actor_; }
  const RecurrentNet& critic() const { return critic_; }
  const RecurrentNet& critic_target() const { return critic_target_; }
  double temperature() const;

  void add_episodes(std::vector<Trajectory> episodes);
  long replay_size() const { return static_cast<long>(replay_.size()); }
  bool ready() const;

  // One gradient update on a sampled minibatch of episodes.
  SacReport update(std::uint64_t seed);

  nlohmann::json state_to_json() const;
  void restore_state(const nlohmann::json& j);

 private:
  SacConfig cfg_;
  double discount_;
  RecurrentNet actor_, critic_, critic_target_;
  AdamOptimizer actor_opt_, critic_opt_;
  double log_temperature_ = 0.0;
  double temp_m_ = 0.0, temp_v_ = 0.0;  // scalar adaptive moments
  long temp_steps_ = 0;
  long updates_ = 0;
  std::deque<Trajectory> replay_;
};

struct IterationRow {
  long iteration = 0;
  double collect_return = 0.0;
  std::optional<AccuracyReport> eval;
  std::optional<PpoReport> ppo;
  std::optional<SacReport> sac;
};

struct TrainResult {
  std::vector<IterationRow> history;
  AccuracyReport best_eval;   // evaluation with the highest critical accuracy
  long best_iteration = -1;
  std::string checkpoint_path;
};

using TrainObserver = std::function<void(const IterationRow&)>;

// Full training protocol: iterate collect->update, evaluate with greedy
// actions on a fixed cadence, probe robustness on fresh regimes, persist
// checkpoints and a resumable trainer state under `out_dir`.
TrainResult train(const RunConfig& cfg, const std::string& out_dir, bool resume = false,
                  const TrainObserver& observer = nullptr);

}  // namespace pfrlab
