#include "pfrlab/trainers.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <limits>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "pfrlab/checkpoint.hpp"

namespace pfrlab {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using nlohmann::json;

std::vector<double> episode_returns(const Trajectory& traj, double discount) {
  std::vector<double> returns(traj.rewards.size(), 0.0);
  double acc = 0.0;
  for (int t = static_cast<int>(traj.rewards.size()) - 1; t >= 0; --t) {
    acc = traj.rewards[t] + discount * acc;
    returns[t] = acc;
  }
  return returns;
}

RolloutBatch collect_rollouts(const RecurrentNet& net, std::vector<RecoveryEnv>& envs,
                              std::uint64_t seed, long iteration) {
  const int batch = static_cast<int>(envs.size());
  if (batch == 0) throw std::invalid_argument("empty environment pool");
  const auto& spec = net.spec();
  const int width = spec.input_width;
  const int heads = spec.head_count;

  RolloutBatch out;
  out.policy_version = net.version();
  out.episodes.resize(batch);
  std::vector<Rng> action_rng;
  std::vector<SlotOutcome> outcomes;
  for (int i = 0; i < batch; ++i) {
    const std::uint64_t it = static_cast<std::uint64_t>(iteration);
    const std::uint64_t ix = static_cast<std::uint64_t>(i);
    outcomes.push_back(envs[i].reset(mix_seed(seed, {0xc0113c7ull, it, ix})));
    action_rng.emplace_back(mix_seed(seed, {0xac710ull, it, ix}));
    out.episodes[i].observations.push_back(outcomes[i].observation);
  }

  RecurrentState state = net.initial_state(batch);
  MatrixXd x(batch, width);
  const int episode_length = envs.front().config().episode_length;
  for (int t = 0; t < episode_length; ++t) {
    for (int i = 0; i < batch; ++i) {
      for (int w = 0; w < width; ++w) x(i, w) = outcomes[i].observation[w];
    }
    const MatrixXd net_out = net.step(x, state);
    ActionDistribution dist(net_out.leftCols(heads * spec.head_arity), heads, spec.head_arity);
    for (int i = 0; i < batch; ++i) {
      Trajectory& traj = out.episodes[i];
      std::vector<int> picks = dist.sample_row(i, action_rng[i]);
      traj.log_probs.push_back(dist.log_prob_row(i, picks));
      if (spec.value_head) {
        traj.values.push_back(net_out(i, spec.value_offset()));
      } else {
        traj.values.push_back(0.0);
      }
      std::vector<VnfAction> actions(picks.size());
      for (std::size_t v = 0; v < picks.size(); ++v) actions[v] = static_cast<VnfAction>(picks[v]);
      outcomes[i] = envs[i].step(actions);
      traj.actions.push_back(std::move(picks));
      traj.rewards.push_back(outcomes[i].reward.total);
      traj.done.push_back(outcomes[i].done);
      traj.observations.push_back(outcomes[i].observation);
    }
  }
  double total = 0.0;
  for (const auto& traj : out.episodes) {
    for (double r : traj.rewards) total += r;
  }
  out.mean_episode_return = total / batch;
  return out;
}

std::vector<std::vector<double>> compute_advantages(const RolloutBatch& batch, double discount,
                                                    bool normalize, double reward_scale) {
  std::vector<std::vector<double>> adv(batch.episodes.size());
  double sum = 0.0, sum_sq = 0.0;
  long count = 0;
  for (std::size_t e = 0; e < batch.episodes.size(); ++e) {
    const auto returns = episode_returns(batch.episodes[e], discount);
    adv[e].resize(returns.size());
    for (std::size_t t = 0; t < returns.size(); ++t) {
      adv[e][t] = reward_scale * returns[t] - batch.episodes[e].values[t];
      sum += adv[e][t];
      sum_sq += adv[e][t] * adv[e][t];
      ++count;
    }
  }
  if (normalize && count > 1) {
    const double mean = sum / count;
    const double var = std::max(0.0, sum_sq / count - mean * mean);
    const double scale = 1.0 / (std::sqrt(var) + 1e-8);
    for (auto& ep : adv) {
      for (auto& a : ep) a = (a - mean) * scale;
    }
  }
  return adv;
}

namespace {

std::vector<MatrixXd> batch_inputs(const RolloutBatch& batch, int width, int steps) {
  const int b = static_cast<int>(batch.episodes.size());
  std::vector<MatrixXd> xs(steps, MatrixXd(b, width));
  for (int t = 0; t < steps; ++t) {
    for (int e = 0; e < b; ++e) {
      const auto& obs = batch.episodes[e].observations[t];
      for (int w = 0; w < width; ++w) xs[t](e, w) = obs[w];
    }
  }
  return xs;
}

void require_finite(double x, const char* what) {
  if (!std::isfinite(x)) {
    throw std::runtime_error(std::string("non-finite ") + what + " in update");
  }
}

}  // namespace

double ppo_composite_loss(const RecurrentNet& net, const RolloutBatch& batch,
                          const std::vector<std::vector<double>>& advantages,
                          const std::vector<std::vector<double>>& returns, const PpoConfig& cfg,
                          VectorXd* grad, PpoReport* report, std::uint64_t dropout_seed) {
  const auto& spec = net.spec();
  if (!spec.value_head || !spec.policy_heads) {
    throw std::logic_error("the clipped-surrogate update needs policy and value heads");
  }
  const int b = static_cast<int>(batch.episodes.size());
  const int T = batch.episodes.front().length();
  const int n = b * T;
  const int policy_cols = spec.head_count * spec.head_arity;
  const bool has_dropout = !spec.dropout_pre.empty() || !spec.dropout_post.empty();

  const std::vector<MatrixXd> xs = batch_inputs(batch, spec.input_width, T);
  Rng dropout_rng(dropout_seed);
  const SequenceCache cache =
      net.forward_sequence(xs, /*train_mode=*/has_dropout, has_dropout ? &dropout_rng : nullptr);

  double objective = 0.0, value_loss = 0.0, entropy_sum = 0.0;
  long clipped_count = 0;
  double max_ratio_err = 0.0;
  double approx_kl = 0.0;
  std::vector<MatrixXd> d_out(T, MatrixXd::Zero(b, spec.output_width()));

  for (int t = 0; t < T; ++t) {
    ActionDistribution dist(cache.outputs[t].leftCols(policy_cols), spec.head_count,
                            spec.head_arity);
    std::vector<std::vector<int>> acts(b);
    for (int e = 0; e < b; ++e) acts[e] = batch.episodes[e].actions[t];
    const MatrixXd dlogp = dist.log_prob_grad(acts);
    const MatrixXd dent = dist.entropy_grad();

    for (int e = 0; e < b; ++e) {
      const double adv = advantages[e][t];
      const double lp_new = dist.log_prob_row(e, acts[e]);
      const double lp_old = batch.episodes[e].log_probs[t];
      const double ratio = std::exp(lp_new - lp_old);
      max_ratio_err = std::max(max_ratio_err, std::abs(ratio - 1.0));
      approx_kl += (ratio - 1.0) - (lp_new - lp_old);

      const double unclipped = ratio * adv;
      const double clipped = std::clamp(ratio, 1.0 - cfg.clip_ratio, 1.0 + cfg.clip_ratio) * adv;
      const double surrogate = std::min(unclipped, clipped);
      if (surrogate > unclipped + 1e-9) {
        throw std::logic_error("clipped surrogate exceeded the unclipped value");
      }
      objective += surrogate;
      if (std::abs(ratio - 1.0) > cfg.clip_ratio) ++clipped_count;

      // The min is flat in the policy wherever the clipped branch is active
      // outside the trust band.
      const bool in_band = ratio >= 1.0 - cfg.clip_ratio && ratio <= 1.0 + cfg.clip_ratio;
      const bool active = in_band || unclipped <= clipped;
      const double d_logp = active ? -(ratio * adv) / n : 0.0;

      const double value = cache.outputs[t](e, spec.value_offset());
      const double verr = value - returns[e][t];
      value_loss += verr * verr;
      const double d_value = cfg.value_coef * 2.0 * verr / n;

      entropy_sum += dist.entropy_row(e);
      const double d_ent = -cfg.entropy_coef / n;

      d_out[t].row(e).head(policy_cols) = d_logp * dlogp.row(e) + d_ent * dent.row(e);
      d_out[t](e, spec.value_offset()) = d_value;
    }
  }

  objective /= n;
  value_loss /= n;
  entropy_sum /= n;
  require_finite(objective, "surrogate objective");
  require_finite(value_loss, "value loss");
  require_finite(entropy_sum, "entropy");

  if (report != nullptr) {
    report->policy_objective = objective;
    report->value_loss = value_loss;
    report->entropy = entropy_sum;
    report->clip_fraction = static_cast<double>(clipped_count) / n;
    report->max_ratio_error = max_ratio_err;
    report->approx_kl = approx_kl / n;
  }
  if (grad != nullptr) *grad = net.backward(cache, d_out);
  return -objective + cfg.value_coef * value_loss - cfg.entropy_coef * entropy_sum;
}

PpoReport ppo_update(RecurrentNet& net, AdamOptimizer& opt, const RolloutBatch& batch,
                     const PpoConfig& cfg, double discount) {
  if (batch.policy_version != net.version()) {
    throw std::logic_error("rollout batch was collected under a different policy version");
  }
  const int b = static_cast<int>(batch.episodes.size());
  const int T = batch.episodes.front().length();
  for (const auto& ep : batch.episodes) {
    if (ep.length() != T) throw std::invalid_argument("episodes must share one length");
  }
  const bool has_dropout =
      !net.spec().dropout_pre.empty() || !net.spec().dropout_post.empty();

  const auto advantages =
      compute_advantages(batch, discount, cfg.normalize_advantage, cfg.reward_scale);
  std::vector<std::vector<double>> returns(b);
  for (int e = 0; e < b; ++e) {
    returns[e] = episode_returns(batch.episodes[e], discount);
    for (auto& r : returns[e]) r *= cfg.reward_scale;
  }

  PpoReport report;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    VectorXd grad;
    PpoReport epoch_report;
    ppo_composite_loss(net, batch, advantages, returns, cfg, &grad, &epoch_report,
                       mix_seed(0xd20ull, {net.version(), static_cast<std::uint64_t>(epoch)}));

    // Collection-time log-probabilities must reproduce exactly before the
    // first step. Dropout nets re-randomize masks at update time, so their
    // recomputed probabilities legitimately drift from the collection pass.
    if (epoch == 0) {
      report.max_ratio_error = epoch_report.max_ratio_error;
      if (!has_dropout && epoch_report.max_ratio_error > 1e-6) {
        throw std::logic_error("probability ratios differ from 1 at the first epoch");
      }
    }

    epoch_report.grad_norm = clip_grad_norm(grad, cfg.max_grad_norm);
    require_finite(epoch_report.grad_norm, "gradient norm");
    VectorXd params = net.params();
    opt.step(params, grad);
    net.set_params(params);

    report.policy_objective = epoch_report.policy_objective;
    report.value_loss = epoch_report.value_loss;
    report.entropy = epoch_report.entropy;
    report.clip_fraction = epoch_report.clip_fraction;
    report.grad_norm = epoch_report.grad_norm;
    report.approx_kl = epoch_report.approx_kl;
    report.epochs_run = epoch + 1;

    // The batch goes stale once the policy drifts a KL's worth away from the
    // collection policy; further epochs would overfit the clip boundary.
    if (cfg.target_kl > 0.0 && epoch_report.approx_kl > cfg.target_kl) break;
  }
  net.bump_version();
  return report;
}

SacTrainer::SacTrainer(const ArchitectureSpec& actor_spec, const SacConfig& cfg, double discount,
                       std::uint64_t seed)
    : cfg_(cfg),
      discount_(discount),
      actor_(actor_spec),
      critic_([&] {
        ArchitectureSpec s = actor_spec;
        s.policy_heads = false;
        s.value_head = false;
        s.q_value_sets = 2;
        return s;
      }()),
      critic_target_(critic_.spec()),
      actor_opt_(actor_.param_count(), cfg.learning_rate),
      critic_opt_(critic_.param_count(), cfg.learning_rate) {
  cfg_.validate();
  if (actor_spec.value_head) {
    throw std::invalid_argument("the soft actor carries no state-value head");
  }
  Rng actor_rng(mix_seed(seed, {0xac1ull}));
  Rng critic_rng(mix_seed(seed, {0xc21ull}));
  actor_.init_params(actor_rng);
  critic_.init_params(critic_rng);
  critic_target_.set_params(critic_.params());
  log_temperature_ = std::log(cfg.temperature);
}

double SacTrainer::temperature() const {
  return cfg_.auto_temperature ? std::exp(log_temperature_) : cfg_.temperature;
}

void SacTrainer::add_episodes(std::vector<Trajectory> episodes) {
  for (auto& e : episodes) {
    replay_.push_back(std::move(e));
    while (static_cast<int>(replay_.size()) > cfg_.replay_capacity_episodes) {
      replay_.pop_front();
    }
  }
}

bool SacTrainer::ready() const {
  return static_cast<int>(replay_.size()) >=
         std::max(cfg_.batch_episodes, cfg_.warmup_episodes);
}

namespace {

std::vector<MatrixXd> sac_inputs(const SacBatchView& batch, int width, int steps) {
  const int m = static_cast<int>(batch.episodes.size());
  std::vector<MatrixXd> xs(steps, MatrixXd(m, width));
  for (int t = 0; t < steps; ++t) {
    for (int e = 0; e < m; ++e) {
      const auto& obs = batch.episodes[e]->observations[t];
      for (int w = 0; w < width; ++w) xs[t](e, w) = obs[w];
    }
  }
  return xs;
}

std::vector<MatrixXd> run_eval_sequence(const RecurrentNet& net,
                                        const std::vector<MatrixXd>& xs) {
  std::vector<MatrixXd> outs;
  outs.reserve(xs.size());
  RecurrentState st = net.initial_state(static_cast<int>(xs.front().rows()));
  for (const auto& x : xs) outs.push_back(net.step(x, st));
  return outs;
}

}  // namespace

double sac_critic_loss(const RecurrentNet& critic, const RecurrentNet& critic_target,
                       const RecurrentNet& actor, const SacBatchView& batch, double alpha,
                       double discount, double reward_scale, VectorXd* grad) {
  const auto& aspec = actor.spec();
  const auto& cspec = critic.spec();
  const int m = static_cast<int>(batch.episodes.size());
  const int T = batch.episodes.front()->length();
  const int heads = aspec.head_count;
  const int arity = aspec.head_arity;
  const int policy_cols = heads * arity;
  const long n = static_cast<long>(m) * T;
  const int q1 = cspec.q_offset(0);
  const int q2 = cspec.q_offset(1);

  const std::vector<MatrixXd> xs = sac_inputs(batch, aspec.input_width, T + 1);
  const SequenceCache critic_cache = critic.forward_sequence(xs);
  const std::vector<MatrixXd> actor_out = run_eval_sequence(actor, xs);
  const std::vector<MatrixXd> target_out = run_eval_sequence(critic_target, xs);

  std::vector<MatrixXd> d_critic(T + 1, MatrixXd::Zero(m, cspec.output_width()));
  double q_loss = 0.0;
  for (int t = 0; t < T; ++t) {
    ActionDistribution dist_next(actor_out[t + 1].leftCols(policy_cols), heads, arity);
    for (int e = 0; e < m; ++e) {
      // Soft bootstrap at s(t+1): per-head expectation of the twin minimum
      // minus the entropy temperature term.
      double soft_next = 0.0;
      for (int h = 0; h < heads; ++h) {
        const VectorXd p = dist_next.probs(e, h);
        for (int a = 0; a < arity; ++a) {
          const double qmin = std::min(target_out[t + 1](e, q1 + h * arity + a),
                                       target_out[t + 1](e, q2 + h * arity + a));
          const double logp = dist_next.log_probs()(e, h * arity + a);
          soft_next += p[a] * (qmin - alpha * logp);
        }
      }
      const double not_done = batch.episodes[e]->done[t] ? 0.0 : 1.0;
      const double y =
          reward_scale * batch.episodes[e]->rewards[t] + discount * not_done * soft_next;

      double q1_tot = 0.0, q2_tot = 0.0;
      for (int h = 0; h < heads; ++h) {
        const int a = batch.episodes[e]->actions[t][h];
        q1_tot += critic_cache.outputs[t](e, q1 + h * arity + a);
        q2_tot += critic_cache.outputs[t](e, q2 + h * arity + a);
      }
      q_loss += (q1_tot - y) * (q1_tot - y) + (q2_tot - y) * (q2_tot - y);
      for (int h = 0; h < heads; ++h) {
        const int a = batch.episodes[e]->actions[t][h];
        d_critic[t](e, q1 + h * arity + a) += 2.0 * (q1_tot - y) / n;
        d_critic[t](e, q2 + h * arity + a) += 2.0 * (q2_tot - y) / n;
      }
    }
  }
  q_loss /= n;
  require_finite(q_loss, "soft Q loss");
  if (grad != nullptr) *grad = critic.backward(critic_cache, d_critic);
  return q_loss;
}

double sac_actor_loss(const RecurrentNet& actor, const RecurrentNet& critic,
                      const SacBatchView& batch, double alpha, VectorXd* grad,
                      double* mean_entropy) {
  const auto& aspec = actor.spec();
  const auto& cspec = critic.spec();
  const int m = static_cast<int>(batch.episodes.size());
  const int T = batch.episodes.front()->length();
  const int heads = aspec.head_count;
  const int arity = aspec.head_arity;
  const int policy_cols = heads * arity;
  const long n = static_cast<long>(m) * T;
  const int q1 = cspec.q_offset(0);
  const int q2 = cspec.q_offset(1);

  const std::vector<MatrixXd> xs = sac_inputs(batch, aspec.input_width, T);
  const SequenceCache actor_cache = actor.forward_sequence(xs);
  const std::vector<MatrixXd> critic_out = run_eval_sequence(critic, xs);

  std::vector<MatrixXd> d_actor(T, MatrixXd::Zero(m, aspec.output_width()));
  double actor_loss = 0.0, entropy_sum = 0.0;
  for (int t = 0; t < T; ++t) {
    ActionDistribution dist(actor_cache.outputs[t].leftCols(policy_cols), heads, arity);
    for (int e = 0; e < m; ++e) {
      for (int h = 0; h < heads; ++h) {
        const VectorXd p = dist.probs(e, h);
        VectorXd g(arity);
        double g_bar = 0.0;
        for (int a = 0; a < arity; ++a) {
          const double qmin = std::min(critic_out[t](e, q1 + h * arity + a),
                                       critic_out[t](e, q2 + h * arity + a));
          g[a] = alpha * dist.log_probs()(e, h * arity + a) - qmin;
          g_bar += p[a] * g[a];
        }
        actor_loss += g_bar / n;
        for (int a = 0; a < arity; ++a) {
          d_actor[t](e, h * arity + a) = p[a] * (g[a] - g_bar) / n;
        }
      }
      entropy_sum += dist.entropy_row(e);
    }
  }
  require_finite(actor_loss, "actor loss");
  if (mean_entropy != nullptr) *mean_entropy = entropy_sum / n;
  if (grad != nullptr) *grad = actor.backward(actor_cache, d_actor);
  return actor_loss;
}

SacReport SacTrainer::update(std::uint64_t seed) {
  if (replay_.empty() || static_cast<int>(replay_.size()) < cfg_.batch_episodes) {
    throw std::runtime_error("replay holds fewer episodes than one batch");
  }
  Rng rng(seed);
  // Sample distinct episode indices.
  std::vector<long> indices(replay_.size());
  for (std::size_t i = 0; i < indices.size(); ++i) indices[i] = static_cast<long>(i);
  for (int i = 0; i < cfg_.batch_episodes; ++i) {
    const long j = i + static_cast<long>(rng.uniform_int(indices.size() - i));
    std::swap(indices[i], indices[j]);
  }
  SacBatchView batch;
  for (int i = 0; i < cfg_.batch_episodes; ++i) batch.episodes.push_back(&replay_[indices[i]]);

  const double alpha = temperature();
  const int heads = actor_.spec().head_count;
  const int arity = actor_.spec().head_arity;

  VectorXd critic_grad;
  const double q_loss = sac_critic_loss(critic_, critic_target_, actor_, batch, alpha, discount_,
                                        cfg_.reward_scale, &critic_grad);
  clip_grad_norm(critic_grad, cfg_.max_grad_norm);
  VectorXd cparams = critic_.params();
  critic_opt_.step(cparams, critic_grad);
  critic_.set_params(cparams);

  VectorXd actor_grad;
  double mean_entropy = 0.0;
  const double actor_loss =
      sac_actor_loss(actor_, critic_, batch, alpha, &actor_grad, &mean_entropy);
  SacReport report;
  report.grad_norm = clip_grad_norm(actor_grad, cfg_.max_grad_norm);
  VectorXd aparams = actor_.params();
  actor_opt_.step(aparams, actor_grad);
  actor_.set_params(aparams);
  actor_.bump_version();
  critic_.bump_version();

  if (cfg_.auto_temperature) {
    const double target_entropy = cfg_.target_entropy_ratio * heads * std::log(double(arity));
    const double grad = mean_entropy - target_entropy;  // d/d log(alpha)
    ++temp_steps_;
    temp_m_ = 0.9 * temp_m_ + 0.1 * grad;
    temp_v_ = 0.999 * temp_v_ + 0.001 * grad * grad;
    const double mhat = temp_m_ / (1.0 - std::pow(0.9, temp_steps_));
    const double vhat = temp_v_ / (1.0 - std::pow(0.999, temp_steps_));
    log_temperature_ -= cfg_.learning_rate * mhat / (std::sqrt(vhat) + 1e-8);
  }

  ++updates_;
  if (updates_ % cfg_.target_update_period == 0) {
    VectorXd t = critic_target_.params();
    t = (1.0 - cfg_.target_smoothing) * t + cfg_.target_smoothing * critic_.params();
    critic_target_.set_params(t);
  }

  report.q_loss = q_loss;
  report.actor_loss = actor_loss;
  report.entropy = mean_entropy;
  report.temperature = temperature();
  return report;
}

json SacTrainer::state_to_json() const {
  json j;
  j["actor_params"] = std::vector<double>(actor_.params().data(),
                                          actor_.params().data() + actor_.param_count());
  j["critic_params"] = std::vector<double>(critic_.params().data(),
                                           critic_.params().data() + critic_.param_count());
  j["target_params"] = std::vector<double>(
      critic_target_.params().data(), critic_target_.params().data() + critic_target_.param_count());
  j["actor_opt"] = actor_opt_.to_json();
  j["critic_opt"] = critic_opt_.to_json();
  j["log_temperature"] = log_temperature_;
  j["temp_m"] = temp_m_;
  j["temp_v"] = temp_v_;
  j["temp_steps"] = temp_steps_;
  j["updates"] = updates_;
  return j;
}

void SacTrainer::restore_state(const json& j) {
  auto load = [](RecurrentNet& net, const json& arr) {
    const auto v = arr.get<std::vector<double>>();
    if (static_cast<long>(v.size()) != net.param_count()) {
      throw std::runtime_error("trainer state does not match the architecture");
    }
    net.set_params(Eigen::Map<const VectorXd>(v.data(), v.size()));
  };
  load(actor_, j.at("actor_params"));
  load(critic_, j.at("critic_params"));
  load(critic_target_, j.at("target_params"));
  actor_opt_.restore(j.at("actor_opt"));
  critic_opt_.restore(j.at("critic_opt"));
  log_temperature_ = j.at("log_temperature").get<double>();
  temp_m_ = j.at("temp_m").get<double>();
  temp_v_ = j.at("temp_v").get<double>();
  temp_steps_ = j.at("temp_steps").get<long>();
  updates_ = j.at("updates").get<long>();
}

namespace {

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

std::string opt_fmt(const std::optional<double>& x) { return x ? fmt(*x) : std::string(); }

const char* kMetricsHeader =
    "iteration,collect_return,mean_return,csa,wsa,nsa,pfr_accuracy,rfr_accuracy,"
    "false_alarm_total,policy_objective,value_loss,entropy,clip_fraction,q_loss,"
    "actor_loss,temperature\n";

void append_metrics_row(std::ofstream& os, const IterationRow& row) {
  os << row.iteration << ',' << fmt(row.collect_return) << ',';
  if (row.eval) {
    const auto& r = *row.eval;
    os << fmt(r.mean_return()) << ',' << opt_fmt(r.csa()) << ',' << opt_fmt(r.wsa()) << ','
       << opt_fmt(r.nsa()) << ',' << opt_fmt(r.pfr_accuracy()) << ',' << opt_fmt(r.rfr_accuracy())
       << ',' << fmt(r.false_alarm_total);
  } else {
    os << ",,,,,,";
  }
  os << ',';
  if (row.ppo) {
    os << fmt(row.ppo->policy_objective) << ',' << fmt(row.ppo->value_loss) << ','
       << fmt(row.ppo->entropy) << ',' << fmt(row.ppo->clip_fraction);
  } else {
    os << ",,,";
  }
  os << ',';
  if (row.sac) {
    os << fmt(row.sac->q_loss) << ',' << fmt(row.sac->actor_loss) << ','
       << fmt(row.sac->temperature);
  } else {
    os << ",,";
  }
  os << '\n';
  os.flush();
}

// Long-format mirror of the evaluation curves for plotting.
void append_long_rows(std::ofstream& os, long iteration, const AccuracyReport& r,
                      const char* phase) {
  auto put = [&](const char* metric, const std::optional<double>& v) {
    if (v) os << iteration << ',' << phase << ',' << metric << ',' << fmt(*v) << '\n';
  };
  os << iteration << ',' << phase << ',' << "mean_return" << ',' << fmt(r.mean_return()) << '\n';
  put("csa", r.csa());
  put("wsa", r.wsa());
  put("nsa", r.nsa());
  put("pfr_accuracy", r.pfr_accuracy());
  put("rfr_accuracy", r.rfr_accuracy());
  os.flush();
}

}  // namespace

TrainResult train(const RunConfig& cfg, const std::string& out_dir, bool resume,
                  const TrainObserver& observer) {
  cfg.validate();
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  const std::string metrics_path = out_dir + "/metrics.csv";
  const std::string long_path = out_dir + "/curves_long.csv";
  const std::string robustness_path = out_dir + "/robustness.csv";
  const std::string state_path = out_dir + "/train_state.json";
  const std::string latest_path = out_dir + "/checkpoint_latest.json";
  const std::string best_path = out_dir + "/checkpoint_best.json";

  const std::uint64_t master = cfg.run.master_seed;
  ArchitectureSpec arch = cfg.resolved_architecture();
  const std::uint64_t schema_hash = cfg.env.observation_schema().hash();
  const bool sac = cfg.agent.uses_sac();

  {
    json manifest;
    manifest["config"] = cfg.to_json();
    manifest["master_seed"] = master;
    manifest["code_version"] = "0.1.0";
    manifest["observation_schema"] = cfg.env.observation_schema().to_json();
    manifest["architecture"] = arch.to_json();
    manifest["parameter_count"] = arch.parameter_count();
    std::ofstream os(out_dir + "/manifest.json");
    os << manifest.dump(2) << '\n';
  }

  RecurrentNet policy(arch);
  std::unique_ptr<AdamOptimizer> ppo_opt;
  std::unique_ptr<SacTrainer> sac_trainer;
  if (sac) {
    sac_trainer = std::make_unique<SacTrainer>(arch, cfg.agent.sac, cfg.agent.discount,
                                               mix_seed(master, {0x1417ull}));
  } else {
    Rng init_rng(mix_seed(master, {0x1417ull}));
    policy.init_params(init_rng);
    ppo_opt = std::make_unique<AdamOptimizer>(policy.param_count(), cfg.agent.ppo.learning_rate);
  }

  long start_iteration = 0;
  if (resume && fs::exists(state_path)) {
    std::ifstream is(state_path);
    json st;
    is >> st;
    start_iteration = st.at("next_iteration").get<long>();
    if (sac) {
      sac_trainer->restore_state(st.at("sac"));
    } else {
      const auto p = st.at("params").get<std::vector<double>>();
      if (static_cast<long>(p.size()) != policy.param_count()) {
        throw std::runtime_error("resume state does not match the configured architecture");
      }
      policy.set_params(Eigen::Map<const VectorXd>(p.data(), p.size()));
      ppo_opt->restore(st.at("adam"));
    }
  }

  const int env_count = sac ? cfg.agent.sac.parallel_envs : cfg.agent.ppo.parallel_envs;
  std::vector<RecoveryEnv> envs;
  envs.reserve(env_count);
  for (int i = 0; i < env_count; ++i) {
    envs.emplace_back(cfg.env, mix_seed(master, {0xe4f5ull, static_cast<std::uint64_t>(i)}));
  }

  std::ofstream metrics(metrics_path, start_iteration == 0 ? std::ios::trunc : std::ios::app);
  std::ofstream longcsv(long_path, start_iteration == 0 ? std::ios::trunc : std::ios::app);
  std::ofstream robustness(robustness_path,
                           start_iteration == 0 ? std::ios::trunc : std::ios::app);
  if (start_iteration == 0) {
    metrics << kMetricsHeader;
    longcsv << "iteration,phase,metric,value\n";
    robustness << kMetricsHeader;
  }

  const RecurrentNet& eval_net = sac ? sac_trainer->actor() : policy;
  auto save_snapshot = [&](const std::string& path) {
    Checkpoint ckpt;
    ckpt.agent_kind = cfg.agent.kind;
    ckpt.observation_schema_hash = schema_hash;
    ckpt.spec = eval_net.spec();
    ckpt.params = eval_net.params();
    save_checkpoint(path, ckpt);
  };
  auto save_state = [&](long next_iteration) {
    json st;
    st["next_iteration"] = next_iteration;
    if (sac) {
      st["sac"] = sac_trainer->state_to_json();
    } else {
      st["params"] = std::vector<double>(policy.params().data(),
                                         policy.params().data() + policy.param_count());
      st["adam"] = ppo_opt->to_json();
    }
    std::ofstream os(state_path);
    os << st.dump() << '\n';
  };

  TrainResult result;
  double best_return = -std::numeric_limits<double>::infinity();

  for (long iter = start_iteration; iter < cfg.run.iterations; ++iter) {
    IterationRow row;
    row.iteration = iter;

    if (sac) {
      RolloutBatch batch = collect_rollouts(sac_trainer->actor(), envs, master, iter);
      row.collect_return = batch.mean_episode_return;
      sac_trainer->add_episodes(std::move(batch.episodes));
      if (sac_trainer->ready()) {
        SacReport rep;
        for (int e = 0; e < cfg.agent.sac.epochs; ++e) {
          rep = sac_trainer->update(mix_seed(master, {0x5acull, static_cast<std::uint64_t>(iter),
                                                      static_cast<std::uint64_t>(e)}));
        }
        row.sac = rep;
      }
    } else {
      RolloutBatch batch = collect_rollouts(policy, envs, master, iter);
      row.collect_return = batch.mean_episode_return;
      row.ppo = ppo_update(policy, *ppo_opt, batch, cfg.agent.ppo, cfg.agent.discount);
    }

    const bool last = iter == cfg.run.iterations - 1;
    if (iter % cfg.run.eval_interval == 0 || last) {
      NetPolicy greedy(eval_net, /*greedy=*/true);
      auto eval = evaluate(greedy, cfg.env,
                           mix_seed(master, {0xeba5eull, static_cast<std::uint64_t>(iter)}),
                           cfg.run.eval_episodes);
      row.eval = eval.report;
      append_long_rows(longcsv, iter, eval.report, "train_env");
      if (eval.report.mean_return() > best_return) {
        best_return = eval.report.mean_return();
        result.best_eval = eval.report;
        result.best_iteration = iter;
        save_snapshot(best_path);
      }
    }
    if (iter > 0 && iter % cfg.run.robustness_interval == 0) {
      NetPolicy greedy(eval_net, /*greedy=*/true);
      auto probe = robustness_probe(greedy, cfg.env,
                                    mix_seed(master, {0x20b57ull, static_cast<std::uint64_t>(iter)}),
                                    cfg.run.robustness_episodes);
      IterationRow probe_row;
      probe_row.iteration = iter;
      probe_row.eval = probe.report;
      append_metrics_row(robustness, probe_row);
      append_long_rows(longcsv, iter, probe.report, "fresh_env");
    }
    if (iter % cfg.run.checkpoint_interval == 0 || last) {
      save_snapshot(latest_path);
      save_state(iter + 1);
    }

    append_metrics_row(metrics, row);
    if (observer) observer(row);
    result.history.push_back(std::move(row));
  }

  save_snapshot(latest_path);
  save_state(cfg.run.iterations);
  result.checkpoint_path = latest_path;

  {
    json summary;
    summary["iterations"] = cfg.run.iterations;
    summary["best_iteration"] = result.best_iteration;
    summary["best_eval"] = result.best_eval.to_json();
    summary["checkpoint"] = result.checkpoint_path;
    std::ofstream os(out_dir + "/summary.json");
    os << summary.dump(2) << '\n';
  }
  return result;
}

}  // namespace pfrlab
