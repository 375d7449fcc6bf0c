#include <doctest.h>

#include <cmath>

#include "pfrlab/metrics.hpp"
#include "pfrlab/trainers.hpp"

using namespace pfrlab;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

ArchitectureSpec small_policy_spec(const EnvConfig& env) {
  ArchitectureSpec s;
  s.input_width = env.observation_schema().length();
  s.fc_pre = {16};
  s.lstm = {8};
  s.fc_post = {8};
  s.head_count = env.vnf_count();
  s.head_arity = kActionArity;
  return s;
}

std::vector<RecoveryEnv> make_pool(const EnvConfig& cfg, int count, std::uint64_t seed) {
  std::vector<RecoveryEnv> envs;
  envs.reserve(count);
  for (int i = 0; i < count; ++i) {
    envs.emplace_back(cfg, mix_seed(seed, {static_cast<std::uint64_t>(i)}));
  }
  return envs;
}

// Components with a near-zero gradient are dominated by finite-difference
// roundoff, so the denominator carries a floor and they are checked
// absolutely at the same threshold.
double relative_error(double a, double b) {
  return std::abs(a - b) / std::max(1e-5, std::abs(a) + std::abs(b));
}

}  // namespace

TEST_CASE("a full collection pass yields one episode per environment") {
  EnvConfig env;
  RecurrentNet net(small_policy_spec(env));
  Rng rng(1);
  net.init_params(rng);
  auto envs = make_pool(env, 32, 5);
  const RolloutBatch batch = collect_rollouts(net, envs, 9, 0);
  REQUIRE(batch.episodes.size() == 32);
  long records = 0;
  for (const auto& ep : batch.episodes) {
    CHECK(ep.length() == 100);
    CHECK(ep.observations.size() == 101);
    CHECK(ep.done.back());
    records += ep.length();
  }
  CHECK(records == 3200);
}

TEST_CASE("collection is reproducible for fixed seeds") {
  EnvConfig env;
  env.sfc.chains = 1;  // keep it quick
  RecurrentNet net(small_policy_spec(env));
  Rng rng(2);
  net.init_params(rng);
  auto pool_a = make_pool(env, 4, 7);
  auto pool_b = make_pool(env, 4, 7);
  const RolloutBatch a = collect_rollouts(net, pool_a, 11, 3);
  const RolloutBatch b = collect_rollouts(net, pool_b, 11, 3);
  REQUIRE(a.episodes.size() == b.episodes.size());
  for (std::size_t e = 0; e < a.episodes.size(); ++e) {
    CHECK(a.episodes[e].rewards == b.episodes[e].rewards);
    CHECK(a.episodes[e].actions == b.episodes[e].actions);
    CHECK(a.episodes[e].log_probs == b.episodes[e].log_probs);
  }
  CHECK(a.mean_episode_return == b.mean_episode_return);
}

TEST_CASE("the random policy earns strictly less than the oracle") {
  EnvConfig env;
  RandomPolicy random;
  OraclePolicy oracle;
  const auto r = evaluate(random, env, 555, 50);
  const auto o = evaluate(oracle, env, 555, 50);
  CHECK(r.report.mean_return() < o.report.mean_return());
}

TEST_CASE("suffix returns and advantages") {
  Trajectory traj;
  traj.rewards = {1.0, 2.0, 3.0};
  traj.values = {0.5, 0.5, 0.5};
  traj.actions = {{0}, {0}, {0}};
  traj.log_probs = {0, 0, 0};
  traj.done = {false, false, true};

  SUBCASE("undiscounted returns are suffix sums") {
    const auto r = episode_returns(traj, 1.0);
    CHECK(r[0] == doctest::Approx(6.0));
    CHECK(r[1] == doctest::Approx(5.0));
    CHECK(r[2] == doctest::Approx(3.0));
  }

  SUBCASE("zero baseline reproduces the returns; exact baseline zeroes them") {
    RolloutBatch batch;
    batch.episodes.push_back(traj);
    auto adv = compute_advantages(batch, 1.0, /*normalize=*/false);
    CHECK(adv[0][0] == doctest::Approx(5.5));
    Trajectory exact = traj;
    exact.values = {6.0, 5.0, 3.0};
    RolloutBatch batch2;
    batch2.episodes.push_back(exact);
    auto adv2 = compute_advantages(batch2, 1.0, false);
    for (double a : adv2[0]) CHECK(a == doctest::Approx(0.0));
  }

  SUBCASE("discounted constant rewards match the geometric closed form") {
    Trajectory c;
    c.rewards.assign(100, 1.0);
    c.values.assign(100, 0.0);
    const auto r = episode_returns(c, 0.99);
    const double closed = (1.0 - std::pow(0.99, 100)) / 0.01;
    CHECK(r[0] == doctest::Approx(closed).epsilon(1e-12));
  }
}

TEST_CASE("probability ratios are exactly one before the first update") {
  EnvConfig env;
  env.sfc.chains = 1;
  RecurrentNet net(small_policy_spec(env));
  Rng rng(3);
  net.init_params(rng);
  auto envs = make_pool(env, 4, 13);
  const RolloutBatch batch = collect_rollouts(net, envs, 17, 0);

  const auto advantages = compute_advantages(batch, 0.99, true);
  std::vector<std::vector<double>> returns;
  for (const auto& ep : batch.episodes) returns.push_back(episode_returns(ep, 0.99));
  PpoReport report;
  PpoConfig cfg;
  ppo_composite_loss(net, batch, advantages, returns, cfg, nullptr, &report);
  CHECK(report.max_ratio_error < 1e-6);
}

TEST_CASE("stale batches are rejected") {
  EnvConfig env;
  env.sfc.chains = 1;
  RecurrentNet net(small_policy_spec(env));
  Rng rng(4);
  net.init_params(rng);
  auto envs = make_pool(env, 2, 19);
  RolloutBatch batch = collect_rollouts(net, envs, 23, 0);
  net.bump_version();  // simulate an update between collection and training
  AdamOptimizer opt(net.param_count(), 1e-3);
  PpoConfig cfg;
  cfg.epochs = 1;
  CHECK_THROWS_AS(ppo_update(net, opt, batch, cfg, 0.99), std::logic_error);
}

TEST_CASE("clip arithmetic: ratio 1.5 against a positive advantage yields 1.2 A") {
  // Single transition with a rigged collection log-prob so the recomputed
  // ratio is exactly 1.5.
  EnvConfig env;
  env.sfc.chains = 1;
  env.episode_length = 1;
  RecurrentNet net(small_policy_spec(env));
  Rng rng(5);
  net.init_params(rng);
  auto envs = make_pool(env, 1, 29);
  RolloutBatch batch = collect_rollouts(net, envs, 31, 0);
  batch.episodes[0].log_probs[0] -= std::log(1.5);

  const std::vector<std::vector<double>> advantages = {{2.0}};
  const std::vector<std::vector<double>> returns = {{0.0}};
  PpoConfig cfg;
  cfg.value_coef = 0.0;
  cfg.entropy_coef = 0.0;
  PpoReport report;
  const double loss = ppo_composite_loss(net, batch, advantages, returns, cfg, nullptr, &report);
  CHECK(report.policy_objective == doctest::Approx(1.2 * 2.0).epsilon(1e-9));
  CHECK(loss == doctest::Approx(-2.4).epsilon(1e-9));
}

TEST_CASE("composite loss gradient matches finite differences on a single transition") {
  EnvConfig env;
  env.sfc.chains = 1;
  env.episode_length = 1;
  RecurrentNet net(small_policy_spec(env));
  Rng rng(6);
  net.init_params(rng);
  auto envs = make_pool(env, 1, 37);
  RolloutBatch batch = collect_rollouts(net, envs, 41, 0);

  const auto advantages = compute_advantages(batch, 0.99, false);
  std::vector<std::vector<double>> returns = {episode_returns(batch.episodes[0], 0.99)};
  PpoConfig cfg;

  VectorXd analytic;
  ppo_composite_loss(net, batch, advantages, returns, cfg, &analytic, nullptr);
  const double h = 1e-5;
  Rng pick(7);
  double max_err = 0.0;
  for (int k = 0; k < 80; ++k) {
    const long i = static_cast<long>(pick.uniform_int(net.param_count()));
    RecurrentNet plus = net, minus = net;
    VectorXd p = net.params();
    p[i] += h;
    plus.set_params(p);
    p[i] -= 2 * h;
    minus.set_params(p);
    const double up = ppo_composite_loss(plus, batch, advantages, returns, cfg, nullptr, nullptr);
    const double dn = ppo_composite_loss(minus, batch, advantages, returns, cfg, nullptr, nullptr);
    max_err = std::max(max_err, relative_error(analytic[i], (up - dn) / (2 * h)));
  }
  CHECK(max_err < 1e-3);
}

TEST_CASE("target network smoothing") {
  EnvConfig env;
  env.sfc.chains = 1;
  env.episode_length = 5;
  ArchitectureSpec spec = small_policy_spec(env);
  spec.value_head = false;

  SacConfig cfg;
  cfg.batch_episodes = 2;
  cfg.warmup_episodes = 2;
  cfg.parallel_envs = 2;

  SUBCASE("tau = 1 copies the online weights after one update") {
    SacConfig full = cfg;
    full.target_smoothing = 1.0;
    SacTrainer trainer(spec, full, 0.99, 43);
    auto envs = make_pool(env, 2, 47);
    RolloutBatch batch = collect_rollouts(trainer.actor(), envs, 53, 0);
    trainer.add_episodes(std::move(batch.episodes));
    trainer.update(59);
    CHECK((trainer.critic().params() - trainer.critic_target().params()).cwiseAbs().maxCoeff() ==
          0.0);
  }

  SUBCASE("tau = 5e-3 interpolates componentwise") {
    SacTrainer trainer(spec, cfg, 0.99, 43);
    auto envs = make_pool(env, 2, 47);
    RolloutBatch batch = collect_rollouts(trainer.actor(), envs, 53, 0);
    trainer.add_episodes(std::move(batch.episodes));
    const VectorXd target_before = trainer.critic_target().params();
    trainer.update(59);
    const VectorXd expected =
        (1.0 - 5e-3) * target_before + 5e-3 * trainer.critic().params();
    CHECK((trainer.critic_target().params() - expected).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("replay sampling is reproducible for a fixed seed") {
  EnvConfig env;
  env.sfc.chains = 1;
  env.episode_length = 5;
  ArchitectureSpec spec = small_policy_spec(env);
  spec.value_head = false;
  SacConfig cfg;
  cfg.batch_episodes = 2;
  cfg.warmup_episodes = 2;

  auto build = [&] {
    auto trainer = std::make_unique<SacTrainer>(spec, cfg, 0.99, 61);
    auto envs = make_pool(env, 4, 67);
    RolloutBatch batch = collect_rollouts(trainer->actor(), envs, 71, 0);
    trainer->add_episodes(std::move(batch.episodes));
    return trainer;
  };
  auto t1 = build();
  auto t2 = build();
  const SacReport r1 = t1->update(97);
  const SacReport r2 = t2->update(97);
  CHECK(r1.q_loss == r2.q_loss);
  CHECK(r1.actor_loss == r2.actor_loss);
  CHECK((t1->actor().params() - t2->actor().params()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("soft actor-critic losses match finite differences") {
  EnvConfig env;
  env.sfc.chains = 1;
  env.episode_length = 4;
  ArchitectureSpec spec = small_policy_spec(env);
  spec.value_head = false;
  SacConfig cfg;
  cfg.batch_episodes = 2;
  cfg.warmup_episodes = 2;
  SacTrainer trainer(spec, cfg, 0.99, 73);
  auto envs = make_pool(env, 2, 79);
  RolloutBatch batch = collect_rollouts(trainer.actor(), envs, 83, 0);

  SacBatchView view;
  for (const auto& ep : batch.episodes) view.episodes.push_back(&ep);
  const double alpha = 0.2;
  const double h = 1e-5;

  SUBCASE("critic gradient") {
    VectorXd analytic;
    sac_critic_loss(trainer.critic(), trainer.critic_target(), trainer.actor(), view, alpha, 0.99,
                    1.0, &analytic);
    RecurrentNet critic = trainer.critic();
    Rng pick(89);
    double max_err = 0.0;
    for (int k = 0; k < 60; ++k) {
      const long i = static_cast<long>(pick.uniform_int(critic.param_count()));
      RecurrentNet plus = critic, minus = critic;
      VectorXd p = critic.params();
      p[i] += h;
      plus.set_params(p);
      p[i] -= 2 * h;
      minus.set_params(p);
      const double up = sac_critic_loss(plus, trainer.critic_target(), trainer.actor(), view,
                                        alpha, 0.99, 1.0, nullptr);
      const double dn = sac_critic_loss(minus, trainer.critic_target(), trainer.actor(), view,
                                        alpha, 0.99, 1.0, nullptr);
      max_err = std::max(max_err, relative_error(analytic[i], (up - dn) / (2 * h)));
    }
    CHECK(max_err < 1e-3);
  }

  SUBCASE("actor gradient") {
    VectorXd analytic;
    double ent = 0.0;
    sac_actor_loss(trainer.actor(), trainer.critic(), view, alpha, &analytic, &ent);
    RecurrentNet actor = trainer.actor();
    Rng pick(91);
    double max_err = 0.0;
    for (int k = 0; k < 60; ++k) {
      const long i = static_cast<long>(pick.uniform_int(actor.param_count()));
      RecurrentNet plus = actor, minus = actor;
      VectorXd p = actor.params();
      p[i] += h;
      plus.set_params(p);
      p[i] -= 2 * h;
      minus.set_params(p);
      const double up = sac_actor_loss(plus, trainer.critic(), view, alpha, nullptr, nullptr);
      const double dn = sac_actor_loss(minus, trainer.critic(), view, alpha, nullptr, nullptr);
      max_err = std::max(max_err, relative_error(analytic[i], (up - dn) / (2 * h)));
    }
    CHECK(max_err < 1e-3);
  }
}

TEST_CASE("a huge temperature drives head gradients toward the uniform policy") {
  // Closed-form check at the head level: descending pi (g - g_bar) with
  // g = alpha log pi - Q raises the entropy toward its maximum when alpha
  // dominates the Q spread.
  const double alpha = 1e6;
  VectorXd z(4);
  z << 2.0, -1.0, 0.5, 0.0;
  VectorXd q(4);
  q << 3.0, -2.0, 1.0, 0.0;  // arbitrary fixed values
  const double lr = 1.0 / alpha;
  for (int iter = 0; iter < 4000; ++iter) {
    MatrixXd logits = z.transpose();
    ActionDistribution dist(logits, 1, 4);
    const VectorXd p = dist.probs(0, 0);
    VectorXd g(4);
    double g_bar = 0.0;
    for (int a = 0; a < 4; ++a) {
      g[a] = alpha * dist.log_probs()(0, a) - q[a];
      g_bar += p[a] * g[a];
    }
    for (int a = 0; a < 4; ++a) z[a] -= lr * p[a] * (g[a] - g_bar);
  }
  ActionDistribution dist(z.transpose(), 1, 4);
  CHECK(dist.entropy_row(0) == doctest::Approx(std::log(4.0)).epsilon(1e-4));
}
