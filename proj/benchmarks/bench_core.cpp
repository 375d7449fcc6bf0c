// Microbenchmarks for the hot paths: environment stepping, policy forward
// passes and the full clipped-surrogate update.

#include <benchmark/benchmark.h>

#include "pfrlab/env.hpp"
#include "pfrlab/trainers.hpp"

using namespace pfrlab;

namespace {

ArchitectureSpec bench_spec(const EnvConfig& env, int width) {
  ArchitectureSpec s;
  s.input_width = env.observation_schema().length();
  s.fc_pre = {width};
  s.lstm = {width};
  s.fc_post = {width};
  s.head_count = env.vnf_count();
  s.head_arity = kActionArity;
  return s;
}

void env_step_random(benchmark::State& state) {
  EnvConfig cfg;
  RecoveryEnv env(cfg, 1);
  Rng rng(2);
  for (auto _ : state) {
    if (env.done()) env.reset();
    std::vector<VnfAction> actions(9);
    for (auto& a : actions) a = static_cast<VnfAction>(rng.uniform_int(4));
    benchmark::DoNotOptimize(env.step(actions));
  }
}
BENCHMARK(env_step_random);

void policy_step_batch32(benchmark::State& state) {
  EnvConfig cfg;
  RecurrentNet net(bench_spec(cfg, static_cast<int>(state.range(0))));
  Rng rng(3);
  net.init_params(rng);
  RecurrentState st = net.initial_state(32);
  Eigen::MatrixXd x = Eigen::MatrixXd::Random(32, net.spec().input_width);
  for (auto _ : state) {
    benchmark::DoNotOptimize(net.step(x, st));
  }
}
BENCHMARK(policy_step_batch32)->Arg(64)->Arg(100);

void ppo_update_batch(benchmark::State& state) {
  EnvConfig cfg;
  RecurrentNet net(bench_spec(cfg, 64));
  Rng rng(4);
  net.init_params(rng);
  std::vector<RecoveryEnv> envs;
  for (int i = 0; i < 8; ++i) envs.emplace_back(cfg, 10 + i);
  PpoConfig ppo;
  ppo.epochs = 1;
  long iteration = 0;
  for (auto _ : state) {
    state.PauseTiming();
    RolloutBatch batch = collect_rollouts(net, envs, 5, iteration++);
    AdamOptimizer opt(net.param_count(), ppo.learning_rate);
    state.ResumeTiming();
    benchmark::DoNotOptimize(ppo_update(net, opt, batch, ppo, 0.99));
  }
}
BENCHMARK(ppo_update_batch)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
