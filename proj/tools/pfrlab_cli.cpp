// Operator entry point: simulation, training, evaluation and schema
// inspection for the failure-recovery laboratory.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "pfrlab/checkpoint.hpp"
#include "pfrlab/metrics.hpp"
#include "pfrlab/run_config.hpp"
#include "pfrlab/trainers.hpp"
#include "pfrlab/trajectory.hpp"

namespace {

using nlohmann::json;
using namespace pfrlab;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

json parse_override_value(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception&) {
    return json(text);  // plain string
  }
}

// Applies "section.key=value" overrides onto the raw config document.
void apply_overrides(json& doc, const std::vector<std::string>& sets) {
  for (const auto& kv : sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("--set expects section.key=value, got: " + kv);
    }
    std::string path = kv.substr(0, eq);
    const json value = parse_override_value(kv.substr(eq + 1));
    json* node = &doc;
    std::size_t pos = 0;
    while (true) {
      const auto dot = path.find('.', pos);
      const std::string key = path.substr(pos, dot - pos);
      if (key.empty()) throw std::invalid_argument("--set has an empty path segment: " + kv);
      if (dot == std::string::npos) {
        (*node)[key] = value;
        break;
      }
      node = &(*node)[key];
      pos = dot + 1;
    }
  }
}

std::string resolve_output_dir(const std::string& dir) {
  std::filesystem::path p(dir);
  if (p.is_absolute()) return p.string();
  const char* root = std::getenv("PFRLAB_OUTPUT_ROOT");
  if (root != nullptr && *root != '\0') return (std::filesystem::path(root) / p).string();
  return p.string();
}

struct ConfigSources {
  std::string config_file;
  std::vector<std::string> sets;
};

RunConfig load_config(const ConfigSources& src) {
  json doc = json::object();
  if (!src.config_file.empty()) {
    std::ifstream is(src.config_file);
    if (!is) throw std::invalid_argument("cannot open config file: " + src.config_file);
    is >> doc;
  }
  apply_overrides(doc, src.sets);
  return RunConfig::from_json(doc);
}

std::unique_ptr<Policy> make_named_policy(const std::string& name, const RunConfig& cfg,
                                          std::unique_ptr<RecurrentNet>& net_storage) {
  if (name == "random") return std::make_unique<RandomPolicy>();
  if (name == "oracle") return std::make_unique<OraclePolicy>();
  if (name == "reactive") return std::make_unique<ReactivePolicy>();
  // Anything else is a checkpoint path.
  Checkpoint ckpt = load_checkpoint(name);
  require_schema(ckpt, cfg.env.observation_schema().hash());
  net_storage = std::make_unique<RecurrentNet>(ckpt.spec);
  net_storage->set_params(ckpt.params);
  return std::make_unique<NetPolicy>(*net_storage, /*greedy=*/true);
}

void print_report(const AccuracyReport& report) {
  std::cout << report.to_json().dump(2) << '\n';
}

int cmd_simulate(const ConfigSources& src, const std::string& policy_name, int episodes,
                 const std::string& out_dir_arg) {
  const RunConfig cfg = load_config(src);
  std::unique_ptr<RecurrentNet> net;
  auto policy = make_named_policy(policy_name, cfg, net);

  const std::string out_dir = resolve_output_dir(
      out_dir_arg.empty() ? cfg.run.output_dir : out_dir_arg);
  std::filesystem::create_directories(out_dir);

  auto result = evaluate(*policy, cfg.env, cfg.run.master_seed, episodes, /*keep_traces=*/true);

  std::ofstream log(out_dir + "/trajectories.jsonl");
  for (const auto& trace : result.traces) write_trace(log, trace);
  std::ofstream report(out_dir + "/report.json");
  report << result.report.to_json().dump(2) << '\n';

  std::cout << "simulated " << episodes << " episodes with policy '" << policy_name << "'\n";
  print_report(result.report);
  std::cout << "wrote " << out_dir << "/trajectories.jsonl and report.json\n";
  return kExitOk;
}

int cmd_train(const ConfigSources& src, bool resume) {
  const RunConfig cfg = load_config(src);
  const std::string out_dir = resolve_output_dir(cfg.run.output_dir);
  std::cout << "training agent '" << cfg.agent.kind << "' for " << cfg.run.iterations
            << " iterations into " << out_dir << '\n';
  TrainResult result = train(cfg, out_dir, resume, [](const IterationRow& row) {
    if (row.eval) {
      std::cout << "iter " << row.iteration << " return " << row.eval->mean_return();
      if (auto csa = row.eval->csa()) std::cout << " csa " << *csa;
      if (auto pfr = row.eval->pfr_accuracy()) std::cout << " pfr " << *pfr;
      std::cout << '\n';
    }
  });
  std::cout << "best iteration " << result.best_iteration << ", checkpoint at "
            << result.checkpoint_path << '\n';
  return kExitOk;
}

int cmd_evaluate(const ConfigSources& src, const std::string& checkpoint, int episodes,
                 bool fresh_env) {
  const RunConfig cfg = load_config(src);
  std::unique_ptr<RecurrentNet> net;
  auto policy = make_named_policy(checkpoint, cfg, net);
  const std::uint64_t base =
      fresh_env ? mix_seed(cfg.run.master_seed, {0x20b57ull}) : cfg.run.master_seed;
  auto result = evaluate(*policy, cfg.env, base, episodes);
  print_report(result.report);
  return kExitOk;
}

int cmd_describe(const ConfigSources& src, const std::string& schema_out, bool topology) {
  const RunConfig cfg = load_config(src);
  const ObservationSchema schema = cfg.env.observation_schema();
  const ArchitectureSpec arch = cfg.resolved_architecture();

  std::cout << "observation schema:\n" << schema.to_json().dump(2) << '\n';
  std::cout << "action encoding: " << schema.vnf_count
            << " heads x 4 kinds {noop, place, remove, sync}\n";
  std::cout << "architecture (" << cfg.agent.kind << "):\n" << arch.to_json().dump(2) << '\n';

  // Per-layer shape listing with the running parameter tally.
  long total = 0;
  int in = arch.input_width;
  auto line = [&](const std::string& kind, int out, long params) {
    total += params;
    std::cout << "  " << kind << ": " << in << " -> " << out << "  (" << params << " params)\n";
    in = out;
  };
  std::cout << "layers:\n";
  for (int w : arch.fc_pre) line("dense", w, static_cast<long>(in + 1) * w);
  for (int u : arch.lstm) line("lstm", u, 4L * u * (in + u + 1));
  for (int w : arch.fc_post) line("dense", w, static_cast<long>(in + 1) * w);
  line("linear", arch.output_width(), static_cast<long>(in + 1) * arch.output_width());
  std::cout << "parameter count: " << total << '\n';
  if (total != arch.parameter_count()) return kExitRuntime;

  if (!schema_out.empty()) {
    std::ofstream os(schema_out);
    os << schema.to_json().dump(2) << '\n';
    std::cout << "wrote schema to " << schema_out << '\n';
  }
  if (topology) {
    RecoveryEnv env(cfg.env, cfg.run.master_seed);
    std::cout << "topology:\n" << env.network_state().to_json().dump(2) << '\n';
  }
  return kExitOk;
}

int cmd_print_defaults() {
  std::cout << RunConfig().to_json().dump(2) << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Proactive failure-recovery laboratory for stateful service chains"};
  app.require_subcommand(1);

  ConfigSources src;
  app.add_option("--config", src.config_file, "JSON configuration file")
      ->check(CLI::ExistingFile);
  app.add_option("--set", src.sets, "Override a config value, e.g. --set run.master_seed=7");

  auto* simulate = app.add_subcommand("simulate", "Roll out a fixed policy and log trajectories");
  std::string policy_name = "random";
  int episodes = 50;
  std::string out_dir;
  simulate->add_option("--policy", policy_name,
                       "random | oracle | reactive | path to a checkpoint");
  simulate->add_option("--episodes", episodes, "Episodes to run");
  simulate->add_option("--out", out_dir, "Output directory (defaults to run.output_dir)");

  auto* train_cmd = app.add_subcommand("train", "Train an agent with the configured protocol");
  bool resume = false;
  train_cmd->add_flag("--resume", resume, "Continue from train_state.json in the output dir");

  auto* eval_cmd = app.add_subcommand("evaluate", "Score a policy over seeded episodes");
  std::string checkpoint;
  int eval_episodes = 50;
  bool fresh_env = false;
  eval_cmd->add_option("--policy", checkpoint,
                       "random | oracle | reactive | path to a checkpoint")
      ->required();
  eval_cmd->add_option("--episodes", eval_episodes, "Episodes to score");
  eval_cmd->add_flag("--fresh-env", fresh_env, "Probe on freshly drawn environment parameters");

  auto* describe = app.add_subcommand("describe", "Print observation/action/parameter schemas");
  std::string schema_out;
  bool topology = false;
  describe->add_option("--schema-out", schema_out, "Also write the observation schema JSON here");
  describe->add_flag("--topology", topology, "Dump the embedded topology for the config seed");

  auto* defaults = app.add_subcommand("print-defaults", "Dump the built-in configuration");

  CLI11_PARSE(app, argc, argv);

  try {
    if (simulate->parsed()) return cmd_simulate(src, policy_name, episodes, out_dir);
    if (train_cmd->parsed()) return cmd_train(src, resume);
    if (eval_cmd->parsed()) return cmd_evaluate(src, checkpoint, eval_episodes, fresh_env);
    if (describe->parsed()) return cmd_describe(src, schema_out, topology);
    if (defaults->parsed()) return cmd_print_defaults();
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "runtime failure: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}
