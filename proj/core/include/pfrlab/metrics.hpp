#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "pfrlab/env.hpp"
#include "pfrlab/policy_net.hpp"
#include "pfrlab/trajectory.hpp"

namespace pfrlab {

// Raw decision-accuracy counts plus the ratios derived from them. Ratios are
// absent (not zero) when their denominator never occurred.
struct AccuracyReport {
  long critical_total = 0;
  long critical_correct = 0;   // recovery decision taken in a critical slot
  long warning_total = 0;
  long warning_correct = 0;    // backup placement chosen in a warning slot
  long normal_total = 0;
  long normal_correct = 0;     // release with a backup held, hold otherwise
  long recoveries = 0;         // completed recoveries on detected criticals
  long proactive = 0;
  long reactive = 0;
  double false_alarm_total = 0.0;
  double return_total = 0.0;
  long episodes = 0;

  std::optional<double> csa() const;  // critical-state accuracy
  std::optional<double> wsa() const;
  std::optional<double> nsa() const;
  std::optional<double> pfr_accuracy() const;
  std::optional<double> rfr_accuracy() const;
  double mean_return() const { return episodes == 0 ? 0.0 : return_total / episodes; }

  void add(const AccuracyReport& other);
  nlohmann::json to_json() const;
};

// Tallies one episode. The conventions: a critical slot is "correct" when the
// recovery decision was taken (sync, or the recovery-triggering placement); a
// warning slot when placement was chosen; a normal slot when a held backup
// was released, or nothing was done while nothing was held.
AccuracyReport score_episode(const EpisodeTrace& trace);

// Decision policies. Learned and scripted policies act on the monitored
// outcome of the previous slot; the oracle is granted the current slot's
// post-transition truth (a test-only privilege used as a model upper bound).
class Policy {
 public:
  virtual ~Policy() = default;
  virtual void begin_episode(std::uint64_t seed) { (void)seed; }
  virtual bool privileged() const { return false; }
  virtual std::vector<VnfAction> act(const SlotOutcome& prev) = 0;
  virtual std::vector<VnfAction> act_privileged(const RecoveryEnv& env);
};

class RandomPolicy final : public Policy {
 public:
  void begin_episode(std::uint64_t seed) override { rng_.reseed(seed); }
  std::vector<VnfAction> act(const SlotOutcome& prev) override;

 private:
  Rng rng_;
};

// Upper-bound reference: place on warning, recover on critical, release on
// normal. Reads true state, so every recovery lands in the manifesting slot.
class OraclePolicy final : public Policy {
 public:
  bool privileged() const override { return true; }
  std::vector<VnfAction> act(const SlotOutcome& prev) override;
  std::vector<VnfAction> act_privileged(const RecoveryEnv& env) override;
};

// Acts only on an observed critical report; never pre-places backups, so all
// its recoveries are reactive by construction.
class ReactivePolicy final : public Policy {
 public:
  std::vector<VnfAction> act(const SlotOutcome& prev) override;
};

class NetPolicy final : public Policy {
 public:
  NetPolicy(const RecurrentNet& net, bool greedy) : net_(&net), greedy_(greedy) {}
  void begin_episode(std::uint64_t seed) override;
  std::vector<VnfAction> act(const SlotOutcome& prev) override;

 private:
  const RecurrentNet* net_;
  bool greedy_ = true;
  RecurrentState state_;
  Rng rng_;
};

// Plays one full episode (reseeding the environment) and returns its trace.
EpisodeTrace run_episode(RecoveryEnv& env, Policy& policy, std::uint64_t episode_seed);

struct EvaluationResult {
  AccuracyReport report;
  std::vector<EpisodeTrace> traces;  // kept only when requested
};

// Deterministic evaluation protocol: `episodes` seeded episodes, aggregated
// counts. Episode seeds derive from seed_base, so the same base reproduces
// the same report bit for bit.
EvaluationResult evaluate(Policy& policy, const EnvConfig& cfg, std::uint64_t seed_base,
                          int episodes, bool keep_traces = false);

// Same protocol on a freshly sampled environment regime; callers pass a seed
// base disjoint from training to obtain new substrate draws and transition
// probabilities.
EvaluationResult robustness_probe(Policy& policy, const EnvConfig& cfg,
                                  std::uint64_t fresh_seed_base, int episodes);

struct DwellRate {
  long occurrences = 0;
  long placements = 0;
  double rate() const { return occurrences == 0 ? 0.0 : double(placements) / occurrences; }
};

// P(place | warning with true dwell = d), keyed by dwell.
std::map<int, DwellRate> dwell_conditional_bp_rate(const std::vector<EpisodeTrace>& traces);

}  // namespace pfrlab
