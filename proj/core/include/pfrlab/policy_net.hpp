#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include "pfrlab/rng.hpp"

namespace pfrlab {

enum class Activation { relu, tanh };
const char* to_string(Activation a);
Activation activation_from_string(const std::string& s);

// Layer plan for the policy/value/critic networks: fully connected layers,
// then a stack of LSTM layers, then fully connected layers, then one linear
// output layer whose width follows from the configured heads.
struct ArchitectureSpec {
  int input_width = 0;
  std::vector<int> fc_pre;
  std::vector<double> dropout_pre;   // per fc_pre layer; empty means none
  std::vector<int> lstm;
  std::vector<int> fc_post;
  std::vector<double> dropout_post;
  int head_count = 0;                // one categorical head per VNF
  int head_arity = 4;
  bool policy_heads = true;
  bool value_head = true;
  int q_value_sets = 0;              // extra per-(VNF, action) value outputs

  Activation activation = Activation::relu;

  int output_width() const;
  int policy_offset() const { return 0; }
  int value_offset() const;
  int q_offset(int set) const;
  long parameter_count() const;      // closed form over the layer shapes
  void validate() const;

  nlohmann::json to_json() const;
  static ArchitectureSpec from_json(const nlohmann::json& j);
};

// Recurrent cell state, one (h, c) pair per LSTM layer, batch rows.
struct RecurrentState {
  std::vector<Eigen::MatrixXd> h;
  std::vector<Eigen::MatrixXd> c;
};

struct LstmStepCache {
  Eigen::MatrixXd input, h_prev, c_prev;
  Eigen::MatrixXd gate_i, gate_f, gate_g, gate_o, cell;
};

struct StepCache {
  Eigen::MatrixXd input;
  std::vector<Eigen::MatrixXd> pre_act;    // post-activation, pre-dropout
  std::vector<Eigen::MatrixXd> pre_mask;   // scaled dropout masks (may be empty)
  std::vector<LstmStepCache> lstm;
  std::vector<Eigen::MatrixXd> post_act;
  std::vector<Eigen::MatrixXd> post_mask;
  Eigen::MatrixXd head_in;                 // input of the output layer
};

struct SequenceCache {
  std::vector<StepCache> steps;
  std::vector<Eigen::MatrixXd> outputs;    // T entries of (B x output_width)
  bool train_mode = false;
};

// Fixed-topology network with explicit forward/backward. Parameters live in
// one flat vector so optimizers and finite-difference checks can treat the
// model as a plain function of its parameter vector.
class RecurrentNet {
 public:
  explicit RecurrentNet(ArchitectureSpec spec);

  const ArchitectureSpec& spec() const { return spec_; }
  long param_count() const { return static_cast<long>(params_.size()); }
  const Eigen::VectorXd& params() const { return params_; }
  void set_params(const Eigen::VectorXd& p);
  std::uint64_t version() const { return version_; }
  void bump_version() { ++version_; }

  void init_params(Rng& rng);

  RecurrentState initial_state(int batch) const;

  // Single-step inference, dropout disabled. Advances `state` in place.
  Eigen::MatrixXd step(const Eigen::MatrixXd& x, RecurrentState& state) const;

  // Whole-sequence forward keeping every intermediate needed for backward.
  // When train_mode is set, dropout masks are drawn from `dropout_rng`.
  SequenceCache forward_sequence(const std::vector<Eigen::MatrixXd>& xs,
                                 bool train_mode = false, Rng* dropout_rng = nullptr) const;

  // Backpropagation through time over the cached forward pass. `d_out[t]`
  // holds the loss gradient with respect to outputs at step t. Returns the
  // gradient for the full flat parameter vector.
  Eigen::VectorXd backward(const SequenceCache& cache,
                           const std::vector<Eigen::MatrixXd>& d_out) const;

 private:
  struct DenseShape {
    int in = 0, out = 0;
    long w = 0, b = 0;  // offsets into the flat vector
    double dropout = 0.0;
  };
  struct LstmShape {
    int in = 0, units = 0;
    long wx = 0, wh = 0, b = 0;
  };

  Eigen::Map<const Eigen::MatrixXd> mat(long off, int rows, int cols) const;
  Eigen::Map<const Eigen::VectorXd> vec(long off, int n) const;

  Eigen::MatrixXd dense_forward(const DenseShape& s, const Eigen::MatrixXd& x,
                                bool output_layer) const;
  void lstm_forward(const LstmShape& s, const Eigen::MatrixXd& x, Eigen::MatrixXd& h,
                    Eigen::MatrixXd& c, LstmStepCache* cache) const;

  ArchitectureSpec spec_;
  std::vector<DenseShape> pre_, post_;
  DenseShape out_;
  std::vector<LstmShape> lstm_;
  Eigen::VectorXd params_;
  std::uint64_t version_ = 0;
};

// Factored categorical action distribution: one independent head per VNF,
// joint log-probability and entropy are sums over heads.
class ActionDistribution {
 public:
  ActionDistribution(Eigen::MatrixXd logits, int heads, int arity);

  int batch() const { return static_cast<int>(log_probs_.rows()); }
  int heads() const { return heads_; }

  // Probability row for one head of one batch element.
  Eigen::VectorXd probs(int row, int head) const;
  std::vector<int> sample_row(int row, Rng& rng) const;
  std::vector<int> mode_row(int row) const;
  double log_prob_row(int row, const std::vector<int>& actions) const;
  double entropy_row(int row) const;

  // d(log pi(a)) / d logits and d(entropy) / d logits for a whole batch.
  Eigen::MatrixXd log_prob_grad(const std::vector<std::vector<int>>& actions) const;
  Eigen::MatrixXd entropy_grad() const;

  const Eigen::MatrixXd& log_probs() const { return log_probs_; }  // log-softmax per head

 private:
  int heads_ = 0, arity_ = 0;
  Eigen::MatrixXd log_probs_;  // B x (heads*arity)
};

// First-order optimizer with per-parameter adaptive moments.
class AdamOptimizer {
 public:
  AdamOptimizer(long size, double lr) : lr_(lr), m_(size), v_(size) {
    m_.setZero();
    v_.setZero();
  }
  double learning_rate() const { return lr_; }
  void set_learning_rate(double lr) { lr_ = lr; }
  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad);

  nlohmann::json to_json() const;
  void restore(const nlohmann::json& j);

 private:
  double lr_;
  double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
  long t_ = 0;
  Eigen::VectorXd m_, v_;
};

// Scales `grad` in place so its norm does not exceed max_norm (no-op when
// max_norm <= 0). Returns the pre-clip norm.
double clip_grad_norm(Eigen::VectorXd& grad, double max_norm);

}  // namespace pfrlab
