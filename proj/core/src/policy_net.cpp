#include "pfrlab/policy_net.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace pfrlab {

using Eigen::MatrixXd;
using Eigen::VectorXd;

const char* to_string(Activation a) { return a == Activation::relu ? "relu" : "tanh"; }

Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "tanh") return Activation::tanh;
  throw std::invalid_argument("unknown activation: " + s);
}

int ArchitectureSpec::output_width() const {
  int w = 0;
  if (policy_heads) w += head_count * head_arity;
  if (value_head) w += 1;
  w += q_value_sets * head_count * head_arity;
  return w;
}

int ArchitectureSpec::value_offset() const {
  return policy_heads ? head_count * head_arity : 0;
}

int ArchitectureSpec::q_offset(int set) const {
  return value_offset() + (value_head ? 1 : 0) + set * head_count * head_arity;
}

long ArchitectureSpec::parameter_count() const {
  long count = 0;
  int in = input_width;
  for (int w : fc_pre) {
    count += static_cast<long>(in + 1) * w;
    in = w;
  }
  for (int u : lstm) {
    count += 4L * u * (in + u + 1);
    in = u;
  }
  for (int w : fc_post) {
    count += static_cast<long>(in + 1) * w;
    in = w;
  }
  count += static_cast<long>(in + 1) * output_width();
  return count;
}

void ArchitectureSpec::validate() const {
  if (input_width < 1) throw std::invalid_argument("input_width must be positive");
  for (int w : fc_pre) {
    if (w < 1) throw std::invalid_argument("fc_pre widths must be positive");
  }
  for (int u : lstm) {
    if (u < 1) throw std::invalid_argument("lstm unit counts must be positive");
  }
  for (int w : fc_post) {
    if (w < 1) throw std::invalid_argument("fc_post widths must be positive");
  }
  if (!dropout_pre.empty() && dropout_pre.size() != fc_pre.size()) {
    throw std::invalid_argument("dropout_pre must match fc_pre length (or be empty)");
  }
  if (!dropout_post.empty() && dropout_post.size() != fc_post.size()) {
    throw std::invalid_argument("dropout_post must match fc_post length (or be empty)");
  }
  for (double d : dropout_pre) {
    if (d < 0.0 || d >= 1.0) throw std::invalid_argument("dropout rates must lie in [0, 1)");
  }
  for (double d : dropout_post) {
    if (d < 0.0 || d >= 1.0) throw std::invalid_argument("dropout rates must lie in [0, 1)");
  }
  if ((policy_heads || q_value_sets > 0) && (head_count < 1 || head_arity < 2)) {
    throw std::invalid_argument("heads require head_count >= 1 and head_arity >= 2");
  }
  if (output_width() < 1) throw std::invalid_argument("network has no outputs");
}

nlohmann::json ArchitectureSpec::to_json() const {
  return {{"input_width", input_width},
          {"fc_pre", fc_pre},
          {"dropout_pre", dropout_pre},
          {"lstm", lstm},
          {"fc_post", fc_post},
          {"dropout_post", dropout_post},
          {"head_count", head_count},
          {"head_arity", head_arity},
          {"policy_heads", policy_heads},
          {"value_head", value_head},
          {"q_value_sets", q_value_sets},
          {"activation", std::string(to_string(activation))}};
}

ArchitectureSpec ArchitectureSpec::from_json(const nlohmann::json& j) {
  ArchitectureSpec s;
  s.input_width = j.at("input_width").get<int>();
  s.fc_pre = j.at("fc_pre").get<std::vector<int>>();
  s.dropout_pre = j.at("dropout_pre").get<std::vector<double>>();
  s.lstm = j.at("lstm").get<std::vector<int>>();
  s.fc_post = j.at("fc_post").get<std::vector<int>>();
  s.dropout_post = j.at("dropout_post").get<std::vector<double>>();
  s.head_count = j.at("head_count").get<int>();
  s.head_arity = j.at("head_arity").get<int>();
  s.policy_heads = j.at("policy_heads").get<bool>();
  s.value_head = j.at("value_head").get<bool>();
  s.q_value_sets = j.at("q_value_sets").get<int>();
  s.activation = activation_from_string(j.at("activation").get<std::string>());
  s.validate();
  return s;
}

namespace {

inline MatrixXd sigmoid(const MatrixXd& x) {
  return ((-x.array()).exp() + 1.0).inverse().matrix();
}

inline MatrixXd apply_activation(const MatrixXd& x, Activation a) {
  if (a == Activation::relu) return x.cwiseMax(0.0);
  return x.array().tanh().matrix();
}

// Derivative expressed through the activation output.
inline MatrixXd activation_grad(const MatrixXd& y, Activation a) {
  if (a == Activation::relu) {
    return (y.array() > 0.0).cast<double>().matrix();
  }
  return (1.0 - y.array().square()).matrix();
}

MatrixXd orthogonal_matrix(int n, Rng& rng) {
  MatrixXd a(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) a(i, j) = rng.normal01();
  }
  Eigen::HouseholderQR<MatrixXd> qr(a);
  MatrixXd q = qr.householderQ() * MatrixXd::Identity(n, n);
  const MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int j = 0; j < n; ++j) {
    if (r(j, j) < 0.0) q.col(j) *= -1.0;
  }
  return q;
}

}  // namespace

RecurrentNet::RecurrentNet(ArchitectureSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  long off = 0;
  int in = spec_.input_width;
  for (std::size_t i = 0; i < spec_.fc_pre.size(); ++i) {
    DenseShape s;
    s.in = in;
    s.out = spec_.fc_pre[i];
    s.w = off;
    off += static_cast<long>(s.in) * s.out;
    s.b = off;
    off += s.out;
    s.dropout = spec_.dropout_pre.empty() ? 0.0 : spec_.dropout_pre[i];
    pre_.push_back(s);
    in = s.out;
  }
  for (int u : spec_.lstm) {
    LstmShape s;
    s.in = in;
    s.units = u;
    s.wx = off;
    off += 4L * u * in;
    s.wh = off;
    off += 4L * u * u;
    s.b = off;
    off += 4L * u;
    lstm_.push_back(s);
    in = u;
  }
  for (std::size_t i = 0; i < spec_.fc_post.size(); ++i) {
    DenseShape s;
    s.in = in;
    s.out = spec_.fc_post[i];
    s.w = off;
    off += static_cast<long>(s.in) * s.out;
    s.b = off;
    off += s.out;
    s.dropout = spec_.dropout_post.empty() ? 0.0 : spec_.dropout_post[i];
    post_.push_back(s);
    in = s.out;
  }
  out_.in = in;
  out_.out = spec_.output_width();
  out_.w = off;
  off += static_cast<long>(out_.in) * out_.out;
  out_.b = off;
  off += out_.out;
  params_ = VectorXd::Zero(off);
  if (off != spec_.parameter_count()) {
    throw std::logic_error("parameter layout does not match the closed-form count");
  }
}

void RecurrentNet::set_params(const VectorXd& p) {
  if (p.size() != params_.size()) throw std::invalid_argument("parameter size mismatch");
  params_ = p;
}

Eigen::Map<const MatrixXd> RecurrentNet::mat(long off, int rows, int cols) const {
  return {params_.data() + off, rows, cols};
}

Eigen::Map<const VectorXd> RecurrentNet::vec(long off, int n) const {
  return {params_.data() + off, n};
}

void RecurrentNet::init_params(Rng& rng) {
  auto fill_uniform = [&](long off, long n, double scale) {
    for (long i = 0; i < n; ++i) params_[off + i] = rng.uniform(-scale, scale);
  };
  for (const auto& s : pre_) {
    fill_uniform(s.w, static_cast<long>(s.in) * s.out, 1.0 / std::sqrt(s.in));
    for (int i = 0; i < s.out; ++i) params_[s.b + i] = 0.0;
  }
  for (const auto& s : lstm_) {
    fill_uniform(s.wx, 4L * s.units * s.in, 1.0 / std::sqrt(s.in));
    Eigen::Map<MatrixXd> wh(params_.data() + s.wh, 4 * s.units, s.units);
    for (int g = 0; g < 4; ++g) {
      wh.block(g * s.units, 0, s.units, s.units) = orthogonal_matrix(s.units, rng);
    }
    for (int i = 0; i < 4 * s.units; ++i) params_[s.b + i] = 0.0;
    // Forget-gate bias starts open so early gradients flow through time.
    for (int i = s.units; i < 2 * s.units; ++i) params_[s.b + i] = 1.0;
  }
  for (const auto& s : post_) {
    fill_uniform(s.w, static_cast<long>(s.in) * s.out, 1.0 / std::sqrt(s.in));
    for (int i = 0; i < s.out; ++i) params_[s.b + i] = 0.0;
  }
  // Small output layer keeps the initial policy near uniform.
  fill_uniform(out_.w, static_cast<long>(out_.in) * out_.out, 0.01 / std::sqrt(out_.in));
  for (int i = 0; i < out_.out; ++i) params_[out_.b + i] = 0.0;
  ++version_;
}

RecurrentState RecurrentNet::initial_state(int batch) const {
  RecurrentState st;
  for (const auto& s : lstm_) {
    st.h.push_back(MatrixXd::Zero(batch, s.units));
    st.c.push_back(MatrixXd::Zero(batch, s.units));
  }
  return st;
}

MatrixXd RecurrentNet::dense_forward(const DenseShape& s, const MatrixXd& x,
                                     bool output_layer) const {
  MatrixXd y = x * mat(s.w, s.out, s.in).transpose();
  y.rowwise() += vec(s.b, s.out).transpose();
  if (!output_layer) y = apply_activation(y, spec_.activation);
  return y;
}

void RecurrentNet::lstm_forward(const LstmShape& s, const MatrixXd& x, MatrixXd& h,
                                MatrixXd& c, LstmStepCache* cache) const {
  MatrixXd gates = x * mat(s.wx, 4 * s.units, s.in).transpose() +
                   h * mat(s.wh, 4 * s.units, s.units).transpose();
  gates.rowwise() += vec(s.b, 4 * s.units).transpose();
  const MatrixXd gi = sigmoid(gates.leftCols(s.units));
  const MatrixXd gf = sigmoid(gates.middleCols(s.units, s.units));
  const MatrixXd gg = gates.middleCols(2 * s.units, s.units).array().tanh().matrix();
  const MatrixXd go = sigmoid(gates.rightCols(s.units));
  if (cache != nullptr) {
    cache->input = x;
    cache->h_prev = h;
    cache->c_prev = c;
    cache->gate_i = gi;
    cache->gate_f = gf;
    cache->gate_g = gg;
    cache->gate_o = go;
  }
  c = (gf.array() * c.array() + gi.array() * gg.array()).matrix();
  h = (go.array() * c.array().tanh()).matrix();
  if (cache != nullptr) cache->cell = c;
}

MatrixXd RecurrentNet::step(const MatrixXd& x, RecurrentState& state) const {
  if (x.cols() != spec_.input_width) throw std::invalid_argument("input width mismatch");
  MatrixXd cur = x;
  for (const auto& s : pre_) cur = dense_forward(s, cur, false);
  for (std::size_t j = 0; j < lstm_.size(); ++j) {
    lstm_forward(lstm_[j], cur, state.h[j], state.c[j], nullptr);
    cur = state.h[j];
  }
  for (const auto& s : post_) cur = dense_forward(s, cur, false);
  return dense_forward(out_, cur, true);
}

SequenceCache RecurrentNet::forward_sequence(const std::vector<MatrixXd>& xs, bool train_mode,
                                             Rng* dropout_rng) const {
  SequenceCache cache;
  cache.train_mode = train_mode;
  if (xs.empty()) return cache;
  const int batch = static_cast<int>(xs.front().rows());
  RecurrentState state = initial_state(batch);

  auto draw_mask = [&](int rows, int cols, double rate) {
    MatrixXd mask(rows, cols);
    const double keep = 1.0 - rate;
    for (int i = 0; i < rows; ++i) {
      for (int j = 0; j < cols; ++j) {
        mask(i, j) = dropout_rng->bernoulli(keep) ? 1.0 / keep : 0.0;
      }
    }
    return mask;
  };

  for (const auto& x : xs) {
    if (x.cols() != spec_.input_width) throw std::invalid_argument("input width mismatch");
    StepCache step;
    step.input = x;
    MatrixXd cur = x;
    for (const auto& s : pre_) {
      cur = dense_forward(s, cur, false);
      step.pre_act.push_back(cur);
      if (train_mode && s.dropout > 0.0) {
        if (dropout_rng == nullptr) throw std::invalid_argument("dropout needs an rng");
        MatrixXd mask = draw_mask(static_cast<int>(cur.rows()), s.out, s.dropout);
        cur = cur.cwiseProduct(mask);
        step.pre_mask.push_back(std::move(mask));
      } else {
        step.pre_mask.emplace_back();
      }
    }
    for (std::size_t j = 0; j < lstm_.size(); ++j) {
      step.lstm.emplace_back();
      lstm_forward(lstm_[j], cur, state.h[j], state.c[j], &step.lstm.back());
      cur = state.h[j];
    }
    for (const auto& s : post_) {
      cur = dense_forward(s, cur, false);
      step.post_act.push_back(cur);
      if (train_mode && s.dropout > 0.0) {
        if (dropout_rng == nullptr) throw std::invalid_argument("dropout needs an rng");
        MatrixXd mask = draw_mask(static_cast<int>(cur.rows()), s.out, s.dropout);
        cur = cur.cwiseProduct(mask);
        step.post_mask.push_back(std::move(mask));
      } else {
        step.post_mask.emplace_back();
      }
    }
    step.head_in = cur;
    cache.outputs.push_back(dense_forward(out_, cur, true));
    cache.steps.push_back(std::move(step));
  }
  return cache;
}

VectorXd RecurrentNet::backward(const SequenceCache& cache,
                                const std::vector<MatrixXd>& d_out) const {
  if (d_out.size() != cache.steps.size()) {
    throw std::invalid_argument("gradient/step count mismatch");
  }
  VectorXd grad = VectorXd::Zero(params_.size());
  auto gmat = [&](long off, int rows, int cols) {
    return Eigen::Map<MatrixXd>(grad.data() + off, rows, cols);
  };
  auto gvec = [&](long off, int n) { return Eigen::Map<VectorXd>(grad.data() + off, n); };

  const int layers = static_cast<int>(lstm_.size());
  std::vector<MatrixXd> dh_rec(layers), dc_rec(layers);
  if (!cache.steps.empty()) {
    const int batch = static_cast<int>(cache.steps.front().input.rows());
    for (int j = 0; j < layers; ++j) {
      dh_rec[j] = MatrixXd::Zero(batch, lstm_[j].units);
      dc_rec[j] = MatrixXd::Zero(batch, lstm_[j].units);
    }
  }

  for (int t = static_cast<int>(cache.steps.size()) - 1; t >= 0; --t) {
    const StepCache& step = cache.steps[t];

    // Output layer.
    MatrixXd d = d_out[t];
    gmat(out_.w, out_.out, out_.in).noalias() += d.transpose() * step.head_in;
    gvec(out_.b, out_.out) += d.colwise().sum().transpose();
    MatrixXd dcur = d * mat(out_.w, out_.out, out_.in);

    // Post fully connected layers.
    for (int j = static_cast<int>(post_.size()) - 1; j >= 0; --j) {
      const DenseShape& s = post_[j];
      if (step.post_mask[j].size() > 0) dcur = dcur.cwiseProduct(step.post_mask[j]);
      dcur = dcur.cwiseProduct(activation_grad(step.post_act[j], spec_.activation));
      MatrixXd input;
      if (j > 0) {
        input = step.post_mask[j - 1].size() > 0
                    ? step.post_act[j - 1].cwiseProduct(step.post_mask[j - 1])
                    : step.post_act[j - 1];
      } else if (!lstm_.empty()) {
        input = step.lstm.back().gate_o.cwiseProduct(
            step.lstm.back().cell.array().tanh().matrix());
      } else if (!pre_.empty()) {
        input = step.pre_mask.back().size() > 0
                    ? step.pre_act.back().cwiseProduct(step.pre_mask.back())
                    : step.pre_act.back();
      } else {
        input = step.input;
      }
      gmat(s.w, s.out, s.in).noalias() += dcur.transpose() * input;
      gvec(s.b, s.out) += dcur.colwise().sum().transpose();
      dcur = dcur * mat(s.w, s.out, s.in);
    }

    // LSTM stack, top layer first.
    for (int j = layers - 1; j >= 0; --j) {
      const LstmShape& s = lstm_[j];
      const LstmStepCache& lc = step.lstm[j];
      const MatrixXd tanh_c = lc.cell.array().tanh().matrix();
      const MatrixXd dh = dcur + dh_rec[j];
      const MatrixXd dc = dc_rec[j].array() +
                          dh.array() * lc.gate_o.array() * (1.0 - tanh_c.array().square());
      const MatrixXd d_o = (dh.array() * tanh_c.array()).matrix();
      const MatrixXd d_f = (dc.array() * lc.c_prev.array()).matrix();
      const MatrixXd d_i = (dc.array() * lc.gate_g.array()).matrix();
      const MatrixXd d_g = (dc.array() * lc.gate_i.array()).matrix();
      dc_rec[j] = (dc.array() * lc.gate_f.array()).matrix();

      MatrixXd d_gates(dh.rows(), 4 * s.units);
      d_gates.leftCols(s.units) =
          (d_i.array() * lc.gate_i.array() * (1.0 - lc.gate_i.array())).matrix();
      d_gates.middleCols(s.units, s.units) =
          (d_f.array() * lc.gate_f.array() * (1.0 - lc.gate_f.array())).matrix();
      d_gates.middleCols(2 * s.units, s.units) =
          (d_g.array() * (1.0 - lc.gate_g.array().square())).matrix();
      d_gates.rightCols(s.units) =
          (d_o.array() * lc.gate_o.array() * (1.0 - lc.gate_o.array())).matrix();

      gmat(s.wx, 4 * s.units, s.in).noalias() += d_gates.transpose() * lc.input;
      gmat(s.wh, 4 * s.units, s.units).noalias() += d_gates.transpose() * lc.h_prev;
      gvec(s.b, 4 * s.units) += d_gates.colwise().sum().transpose();
      dh_rec[j] = d_gates * mat(s.wh, 4 * s.units, s.units);
      dcur = d_gates * mat(s.wx, 4 * s.units, s.in);
    }

    // Pre fully connected layers.
    for (int j = static_cast<int>(pre_.size()) - 1; j >= 0; --j) {
      const DenseShape& s = pre_[j];
      if (step.pre_mask[j].size() > 0) dcur = dcur.cwiseProduct(step.pre_mask[j]);
      dcur = dcur.cwiseProduct(activation_grad(step.pre_act[j], spec_.activation));
      MatrixXd input;
      if (j > 0) {
        input = step.pre_mask[j - 1].size() > 0
                    ? step.pre_act[j - 1].cwiseProduct(step.pre_mask[j - 1])
                    : step.pre_act[j - 1];
      } else {
        input = step.input;
      }
      gmat(s.w, s.out, s.in).noalias() += dcur.transpose() * input;
      gvec(s.b, s.out) += dcur.colwise().sum().transpose();
      dcur = dcur * mat(s.w, s.out, s.in);
    }
  }
  return grad;
}

ActionDistribution::ActionDistribution(MatrixXd logits, int heads, int arity)
    : heads_(heads), arity_(arity), log_probs_(std::move(logits)) {
  if (log_probs_.cols() != heads * arity) {
    throw std::invalid_argument("logit width does not match heads*arity");
  }
  // In-place log-softmax per head.
  for (int r = 0; r < log_probs_.rows(); ++r) {
    for (int h = 0; h < heads_; ++h) {
      auto seg = log_probs_.row(r).segment(h * arity_, arity_);
      const double mx = seg.maxCoeff();
      const double lse = mx + std::log((seg.array() - mx).exp().sum());
      seg.array() -= lse;
    }
  }
}

Eigen::VectorXd ActionDistribution::probs(int row, int head) const {
  return log_probs_.row(row).segment(head * arity_, arity_).array().exp();
}

std::vector<int> ActionDistribution::sample_row(int row, Rng& rng) const {
  std::vector<int> actions(heads_);
  for (int h = 0; h < heads_; ++h) {
    const VectorXd p = probs(row, h);
    const double u = rng.uniform01();
    double acc = 0.0;
    int pick = arity_ - 1;
    for (int a = 0; a < arity_; ++a) {
      acc += p[a];
      if (u < acc) {
        pick = a;
        break;
      }
    }
    actions[h] = pick;
  }
  return actions;
}

std::vector<int> ActionDistribution::mode_row(int row) const {
  std::vector<int> actions(heads_);
  for (int h = 0; h < heads_; ++h) {
    int best = 0;
    for (int a = 1; a < arity_; ++a) {
      if (log_probs_(row, h * arity_ + a) > log_probs_(row, h * arity_ + best)) best = a;
    }
    actions[h] = best;
  }
  return actions;
}

double ActionDistribution::log_prob_row(int row, const std::vector<int>& actions) const {
  double lp = 0.0;
  for (int h = 0; h < heads_; ++h) lp += log_probs_(row, h * arity_ + actions[h]);
  return lp;
}

double ActionDistribution::entropy_row(int row) const {
  double ent = 0.0;
  for (int c = 0; c < heads_ * arity_; ++c) {
    const double lp = log_probs_(row, c);
    ent -= std::exp(lp) * lp;
  }
  return ent;
}

MatrixXd ActionDistribution::log_prob_grad(const std::vector<std::vector<int>>& actions) const {
  MatrixXd g = -log_probs_.array().exp().matrix();
  for (int r = 0; r < g.rows(); ++r) {
    for (int h = 0; h < heads_; ++h) g(r, h * arity_ + actions[r][h]) += 1.0;
  }
  return g;
}

MatrixXd ActionDistribution::entropy_grad() const {
  MatrixXd g(log_probs_.rows(), log_probs_.cols());
  for (int r = 0; r < g.rows(); ++r) {
    for (int h = 0; h < heads_; ++h) {
      double head_entropy = 0.0;
      for (int a = 0; a < arity_; ++a) {
        const double lp = log_probs_(r, h * arity_ + a);
        head_entropy -= std::exp(lp) * lp;
      }
      for (int a = 0; a < arity_; ++a) {
        const double lp = log_probs_(r, h * arity_ + a);
        g(r, h * arity_ + a) = -std::exp(lp) * (lp + head_entropy);
      }
    }
  }
  return g;
}

void AdamOptimizer::step(VectorXd& params, const VectorXd& grad) {
  if (params.size() != m_.size() || grad.size() != m_.size()) {
    throw std::invalid_argument("optimizer size mismatch");
  }
  ++t_;
  m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
  v_ = (beta2_ * v_.array() + (1.0 - beta2_) * grad.array().square()).matrix();
  const double c1 = 1.0 - std::pow(beta1_, t_);
  const double c2 = 1.0 - std::pow(beta2_, t_);
  params.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
}

nlohmann::json AdamOptimizer::to_json() const {
  return {{"lr", lr_},
          {"t", t_},
          {"m", std::vector<double>(m_.data(), m_.data() + m_.size())},
          {"v", std::vector<double>(v_.data(), v_.data() + v_.size())}};
}

void AdamOptimizer::restore(const nlohmann::json& j) {
  lr_ = j.at("lr").get<double>();
  t_ = j.at("t").get<long>();
  const auto m = j.at("m").get<std::vector<double>>();
  const auto v = j.at("v").get<std::vector<double>>();
  if (static_cast<long>(m.size()) != m_.size()) throw std::invalid_argument("optimizer state size mismatch");
  m_ = Eigen::Map<const VectorXd>(m.data(), m.size());
  v_ = Eigen::Map<const VectorXd>(v.data(), v.size());
}

double clip_grad_norm(VectorXd& grad, double max_norm) {
  const double norm = grad.norm();
  if (max_norm > 0.0 && norm > max_norm) grad *= max_norm / norm;
  return norm;
}

}  // namespace pfrlab
