// SPDX-FileCopyrightText: the rknode authors
// SPDX-License-Identifier: Apache-2.0

#include "rknode/model.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "json.hpp"
#include "rknode/rng.hpp"

namespace rknode {

namespace {

Var apply_activation(Tape& tape, Var x, const std::string& act) {
  if (act == "gelu") return tape.gelu(x);
  if (act == "relu") return tape.relu(x);
  if (act == "tanh") return tape.tanh(x);
  if (act == "identity") return x;
  throw std::invalid_argument("model: unknown activation '" + act +
                              "' (expected gelu, relu, tanh or identity)");
}

}  // namespace

void ModelConfig::validate() const {
  if (input_dim < 1 || state_dim < 1 || hidden_dim < 1 || num_classes < 2 ||
      n_ode_blocks < 1)
    throw std::invalid_argument(
        "model config: dims must be positive and num_classes >= 2");
  if (!(t1 > t0))
    throw std::invalid_argument("model config: t1 must exceed t0");
  if (activation != "gelu" && activation != "relu" && activation != "tanh" &&
      activation != "identity")
    throw std::invalid_argument("model config: unknown activation '" +
                                activation + "'");
}

void NeuralOdeModel::layout() {
  slices_.clear();
  std::int64_t off = 0;
  auto push = [&](const std::string& name, std::vector<std::int64_t> shape) {
    ParamSlice s{name, off, std::move(shape)};
    off += s.numel();
    slices_.push_back(std::move(s));
  };
  push("head.w", {cfg_.input_dim, cfg_.state_dim});
  push("head.b", {cfg_.state_dim});
  for (int k = 0; k < cfg_.n_ode_blocks; ++k) {
    const std::string p = "block" + std::to_string(k) + ".";
    push(p + "rhs1.w", {cfg_.state_dim + 1, cfg_.hidden_dim});
    push(p + "rhs1.b", {cfg_.hidden_dim});
    push(p + "rhs2.w", {cfg_.hidden_dim, cfg_.state_dim});
    push(p + "rhs2.b", {cfg_.state_dim});
  }
  push("cls.w", {cfg_.state_dim, cfg_.num_classes});
  push("cls.b", {cfg_.num_classes});
  theta_.assign(static_cast<std::size_t>(off), 0.0);
}

NeuralOdeModel::NeuralOdeModel(ModelConfig cfg, std::uint64_t init_seed)
    : cfg_(std::move(cfg)) {
  cfg_.validate();
  layout();
  Rng rng(init_seed);
  double fan_in = 1.0;
  for (const auto& s : slices_) {
    const bool zero = cfg_.zero_init_rhs_out && s.name.find("rhs2") != std::string::npos;
    // biases share their weight matrix's fan-in (weights precede biases in
    // the layout)
    if (s.shape.size() == 2) fan_in = static_cast<double>(s.shape[0]);
    const double bound = 1.0 / std::sqrt(fan_in);
    for (std::int64_t i = 0; i < s.numel(); ++i) {
      const double v = rng.uniform(-bound, bound);  // keep the stream in sync
      theta_[static_cast<std::size_t>(s.offset + i)] = zero ? 0.0 : v;
    }
  }
}

NeuralOdeModel::Forward NeuralOdeModel::build_forward(
    Tape& tape, const Tensor& x, const std::vector<SolverMember>& members,
    int n_steps) const {
  if (x.rank() != 2 || x.cols() != cfg_.input_dim)
    throw std::invalid_argument("model forward: input shape " +
                                shape_str(x.shape) + " does not match (batch," +
                                std::to_string(cfg_.input_dim) + ")");
  if (members.empty())
    throw std::invalid_argument("model forward: no solver members");
  double wsum = 0.0;
  for (const auto& m : members) {
    if (m.weight < 0.0)
      throw std::invalid_argument(
          "model forward: member weights must be nonnegative");
    wsum += m.weight;
  }
  if (std::abs(wsum - 1.0) > 1e-12)
    throw std::invalid_argument("model forward: member weights sum to " +
                                std::to_string(wsum) + ", expected 1");

  Forward fw;
  fw.x = tape.constant(x);
  fw.params.reserve(slices_.size());
  for (const auto& s : slices_) {
    Tensor v(s.shape);
    for (std::int64_t i = 0; i < s.numel(); ++i)
      v.data[static_cast<std::size_t>(i)] =
          theta_[static_cast<std::size_t>(s.offset + i)];
    fw.params.push_back(tape.param(std::move(v)));
  }
  auto pv = [&](std::size_t i) { return fw.params[i]; };

  // head
  Var z = apply_activation(
      tape, tape.add(tape.matmul(fw.x, pv(0)), pv(1)), cfg_.activation);

  const auto batch = x.rows();
  std::int64_t* evals = &fw.rhs_evals;
  for (int k = 0; k < cfg_.n_ode_blocks; ++k) {
    const std::size_t base = 2 + 4 * static_cast<std::size_t>(k);
    Var w1 = pv(base), b1 = pv(base + 1), w2 = pv(base + 2), b2 = pv(base + 3);
    TapeRhs rhs = [&, w1, b1, w2, b2](Tape& tp, double t, Var state) {
      ++*evals;
      Var tcol = tp.constant(Tensor({batch, 1}, std::vector<double>(
                                                    static_cast<std::size_t>(batch), t)));
      Var h = apply_activation(
          tp, tp.add(tp.matmul(tp.concat(state, tcol), w1), b1),
          cfg_.activation);
      return tp.add(tp.matmul(h, w2), b2);
    };

    if (members.size() == 1) {
      IntegrationSpec spec{cfg_.t0, cfg_.t1, n_steps, members[0].tableau};
      z = ode_unroll(tape, rhs, spec, z);
    } else {
      // solver-output ensembling: all members start from the same state and
      // their final states are averaged with the given weights
      Var acc{};
      for (const auto& m : members) {
        if (m.weight == 0.0) {
          // still costs a full solve; the average ignores it
          IntegrationSpec spec{cfg_.t0, cfg_.t1, n_steps, m.tableau};
          (void)ode_unroll(tape, rhs, spec, z);
          continue;
        }
        IntegrationSpec spec{cfg_.t0, cfg_.t1, n_steps, m.tableau};
        Var zf = tape.scale(ode_unroll(tape, rhs, spec, z), m.weight);
        acc = acc.ok() ? tape.add(acc, zf) : zf;
      }
      z = acc;
    }
  }

  const std::size_t cls = 2 + 4 * static_cast<std::size_t>(cfg_.n_ode_blocks);
  fw.logits = tape.add(tape.matmul(z, pv(cls)), pv(cls + 1));
  return fw;
}

NeuralOdeModel::Forward NeuralOdeModel::build_forward(Tape& tape,
                                                      const Tensor& x,
                                                      const ButcherTableau& tab,
                                                      int n_steps) const {
  return build_forward(tape, x, {SolverMember{tab, 1.0}}, n_steps);
}

NeuralOdeModel::LossGrad NeuralOdeModel::loss_and_grad(
    const Tensor& x, const std::vector<int>& labels,
    const std::vector<SolverMember>& members, int n_steps) const {
  Tape tape;
  Forward fw = build_forward(tape, x, members, n_steps);
  Var loss = tape.softmax_cross_entropy(fw.logits, labels);
  tape.backward(loss);

  LossGrad out;
  out.loss = tape.value(loss).data[0];
  out.rhs_evals = fw.rhs_evals;
  out.grad.assign(theta_.size(), 0.0);
  for (std::size_t i = 0; i < slices_.size(); ++i) {
    const Tensor& g = tape.grad(fw.params[i]);
    for (std::int64_t k = 0; k < slices_[i].numel(); ++k)
      out.grad[static_cast<std::size_t>(slices_[i].offset + k)] =
          g.data[static_cast<std::size_t>(k)];
  }
  return out;
}

Tensor NeuralOdeModel::logits(const Tensor& x,
                              const std::vector<SolverMember>& members,
                              int n_steps) const {
  Tape tape;
  Forward fw = build_forward(tape, x, members, n_steps);
  return tape.value(fw.logits);
}

std::vector<int> NeuralOdeModel::predict(const Tensor& x,
                                         const std::vector<SolverMember>& members,
                                         int n_steps) const {
  const Tensor lg = logits(x, members, n_steps);
  std::vector<int> out(static_cast<std::size_t>(lg.rows()));
  for (std::int64_t i = 0; i < lg.rows(); ++i) {
    int best = 0;
    for (std::int64_t j = 1; j < lg.cols(); ++j)
      if (lg.at(i, j) > lg.at(i, best)) best = static_cast<int>(j);
    out[static_cast<std::size_t>(i)] = best;
  }
  return out;
}

double accuracy(const std::vector<int>& predictions,
                const std::vector<int>& labels) {
  if (predictions.size() != labels.size())
    throw std::invalid_argument("accuracy: " + std::to_string(predictions.size()) +
                                " predictions for " +
                                std::to_string(labels.size()) + " labels");
  if (predictions.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i)
    if (predictions[i] == labels[i]) ++hits;
  return static_cast<double>(hits) / static_cast<double>(predictions.size());
}

void save_checkpoint(const std::string& path, const NeuralOdeModel& model,
                     std::uint64_t seed, const std::string& strategy_json) {
  const ModelConfig& c = model.config();
  nlohmann::json j;
  j["schema"] = "rknode-checkpoint-v1";
  j["config"] = {{"input_dim", c.input_dim},
                 {"state_dim", c.state_dim},
                 {"hidden_dim", c.hidden_dim},
                 {"num_classes", c.num_classes},
                 {"n_ode_blocks", c.n_ode_blocks},
                 {"t0", c.t0},
                 {"t1", c.t1},
                 {"activation", c.activation},
                 {"zero_init_rhs_out", c.zero_init_rhs_out}};
  j["theta"] = model.theta();
  j["seed"] = seed;
  j["strategy"] = strategy_json.empty()
                      ? nlohmann::json::object()
                      : nlohmann::json::parse(strategy_json);
  std::ofstream os(path);
  if (!os) throw std::runtime_error("checkpoint: cannot write " + path);
  os << j.dump(2) << '\n';
}

NeuralOdeModel load_checkpoint(const std::string& path, std::uint64_t* seed,
                               std::string* strategy_json) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("checkpoint: cannot open " + path);
  nlohmann::json j = nlohmann::json::parse(is);
  if (j.value("schema", "") != "rknode-checkpoint-v1")
    throw std::runtime_error("checkpoint: unknown schema in " + path);

  ModelConfig c;
  const auto& jc = j.at("config");
  c.input_dim = jc.at("input_dim").get<int>();
  c.state_dim = jc.at("state_dim").get<int>();
  c.hidden_dim = jc.at("hidden_dim").get<int>();
  c.num_classes = jc.at("num_classes").get<int>();
  c.n_ode_blocks = jc.at("n_ode_blocks").get<int>();
  c.t0 = jc.at("t0").get<double>();
  c.t1 = jc.at("t1").get<double>();
  c.activation = jc.at("activation").get<std::string>();
  c.zero_init_rhs_out = jc.at("zero_init_rhs_out").get<bool>();

  NeuralOdeModel model(c, 0);
  auto theta = j.at("theta").get<std::vector<double>>();
  if (theta.size() != model.theta().size())
    throw std::runtime_error("checkpoint: theta has " +
                             std::to_string(theta.size()) + " entries, model needs " +
                             std::to_string(model.theta().size()));
  model.theta() = std::move(theta);
  if (seed) *seed = j.value("seed", std::uint64_t{0});
  if (strategy_json) *strategy_json = j.value("strategy", nlohmann::json::object()).dump();
  return model;
}

}  // namespace rknode
