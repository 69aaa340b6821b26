// SPDX-FileCopyrightText: the rknode authors
// SPDX-License-Identifier: Apache-2.0

#include "rknode/attack.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rknode {

namespace {

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

// project x' onto the l-inf ball of radius eps around x, then into range
void project_clamp(Tensor& xp, const Tensor& x, double eps, double lo,
                   double hi) {
  for (std::size_t i = 0; i < xp.data.size(); ++i) {
    const double delta =
        std::clamp(xp.data[i] - x.data[i], -eps, eps);
    xp.data[i] = std::clamp(x.data[i] + delta, lo, hi);
  }
}

}  // namespace

void AttackConfig::validate() const {
  if (kind != "fgsm" && kind != "fgsm_random" && kind != "pgd")
    throw std::invalid_argument("attack: unknown kind '" + kind +
                                "' (expected fgsm, fgsm_random or pgd)");
  if (!(epsilon >= 0.0))
    throw std::invalid_argument("attack: epsilon must be >= 0, got " +
                                std::to_string(epsilon));
  if (!(range_lo < range_hi))
    throw std::invalid_argument("attack: input range [" +
                                std::to_string(range_lo) + ", " +
                                std::to_string(range_hi) + "] is empty");
  if (kind == "pgd") {
    if (iterations < 1)
      throw std::invalid_argument("attack: pgd iterations must be >= 1, got " +
                                  std::to_string(iterations));
    if (epsilon > 0.0 && !(alpha > 0.0 && alpha <= epsilon))
      throw std::invalid_argument(
          "attack: pgd requires 0 < alpha <= epsilon, got alpha = " +
          std::to_string(alpha) + ", epsilon = " + std::to_string(epsilon));
  }
  if (kind == "fgsm_random" && alpha < 0.0)
    throw std::invalid_argument("attack: fgsm_random alpha must be >= 0");
}

Tensor input_gradient(const NeuralOdeModel& model,
                      const std::vector<SolverMember>& members, int n_steps,
                      const Tensor& x, const std::vector<int>& labels) {
  Tape tape;
  auto fw = model.build_forward(tape, x, members, n_steps);
  Var loss = tape.softmax_cross_entropy(fw.logits, labels);
  tape.backward(loss);
  Tensor g = tape.grad(fw.x);
  for (double v : g.data)
    if (!std::isfinite(v))
      throw std::runtime_error("attack: non-finite input gradient");
  return g;
}

Tensor fgsm(const NeuralOdeModel& model, const std::vector<SolverMember>& members,
            int n_steps, const Tensor& x, const std::vector<int>& labels,
            const AttackConfig& cfg) {
  cfg.validate();
  if (cfg.epsilon == 0.0) return x;
  const Tensor g = input_gradient(model, members, n_steps, x, labels);
  Tensor xp = x;
  for (std::size_t i = 0; i < xp.data.size(); ++i)
    xp.data[i] = std::clamp(x.data[i] + cfg.epsilon * sign(g.data[i]),
                            cfg.range_lo, cfg.range_hi);
  return xp;
}

Tensor fgsm_random(const NeuralOdeModel& model,
                   const std::vector<SolverMember>& members, int n_steps,
                   const Tensor& x, const std::vector<int>& labels,
                   const AttackConfig& cfg, Rng& rng) {
  cfg.validate();
  if (cfg.epsilon == 0.0) return x;
  Tensor xp = x;
  for (double& v : xp.data) v += rng.uniform(-cfg.epsilon, cfg.epsilon);
  const Tensor g = input_gradient(model, members, n_steps, xp, labels);
  for (std::size_t i = 0; i < xp.data.size(); ++i)
    xp.data[i] += cfg.alpha * sign(g.data[i]);
  project_clamp(xp, x, cfg.epsilon, cfg.range_lo, cfg.range_hi);
  return xp;
}

Tensor pgd(const NeuralOdeModel& model, const std::vector<SolverMember>& members,
           int n_steps, const Tensor& x, const std::vector<int>& labels,
           const AttackConfig& cfg, Rng& rng) {
  cfg.validate();
  if (cfg.epsilon == 0.0) return x;
  Tensor xp = x;
  if (cfg.random_start) {
    for (double& v : xp.data) v += rng.uniform(-cfg.epsilon, cfg.epsilon);
    project_clamp(xp, x, cfg.epsilon, cfg.range_lo, cfg.range_hi);
  }
  for (int it = 0; it < cfg.iterations; ++it) {
    const Tensor g = input_gradient(model, members, n_steps, xp, labels);
    for (std::size_t i = 0; i < xp.data.size(); ++i)
      xp.data[i] += cfg.alpha * sign(g.data[i]);
    project_clamp(xp, x, cfg.epsilon, cfg.range_lo, cfg.range_hi);
  }
  return xp;
}

Tensor run_attack(const NeuralOdeModel& model,
                  const std::vector<SolverMember>& members, int n_steps,
                  const Tensor& x, const std::vector<int>& labels,
                  const AttackConfig& cfg, Rng& rng) {
  if (cfg.kind == "fgsm") return fgsm(model, members, n_steps, x, labels, cfg);
  if (cfg.kind == "fgsm_random")
    return fgsm_random(model, members, n_steps, x, labels, cfg, rng);
  if (cfg.kind == "pgd") return pgd(model, members, n_steps, x, labels, cfg, rng);
  throw std::invalid_argument("attack: unknown kind '" + cfg.kind + "'");
}

double robust_accuracy(const NeuralOdeModel& model,
                       const std::vector<SolverMember>& members, int n_steps,
                       const Tensor& x, const std::vector<int>& labels,
                       const AttackConfig& cfg, Rng& rng,
                       std::int64_t batch_size) {
  const auto n = x.rows();
  if (n == 0) throw std::invalid_argument("robust_accuracy: empty dataset");
  if (static_cast<std::int64_t>(labels.size()) != n)
    throw std::invalid_argument("robust_accuracy: " +
                                std::to_string(labels.size()) + " labels for " +
                                std::to_string(n) + " samples");
  const auto d = x.cols();
  std::int64_t hits = 0;
  for (std::int64_t start = 0; start < n; start += batch_size) {
    const std::int64_t m = std::min(batch_size, n - start);
    Tensor xb({m, d});
    std::copy(x.data.begin() + start * d, x.data.begin() + (start + m) * d,
              xb.data.begin());
    std::vector<int> yb(labels.begin() + start, labels.begin() + start + m);
    const Tensor xadv = run_attack(model, members, n_steps, xb, yb, cfg, rng);
    const auto pred = model.predict(xadv, members, n_steps);
    for (std::int64_t i = 0; i < m; ++i)
      if (pred[static_cast<std::size_t>(i)] == yb[static_cast<std::size_t>(i)])
        ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(n);
}

}  // namespace rknode
