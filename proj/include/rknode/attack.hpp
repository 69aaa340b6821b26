// SPDX-FileCopyrightText: the rknode authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "rknode/data.hpp"
#include "rknode/model.hpp"
#include "rknode/rng.hpp"

namespace rknode {

struct AttackConfig {
  std::string kind = "fgsm";  // fgsm | fgsm_random | pgd
  double epsilon = 8.0 / 255.0;
  double alpha = 2.0 / 255.0;  // step size for pgd and fgsm_random
  int iterations = 7;          // pgd only
  double range_lo = 0.0;
  double range_hi = 1.0;
  bool random_start = true;  // pgd only

  // epsilon = 0 is allowed for every kind (the attack degenerates to the
  // identity, which is how clean accuracy is measured); for pgd with
  // epsilon > 0 the step must satisfy 0 < alpha <= epsilon.
  void validate() const;
};

// d(loss)/d(input) through the same unrolled solve the evaluation forward
// pass uses. Model parameters receive no update. Throws std::runtime_error
// if the gradient is non-finite.
Tensor input_gradient(const NeuralOdeModel& model,
                      const std::vector<SolverMember>& members, int n_steps,
                      const Tensor& x, const std::vector<int>& labels);

// x' = clamp(x + eps * sign(grad), lo, hi). Exactly x when eps = 0.
Tensor fgsm(const NeuralOdeModel& model, const std::vector<SolverMember>& members,
            int n_steps, const Tensor& x, const std::vector<int>& labels,
            const AttackConfig& cfg);

// Random start inside the eps-ball, one alpha-sized signed-gradient step,
// projection back onto the ball, range clamp.
Tensor fgsm_random(const NeuralOdeModel& model,
                   const std::vector<SolverMember>& members, int n_steps,
                   const Tensor& x, const std::vector<int>& labels,
                   const AttackConfig& cfg, Rng& rng);

// cfg.iterations rounds of (signed step, ball projection, range clamp),
// optionally from a random start.
Tensor pgd(const NeuralOdeModel& model, const std::vector<SolverMember>& members,
           int n_steps, const Tensor& x, const std::vector<int>& labels,
           const AttackConfig& cfg, Rng& rng);

// Dispatch on cfg.kind.
Tensor run_attack(const NeuralOdeModel& model,
                  const std::vector<SolverMember>& members, int n_steps,
                  const Tensor& x, const std::vector<int>& labels,
                  const AttackConfig& cfg, Rng& rng);

// Fraction of samples still classified correctly after the attack. Batches
// are processed sequentially, so a fixed rng seed gives one deterministic
// answer. epsilon = 0 yields clean accuracy exactly.
double robust_accuracy(const NeuralOdeModel& model,
                       const std::vector<SolverMember>& members, int n_steps,
                       const Tensor& x, const std::vector<int>& labels,
                       const AttackConfig& cfg, Rng& rng,
                       std::int64_t batch_size = 256);

}  // namespace rknode
