// SPDX-FileCopyrightText: the rknode authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "rknode/attack.hpp"
#include "rknode/data.hpp"
#include "rknode/model.hpp"
#include "rknode/strategy.hpp"

namespace rknode {

// Cyclic learning rate, triangular2 mode: a triangular wave from base_lr up
// to max_lr over step_size_up iterations and back over step_size_down, with
// the amplitude halved after every full cycle.
struct CyclicLrSchedule {
  double base_lr = 1e-5;
  double max_lr = 1e-3;
  int step_size_up = 2000;
  int step_size_down = 2000;

  void validate() const;
};

double lr_at(const CyclicLrSchedule& sched, std::int64_t iteration);

struct OptimizerConfig {
  std::string kind = "sgd_momentum";  // sgd_momentum | rmsprop
  double momentum = 0.9;              // sgd_momentum
  double decay = 0.99;                // rmsprop smoothing rho
  double eps = 1e-8;                  // rmsprop denominator floor

  void validate() const;
};

// Holds one auxiliary buffer per parameter (velocity for momentum, squared
// average for rmsprop).
class Optimizer {
 public:
  Optimizer(OptimizerConfig cfg, std::size_t n_params);

  // sgd_momentum: v <- m v + g;          theta <- theta - lr v
  // rmsprop:      s <- rho s + (1-rho)g^2; theta <- theta - lr g/(sqrt(s)+eps)
  // Throws std::runtime_error if any updated parameter goes non-finite.
  void step(std::vector<double>& theta, const std::vector<double>& grad,
            double lr);

  const std::vector<double>& buffer() const { return buf_; }

 private:
  OptimizerConfig cfg_;
  std::vector<double> buf_;
};

struct TrainConfig {
  int epochs = 50;
  int batch_size = 32;
  std::uint64_t seed = 0;
  int n_steps = 8;
  SolverStrategy strategy;
  bool adversarial = false;  // perturb each training batch with `attack`
  AttackConfig attack;       // also used for the validation robust metric
  OptimizerConfig optimizer;
  CyclicLrSchedule schedule;
  bool resample_per_batch = false;  // experimental; default draws per epoch
  double grad_clip = 0.0;           // max gradient L2 norm; 0 disables

  void validate() const;
};

struct EpochLog {
  int epoch = 0;
  std::vector<double> params;  // solver parameters used this epoch
  double lr = 0.0;             // learning rate of the epoch's last step
  double train_loss = 0.0;     // mean over batches
  double val_acc = 0.0;
  double val_robust_acc = 0.0;
  std::int64_t rhs_evals = 0;  // rhs evaluations spent on loss_and_grad
};

struct TrainResult {
  NeuralOdeModel model;  // parameters of the best-validation epoch
  std::vector<EpochLog> log;
  std::vector<EpochDraw> draws;  // empty for ensemble strategies
  int best_epoch = -1;
  double best_val_acc = 0.0;
};

// Full training loop: per epoch, draw a solver via the strategy, shuffle,
// optionally perturb each batch with the training attack, run
// loss_and_grad + optimizer steps under the cyclic schedule, then measure
// validation clean and robust accuracy. The returned model carries the
// parameters of the epoch with the best validation clean accuracy (earliest
// wins ties). Fully deterministic per (config, seed).
TrainResult train(NeuralOdeModel model, const Dataset& train_set,
                  const Dataset& val_set, const TrainConfig& cfg);

// CSV `epoch,param0,param1,lr,train_loss,val_acc,val_robust_acc`.
void write_train_log_csv(std::ostream& os, const std::vector<EpochLog>& log);

}  // namespace rknode
