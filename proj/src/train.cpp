// SPDX-FileCopyrightText: the rknode authors
// SPDX-License-Identifier: Apache-2.0

#include "rknode/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace rknode {

void CyclicLrSchedule::validate() const {
  if (!(base_lr > 0.0) || !(max_lr >= base_lr))
    throw std::invalid_argument(
        "lr schedule: need 0 < base_lr <= max_lr, got base = " +
        std::to_string(base_lr) + ", max = " + std::to_string(max_lr));
  if (step_size_up < 1 || step_size_down < 1)
    throw std::invalid_argument("lr schedule: step sizes must be >= 1");
}

double lr_at(const CyclicLrSchedule& sched, std::int64_t iteration) {
  if (iteration < 0)
    throw std::invalid_argument("lr_at: iteration must be >= 0");
  const std::int64_t period = sched.step_size_up + sched.step_size_down;
  const std::int64_t cycle = iteration / period;
  const std::int64_t pos = iteration % period;
  const double frac =
      pos < sched.step_size_up
          ? static_cast<double>(pos) / sched.step_size_up
          : static_cast<double>(period - pos) / sched.step_size_down;
  // triangular2: amplitude halves every completed cycle
  const double amplitude = (sched.max_lr - sched.base_lr) *
                           std::pow(0.5, static_cast<double>(cycle));
  return sched.base_lr + amplitude * frac;
}

void OptimizerConfig::validate() const {
  if (kind != "sgd_momentum" && kind != "rmsprop")
    throw std::invalid_argument("optimizer: unknown kind '" + kind +
                                "' (expected sgd_momentum or rmsprop)");
  if (kind == "sgd_momentum" && (momentum < 0.0 || momentum >= 1.0))
    throw std::invalid_argument("optimizer: momentum must be in [0, 1), got " +
                                std::to_string(momentum));
  if (kind == "rmsprop" &&
      (decay <= 0.0 || decay >= 1.0 || !(eps > 0.0)))
    throw std::invalid_argument(
        "optimizer: rmsprop needs decay in (0, 1) and eps > 0");
}

Optimizer::Optimizer(OptimizerConfig cfg, std::size_t n_params)
    : cfg_(std::move(cfg)), buf_(n_params, 0.0) {
  cfg_.validate();
}

void Optimizer::step(std::vector<double>& theta,
                     const std::vector<double>& grad, double lr) {
  if (theta.size() != buf_.size() || grad.size() != buf_.size())
    throw std::invalid_argument(
        "optimizer: parameter/gradient size mismatch (" +
        std::to_string(theta.size()) + " vs " + std::to_string(grad.size()) +
        " vs state " + std::to_string(buf_.size()) + ")");
  if (cfg_.kind == "sgd_momentum") {
    for (std::size_t i = 0; i < theta.size(); ++i) {
      buf_[i] = cfg_.momentum * buf_[i] + grad[i];
      theta[i] -= lr * buf_[i];
    }
  } else {  // rmsprop
    for (std::size_t i = 0; i < theta.size(); ++i) {
      buf_[i] = cfg_.decay * buf_[i] + (1.0 - cfg_.decay) * grad[i] * grad[i];
      theta[i] -= lr * grad[i] / (std::sqrt(buf_[i]) + cfg_.eps);
    }
  }
  for (std::size_t i = 0; i < theta.size(); ++i)
    if (!std::isfinite(theta[i]))
      throw std::runtime_error("optimizer: non-finite parameter " +
                               std::to_string(i) + " after update");
}

void TrainConfig::validate() const {
  if (epochs < 1)
    throw std::invalid_argument("train: epochs must be >= 1, got " +
                                std::to_string(epochs));
  if (batch_size < 1)
    throw std::invalid_argument("train: batch_size must be >= 1, got " +
                                std::to_string(batch_size));
  if (n_steps < 1)
    throw std::invalid_argument("train: n_steps must be >= 1");
  if (grad_clip < 0.0)
    throw std::invalid_argument("train: grad_clip must be >= 0");
  strategy.validate();
  attack.validate();
  optimizer.validate();
  schedule.validate();
}

namespace {

void clip_grad(std::vector<double>& g, double max_norm) {
  if (max_norm <= 0.0) return;
  double sq = 0.0;
  for (double v : g) sq += v * v;
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double s = max_norm / norm;
    for (double& v : g) v *= s;
  }
}

Tensor gather_rows(const Tensor& x, const std::vector<std::size_t>& idx,
                   std::size_t begin, std::size_t end) {
  const auto d = x.cols();
  Tensor out({static_cast<std::int64_t>(end - begin), d});
  for (std::size_t k = begin; k < end; ++k)
    for (std::int64_t j = 0; j < d; ++j)
      out.at(static_cast<std::int64_t>(k - begin), j) =
          x.at(static_cast<std::int64_t>(idx[k]), j);
  return out;
}

}  // namespace

TrainResult train(NeuralOdeModel model, const Dataset& train_set,
                  const Dataset& val_set, const TrainConfig& cfg) {
  cfg.validate();
  if (train_set.size() == 0)
    throw std::invalid_argument("train: training set is empty");

  // independent streams so e.g. turning the training attack on or off does
  // not shift the solver draws or the shuffles
  Rng master(cfg.seed);
  Rng strategy_rng = master.fork();
  Rng shuffle_rng = master.fork();
  Rng adv_rng = master.fork();
  Rng eval_rng = master.fork();

  const bool drawing = cfg.strategy.kind != SolverStrategy::Kind::ensemble;
  const std::vector<SolverMember> eval_members = {
      SolverMember{make_tableau(eval_point(cfg.strategy)), 1.0}};

  Optimizer opt(cfg.optimizer, model.theta().size());
  TrainResult result;
  result.model = model;

  const auto n = static_cast<std::size_t>(train_set.size());
  std::int64_t iteration = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    EpochDraw epoch_draw;
    std::vector<SolverMember> members;
    if (drawing) {
      epoch_draw = draw(cfg.strategy, epoch, strategy_rng);
      members = strategy_members(cfg.strategy, epoch_draw.drawn);
      result.draws.push_back(epoch_draw);
    } else {
      members = strategy_members(cfg.strategy, ParamPoint{});
    }

    const auto order = shuffled_indices(n, shuffle_rng);
    double loss_sum = 0.0;
    std::int64_t n_batches = 0;
    std::int64_t rhs_evals = 0;
    double last_lr = lr_at(cfg.schedule, iteration);

    for (std::size_t start = 0; start < n;
         start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t stop =
          std::min(n, start + static_cast<std::size_t>(cfg.batch_size));
      if (cfg.resample_per_batch && drawing &&
          cfg.strategy.kind != SolverStrategy::Kind::fixed && start > 0) {
        epoch_draw = draw(cfg.strategy, epoch, strategy_rng);
        members = strategy_members(cfg.strategy, epoch_draw.drawn);
      }
      Tensor xb = gather_rows(train_set.features, order, start, stop);
      std::vector<int> yb(stop - start);
      for (std::size_t k = start; k < stop; ++k)
        yb[k - start] = train_set.labels[order[k]];

      if (cfg.adversarial && cfg.attack.epsilon > 0.0)
        xb = run_attack(model, members, cfg.n_steps, xb, yb, cfg.attack,
                        adv_rng);

      auto lg = model.loss_and_grad(xb, yb, members, cfg.n_steps);
      if (!std::isfinite(lg.loss))
        throw std::runtime_error(
            "train: non-finite loss at epoch " + std::to_string(epoch) +
            ", batch " + std::to_string(n_batches));
      clip_grad(lg.grad, cfg.grad_clip);
      last_lr = lr_at(cfg.schedule, iteration);
      opt.step(model.theta(), lg.grad, last_lr);
      loss_sum += lg.loss;
      rhs_evals += lg.rhs_evals;
      ++n_batches;
      ++iteration;
    }

    // validation with the strategy's deterministic evaluation solver
    EpochLog entry;
    entry.epoch = epoch;
    entry.params = drawing ? epoch_draw.drawn.params
                           : eval_point(cfg.strategy).params;
    entry.lr = last_lr;
    entry.train_loss = loss_sum / static_cast<double>(n_batches);
    entry.rhs_evals = rhs_evals;
    if (val_set.size() > 0) {
      const auto pred =
          model.predict(val_set.features, eval_members, cfg.n_steps);
      entry.val_acc = accuracy(pred, val_set.labels);
      Rng er = eval_rng.fork();
      entry.val_robust_acc =
          robust_accuracy(model, eval_members, cfg.n_steps, val_set.features,
                          val_set.labels, cfg.attack, er);
    }
    result.log.push_back(entry);

    if (val_set.size() == 0 || entry.val_acc > result.best_val_acc ||
        result.best_epoch < 0) {
      result.best_epoch = epoch;
      result.best_val_acc = entry.val_acc;
      result.model.theta() = model.theta();
    }
  }
  return result;
}

void write_train_log_csv(std::ostream& os, const std::vector<EpochLog>& log) {
  os << "epoch,param0,param1,lr,train_loss,val_acc,val_robust_acc\n";
  char buf[40];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    os << buf;
  };
  for (const auto& e : log) {
    os << e.epoch;
    for (std::size_t j = 0; j < 2; ++j) {
      os << ',';
      if (j < e.params.size()) put(e.params[j]);
    }
    os << ',';
    put(e.lr);
    os << ',';
    put(e.train_loss);
    os << ',';
    put(e.val_acc);
    os << ',';
    put(e.val_robust_acc);
    os << '\n';
  }
}

}  // namespace rknode
