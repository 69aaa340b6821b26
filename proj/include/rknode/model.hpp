// SPDX-FileCopyrightText: the rknode authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rknode/autodiff.hpp"
#include "rknode/integrate.hpp"
#include "rknode/tableau.hpp"
#include "rknode/tensor.hpp"

namespace rknode {

struct ModelConfig {
  int input_dim = 2;
  int state_dim = 32;   // width of the ODE state
  int hidden_dim = 64;  // hidden width of the rhs network
  int num_classes = 2;
  int n_ode_blocks = 1;
  double t0 = 0.0;
  double t1 = 1.0;
  std::string activation = "gelu";  // gelu | relu | tanh | identity
  // Zero the final rhs layer so the ODE block starts as the identity map.
  bool zero_init_rhs_out = false;

  void validate() const;
};

// One named rectangle of the flat parameter vector.
struct ParamSlice {
  std::string name;
  std::int64_t offset = 0;
  std::vector<std::int64_t> shape;
  std::int64_t numel() const { return Tensor::numel_of(shape); }
};

// A solver the forward pass runs with. A single member of weight 1 is the
// ordinary case; several members describe output ensembling, where the block
// output is the weighted average of the members' final states.
struct SolverMember {
  ButcherTableau tableau;
  double weight = 1.0;
};

// Dense head -> (one or more) ODE blocks -> linear classifier. All weights
// live in one flat vector so optimizers and checkpoints can treat the model
// as a single parameter array.
class NeuralOdeModel {
 public:
  NeuralOdeModel() = default;
  NeuralOdeModel(ModelConfig cfg, std::uint64_t init_seed);

  const ModelConfig& config() const { return cfg_; }
  const std::vector<ParamSlice>& slices() const { return slices_; }
  std::vector<double>& theta() { return theta_; }
  const std::vector<double>& theta() const { return theta_; }

  struct Forward {
    Var x;                    // input node (attackable)
    std::vector<Var> params;  // one Var per ParamSlice, same order
    Var logits;
    std::int64_t rhs_evals = 0;
  };

  // Records the whole forward pass on the tape. Weights must sum to 1
  // within 1e-12 across members.
  Forward build_forward(Tape& tape, const Tensor& x,
                        const std::vector<SolverMember>& members,
                        int n_steps) const;
  Forward build_forward(Tape& tape, const Tensor& x, const ButcherTableau& tab,
                        int n_steps) const;

  struct LossGrad {
    double loss = 0.0;
    std::vector<double> grad;  // d(loss)/d(theta), flat
    std::int64_t rhs_evals = 0;
  };

  // Mean softmax cross-entropy plus its gradient over the flat parameters.
  LossGrad loss_and_grad(const Tensor& x, const std::vector<int>& labels,
                         const std::vector<SolverMember>& members,
                         int n_steps) const;

  Tensor logits(const Tensor& x, const std::vector<SolverMember>& members,
                int n_steps) const;
  // Argmax with ties broken toward the lowest class index.
  std::vector<int> predict(const Tensor& x,
                           const std::vector<SolverMember>& members,
                           int n_steps) const;

 private:
  void layout();

  ModelConfig cfg_;
  std::vector<ParamSlice> slices_;
  std::vector<double> theta_;
};

double accuracy(const std::vector<int>& predictions,
                const std::vector<int>& labels);

// Checkpoint document: {schema, config, theta, seed, strategy}. The strategy
// field is stored verbatim as structured data (pass "{}" when absent).
// Doubles round-trip bit-exactly.
void save_checkpoint(const std::string& path, const NeuralOdeModel& model,
                     std::uint64_t seed, const std::string& strategy_json);
NeuralOdeModel load_checkpoint(const std::string& path,
                               std::uint64_t* seed = nullptr,
                               std::string* strategy_json = nullptr);

}  // namespace rknode
