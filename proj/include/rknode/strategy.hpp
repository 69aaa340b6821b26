// SPDX-FileCopyrightText: the rknode authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "rknode/model.hpp"
#include "rknode/rng.hpp"
#include "rknode/tableau.hpp"

namespace rknode {

// How the training loop picks the solver for each epoch:
//   fixed      always the base point
//   switching  one of `points`, drawn with probability `weights`
//   smoothing  base + scale * (normal|cauchy) noise per parameter, redrawn
//              until feasible
//   ensemble   no drawing; all `points` run jointly and their block outputs
//              are averaged with `weights`
struct SolverStrategy {
  enum class Kind { fixed, switching, smoothing, ensemble };

  Kind kind = Kind::fixed;
  ParamPoint base;                      // fixed, smoothing
  std::vector<ParamPoint> points;       // switching, ensemble
  std::vector<double> weights;          // switching, ensemble
  std::string distribution = "normal";  // smoothing: normal | cauchy
  std::vector<double> scale;            // smoothing: per parameter, > 0

  void validate() const;
};

struct EpochDraw {
  int epoch = 0;
  ParamPoint drawn;
  std::vector<double> raw;  // first sample, before feasibility handling
  int resamples = 0;        // rejected samples before the accepted one
};

// One draw per epoch. Infeasible smoothing samples (including ones whose
// tableau construction would blow up) are rejected and redrawn, at most 100
// times; exceeding that throws, signalling a scale far too large for the
// feasible region. Throws std::invalid_argument for ensemble strategies,
// which have no per-epoch draw.
EpochDraw draw(const SolverStrategy& strategy, int epoch, Rng& rng);

SolverStrategy switching_set_uniform(const std::vector<ParamPoint>& points);

// Solver members the forward pass should run with under this strategy once
// a draw has been made (the draw is ignored for ensembles).
std::vector<SolverMember> strategy_members(const SolverStrategy& strategy,
                                           const ParamPoint& drawn);

// Deterministic evaluation-time solver: the base point for fixed/smoothing,
// the first listed point for switching/ensemble.
ParamPoint eval_point(const SolverStrategy& strategy);

std::string strategy_to_json(const SolverStrategy& strategy);
SolverStrategy strategy_from_json(const std::string& text);

// CSV `epoch,family,param0,param1,resamples`; absent parameters stay empty.
void write_draws_csv(std::ostream& os, const std::vector<EpochDraw>& draws);

}  // namespace rknode
