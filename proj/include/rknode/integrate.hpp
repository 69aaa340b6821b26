// SPDX-FileCopyrightText: the rknode authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <ostream>
#include <vector>

#include "rknode/autodiff.hpp"
#include "rknode/tableau.hpp"

namespace rknode {

// Right-hand side of z' = f(t, z) in plain-numeric form.
using Rhs = std::function<std::vector<double>(double, const std::vector<double>&)>;

struct IntegrationSpec {
  double t0 = 0.0;
  double t1 = 1.0;
  int n_steps = 8;
  ButcherTableau tableau;

  double h() const { return (t1 - t0) / n_steps; }
  // Throws std::invalid_argument unless t1 > t0, n_steps >= 1 and the
  // tableau passes its own validation.
  void validate() const;
};

struct Trajectory {
  std::vector<double> times;                // n_steps + 1 entries
  std::vector<std::vector<double>> states;  // one d-vector per grid point

  const std::vector<double>& final_state() const { return states.back(); }
};

// One explicit RK step from (t, z) with step size h. Evaluates f exactly
// tab.stages times. Throws std::runtime_error if any stage or the result
// goes non-finite.
std::vector<double> rk_step(const Rhs& f, double t, const std::vector<double>& z,
                            double h, const ButcherTableau& tab);

// Fixed-grid integration over [t0, t1]. Throws like rk_step, with the
// failing step index in the message.
Trajectory integrate(const Rhs& f, const IntegrationSpec& spec,
                     const std::vector<double>& z0);

// Weighted average of member trajectories computed on a shared grid. All
// specs must agree on (t0, t1, n_steps); weights must be nonnegative and sum
// to 1 within 1e-12. Zero-weight members are still integrated (the cost
// model is the sum of member costs) but skipped in the accumulation so a
// one-hot weight vector reproduces the single member bit-for-bit.
Trajectory integrate_ensemble(const Rhs& f,
                              const std::vector<IntegrationSpec>& specs,
                              const std::vector<double>& weights,
                              const std::vector<double>& z0);

// Least-squares slope of log(final-state error) vs log(h) over the given
// step counts (>= 3, strictly increasing). Throws a degenerate-fit error if
// every error is below 1e-13 (pure round-off regime).
double empirical_order(const Rhs& f,
                       const std::function<std::vector<double>(double)>& exact,
                       const ParamPoint& point, double t0, double t1,
                       const std::vector<double>& z0,
                       const std::vector<int>& step_counts);

// Header `t,z0..z{d-1}`, one row per grid point, 17 significant digits.
void write_trajectory_csv(std::ostream& os, const Trajectory& traj);

// Differentiable right-hand side: maps (tape, t, z) to dz, where z is a
// (batch, d) variable on the tape.
using TapeRhs = std::function<Var(Tape&, double, Var)>;

// Unrolls the full fixed-grid solve onto the tape and returns the final
// state variable. Stage values stay on the tape, so backward() differentiates
// through every step. Throws std::runtime_error with the step index if the
// state goes non-finite.
Var ode_unroll(Tape& tape, const TapeRhs& f, const IntegrationSpec& spec,
               Var z0);

}  // namespace rknode
