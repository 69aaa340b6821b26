// SPDX-FileCopyrightText: the rknode authors
// SPDX-License-Identifier: Apache-2.0

#include "rknode/integrate.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace rknode {

namespace {

bool all_finite(const std::vector<double>& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace

void IntegrationSpec::validate() const {
  if (!(t1 > t0))
    throw std::invalid_argument("integration: t1 must exceed t0, got [" +
                                std::to_string(t0) + ", " + std::to_string(t1) +
                                "]");
  if (n_steps < 1)
    throw std::invalid_argument("integration: n_steps must be >= 1, got " +
                                std::to_string(n_steps));
  tableau.validate();
}

std::vector<double> rk_step(const Rhs& f, double t, const std::vector<double>& z,
                            double h, const ButcherTableau& tab) {
  if (!(h > 0.0))
    throw std::invalid_argument("rk_step: h must be positive, got " +
                                std::to_string(h));
  const auto s = static_cast<std::size_t>(tab.stages);
  const std::size_t d = z.size();
  std::vector<std::vector<double>> k(s);
  std::vector<double> y(d);
  for (std::size_t i = 0; i < s; ++i) {
    y = z;
    for (std::size_t j = 0; j < i; ++j) {
      const double hw = h * tab.w[i][j];
      if (hw == 0.0) continue;
      for (std::size_t a = 0; a < d; ++a) y[a] += hw * k[j][a];
    }
    k[i] = f(t + tab.c[i] * h, y);
    if (k[i].size() != d)
      throw std::invalid_argument("rk_step: rhs returned " +
                                  std::to_string(k[i].size()) +
                                  " components for a state of dimension " +
                                  std::to_string(d));
    if (!all_finite(k[i]))
      throw std::runtime_error("rk_step: non-finite rhs value at stage " +
                               std::to_string(i));
  }
  std::vector<double> out = z;
  for (std::size_t i = 0; i < s; ++i) {
    const double hb = h * tab.b[i];
    for (std::size_t a = 0; a < d; ++a) out[a] += hb * k[i][a];
  }
  if (!all_finite(out))
    throw std::runtime_error("rk_step: non-finite state after update");
  return out;
}

Trajectory integrate(const Rhs& f, const IntegrationSpec& spec,
                     const std::vector<double>& z0) {
  spec.validate();
  if (!all_finite(z0))
    throw std::invalid_argument("integrate: initial state is non-finite");
  const double h = spec.h();
  Trajectory traj;
  traj.times.reserve(static_cast<std::size_t>(spec.n_steps) + 1);
  traj.states.reserve(static_cast<std::size_t>(spec.n_steps) + 1);
  traj.times.push_back(spec.t0);
  traj.states.push_back(z0);
  std::vector<double> z = z0;
  for (int k = 0; k < spec.n_steps; ++k) {
    const double t = spec.t0 + h * k;
    try {
      z = rk_step(f, t, z, h, spec.tableau);
    } catch (const std::runtime_error& e) {
      throw std::runtime_error(std::string(e.what()) + " (integration step " +
                               std::to_string(k) + ")");
    }
    traj.times.push_back(k + 1 == spec.n_steps ? spec.t1 : spec.t0 + h * (k + 1));
    traj.states.push_back(z);
  }
  return traj;
}

Trajectory integrate_ensemble(const Rhs& f,
                              const std::vector<IntegrationSpec>& specs,
                              const std::vector<double>& weights,
                              const std::vector<double>& z0) {
  if (specs.empty())
    throw std::invalid_argument("integrate_ensemble: no member specs");
  if (specs.size() != weights.size())
    throw std::invalid_argument("integrate_ensemble: " +
                                std::to_string(specs.size()) + " specs but " +
                                std::to_string(weights.size()) + " weights");
  double wsum = 0.0;
  for (double w : weights) {
    if (w < 0.0)
      throw std::invalid_argument(
          "integrate_ensemble: weights must be nonnegative, got " +
          std::to_string(w));
    wsum += w;
  }
  if (std::abs(wsum - 1.0) > 1e-12)
    throw std::invalid_argument("integrate_ensemble: weights sum to " +
                                std::to_string(wsum) + ", expected 1");
  for (const auto& s : specs)
    if (s.t0 != specs[0].t0 || s.t1 != specs[0].t1 ||
        s.n_steps != specs[0].n_steps)
      throw std::invalid_argument(
          "integrate_ensemble: members must share (t0, t1, n_steps)");

  std::vector<Trajectory> members;
  members.reserve(specs.size());
  for (const auto& s : specs) members.push_back(integrate(f, s, z0));

  Trajectory out;
  out.times = members[0].times;
  const std::size_t npts = out.times.size();
  const std::size_t d = z0.size();
  out.states.assign(npts, std::vector<double>(d, 0.0));
  for (std::size_t m = 0; m < members.size(); ++m) {
    if (weights[m] == 0.0) continue;
    for (std::size_t k = 0; k < npts; ++k)
      for (std::size_t a = 0; a < d; ++a)
        out.states[k][a] += weights[m] * members[m].states[k][a];
  }
  return out;
}

double empirical_order(const Rhs& f,
                       const std::function<std::vector<double>(double)>& exact,
                       const ParamPoint& point, double t0, double t1,
                       const std::vector<double>& z0,
                       const std::vector<int>& step_counts) {
  if (step_counts.size() < 3)
    throw std::invalid_argument(
        "empirical_order: need at least 3 step counts, got " +
        std::to_string(step_counts.size()));
  for (std::size_t i = 1; i < step_counts.size(); ++i)
    if (step_counts[i] <= step_counts[i - 1])
      throw std::invalid_argument(
          "empirical_order: step counts must be strictly increasing");

  const ButcherTableau tab = make_tableau(point);
  const std::vector<double> ref = exact(t1);

  std::vector<double> log_h, log_e;
  bool any_above_floor = false;
  for (int n : step_counts) {
    IntegrationSpec spec{t0, t1, n, tab};
    const auto traj = integrate(f, spec, z0);
    double err = 0.0;
    for (std::size_t a = 0; a < ref.size(); ++a) {
      const double diff = traj.final_state()[a] - ref[a];
      err += diff * diff;
    }
    err = std::sqrt(err);
    if (err > 1e-13) any_above_floor = true;
    if (err > 0.0) {
      log_h.push_back(std::log((t1 - t0) / n));
      log_e.push_back(std::log(err));
    }
  }
  if (!any_above_floor)
    throw std::runtime_error(
        "empirical_order: all errors below 1e-13; fit is dominated by "
        "round-off (degenerate)");
  if (log_h.size() < 2)
    throw std::runtime_error(
        "empirical_order: fewer than 2 nonzero errors; fit degenerate");

  // ordinary least squares slope
  const auto n = static_cast<double>(log_h.size());
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < log_h.size(); ++i) {
    sx += log_h[i];
    sy += log_e[i];
    sxx += log_h[i] * log_h[i];
    sxy += log_h[i] * log_e[i];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
  const std::size_t d = traj.states.empty() ? 0 : traj.states[0].size();
  os << 't';
  for (std::size_t a = 0; a < d; ++a) os << ",z" << a;
  os << '\n';
  char buf[40];
  for (std::size_t k = 0; k < traj.times.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%.17g", traj.times[k]);
    os << buf;
    for (std::size_t a = 0; a < d; ++a) {
      std::snprintf(buf, sizeof buf, "%.17g", traj.states[k][a]);
      os << ',' << buf;
    }
    os << '\n';
  }
}

Var ode_unroll(Tape& tape, const TapeRhs& f, const IntegrationSpec& spec,
               Var z0) {
  spec.validate();
  const ButcherTableau& tab = spec.tableau;
  const auto s = static_cast<std::size_t>(tab.stages);
  const double h = spec.h();

  Var z = z0;
  for (int step = 0; step < spec.n_steps; ++step) {
    const double t = spec.t0 + h * step;
    std::vector<Var> k(s);
    for (std::size_t i = 0; i < s; ++i) {
      Var y = z;
      for (std::size_t j = 0; j < i; ++j) {
        const double hw = h * tab.w[i][j];
        if (hw == 0.0) continue;
        y = tape.add(y, tape.scale(k[j], hw));
      }
      k[i] = f(tape, t + tab.c[i] * h, y);
      for (double x : tape.value(k[i]).data)
        if (!std::isfinite(x))
          throw std::runtime_error(
              "ode_unroll: non-finite rhs value at stage " + std::to_string(i) +
              " (integration step " + std::to_string(step) + ")");
    }
    for (std::size_t i = 0; i < s; ++i) {
      const double hb = h * tab.b[i];
      if (hb == 0.0) continue;
      z = tape.add(z, tape.scale(k[i], hb));
    }
  }
  return z;
}

}  // namespace rknode
