// SPDX-FileCopyrightText: the rknode authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rknode/rng.hpp"

namespace rknode {

// Coefficients of one explicit Runge-Kutta method, laid out as in the usual
// tableau picture: abscissae c on the left, strictly lower-triangular weight
// matrix w in the middle, quadrature weights b along the bottom.
struct ButcherTableau {
  int stages = 0;
  std::vector<double> c;               // size: stages
  std::vector<std::vector<double>> w;  // stages x stages, w[i][j]=0 for j>=i
  std::vector<double> b;               // size: stages
  std::string name;                    // e.g. "rk2_u(0.5)"

  // Throws std::invalid_argument if any structural invariant is broken:
  // shape mismatch, nonzero upper triangle, c[0] != 0, row sums off by more
  // than 1e-12, or sum(b) off 1 by more than 1e-12.
  void validate() const;
};

enum class Family { euler, rk2_u, rk4_u1, rk4_u2, rk4_u3, rk4_uv };

struct FamilyInfo {
  Family id;
  const char* name;
  int arity;          // free scalar parameters: 0, 1, or 2
  int nominal_order;  // order guaranteed for every feasible parameter choice
  int stages;
};

const FamilyInfo& family_info(Family f);
Family family_from_string(const std::string& name);

// A family plus concrete parameter values. Construct via make_point so
// infeasible parameters are rejected up front.
struct ParamPoint {
  Family family = Family::euler;
  std::vector<double> params;
};

// Feasibility, beyond the exact exclusions, keeps a margin of 1e-3 around
// every singular parameter value (denominator factors u, v, 1-u, 1-v, 1-2u,
// u-v and 3-4v+u(-4+6v) for rk4_uv); coefficients scale like the inverse of
// these factors and destabilize training when they blow up.
bool is_feasible(Family f, const std::vector<double>& params,
                 std::string* why = nullptr);

// Throws std::invalid_argument naming the violated constraint.
ParamPoint make_point(Family f, const std::vector<double>& params);

// Uniform draw from a well-conditioned box inside the feasible region
// (margin 0.05 from every singular value, parameters within [-1,1]); used by
// the stochastic test suites and as a strategy fallback. Draws for which
// tableau construction would still blow up are rejected and redrawn.
ParamPoint sample_feasible(Family f, Rng& rng);

// Substitutes the parameters into the family's closed-form coefficient
// expressions. Throws std::invalid_argument for infeasible points and
// std::runtime_error if any coefficient magnitude exceeds 1e8.
ButcherTableau make_tableau(const ParamPoint& point);

// Classic methods by name: euler, midpoint, heun, ralston, rk4_classic,
// rk4_38. Throws std::invalid_argument for unknown names.
ParamPoint named_method(const std::string& name);

struct OrderCondition {
  std::string id;   // e.g. "sum b_i c_i^2 = 1/3"
  int order;        // order at which this condition first appears
  double residual;  // lhs - rhs
};

// Evaluates all rooted-tree order conditions up to order p (1 <= p <= 4):
// one condition at order 1, one more at order 2, two at order 3, four at
// order 4. The tableau passes at order p iff every residual is <= 1e-10 in
// magnitude.
std::vector<OrderCondition> check_order_conditions(const ButcherTableau& t,
                                                   int p);

bool passes_order(const ButcherTableau& t, int p, double tol = 1e-10);

// Largest p in 1..4 with all residuals <= 1e-10; 0 if even consistency
// fails. Capped at 4: a return of 4 means "at least 4".
int max_verified_order(const ButcherTableau& t);

// Plain-text rendering in the familiar tableau layout (c | w rows, then a
// rule, then b). Display only; use the JSON form for exact round-trips.
std::string format_tableau(const ButcherTableau& t);

// Structured serialization {family, params, c, w, b}; doubles survive the
// round-trip bit-exactly.
std::string tableau_to_json(const ButcherTableau& t, const ParamPoint& point);
void tableau_from_json(const std::string& text, ButcherTableau& t,
                       ParamPoint& point);

}  // namespace rknode
