// SPDX-FileCopyrightText: the rknode authors
// SPDX-License-Identifier: Apache-2.0

#include "rknode/tableau.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace rknode {

namespace {

// Margin kept around singular parameter values when validating, and the cap
// on any single coefficient magnitude.
constexpr double kFeasMargin = 1e-3;
constexpr double kBlowupLimit = 1e8;

// sample_feasible stays further from the singular set than validation
// requires: near the 1e-3 boundary coefficients reach ~1e5 and round-off in
// the order-condition residuals creeps above 1e-10.
constexpr double kSampleMargin = 0.05;

std::string fmt_g(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", x);
  return buf;
}

// Denominator of the fourth-row / b coefficients of the uv family.
double uv_denom(double u, double v) { return 3.0 - 4.0 * v + u * (-4.0 + 6.0 * v); }

}  // namespace

void ButcherTableau::validate() const {
  const auto s = static_cast<std::size_t>(stages);
  if (stages <= 0 || c.size() != s || b.size() != s || w.size() != s)
    throw std::invalid_argument("tableau: inconsistent sizes for " +
                                std::to_string(stages) + " stages");
  for (std::size_t i = 0; i < s; ++i)
    if (w[i].size() != s)
      throw std::invalid_argument("tableau: w row " + std::to_string(i) +
                                  " has " + std::to_string(w[i].size()) +
                                  " entries, expected " + std::to_string(s));
  for (std::size_t i = 0; i < s; ++i)
    for (std::size_t j = i; j < s; ++j)
      if (w[i][j] != 0.0)
        throw std::invalid_argument(
            "tableau: w[" + std::to_string(i) + "][" + std::to_string(j) +
            "] nonzero in the upper triangle (method must be explicit)");
  if (c[0] != 0.0)
    throw std::invalid_argument("tableau: c[0] must be 0, got " + fmt_g(c[0]));

  // Row sums and consistency are checked relative to the coefficient scale:
  // at extreme-but-feasible parameters the entries reach ~1e5 and an absolute
  // 1e-12 would reject pure round-off.
  for (std::size_t i = 1; i < s; ++i) {
    double sum = 0.0, scale = 0.0;
    for (std::size_t j = 0; j < i; ++j) {
      sum += w[i][j];
      scale += std::abs(w[i][j]);
    }
    if (std::abs(sum - c[i]) > 1e-12 * std::max(1.0, scale))
      throw std::invalid_argument("tableau: row-sum condition violated at row " +
                                  std::to_string(i) + ": sum w = " + fmt_g(sum) +
                                  " but c = " + fmt_g(c[i]));
  }
  double bsum = 0.0, bscale = 0.0;
  for (double bi : b) {
    bsum += bi;
    bscale += std::abs(bi);
  }
  if (std::abs(bsum - 1.0) > 1e-12 * std::max(1.0, bscale))
    throw std::invalid_argument("tableau: consistency violated, sum b = " +
                                fmt_g(bsum));
}

const FamilyInfo& family_info(Family f) {
  static const FamilyInfo table[] = {
      {Family::euler, "euler", 0, 1, 1},   {Family::rk2_u, "rk2_u", 1, 2, 2},
      {Family::rk4_u1, "rk4_u1", 1, 4, 4}, {Family::rk4_u2, "rk4_u2", 1, 4, 4},
      {Family::rk4_u3, "rk4_u3", 1, 4, 4}, {Family::rk4_uv, "rk4_uv", 2, 4, 4},
  };
  return table[static_cast<int>(f)];
}

Family family_from_string(const std::string& name) {
  for (Family f : {Family::euler, Family::rk2_u, Family::rk4_u1,
                   Family::rk4_u2, Family::rk4_u3, Family::rk4_uv})
    if (name == family_info(f).name) return f;
  throw std::invalid_argument(
      "unknown solver family '" + name +
      "' (expected euler, rk2_u, rk4_u1, rk4_u2, rk4_u3 or rk4_uv)");
}

bool is_feasible(Family f, const std::vector<double>& params,
                 std::string* why) {
  const FamilyInfo& info = family_info(f);
  auto fail = [&](const std::string& msg) {
    if (why) *why = std::string(info.name) + ": " + msg;
    return false;
  };
  if (static_cast<int>(params.size()) != info.arity)
    return fail("expects " + std::to_string(info.arity) + " parameter(s), got " +
                std::to_string(params.size()));
  for (double p : params)
    if (!std::isfinite(p)) return fail("parameters must be finite");

  switch (f) {
    case Family::euler:
      return true;
    case Family::rk2_u: {
      const double u = params[0];
      if (u <= 0.0 || u > 1.0)
        return fail("u must lie in (0, 1], got " + fmt_g(u));
      return true;
    }
    case Family::rk4_u1:
    case Family::rk4_u2:
    case Family::rk4_u3: {
      const double u = params[0];
      if (std::abs(u) < kFeasMargin)
        return fail("|u| must be >= " + fmt_g(kFeasMargin) +
                    " (coefficients scale as 1/u), got " + fmt_g(u));
      return true;
    }
    case Family::rk4_uv: {
      const double u = params[0], v = params[1];
      struct {
        const char* what;
        double value;
      } factors[] = {
          {"u", u},           {"v", v},           {"1-u", 1.0 - u},
          {"1-v", 1.0 - v},   {"1-2u", 1.0 - 2.0 * u},
          {"u-v", u - v},     {"3-4v+u(-4+6v)", uv_denom(u, v)},
      };
      for (const auto& fac : factors)
        if (std::abs(fac.value) < kFeasMargin)
          return fail("denominator factor " + std::string(fac.what) +
                      " too close to zero at (u, v) = (" + fmt_g(u) + ", " +
                      fmt_g(v) + ")");
      return true;
    }
  }
  return fail("unhandled family");
}

ParamPoint make_point(Family f, const std::vector<double>& params) {
  std::string why;
  if (!is_feasible(f, params, &why)) throw std::invalid_argument(why);
  return ParamPoint{f, params};
}

ParamPoint sample_feasible(Family f, Rng& rng) {
  for (int attempt = 0; attempt < 1000; ++attempt) {
    std::vector<double> params;
    switch (f) {
      case Family::euler:
        break;
      case Family::rk2_u:
        params = {rng.uniform(kSampleMargin, 1.0)};
        break;
      case Family::rk4_u1:
      case Family::rk4_u2:
      case Family::rk4_u3: {
        const double u = rng.uniform(-1.0, 1.0);
        if (std::abs(u) < kSampleMargin) continue;
        params = {u};
        break;
      }
      case Family::rk4_uv: {
        const double u = rng.uniform(kSampleMargin, 1.0 - kSampleMargin);
        const double v = rng.uniform(kSampleMargin, 1.0 - kSampleMargin);
        if (std::abs(1.0 - 2.0 * u) < kSampleMargin ||
            std::abs(u - v) < kSampleMargin ||
            std::abs(uv_denom(u, v)) < kSampleMargin)
          continue;
        params = {u, v};
        break;
      }
    }
    ParamPoint point{f, params};
    try {
      make_tableau(point);  // double-checks the blowup guard
      return point;
    } catch (const std::exception&) {
      continue;
    }
  }
  throw std::runtime_error(std::string("sample_feasible: no acceptable draw for ") +
                           family_info(f).name + " after 1000 attempts");
}

ButcherTableau make_tableau(const ParamPoint& point) {
  std::string why;
  if (!is_feasible(point.family, point.params, &why))
    throw std::invalid_argument(why);

  ButcherTableau t;
  const FamilyInfo& info = family_info(point.family);
  t.stages = info.stages;
  t.c.assign(t.stages, 0.0);
  t.b.assign(t.stages, 0.0);
  t.w.assign(t.stages, std::vector<double>(t.stages, 0.0));

  switch (point.family) {
    case Family::euler: {
      t.b = {1.0};
      t.name = "euler";
      break;
    }
    case Family::rk2_u: {
      const double u = point.params[0];
      t.c = {0.0, u};
      t.w[1][0] = u;
      t.b = {1.0 - 1.0 / (2.0 * u), 1.0 / (2.0 * u)};
      t.name = "rk2_u(" + fmt_g(u) + ")";
      break;
    }
    case Family::rk4_u1: {
      const double u = point.params[0];
      t.c = {0.0, 0.5, 0.0, 1.0};
      t.w[1][0] = 0.5;
      t.w[2][0] = -1.0 / (12.0 * u);
      t.w[2][1] = 1.0 / (12.0 * u);
      t.w[3][0] = -0.5 - 6.0 * u;
      t.w[3][1] = 1.5;
      t.w[3][2] = 6.0 * u;
      t.b = {1.0 / 6.0 - u, 2.0 / 3.0, u, 1.0 / 6.0};
      t.name = "rk4_u1(" + fmt_g(u) + ")";
      break;
    }
    case Family::rk4_u2: {
      const double u = point.params[0];
      t.c = {0.0, 0.5, 0.5, 1.0};
      t.w[1][0] = 0.5;
      t.w[2][0] = 0.5 - 1.0 / (6.0 * u);
      t.w[2][1] = 1.0 / (6.0 * u);
      t.w[3][0] = 0.0;
      t.w[3][1] = 1.0 - 3.0 * u;
      t.w[3][2] = 3.0 * u;
      t.b = {1.0 / 6.0, 2.0 / 3.0 - u, u, 1.0 / 6.0};
      t.name = "rk4_u2(" + fmt_g(u) + ")";
      break;
    }
    case Family::rk4_u3: {
      const double u = point.params[0];
      t.c = {0.0, 1.0, 0.5, 1.0};
      t.w[1][0] = 1.0;
      t.w[2][0] = 3.0 / 8.0;
      t.w[2][1] = 1.0 / 8.0;
      t.w[3][0] = 1.0 - 1.0 / (4.0 * u);
      t.w[3][1] = -1.0 / (12.0 * u);
      t.w[3][2] = 1.0 / (3.0 * u);
      t.b = {1.0 / 6.0, 1.0 / 6.0 - u, 2.0 / 3.0, u};
      t.name = "rk4_u3(" + fmt_g(u) + ")";
      break;
    }
    case Family::rk4_uv: {
      const double u = point.params[0], v = point.params[1];
      const double d = uv_denom(u, v);
      t.c = {0.0, u, v, 1.0};
      t.w[1][0] = u;
      t.w[2][0] = v + (u * v - v * v) / (2.0 * u - 4.0 * u * u);
      t.w[2][1] = (u - v) * v / (2.0 * u * (-1.0 + 2.0 * u));
      t.w[3][0] = (2.0 - 5.0 * v + 4.0 * v * v +
                   4.0 * u * u * (1.0 - 3.0 * v + 3.0 * v * v) -
                   3.0 * u * (2.0 - 5.0 * v + 4.0 * v * v)) /
                  (2.0 * u * v * d);
      t.w[3][1] = (-1.0 + u) * (-2.0 + u + 5.0 * v - 4.0 * v * v) /
                  (2.0 * u * (u - v) * d);
      t.w[3][2] =
          (-1.0 + u) * (-1.0 + 2.0 * u) * (-1.0 + v) / ((u - v) * v * d);
      t.b = {(1.0 - 2.0 * u - 2.0 * v + 6.0 * u * v) / (12.0 * u * v),
             (-1.0 + 2.0 * v) / (12.0 * (-1.0 + u) * u * (u - v)),
             (1.0 - 2.0 * u) / (12.0 * (u - v) * (-1.0 + v) * v),
             d / (12.0 * (-1.0 + u) * (-1.0 + v))};
      t.name = "rk4_uv(" + fmt_g(u) + "," + fmt_g(v) + ")";
      break;
    }
  }

  for (int i = 0; i < t.stages; ++i) {
    for (int j = 0; j < i; ++j)
      if (std::abs(t.w[i][j]) > kBlowupLimit)
        throw std::runtime_error(t.name + ": coefficient w[" +
                                 std::to_string(i) + "][" + std::to_string(j) +
                                 "] = " + fmt_g(t.w[i][j]) +
                                 " exceeds blowup limit 1e8");
    if (std::abs(t.b[static_cast<std::size_t>(i)]) > kBlowupLimit)
      throw std::runtime_error(t.name + ": coefficient b[" + std::to_string(i) +
                               "] = " + fmt_g(t.b[static_cast<std::size_t>(i)]) +
                               " exceeds blowup limit 1e8");
  }
  t.validate();
  return t;
}

ParamPoint named_method(const std::string& name) {
  if (name == "euler") return {Family::euler, {}};
  if (name == "midpoint") return {Family::rk2_u, {0.5}};
  if (name == "heun") return {Family::rk2_u, {1.0}};
  if (name == "ralston") return {Family::rk2_u, {2.0 / 3.0}};
  if (name == "rk4_classic") return {Family::rk4_u2, {1.0 / 3.0}};
  if (name == "rk4_38") return {Family::rk4_uv, {1.0 / 3.0, 2.0 / 3.0}};
  throw std::invalid_argument(
      "unknown method name '" + name +
      "' (expected euler, midpoint, heun, ralston, rk4_classic or rk4_38)");
}

std::vector<OrderCondition> check_order_conditions(const ButcherTableau& t,
                                                   int p) {
  if (p < 1 || p > 4)
    throw std::invalid_argument("order conditions: p must be in 1..4, got " +
                                std::to_string(p));
  const auto s = static_cast<std::size_t>(t.stages);
  if (t.c.size() != s || t.b.size() != s || t.w.size() != s)
    throw std::invalid_argument("order conditions: tableau sizes inconsistent");

  const auto& c = t.c;
  const auto& b = t.b;
  const auto& w = t.w;

  // wc[i] = sum_j w_ij c_j, wcc[i] = sum_j w_ij c_j^2, wwc[i] = sum_j w_ij wc[j]
  std::vector<double> wc(s, 0.0), wcc(s, 0.0), wwc(s, 0.0);
  for (std::size_t i = 0; i < s; ++i)
    for (std::size_t j = 0; j < i; ++j) {
      wc[i] += w[i][j] * c[j];
      wcc[i] += w[i][j] * c[j] * c[j];
    }
  for (std::size_t i = 0; i < s; ++i)
    for (std::size_t j = 0; j < i; ++j) wwc[i] += w[i][j] * wc[j];

  auto dot = [&](auto&& weight) {
    double sum = 0.0;
    for (std::size_t i = 0; i < s; ++i) sum += b[i] * weight(i);
    return sum;
  };

  std::vector<OrderCondition> out;
  out.push_back({"sum b_i = 1", 1, dot([&](std::size_t) { return 1.0; }) - 1.0});
  if (p >= 2)
    out.push_back({"sum b_i c_i = 1/2", 2,
                   dot([&](std::size_t i) { return c[i]; }) - 0.5});
  if (p >= 3) {
    out.push_back({"sum b_i c_i^2 = 1/3", 3,
                   dot([&](std::size_t i) { return c[i] * c[i]; }) - 1.0 / 3.0});
    out.push_back({"sum b_i w_ij c_j = 1/6", 3,
                   dot([&](std::size_t i) { return wc[i]; }) - 1.0 / 6.0});
  }
  if (p >= 4) {
    out.push_back(
        {"sum b_i c_i^3 = 1/4", 4,
         dot([&](std::size_t i) { return c[i] * c[i] * c[i]; }) - 0.25});
    out.push_back({"sum b_i c_i w_ij c_j = 1/8", 4,
                   dot([&](std::size_t i) { return c[i] * wc[i]; }) - 0.125});
    out.push_back({"sum b_i w_ij c_j^2 = 1/12", 4,
                   dot([&](std::size_t i) { return wcc[i]; }) - 1.0 / 12.0});
    out.push_back({"sum b_i w_ij w_jk c_k = 1/24", 4,
                   dot([&](std::size_t i) { return wwc[i]; }) - 1.0 / 24.0});
  }
  return out;
}

bool passes_order(const ButcherTableau& t, int p, double tol) {
  for (const auto& cond : check_order_conditions(t, p))
    if (!(std::abs(cond.residual) <= tol)) return false;
  return true;
}

int max_verified_order(const ButcherTableau& t) {
  const auto conds = check_order_conditions(t, 4);
  int best = 0;
  for (int p = 1; p <= 4; ++p) {
    bool ok = true;
    for (const auto& cond : conds)
      if (cond.order <= p && std::abs(cond.residual) > 1e-10) ok = false;
    if (!ok) break;
    best = p;
  }
  return best;
}

std::string format_tableau(const ButcherTableau& t) {
  const auto s = static_cast<std::size_t>(t.stages);
  auto cell = [](double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%10.6g", x);
    return std::string(buf);
  };
  std::ostringstream os;
  for (std::size_t i = 0; i < s; ++i) {
    os << cell(t.c[i]) << " |";
    for (std::size_t j = 0; j < i; ++j) os << ' ' << cell(t.w[i][j]);
    os << '\n';
  }
  os << std::string(10, '-') << "-+";
  os << std::string(11 * s, '-') << '\n';
  os << std::string(10, ' ') << " |";
  for (std::size_t i = 0; i < s; ++i) os << ' ' << cell(t.b[i]);
  os << '\n';
  return os.str();
}

std::string tableau_to_json(const ButcherTableau& t, const ParamPoint& point) {
  nlohmann::json j;
  j["family"] = family_info(point.family).name;
  j["params"] = point.params;
  j["c"] = t.c;
  j["w"] = t.w;
  j["b"] = t.b;
  return j.dump(2);
}

void tableau_from_json(const std::string& text, ButcherTableau& t,
                       ParamPoint& point) {
  nlohmann::json j = nlohmann::json::parse(text);
  point.family = family_from_string(j.at("family").get<std::string>());
  point.params = j.at("params").get<std::vector<double>>();
  t.c = j.at("c").get<std::vector<double>>();
  t.w = j.at("w").get<std::vector<std::vector<double>>>();
  t.b = j.at("b").get<std::vector<double>>();
  t.stages = static_cast<int>(t.c.size());
  t.name = std::string(family_info(point.family).name);
  t.validate();
}

}  // namespace rknode
