// SPDX-FileCopyrightText: the rknode authors
// SPDX-License-Identifier: Apache-2.0

#include "rknode/strategy.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "json.hpp"

namespace rknode {

namespace {

void check_prob_vector(const std::vector<ParamPoint>& points,
                       const std::vector<double>& weights, const char* what) {
  if (points.empty())
    throw std::invalid_argument(std::string(what) + ": point set is empty");
  if (points.size() != weights.size())
    throw std::invalid_argument(std::string(what) + ": " +
                                std::to_string(points.size()) + " points but " +
                                std::to_string(weights.size()) + " weights");
  double sum = 0.0;
  for (double w : weights) {
    if (w < 0.0)
      throw std::invalid_argument(std::string(what) +
                                  ": weights must be nonnegative");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-12)
    throw std::invalid_argument(std::string(what) + ": weights sum to " +
                                std::to_string(sum) + ", expected 1");
}

void check_point(const ParamPoint& p, const char* what) {
  std::string why;
  if (!is_feasible(p.family, p.params, &why))
    throw std::invalid_argument(std::string(what) + ": " + why);
}

}  // namespace

void SolverStrategy::validate() const {
  switch (kind) {
    case Kind::fixed:
      check_point(base, "fixed strategy");
      break;
    case Kind::switching:
      check_prob_vector(points, weights, "switching strategy");
      for (const auto& p : points) check_point(p, "switching strategy");
      break;
    case Kind::smoothing: {
      check_point(base, "smoothing strategy");
      if (distribution != "normal" && distribution != "cauchy")
        throw std::invalid_argument("smoothing strategy: distribution '" +
                                    distribution +
                                    "' is not normal or cauchy");
      const auto arity =
          static_cast<std::size_t>(family_info(base.family).arity);
      if (scale.size() != arity)
        throw std::invalid_argument(
            "smoothing strategy: " + std::to_string(scale.size()) +
            " scale entries for arity " + std::to_string(arity));
      for (double s : scale)
        if (!(s > 0.0))
          throw std::invalid_argument(
              "smoothing strategy: scale must be positive, got " +
              std::to_string(s));
      break;
    }
    case Kind::ensemble:
      check_prob_vector(points, weights, "ensemble strategy");
      for (const auto& p : points) check_point(p, "ensemble strategy");
      break;
  }
}

EpochDraw draw(const SolverStrategy& strategy, int epoch, Rng& rng) {
  strategy.validate();
  EpochDraw out;
  out.epoch = epoch;
  switch (strategy.kind) {
    case SolverStrategy::Kind::fixed:
      out.drawn = strategy.base;
      out.raw = strategy.base.params;
      return out;
    case SolverStrategy::Kind::switching: {
      const double x = rng.uniform();
      double cum = 0.0;
      std::size_t pick = strategy.points.size() - 1;
      for (std::size_t i = 0; i < strategy.weights.size(); ++i) {
        cum += strategy.weights[i];
        if (x < cum) {
          pick = i;
          break;
        }
      }
      out.drawn = strategy.points[pick];
      out.raw = out.drawn.params;
      return out;
    }
    case SolverStrategy::Kind::smoothing: {
      const auto& base = strategy.base;
      for (int attempt = 0; attempt < 100; ++attempt) {
        std::vector<double> sample(base.params.size());
        for (std::size_t j = 0; j < sample.size(); ++j) {
          const double noise = strategy.distribution == "normal"
                                   ? rng.normal()
                                   : rng.cauchy();
          sample[j] = base.params[j] + strategy.scale[j] * noise;
        }
        if (attempt == 0) out.raw = sample;
        if (is_feasible(base.family, sample)) {
          ParamPoint cand{base.family, sample};
          try {
            make_tableau(cand);  // reject blowups as well
          } catch (const std::exception&) {
            continue;
          }
          out.drawn = std::move(cand);
          out.resamples = attempt;
          return out;
        }
      }
      throw std::runtime_error(
          "smoothing draw: 100 consecutive infeasible samples around " +
          std::string(family_info(base.family).name) +
          " base; the scale is far too large for the feasible region");
    }
    case SolverStrategy::Kind::ensemble:
      throw std::invalid_argument(
          "draw: ensemble strategies have no per-epoch draw; all members run "
          "jointly");
  }
  throw std::invalid_argument("draw: unhandled strategy kind");
}

SolverStrategy switching_set_uniform(const std::vector<ParamPoint>& points) {
  if (points.empty())
    throw std::invalid_argument("switching_set_uniform: point set is empty");
  SolverStrategy st;
  st.kind = SolverStrategy::Kind::switching;
  st.points = points;
  st.weights.assign(points.size(), 1.0 / static_cast<double>(points.size()));
  st.validate();
  return st;
}

std::vector<SolverMember> strategy_members(const SolverStrategy& strategy,
                                           const ParamPoint& drawn) {
  if (strategy.kind == SolverStrategy::Kind::ensemble) {
    std::vector<SolverMember> members;
    members.reserve(strategy.points.size());
    for (std::size_t i = 0; i < strategy.points.size(); ++i)
      members.push_back({make_tableau(strategy.points[i]), strategy.weights[i]});
    return members;
  }
  return {SolverMember{make_tableau(drawn), 1.0}};
}

ParamPoint eval_point(const SolverStrategy& strategy) {
  switch (strategy.kind) {
    case SolverStrategy::Kind::fixed:
    case SolverStrategy::Kind::smoothing:
      return strategy.base;
    case SolverStrategy::Kind::switching:
    case SolverStrategy::Kind::ensemble:
      return strategy.points.at(0);
  }
  throw std::invalid_argument("eval_point: unhandled strategy kind");
}

namespace {

nlohmann::json point_to_json(const ParamPoint& p) {
  return {{"family", family_info(p.family).name}, {"params", p.params}};
}

ParamPoint point_from_json(const nlohmann::json& j) {
  return make_point(family_from_string(j.at("family").get<std::string>()),
                    j.at("params").get<std::vector<double>>());
}

}  // namespace

std::string strategy_to_json(const SolverStrategy& strategy) {
  nlohmann::json j;
  switch (strategy.kind) {
    case SolverStrategy::Kind::fixed:
      j["kind"] = "fixed";
      j["base"] = point_to_json(strategy.base);
      break;
    case SolverStrategy::Kind::switching:
    case SolverStrategy::Kind::ensemble:
      j["kind"] = strategy.kind == SolverStrategy::Kind::switching
                      ? "switching"
                      : "ensemble";
      j["points"] = nlohmann::json::array();
      for (const auto& p : strategy.points) j["points"].push_back(point_to_json(p));
      j["weights"] = strategy.weights;
      break;
    case SolverStrategy::Kind::smoothing:
      j["kind"] = "smoothing";
      j["base"] = point_to_json(strategy.base);
      j["distribution"] = strategy.distribution;
      j["scale"] = strategy.scale;
      break;
  }
  return j.dump();
}

SolverStrategy strategy_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  SolverStrategy st;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "fixed") {
    st.kind = SolverStrategy::Kind::fixed;
    st.base = point_from_json(j.at("base"));
  } else if (kind == "switching" || kind == "ensemble") {
    st.kind = kind == "switching" ? SolverStrategy::Kind::switching
                                  : SolverStrategy::Kind::ensemble;
    for (const auto& p : j.at("points")) st.points.push_back(point_from_json(p));
    st.weights = j.at("weights").get<std::vector<double>>();
  } else if (kind == "smoothing") {
    st.kind = SolverStrategy::Kind::smoothing;
    st.base = point_from_json(j.at("base"));
    st.distribution = j.value("distribution", "normal");
    st.scale = j.at("scale").get<std::vector<double>>();
  } else {
    throw std::invalid_argument("strategy: unknown kind '" + kind + "'");
  }
  st.validate();
  return st;
}

void write_draws_csv(std::ostream& os, const std::vector<EpochDraw>& draws) {
  os << "epoch,family,param0,param1,resamples\n";
  char buf[40];
  for (const auto& d : draws) {
    os << d.epoch << ',' << family_info(d.drawn.family).name;
    for (std::size_t j = 0; j < 2; ++j) {
      os << ',';
      if (j < d.drawn.params.size()) {
        std::snprintf(buf, sizeof buf, "%.17g", d.drawn.params[j]);
        os << buf;
      }
    }
    os << ',' << d.resamples << '\n';
  }
}

}  // namespace rknode
