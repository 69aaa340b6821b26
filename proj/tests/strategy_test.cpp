// SPDX-FileCopyrightText: the rknode authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "rknode/strategy.hpp"

using namespace rknode;

namespace {

SolverStrategy fixed_at(Family f, std::vector<double> params) {
  SolverStrategy s;
  s.kind = SolverStrategy::Kind::fixed;
  s.base = make_point(f, std::move(params));
  return s;
}

SolverStrategy smoothing_at(Family f, std::vector<double> params,
                            std::string dist, std::vector<double> scale) {
  SolverStrategy s;
  s.kind = SolverStrategy::Kind::smoothing;
  s.base = make_point(f, std::move(params));
  s.distribution = std::move(dist);
  s.scale = std::move(scale);
  return s;
}

}  // namespace

TEST_CASE("fixed strategies always return the base point") {
  SolverStrategy s = fixed_at(Family::rk2_u, {0.35});
  Rng rng(5);
  for (int e = 0; e < 8; ++e) {
    EpochDraw d = draw(s, e, rng);
    CHECK(d.epoch == e);
    CHECK(d.drawn.family == Family::rk2_u);
    CHECK(d.drawn.params[0] == 0.35);  // bitwise, no noise applied
    CHECK(d.resamples == 0);
  }
}

TEST_CASE("draws are reproducible per seed and epoch stream") {
  SolverStrategy s = smoothing_at(Family::rk4_u2, {0.3}, "normal", {0.05});
  Rng a(77), b(77), c(78);
  for (int e = 0; e < 20; ++e) {
    EpochDraw da = draw(s, e, a);
    EpochDraw db = draw(s, e, b);
    CHECK(da.drawn.params[0] == db.drawn.params[0]);
    CHECK(da.raw == db.raw);
  }
  bool all_same = true;
  Rng a2(77);
  for (int e = 0; e < 20; ++e)
    if (draw(s, e, a2).drawn.params[0] != draw(s, e, c).drawn.params[0])
      all_same = false;
  CHECK_FALSE(all_same);
}

TEST_CASE("switching draws follow the weights") {
  SolverStrategy s;
  s.kind = SolverStrategy::Kind::switching;
  s.points = {make_point(Family::rk2_u, {0.25}),
              make_point(Family::rk2_u, {0.5}),
              make_point(Family::rk4_u1, {1.0})};
  s.weights = {0.5, 0.25, 0.25};
  s.validate();

  Rng rng(123);
  const int n = 20000;
  std::map<double, int> hits;  // keyed by first param
  for (int e = 0; e < n; ++e) {
    EpochDraw d = draw(s, e, rng);
    ++hits[d.drawn.params[0]];
  }
  // binomial 4-sigma bands around the expected counts
  auto band = [n](double p) { return 4.0 * std::sqrt(n * p * (1 - p)); };
  CHECK(std::abs(hits[0.25] - 0.5 * n) < band(0.5));
  CHECK(std::abs(hits[0.5] - 0.25 * n) < band(0.25));
  CHECK(std::abs(hits[1.0] - 0.25 * n) < band(0.25));
}

TEST_CASE("uniform switching helper weights every point equally") {
  auto s = switching_set_uniform(
      {make_point(Family::rk2_u, {0.3}), make_point(Family::rk2_u, {0.7})});
  CHECK(s.kind == SolverStrategy::Kind::switching);
  REQUIRE(s.weights.size() == 2);
  CHECK(s.weights[0] == doctest::Approx(0.5));
  CHECK(s.weights[1] == doctest::Approx(0.5));
  s.validate();
}

TEST_CASE("smoothing perturbs around the base and stays feasible") {
  SolverStrategy s = smoothing_at(Family::rk2_u, {0.5}, "normal", {0.1});
  Rng rng(9);
  double sum = 0;
  const int n = 5000;
  for (int e = 0; e < n; ++e) {
    EpochDraw d = draw(s, e, rng);
    CHECK(d.drawn.params[0] > 0.0);
    CHECK(d.drawn.params[0] <= 1.0);  // family constraint enforced by redraw
    sum += d.drawn.params[0];
  }
  // mean stays near the base; rejection clips the right tail slightly so
  // allow a generous band around 0.5
  CHECK(std::abs(sum / n - 0.5) < 0.02);
}

TEST_CASE("smoothing counts its rejected samples") {
  // base near the boundary with a fat scale: rejections are common
  SolverStrategy s = smoothing_at(Family::rk2_u, {0.95}, "normal", {0.3});
  Rng rng(31);
  int total_resamples = 0;
  for (int e = 0; e < 2000; ++e) {
    EpochDraw d = draw(s, e, rng);
    total_resamples += d.resamples;
    CHECK(d.resamples >= 0);
    CHECK(d.raw.size() == 1);  // raw keeps the first, pre-rejection sample
  }
  CHECK(total_resamples > 0);
}

TEST_CASE("a hopeless smoothing scale is reported, not spun on") {
  // cauchy noise at scale 1e9 practically never lands in (0, 1]
  SolverStrategy s = smoothing_at(Family::rk2_u, {0.5}, "cauchy", {1e9});
  Rng rng(2);
  bool threw = false;
  std::string msg;
  for (int e = 0; e < 50 && !threw; ++e) {
    try {
      draw(s, e, rng);
    } catch (const std::runtime_error& err) {
      threw = true;
      msg = err.what();
    }
  }
  CHECK(threw);
  CHECK(msg.find("scale") != std::string::npos);
}

TEST_CASE("cauchy smoothing really has heavier tails than normal") {
  SolverStrategy nrm = smoothing_at(Family::rk4_u2, {0.5}, "normal", {0.05});
  SolverStrategy cau = smoothing_at(Family::rk4_u2, {0.5}, "cauchy", {0.05});
  Rng r1(4), r2(4);
  int far_n = 0, far_c = 0;
  for (int e = 0; e < 4000; ++e) {
    if (std::abs(draw(nrm, e, r1).drawn.params[0] - 0.5) > 0.25) ++far_n;
    if (std::abs(draw(cau, e, r2).drawn.params[0] - 0.5) > 0.25) ++far_c;
  }
  CHECK(far_c > 40);      // cauchy: P(|x| > 5*scale) ~ 12.5% per side
  CHECK(far_n == 0);      // normal: 5 sigma
  CHECK(far_c > far_n);
}

TEST_CASE("ensemble strategies have no per-epoch draw") {
  SolverStrategy s;
  s.kind = SolverStrategy::Kind::ensemble;
  s.points = {make_point(Family::rk2_u, {0.4}), make_point(Family::rk2_u, {0.8})};
  s.weights = {0.5, 0.5};
  s.validate();
  Rng rng(1);
  CHECK_THROWS_AS(draw(s, 0, rng), std::invalid_argument);
}

TEST_CASE("strategy members expand as each kind demands") {
  SolverStrategy fx = fixed_at(Family::rk2_u, {0.5});
  auto m1 = strategy_members(fx, fx.base);
  REQUIRE(m1.size() == 1);
  CHECK(m1[0].weight == 1.0);

  SolverStrategy en;
  en.kind = SolverStrategy::Kind::ensemble;
  en.points = {make_point(Family::rk2_u, {0.3}), make_point(Family::rk4_u2, {0.25}),
               make_point(Family::rk2_u, {0.9})};
  en.weights = {0.2, 0.5, 0.3};
  auto m3 = strategy_members(en, en.points[0]);  // drawn point is ignored
  REQUIRE(m3.size() == 3);
  CHECK(m3[1].weight == 0.5);
  CHECK(m3[1].tableau.stages == 4);

  // switching uses whatever was drawn this epoch
  SolverStrategy sw = switching_set_uniform(
      {make_point(Family::rk2_u, {0.3}), make_point(Family::rk2_u, {0.7})});
  auto m2 = strategy_members(sw, sw.points[1]);
  REQUIRE(m2.size() == 1);
  CHECK(m2[0].tableau.b[1] != 0.0);
}

TEST_CASE("evaluation points are deterministic per strategy kind") {
  CHECK(eval_point(fixed_at(Family::rk2_u, {0.4})).params[0] == 0.4);
  SolverStrategy sm = smoothing_at(Family::rk4_u3, {0.2}, "normal", {0.01});
  CHECK(eval_point(sm).params[0] == 0.2);  // noise never leaks into eval
  SolverStrategy sw = switching_set_uniform(
      {make_point(Family::rk2_u, {0.6}), make_point(Family::rk2_u, {0.1})});
  CHECK(eval_point(sw).params[0] == 0.6);  // first listed point
}

TEST_CASE("strategy validation rejects inconsistent shapes") {
  SolverStrategy s;
  s.kind = SolverStrategy::Kind::switching;
  s.points = {make_point(Family::rk2_u, {0.5})};
  s.weights = {0.4};  // does not sum to 1
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);

  s.weights = {0.5, 0.5};  // size mismatch
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);

  s.kind = SolverStrategy::Kind::smoothing;
  s.base = make_point(Family::rk2_u, {0.5});
  s.distribution = "laplace";
  s.scale = {0.1};
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);

  s.distribution = "normal";
  s.scale = {0.1, 0.2};  // arity is 1
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);

  s.scale = {-0.1};
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
}

TEST_CASE("strategies survive a json round-trip") {
  SolverStrategy s;
  s.kind = SolverStrategy::Kind::ensemble;
  s.points = {make_point(Family::rk4_uv, {1.0 / 3.0, 2.0 / 3.0}),
              make_point(Family::rk2_u, {0.123456789012345})};
  s.weights = {0.25, 0.75};
  SolverStrategy back = strategy_from_json(strategy_to_json(s));
  CHECK(back.kind == s.kind);
  REQUIRE(back.points.size() == 2);
  CHECK(back.points[0].params[0] == s.points[0].params[0]);  // bitwise
  CHECK(back.points[0].params[1] == s.points[0].params[1]);
  CHECK(back.points[1].params[0] == s.points[1].params[0]);
  CHECK(back.weights == s.weights);

  SolverStrategy sm = smoothing_at(Family::rk4_u1, {0.7}, "cauchy", {0.02});
  SolverStrategy sm2 = strategy_from_json(strategy_to_json(sm));
  CHECK(sm2.distribution == "cauchy");
  CHECK(sm2.scale == sm.scale);
  CHECK(sm2.base.params[0] == 0.7);

  CHECK_THROWS_AS(strategy_from_json(R"({"kind":"quantum"})"),
                  std::invalid_argument);
}

TEST_CASE("draw log csv lines up epochs, params and resamples") {
  std::vector<EpochDraw> draws(2);
  draws[0].epoch = 0;
  draws[0].drawn = make_point(Family::rk2_u, {0.625});
  draws[0].raw = {0.625};
  draws[0].resamples = 0;
  draws[1].epoch = 1;
  draws[1].drawn = make_point(Family::rk4_uv, {0.25, 0.75});
  draws[1].raw = {0.25, 0.75};
  draws[1].resamples = 3;

  std::ostringstream os;
  write_draws_csv(os, draws);
  std::string text = os.str();
  CHECK(text.rfind("epoch,family,param0,param1,resamples\n", 0) == 0);
  CHECK(text.find("0,rk2_u,0.625,,0\n") != std::string::npos);
  CHECK(text.find("1,rk4_uv,0.25,0.75,3\n") != std::string::npos);
}
