// SPDX-FileCopyrightText: the rknode authors
// SPDX-License-Identifier: Apache-2.0

#include <fstream>
#include <string>

#include "doctest.h"
#include "rknode/config.hpp"

using namespace rknode;
using nlohmann::json;

TEST_CASE("an empty user config is exactly the defaults") {
  json merged = validate_config(json::object());
  CHECK(merged == default_run_config());
  CHECK(merged.at("schema") == "rknode-config-v1");
  CHECK(merged.at("dataset").at("kind") == "spirals");
  CHECK(merged.at("train").at("epochs") == 50);
}

TEST_CASE("user values override defaults without erasing siblings") {
  json user = {{"train", {{"epochs", 3}}}, {"dataset", {{"noise", 0.1}}}};
  json merged = validate_config(user);
  CHECK(merged.at("train").at("epochs") == 3);
  CHECK(merged.at("train").at("batch_size") == 8);  // untouched default
  CHECK(merged.at("dataset").at("noise") == 0.1);
  CHECK(merged.at("dataset").at("n_per_class") == 500);
}

TEST_CASE("unknown keys are named by their dotted path") {
  json user = {{"train", {{"optimizer", {{"beta2", 0.999}}}}}};
  CHECK_THROWS_WITH_AS(validate_config(user),
                       doctest::Contains("train.optimizer.beta2"),
                       std::invalid_argument);
  CHECK_THROWS_WITH_AS(validate_config({{"modle", json::object()}}),
                       doctest::Contains("modle"), std::invalid_argument);
}

TEST_CASE("type mismatches name both the expected and the offered type") {
  json user = {{"train", {{"epochs", "fifty"}}}};
  CHECK_THROWS_WITH_AS(validate_config(user),
                       doctest::Contains("expects number, got string"),
                       std::invalid_argument);
  json user2 = {{"dataset", "spirals"}};
  CHECK_THROWS_WITH_AS(validate_config(user2),
                       doctest::Contains("expects object, got string"),
                       std::invalid_argument);
}

TEST_CASE("integers and floats interchange freely") {
  json user = {{"dataset", {{"noise", 1}}},        // int into float slot
               {"train", {{"epochs", 2.0}}}};      // float into int slot
  json merged = validate_config(user);
  CHECK(merged.at("dataset").at("noise").get<double>() == 1.0);
  CHECK(merged.at("train").at("epochs").get<int>() == 2);
}

TEST_CASE("config files load through the same validation") {
  const std::string path = "/tmp/rknode_config_test.json";
  {
    std::ofstream os(path);
    os << R"({"train": {"epochs": 5}})";
  }
  json merged = load_config(path);
  CHECK(merged.at("train").at("epochs") == 5);

  {
    std::ofstream os(path);
    os << "{ not json";
  }
  CHECK_THROWS_AS(load_config(path), std::runtime_error);
  CHECK_THROWS_WITH_AS(load_config("/tmp/rknode_config_missing.json"),
                       doctest::Contains("cannot open"), std::runtime_error);
}

TEST_CASE("dataset builder dispatches on kind and assigns splits") {
  json cfg = validate_config(
      {{"dataset", {{"kind", "spirals"}, {"n_per_class", 20}, {"classes", 2}}}});
  Dataset ds = dataset_from_config(cfg);
  CHECK(ds.size() == 40);
  CHECK(ds.split.size() == 40);  // ready for subset()

  json circ = validate_config({{"dataset", {{"kind", "circles"}, {"n", 30}}}});
  CHECK(dataset_from_config(circ).size() == 30);

  json bad = validate_config({{"dataset", {{"kind", "imagenet"}}}});
  CHECK_THROWS_AS(dataset_from_config(bad), std::invalid_argument);
}

TEST_CASE("model builder takes dimensions from the data, sizes from the file") {
  json cfg = validate_config(
      {{"model", {{"state_dim", 12}, {"activation", "relu"}}},
       {"dataset", {{"n_per_class", 10}}}});
  Dataset ds = dataset_from_config(cfg);
  ModelConfig mc = model_config_from_config(cfg, ds);
  CHECK(mc.input_dim == 2);
  CHECK(mc.num_classes == 2);
  CHECK(mc.state_dim == 12);
  CHECK(mc.hidden_dim == 64);  // default
  CHECK(mc.activation == "relu");
}

TEST_CASE("strategy builder: fixed and smoothing read base family and params") {
  json cfg = validate_config(json::object());
  SolverStrategy fixed = strategy_from_config(cfg);
  CHECK(fixed.kind == SolverStrategy::Kind::fixed);
  CHECK(fixed.base.family == Family::rk2_u);
  CHECK(fixed.base.params == std::vector<double>{0.5});

  json sm = validate_config(
      {{"solver",
        {{"strategy",
          {{"kind", "smoothing"},
           {"family", "rk4_u2"},
           {"params", {0.3}},
           {"distribution", "cauchy"},
           {"scale", {0.01}}}}}}});
  SolverStrategy s = strategy_from_config(sm);
  CHECK(s.kind == SolverStrategy::Kind::smoothing);
  CHECK(s.distribution == "cauchy");
  CHECK(s.scale == std::vector<double>{0.01});
}

TEST_CASE("strategy builder: point lists are objects, empty weights go uniform") {
  json cfg = validate_config(
      {{"solver",
        {{"strategy",
          {{"kind", "ensemble"},
           {"points",
            {{{"family", "rk2_u"}, {"params", {0.3}}},
             {{"family", "rk4_uv"}, {"params", {1.0 / 3.0, 2.0 / 3.0}}}}}}}}}});
  SolverStrategy st = strategy_from_config(cfg);
  CHECK(st.kind == SolverStrategy::Kind::ensemble);
  REQUIRE(st.points.size() == 2);
  CHECK(st.points[1].family == Family::rk4_uv);
  REQUIRE(st.weights.size() == 2);
  CHECK(st.weights[0] == 0.5);  // filled in uniformly

  json weighted = cfg;
  weighted["solver"]["strategy"]["weights"] = {0.25, 0.75};
  SolverStrategy sw = strategy_from_config(validate_config(weighted));
  CHECK(sw.weights == std::vector<double>{0.25, 0.75});

  json bad = validate_config({{"solver", {{"strategy", {{"kind", "annealing"}}}}}});
  CHECK_THROWS_AS(strategy_from_config(bad), std::invalid_argument);
}

TEST_CASE("attack and train builders validate what they return") {
  json cfg = validate_config(json::object());
  AttackConfig ac = attack_from_config(cfg);
  CHECK(ac.kind == "fgsm");
  CHECK(ac.epsilon == 8.0 / 255.0);

  TrainConfig tc = train_config_from_config(cfg);
  CHECK(tc.epochs == 50);
  CHECK(tc.n_steps == 8);  // pulled from the solver section
  CHECK(tc.optimizer.kind == "rmsprop");
  CHECK(tc.optimizer.decay == 0.9);
  CHECK(tc.schedule.step_size_up == 1100);
  CHECK(tc.strategy.kind == SolverStrategy::Kind::fixed);

  json bad = validate_config({{"attack", {{"kind", "pgd"}, {"alpha", 0.9}}}});
  CHECK_THROWS_AS(attack_from_config(bad), std::invalid_argument);
}

TEST_CASE("defaults round-trip through print and parse") {
  json defaults = default_run_config();
  json reparsed = json::parse(defaults.dump());
  CHECK(reparsed == defaults);
  // and the merged document is stable under a second validation
  CHECK(validate_config(reparsed) == defaults);
}
