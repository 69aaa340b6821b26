// SPDX-FileCopyrightText: the rknode authors
// SPDX-License-Identifier: Apache-2.0

#include "rknode/config.hpp"

#include <fstream>
#include <stdexcept>

namespace rknode {

nlohmann::json default_run_config() {
  return nlohmann::json{
      {"schema", "rknode-config-v1"},
      {"dataset",
       {
           {"kind", "spirals"},  // spirals | circles | idx
           {"n_per_class", 500},
           {"classes", 2},
           {"n", 1000},           // circles
           {"noise", 0.02},
           {"radius_gap", 0.3},  // circles
           {"seed", 1},
           {"images", ""},  // idx
           {"labels", ""},  // idx
           {"limit", 0},    // idx
           {"train_frac", 0.7},
           {"val_frac", 0.15},
           {"split_seed", 2},
       }},
      {"model",
       {
           {"state_dim", 32},
           {"hidden_dim", 64},
           {"n_ode_blocks", 2},
           {"t0", 0.0},
           {"t1", 1.0},
           {"activation", "gelu"},
           {"zero_init_rhs_out", false},
           {"init_seed", 3},
       }},
      {"solver",
       {
           {"n_steps", 8},
           {"strategy",
            {
                {"kind", "fixed"},  // fixed | switching | smoothing | ensemble
                {"family", "rk2_u"},
                {"params", nlohmann::json::array({0.5})},
                {"points", nlohmann::json::array()},   // switching/ensemble
                {"weights", nlohmann::json::array()},  // empty = uniform
                {"distribution", "normal"},            // smoothing
                {"scale", nlohmann::json::array({0.0125})},
            }},
       }},
      {"train",
       {
           {"epochs", 50},
           {"batch_size", 8},
           {"seed", 4},
           {"adversarial", false},
           {"grad_clip", 0.0},
           {"resample_per_batch", false},
           {"optimizer",
            {
                {"kind", "rmsprop"},
                {"momentum", 0.9},
                {"decay", 0.9},
                {"eps", 1e-8},
            }},
           {"schedule",
            {
                {"base_lr", 1e-3},
                {"max_lr", 5e-3},
                {"step_size_up", 1100},
                {"step_size_down", 1100},
            }},
       }},
      {"attack",
       {
           {"kind", "fgsm"},
           {"epsilon", 8.0 / 255.0},
           {"alpha", 2.0 / 255.0},
           {"iterations", 7},
           {"range_lo", 0.0},
           {"range_hi", 1.0},
           {"random_start", true},
       }},
      {"eval",
       {
           {"u_grid", nlohmann::json::array(
                          {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0})},
           {"epsilons",
            nlohmann::json::array({0.0, 2.0 / 255.0, 8.0 / 255.0})},
           {"seeds", nlohmann::json::array({101, 102, 103})},
           {"batch_size", 256},
       }},
  };
}

namespace {

bool same_kind(const nlohmann::json& a, const nlohmann::json& b) {
  if (a.is_number() && b.is_number()) return true;  // int/float interchange
  return a.type() == b.type();
}

const char* kind_name(const nlohmann::json& v) {
  if (v.is_number()) return "number";
  if (v.is_string()) return "string";
  if (v.is_boolean()) return "boolean";
  if (v.is_array()) return "array";
  if (v.is_object()) return "object";
  return "null";
}

void merge_checked(nlohmann::json& into, const nlohmann::json& user,
                   const std::string& path) {
  for (auto it = user.begin(); it != user.end(); ++it) {
    const std::string key_path = path.empty() ? it.key() : path + "." + it.key();
    if (!into.contains(it.key()))
      throw std::invalid_argument("config: unknown key '" + key_path + "'");
    nlohmann::json& slot = into[it.key()];
    if (!same_kind(slot, it.value()))
      throw std::invalid_argument("config: key '" + key_path + "' expects " +
                                  kind_name(slot) + ", got " +
                                  kind_name(it.value()));
    if (slot.is_object())
      merge_checked(slot, it.value(), key_path);
    else
      slot = it.value();
  }
}

}  // namespace

nlohmann::json validate_config(const nlohmann::json& user) {
  if (!user.is_object())
    throw std::invalid_argument("config: top level must be an object");
  nlohmann::json merged = default_run_config();
  merge_checked(merged, user, "");
  return merged;
}

nlohmann::json load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("config: cannot open " + path);
  nlohmann::json user;
  try {
    user = nlohmann::json::parse(is);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error("config: " + path + " is not valid JSON: " +
                             e.what());
  }
  return validate_config(user);
}

Dataset dataset_from_config(const nlohmann::json& cfg) {
  const auto& d = cfg.at("dataset");
  const std::string kind = d.at("kind").get<std::string>();
  Dataset ds;
  if (kind == "spirals") {
    ds = make_spirals(d.at("n_per_class").get<int>(), d.at("classes").get<int>(),
                      d.at("noise").get<double>(),
                      d.at("seed").get<std::uint64_t>());
  } else if (kind == "circles") {
    ds = make_circles(d.at("n").get<int>(), d.at("radius_gap").get<double>(),
                      d.at("noise").get<double>(),
                      d.at("seed").get<std::uint64_t>());
  } else if (kind == "idx") {
    ds = load_idx(d.at("images").get<std::string>(),
                  d.at("labels").get<std::string>(),
                  d.at("limit").get<std::int64_t>());
  } else {
    throw std::invalid_argument("config: dataset.kind '" + kind +
                                "' is not spirals, circles or idx");
  }
  assign_splits(ds, d.at("train_frac").get<double>(),
                d.at("val_frac").get<double>(),
                d.at("split_seed").get<std::uint64_t>());
  return ds;
}

ModelConfig model_config_from_config(const nlohmann::json& cfg,
                                     const Dataset& data) {
  const auto& m = cfg.at("model");
  ModelConfig mc;
  mc.input_dim = static_cast<int>(data.dim());
  mc.num_classes = data.num_classes;
  mc.state_dim = m.at("state_dim").get<int>();
  mc.hidden_dim = m.at("hidden_dim").get<int>();
  mc.n_ode_blocks = m.at("n_ode_blocks").get<int>();
  mc.t0 = m.at("t0").get<double>();
  mc.t1 = m.at("t1").get<double>();
  mc.activation = m.at("activation").get<std::string>();
  mc.zero_init_rhs_out = m.at("zero_init_rhs_out").get<bool>();
  mc.validate();
  return mc;
}

SolverStrategy strategy_from_config(const nlohmann::json& cfg) {
  const auto& s = cfg.at("solver").at("strategy");
  const std::string kind = s.at("kind").get<std::string>();
  SolverStrategy st;
  auto base_point = [&]() {
    return make_point(family_from_string(s.at("family").get<std::string>()),
                      s.at("params").get<std::vector<double>>());
  };
  auto point_list = [&]() {
    std::vector<ParamPoint> pts;
    for (const auto& p : s.at("points"))
      pts.push_back(
          make_point(family_from_string(p.at("family").get<std::string>()),
                     p.at("params").get<std::vector<double>>()));
    return pts;
  };
  if (kind == "fixed") {
    st.kind = SolverStrategy::Kind::fixed;
    st.base = base_point();
  } else if (kind == "smoothing") {
    st.kind = SolverStrategy::Kind::smoothing;
    st.base = base_point();
    st.distribution = s.at("distribution").get<std::string>();
    st.scale = s.at("scale").get<std::vector<double>>();
  } else if (kind == "switching" || kind == "ensemble") {
    st.kind = kind == "switching" ? SolverStrategy::Kind::switching
                                  : SolverStrategy::Kind::ensemble;
    st.points = point_list();
    auto w = s.at("weights").get<std::vector<double>>();
    if (w.empty() && !st.points.empty())
      w.assign(st.points.size(), 1.0 / static_cast<double>(st.points.size()));
    st.weights = std::move(w);
  } else {
    throw std::invalid_argument("config: solver.strategy.kind '" + kind +
                                "' is not fixed, switching, smoothing or "
                                "ensemble");
  }
  st.validate();
  return st;
}

AttackConfig attack_from_config(const nlohmann::json& cfg) {
  const auto& a = cfg.at("attack");
  AttackConfig ac;
  ac.kind = a.at("kind").get<std::string>();
  ac.epsilon = a.at("epsilon").get<double>();
  ac.alpha = a.at("alpha").get<double>();
  ac.iterations = a.at("iterations").get<int>();
  ac.range_lo = a.at("range_lo").get<double>();
  ac.range_hi = a.at("range_hi").get<double>();
  ac.random_start = a.at("random_start").get<bool>();
  ac.validate();
  return ac;
}

TrainConfig train_config_from_config(const nlohmann::json& cfg) {
  const auto& t = cfg.at("train");
  TrainConfig tc;
  tc.epochs = t.at("epochs").get<int>();
  tc.batch_size = t.at("batch_size").get<int>();
  tc.seed = t.at("seed").get<std::uint64_t>();
  tc.n_steps = cfg.at("solver").at("n_steps").get<int>();
  tc.strategy = strategy_from_config(cfg);
  tc.adversarial = t.at("adversarial").get<bool>();
  tc.attack = attack_from_config(cfg);
  tc.grad_clip = t.at("grad_clip").get<double>();
  tc.resample_per_batch = t.at("resample_per_batch").get<bool>();

  const auto& o = t.at("optimizer");
  tc.optimizer.kind = o.at("kind").get<std::string>();
  tc.optimizer.momentum = o.at("momentum").get<double>();
  tc.optimizer.decay = o.at("decay").get<double>();
  tc.optimizer.eps = o.at("eps").get<double>();

  const auto& s = t.at("schedule");
  tc.schedule.base_lr = s.at("base_lr").get<double>();
  tc.schedule.max_lr = s.at("max_lr").get<double>();
  tc.schedule.step_size_up = s.at("step_size_up").get<int>();
  tc.schedule.step_size_down = s.at("step_size_down").get<int>();

  tc.validate();
  return tc;
}

}  // namespace rknode
