// SPDX-FileCopyrightText: the rknode authors
// SPDX-License-Identifier: Apache-2.0

#include "rknode/commands.hpp"

#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <vector>

#include "rknode/attack.hpp"
#include "rknode/config.hpp"
#include "rknode/data.hpp"
#include "rknode/integrate.hpp"
#include "rknode/model.hpp"
#include "rknode/strategy.hpp"
#include "rknode/tableau.hpp"
#include "rknode/train.hpp"

namespace fs = std::filesystem;

namespace rknode {
namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string config_hash8(const nlohmann::json& cfg) {
  std::uint64_t h = fnv1a(cfg.dump());
  char buf[16];
  std::snprintf(buf, sizeof buf, "%08x",
                static_cast<unsigned>((h ^ (h >> 32)) & 0xffffffffu));
  return buf;
}

// splitmix64 finalizer; decorrelates structured seed tuples.
std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c = 0) {
  return mix64(a ^ mix64(b ^ mix64(c)));
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string acc_cell(double v) {
  return std::isnan(v) ? std::string() : fmt("%.6f", v);
}

std::string param_cell(const std::vector<double>& p, std::size_t i) {
  return i < p.size() ? fmt("%.17g", p[i]) : std::string();
}

// Runs fn(0..n-1) on up to `jobs` worker threads. Each result must land in
// a slot owned by its index so assembly stays deterministic.
void run_pool(int jobs, int n, const std::function<void(int)>& fn) {
  if (jobs <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::mutex mu;
  std::exception_ptr first_error;
  auto worker = [&] {
    while (true) {
      int i = next.fetch_add(1);
      if (i >= n) break;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> threads;
  int n_threads = jobs < n ? jobs : n;
  threads.reserve(static_cast<std::size_t>(n_threads));
  for (int t = 0; t < n_threads; ++t) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

struct Stat {
  double mean = kNan;
  double se = kNan;  // standard error of the mean
  int n = 0;
};

Stat stat_of(const std::vector<double>& xs) {
  Stat s;
  double sum = 0.0;
  for (double x : xs) {
    if (std::isnan(x)) continue;
    sum += x;
    ++s.n;
  }
  if (s.n == 0) return s;
  s.mean = sum / s.n;
  if (s.n == 1) {
    s.se = 0.0;
    return s;
  }
  double ss = 0.0;
  for (double x : xs) {
    if (std::isnan(x)) continue;
    ss += (x - s.mean) * (x - s.mean);
  }
  s.se = std::sqrt(ss / (s.n - 1)) / std::sqrt(static_cast<double>(s.n));
  return s;
}

// Everything a run needs, assembled from one merged config.
struct RunContext {
  nlohmann::json cfg;
  Dataset train_set, val_set, test_set;
  ModelConfig mc;
  TrainConfig tc;
};

RunContext load_run_context(const CliOptions& opts) {
  RunContext rc;
  rc.cfg = opts.config_path.empty() ? default_run_config()
                                    : load_config(opts.config_path);
  if (opts.seed_set) rc.cfg["train"]["seed"] = opts.seed;
  Dataset data = dataset_from_config(rc.cfg);
  rc.train_set = subset(data, Split::train);
  rc.val_set = subset(data, Split::val);
  rc.test_set = subset(data, Split::test);
  rc.mc = model_config_from_config(rc.cfg, data);
  rc.tc = train_config_from_config(rc.cfg);
  if (rc.test_set.size() == 0)
    throw std::runtime_error(
        "test split is empty; lower dataset.train_frac/val_frac");
  return rc;
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write '" + path + "'");
  f << text;
}

// Trains per the context and drops the standard artifacts into `dir`.
TrainResult train_into_dir(const RunContext& rc, const std::string& dir) {
  NeuralOdeModel model(rc.mc, rc.cfg["model"]["init_seed"].get<std::uint64_t>());
  TrainResult res = train(std::move(model), rc.train_set, rc.val_set, rc.tc);
  {
    std::ofstream f(dir + "/train_log.csv");
    write_train_log_csv(f, res.log);
  }
  {
    std::ofstream f(dir + "/draws.csv");
    write_draws_csv(f, res.draws);
  }
  save_checkpoint(dir + "/checkpoint.json", res.model, rc.tc.seed,
                  strategy_to_json(rc.tc.strategy));
  return res;
}

NeuralOdeModel obtain_model(const CliOptions& opts, const RunContext& rc,
                            const std::string& dir, std::ostream& out) {
  if (!opts.checkpoint_path.empty()) return load_checkpoint(opts.checkpoint_path);
  out << "no checkpoint given; training first\n";
  return train_into_dir(rc, dir).model;
}

}  // namespace

std::string make_run_dir(const std::string& out_root,
                         const nlohmann::json& merged_config) {
  std::time_t now = std::time(nullptr);
  std::tm tm_buf{};
  localtime_r(&now, &tm_buf);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y%m%d-%H%M%S", &tm_buf);
  std::string base = out_root + "/run-" + stamp + "-" + config_hash8(merged_config);
  std::string dir = base;
  for (int k = 2; fs::exists(dir); ++k) dir = base + "-" + std::to_string(k);
  fs::create_directories(dir);
  write_text_file(dir + "/config.json", merged_config.dump(2) + "\n");
  return dir;
}

int cmd_tableau(const std::string& family, const std::vector<double>& params,
                std::ostream& out) {
  ParamPoint point;
  bool is_family = true;
  Family f{};
  try {
    f = family_from_string(family);
  } catch (const std::invalid_argument&) {
    is_family = false;
  }
  if (is_family)
    point = make_point(f, params);
  else if (params.empty())
    point = named_method(family);  // midpoint, ralston3, rk4_classic, ...
  else
    throw std::invalid_argument("unknown solver family '" + family + "'");

  ButcherTableau t = make_tableau(point);
  out << format_tableau(t) << "\n";
  out << "order conditions (residuals):\n";
  for (const auto& c : check_order_conditions(t, 4)) {
    char line[96];
    std::snprintf(line, sizeof line, "  %-12s order %d   %11.4e\n",
                  c.id.c_str(), c.order, c.residual);
    out << line;
  }
  out << "max verified order: " << max_verified_order(t) << "\n";
  return 0;
}

int cmd_convergence(const std::string& family,
                    const std::vector<std::vector<double>>& grid,
                    const std::string& problem, std::ostream& out) {
  Family f = family_from_string(family);
  if (grid.empty())
    throw std::invalid_argument("convergence needs at least one parameter point");

  Rhs rhs;
  std::function<std::vector<double>(double)> exact;
  if (problem == "decay") {
    rhs = [](double, const std::vector<double>& z) {
      return std::vector<double>{-z[0]};
    };
    exact = [](double t) { return std::vector<double>{std::exp(-t)}; };
  } else if (problem == "sin") {
    rhs = [](double t, const std::vector<double>& z) {
      return std::vector<double>{std::sin(t) * z[0]};
    };
    exact = [](double t) { return std::vector<double>{std::exp(1.0 - std::cos(t))}; };
  } else {
    throw std::invalid_argument("unknown problem '" + problem +
                                "' (expected decay or sin)");
  }

  const std::vector<int> steps = {8, 16, 32, 64, 128};
  out << "family,param0,param1,problem,slope\n";
  for (const auto& params : grid) {
    ParamPoint p = make_point(f, params);
    double slope = empirical_order(rhs, exact, p, 0.0, 1.0, {1.0}, steps);
    out << family_info(f).name << "," << param_cell(params, 0) << ","
        << param_cell(params, 1) << "," << problem << "," << fmt("%.6f", slope)
        << "\n";
  }
  return 0;
}

int cmd_train(const CliOptions& opts, std::ostream& out) {
  RunContext rc = load_run_context(opts);
  std::string dir = make_run_dir(opts.out_root, rc.cfg);
  TrainResult res = train_into_dir(rc, dir);

  auto members = strategy_members(rc.tc.strategy, eval_point(rc.tc.strategy));
  auto pred = res.model.predict(rc.test_set.features, members, rc.tc.n_steps);
  double clean = accuracy(pred, rc.test_set.labels);
  AttackConfig atk = attack_from_config(rc.cfg);
  Rng arng(mix_seed(rc.tc.seed, 0x7e57));
  std::int64_t batch = rc.cfg["eval"]["batch_size"].get<std::int64_t>();
  double robust =
      robust_accuracy(res.model, members, rc.tc.n_steps, rc.test_set.features,
                      rc.test_set.labels, atk, arng, batch);

  out << "run_dir: " << dir << "\n";
  out << "best_epoch: " << res.best_epoch << "\n";
  out << "best_val_acc: " << fmt("%.6f", res.best_val_acc) << "\n";
  out << "test_clean_acc: " << fmt("%.6f", clean) << "\n";
  out << "test_robust_acc: " << fmt("%.6f", robust) << " (" << atk.kind
      << ", eps=" << fmt("%.10g", atk.epsilon) << ")\n";
  return 0;
}

int cmd_usweep(const CliOptions& opts, std::ostream& out) {
  RunContext rc = load_run_context(opts);
  std::string dir = make_run_dir(opts.out_root, rc.cfg);
  NeuralOdeModel model = obtain_model(opts, rc, dir, out);

  ParamPoint base = eval_point(rc.tc.strategy);
  const FamilyInfo& info = family_info(base.family);
  if (info.arity != 1)
    throw std::invalid_argument(
        std::string("usweep varies one solver parameter; family '") +
        info.name + "' has " + std::to_string(info.arity));

  auto u_grid = rc.cfg["eval"]["u_grid"].get<std::vector<double>>();
  auto epsilons = rc.cfg["eval"]["epsilons"].get<std::vector<double>>();
  auto seeds = rc.cfg["eval"]["seeds"].get<std::vector<std::uint64_t>>();
  std::int64_t batch = rc.cfg["eval"]["batch_size"].get<std::int64_t>();
  if (u_grid.empty() || epsilons.empty() || seeds.empty())
    throw std::invalid_argument("eval.u_grid/epsilons/seeds must be non-empty");

  const int nu = static_cast<int>(u_grid.size());
  const int ne = static_cast<int>(epsilons.size());
  const int ns = static_cast<int>(seeds.size());
  AttackConfig atk = attack_from_config(rc.cfg);

  // Members and clean accuracy depend on u alone.
  std::vector<std::vector<SolverMember>> members(u_grid.size());
  std::vector<double> clean(u_grid.size());
  for (int iu = 0; iu < nu; ++iu) {
    ParamPoint p = make_point(base.family, {u_grid[static_cast<std::size_t>(iu)]});
    members[static_cast<std::size_t>(iu)] = {SolverMember{make_tableau(p), 1.0}};
    auto pred = model.predict(rc.test_set.features,
                              members[static_cast<std::size_t>(iu)], rc.tc.n_steps);
    clean[static_cast<std::size_t>(iu)] = accuracy(pred, rc.test_set.labels);
  }

  std::vector<double> robust(static_cast<std::size_t>(nu * ne * ns), kNan);
  run_pool(opts.jobs, nu * ne * ns, [&](int i) {
    int iu = i / (ne * ns);
    int ie = (i / ns) % ne;
    int is = i % ns;
    AttackConfig a = atk;
    a.epsilon = epsilons[static_cast<std::size_t>(ie)];
    if (a.kind == "pgd" && a.epsilon > 0.0 && a.alpha > a.epsilon)
      a.alpha = a.epsilon;
    a.validate();
    Rng r(mix_seed(seeds[static_cast<std::size_t>(is)],
                   static_cast<std::uint64_t>(iu),
                   static_cast<std::uint64_t>(ie)));
    robust[static_cast<std::size_t>(i)] = robust_accuracy(
        model, members[static_cast<std::size_t>(iu)], rc.tc.n_steps,
        rc.test_set.features, rc.test_set.labels, a, r, batch);
  });

  std::ostringstream raw;
  raw << "u,epsilon,attack,clean_acc,robust_acc,seed\n";
  for (int iu = 0; iu < nu; ++iu)
    for (int ie = 0; ie < ne; ++ie)
      for (int is = 0; is < ns; ++is) {
        int i = (iu * ne + ie) * ns + is;
        raw << fmt("%.10g", u_grid[static_cast<std::size_t>(iu)]) << ","
            << fmt("%.10g", epsilons[static_cast<std::size_t>(ie)]) << ","
            << atk.kind << "," << acc_cell(clean[static_cast<std::size_t>(iu)])
            << "," << acc_cell(robust[static_cast<std::size_t>(i)]) << ","
            << seeds[static_cast<std::size_t>(is)] << "\n";
      }

  std::ostringstream sm;
  sm << "# usweep family=" << info.name << " attack=" << atk.kind
     << " n_steps=" << rc.tc.n_steps << " seeds=" << ns
     << " config=" << config_hash8(rc.cfg) << "\n";
  sm << "u,epsilon,attack,n_seeds,clean_acc_mean,clean_acc_stderr,"
        "robust_acc_mean,robust_acc_stderr\n";
  for (int iu = 0; iu < nu; ++iu)
    for (int ie = 0; ie < ne; ++ie) {
      std::vector<double> xs;
      for (int is = 0; is < ns; ++is)
        xs.push_back(robust[static_cast<std::size_t>((iu * ne + ie) * ns + is)]);
      Stat st = stat_of(xs);
      sm << fmt("%.10g", u_grid[static_cast<std::size_t>(iu)]) << ","
         << fmt("%.10g", epsilons[static_cast<std::size_t>(ie)]) << ","
         << atk.kind << "," << st.n << ","
         << acc_cell(clean[static_cast<std::size_t>(iu)]) << ",0.000000,"
         << acc_cell(st.mean) << "," << acc_cell(st.se) << "\n";
    }

  write_text_file(dir + "/usweep_raw.csv", raw.str());
  write_text_file(dir + "/usweep_summary.csv", sm.str());
  out << sm.str();
  out << "run_dir: " << dir << "\n";
  return 0;
}

int cmd_compare(const CliOptions& opts, std::ostream& out) {
  RunContext rc = load_run_context(opts);
  std::string dir = make_run_dir(opts.out_root, rc.cfg);
  auto seeds = rc.cfg["eval"]["seeds"].get<std::vector<std::uint64_t>>();
  std::int64_t batch = rc.cfg["eval"]["batch_size"].get<std::int64_t>();
  if (seeds.empty()) throw std::invalid_argument("eval.seeds must be non-empty");
  const int ns = static_cast<int>(seeds.size());

  ParamPoint base = eval_point(rc.tc.strategy);
  SolverStrategy fixed_s;
  fixed_s.kind = SolverStrategy::Kind::fixed;
  fixed_s.base = base;
  SolverStrategy smooth_s;
  if (rc.tc.strategy.kind == SolverStrategy::Kind::smoothing) {
    smooth_s = rc.tc.strategy;
  } else {
    const FamilyInfo& info = family_info(base.family);
    if (info.arity == 0)
      throw std::invalid_argument(
          std::string("smoothing needs a parameterized family, not '") +
          info.name + "'");
    smooth_s.kind = SolverStrategy::Kind::smoothing;
    smooth_s.base = base;
    smooth_s.distribution = "normal";
    smooth_s.scale.assign(static_cast<std::size_t>(info.arity), 0.0125);
  }
  smooth_s.validate();

  struct Sched {
    const char* name;
    const SolverStrategy* strat;
    bool adversarial;
  };
  const Sched scheds[4] = {
      {"standard", &fixed_s, false},
      {"smoothing", &smooth_s, false},
      {"adversarial", &fixed_s, true},
      {"smoothing_adversarial", &smooth_s, true},
  };

  AttackConfig fgsm_eval = attack_from_config(rc.cfg);
  fgsm_eval.kind = "fgsm";
  fgsm_eval.validate();
  AttackConfig pgd_eval = attack_from_config(rc.cfg);
  pgd_eval.kind = "pgd";
  if (pgd_eval.epsilon > 0.0 && pgd_eval.alpha > pgd_eval.epsilon)
    pgd_eval.alpha = pgd_eval.epsilon;
  pgd_eval.validate();

  struct Cell {
    double clean = kNan, fgsm_acc = kNan, pgd_acc = kNan;
    std::string error;
  };
  std::vector<Cell> cells(static_cast<std::size_t>(4 * ns));
  std::uint64_t init_seed = rc.cfg["model"]["init_seed"].get<std::uint64_t>();

  run_pool(opts.jobs, 4 * ns, [&](int i) {
    int isch = i / ns;
    int is = i % ns;
    Cell& cell = cells[static_cast<std::size_t>(i)];
    try {
      TrainConfig tc = rc.tc;
      tc.seed = seeds[static_cast<std::size_t>(is)];
      tc.strategy = *scheds[isch].strat;
      tc.adversarial = scheds[isch].adversarial;
      NeuralOdeModel m(rc.mc, mix_seed(init_seed, tc.seed));
      TrainResult res = train(std::move(m), rc.train_set, rc.val_set, tc);
      auto members = strategy_members(tc.strategy, eval_point(tc.strategy));
      auto pred = res.model.predict(rc.test_set.features, members, tc.n_steps);
      cell.clean = accuracy(pred, rc.test_set.labels);
      Rng r1(mix_seed(tc.seed, 0xf65));
      cell.fgsm_acc =
          robust_accuracy(res.model, members, tc.n_steps, rc.test_set.features,
                          rc.test_set.labels, fgsm_eval, r1, batch);
      Rng r2(mix_seed(tc.seed, 0x96d));
      cell.pgd_acc =
          robust_accuracy(res.model, members, tc.n_steps, rc.test_set.features,
                          rc.test_set.labels, pgd_eval, r2, batch);
    } catch (const std::exception& e) {
      cell.error = e.what();
    }
  });

  std::ostringstream raw;
  raw << "schedule,seed,clean_acc,fgsm_acc,pgd_acc\n";
  for (int isch = 0; isch < 4; ++isch)
    for (int is = 0; is < ns; ++is) {
      const Cell& cell = cells[static_cast<std::size_t>(isch * ns + is)];
      raw << scheds[isch].name << "," << seeds[static_cast<std::size_t>(is)]
          << "," << acc_cell(cell.clean) << "," << acc_cell(cell.fgsm_acc)
          << "," << acc_cell(cell.pgd_acc) << "\n";
      if (!cell.error.empty())
        out << "warning: " << scheds[isch].name << " seed "
            << seeds[static_cast<std::size_t>(is)] << " failed: " << cell.error
            << "\n";
    }

  std::ostringstream sm;
  sm << "# compare eps=" << fmt("%.10g", fgsm_eval.epsilon)
     << " pgd_iters=" << pgd_eval.iterations << " seeds=" << ns
     << " config=" << config_hash8(rc.cfg) << "\n";
  sm << "schedule,n_seeds,clean_mean,clean_stderr,fgsm_mean,fgsm_stderr,"
        "pgd_mean,pgd_stderr\n";
  std::ostringstream table;
  char head[128];
  std::snprintf(head, sizeof head, "%-24s %-18s %-18s %-18s\n", "schedule",
                "clean", "fgsm", "pgd");
  table << head;
  for (int isch = 0; isch < 4; ++isch) {
    std::vector<double> cs, fsv, ps;
    for (int is = 0; is < ns; ++is) {
      const Cell& cell = cells[static_cast<std::size_t>(isch * ns + is)];
      cs.push_back(cell.clean);
      fsv.push_back(cell.fgsm_acc);
      ps.push_back(cell.pgd_acc);
    }
    Stat c = stat_of(cs), fg = stat_of(fsv), pg = stat_of(ps);
    sm << scheds[isch].name << "," << c.n << "," << acc_cell(c.mean) << ","
       << acc_cell(c.se) << "," << acc_cell(fg.mean) << "," << acc_cell(fg.se)
       << "," << acc_cell(pg.mean) << "," << acc_cell(pg.se) << "\n";
    char row[160];
    std::snprintf(row, sizeof row,
                  "%-24s %.4f +/- %.4f   %.4f +/- %.4f   %.4f +/- %.4f\n",
                  scheds[isch].name, c.mean, c.se, fg.mean, fg.se, pg.mean,
                  pg.se);
    table << row;
  }

  write_text_file(dir + "/compare_raw.csv", raw.str());
  write_text_file(dir + "/compare_summary.csv", sm.str());
  out << table.str();
  out << "run_dir: " << dir << "\n";
  return 0;
}

int cmd_ensemble_eval(const CliOptions& opts, std::ostream& out) {
  RunContext rc = load_run_context(opts);
  if (rc.tc.strategy.kind != SolverStrategy::Kind::ensemble)
    throw std::invalid_argument(
        "ensemble-eval needs solver.strategy.kind == \"ensemble\"");
  std::string dir = make_run_dir(opts.out_root, rc.cfg);
  NeuralOdeModel model = obtain_model(opts, rc, dir, out);

  auto epsilons = rc.cfg["eval"]["epsilons"].get<std::vector<double>>();
  auto seeds = rc.cfg["eval"]["seeds"].get<std::vector<std::uint64_t>>();
  std::int64_t batch = rc.cfg["eval"]["batch_size"].get<std::int64_t>();
  if (epsilons.empty() || seeds.empty())
    throw std::invalid_argument("eval.epsilons/seeds must be non-empty");
  AttackConfig atk = attack_from_config(rc.cfg);

  auto ensemble = strategy_members(rc.tc.strategy, eval_point(rc.tc.strategy));
  std::vector<SolverMember> single = {
      SolverMember{make_tableau(rc.tc.strategy.points.at(0)), 1.0}};

  std::ostringstream csv;
  csv << "mode,epsilon,clean_acc,robust_acc\n";
  const struct {
    const char* name;
    const std::vector<SolverMember>* members;
  } modes[2] = {{"ensemble", &ensemble}, {"single", &single}};
  for (const auto& mode : modes) {
    auto pred = model.predict(rc.test_set.features, *mode.members, rc.tc.n_steps);
    double clean = accuracy(pred, rc.test_set.labels);
    for (std::size_t ie = 0; ie < epsilons.size(); ++ie) {
      AttackConfig a = atk;
      a.epsilon = epsilons[ie];
      if (a.kind == "pgd" && a.epsilon > 0.0 && a.alpha > a.epsilon)
        a.alpha = a.epsilon;
      a.validate();
      Rng r(mix_seed(seeds[0], ie, mode.members == &ensemble ? 0 : 1));
      double rob = robust_accuracy(model, *mode.members, rc.tc.n_steps,
                                   rc.test_set.features, rc.test_set.labels, a,
                                   r, batch);
      csv << mode.name << "," << fmt("%.10g", epsilons[ie]) << ","
          << acc_cell(clean) << "," << acc_cell(rob) << "\n";
    }
  }

  write_text_file(dir + "/ensemble_eval.csv", csv.str());
  out << csv.str();
  out << "run_dir: " << dir << "\n";
  return 0;
}

}  // namespace rknode
