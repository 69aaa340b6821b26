// SPDX-FileCopyrightText: the rknode authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

namespace rknode {

struct CliOptions {
  std::string config_path;      // --config
  std::string checkpoint_path;  // --checkpoint (usweep / ensemble-eval)
  std::string out_root = ".";   // --out
  bool seed_set = false;        // --seed present
  std::uint64_t seed = 0;
  int jobs = 1;  // worker threads for multi-run commands
};

// Create `run-<timestamp>-<hash8(config)>/` under out_root, write the merged
// config inside, and return the directory path.
std::string make_run_dir(const std::string& out_root,
                         const nlohmann::json& merged_config);

// All commands return a process exit code (0 on success) and throw standard
// exceptions on failure; the binary turns those into an error line on
// stderr and exit code 1.

// Prints the tableau in its usual layout plus the order-condition report.
int cmd_tableau(const std::string& family, const std::vector<double>& params,
                std::ostream& out);

// Fits error-vs-h slopes on a canned test problem ("decay" for z' = -z,
// "sin" for z' = sin(t) z) for every parameter point in the grid. Emits CSV
// `family,param0,param1,problem,slope`.
int cmd_convergence(const std::string& family,
                    const std::vector<std::vector<double>>& grid,
                    const std::string& problem, std::ostream& out);

// Full training run driven by a config file; writes checkpoint.json,
// train_log.csv and draws.csv into a fresh run directory.
int cmd_train(const CliOptions& opts, std::ostream& out);

// Robust-accuracy sweep over the evaluation solver parameter and the attack
// budget; writes usweep_raw.csv and usweep_summary.csv.
int cmd_usweep(const CliOptions& opts, std::ostream& out);

// Trains {standard, smoothing, adversarial, smoothing_adversarial} across
// the configured seeds and reports mean +/- standard error of clean, FGSM
// and PGD accuracy; writes compare_raw.csv and compare_summary.csv.
int cmd_compare(const CliOptions& opts, std::ostream& out);

// Evaluates a model with its ensemble strategy against the single base
// solver across the configured budgets; writes ensemble_eval.csv.
int cmd_ensemble_eval(const CliOptions& opts, std::ostream& out);

}  // namespace rknode
