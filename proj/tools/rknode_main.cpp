// SPDX-FileCopyrightText: the rknode authors
// SPDX-License-Identifier: Apache-2.0

#include <cstdint>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "rknode/commands.hpp"

namespace {

// "0.3" -> {0.3};  "0.3:0.7" -> {0.3, 0.7}
std::vector<double> parse_point(const std::string& text) {
  std::vector<double> params;
  std::istringstream in(text);
  std::string cell;
  while (std::getline(in, cell, ':')) {
    std::size_t used = 0;
    double v = std::stod(cell, &used);
    if (used != cell.size())
      throw std::invalid_argument("bad parameter value '" + cell + "'");
    params.push_back(v);
  }
  return params;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"parameterized Runge-Kutta solvers and a neural-ODE workbench"};
  app.require_subcommand(1);

  rknode::CliOptions opts;

  // tableau FAMILY [PARAMS...]
  std::string tab_family;
  std::vector<double> tab_params;
  auto* tab = app.add_subcommand("tableau", "print a tableau and its verified order");
  tab->add_option("family", tab_family, "family or named method")->required();
  tab->add_option("params", tab_params, "family parameters");

  // convergence FAMILY --grid u[,u...] [--problem decay|sin]
  std::string conv_family, conv_problem = "decay";
  std::vector<std::string> conv_grid;
  auto* conv = app.add_subcommand("convergence", "empirical order on a test problem");
  conv->add_option("family", conv_family)->required();
  conv->add_option("--grid", conv_grid, "parameter points, two-parameter families as u:v")
      ->required()
      ->delimiter(',');
  conv->add_option("--problem", conv_problem, "decay | sin");

  auto add_common = [&](CLI::App* sub, bool with_checkpoint) {
    sub->add_option("--config", opts.config_path, "JSON config file");
    sub->add_option("--out", opts.out_root, "directory for run artifacts");
    sub->add_option("--seed", opts.seed, "override train.seed")
        ->each([&](const std::string&) { opts.seed_set = true; });
    sub->add_option("--jobs", opts.jobs, "worker threads for multi-run commands")
        ->check(CLI::PositiveNumber);
    if (with_checkpoint)
      sub->add_option("--checkpoint", opts.checkpoint_path, "reuse a trained model");
  };

  auto* train_cmd = app.add_subcommand("train", "train a model per the config");
  add_common(train_cmd, false);
  auto* usweep = app.add_subcommand("usweep", "robust accuracy across solver parameters");
  add_common(usweep, true);
  auto* compare = app.add_subcommand("compare", "train/evaluate the four schedules");
  add_common(compare, false);
  auto* ens = app.add_subcommand("ensemble-eval", "ensemble vs single-solver evaluation");
  add_common(ens, true);

  CLI11_PARSE(app, argc, argv);

  try {
    if (tab->parsed()) return rknode::cmd_tableau(tab_family, tab_params, std::cout);
    if (conv->parsed()) {
      std::vector<std::vector<double>> grid;
      for (const auto& cell : conv_grid) grid.push_back(parse_point(cell));
      return rknode::cmd_convergence(conv_family, grid, conv_problem, std::cout);
    }
    if (train_cmd->parsed()) return rknode::cmd_train(opts, std::cout);
    if (usweep->parsed()) return rknode::cmd_usweep(opts, std::cout);
    if (compare->parsed()) return rknode::cmd_compare(opts, std::cout);
    if (ens->parsed()) return rknode::cmd_ensemble_eval(opts, std::cout);
  } catch (const std::exception& e) {
    std::cerr << "rknode: error: " << e.what() << std::endl;
    return 1;
  }
  std::cerr << "rknode: error: no subcommand" << std::endl;
  return 1;
}
