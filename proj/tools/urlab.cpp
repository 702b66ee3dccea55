// Copyright 2026 The urlab Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// urlab command-line front end.
//
// Exit codes: 0 success, 1 numerical violation or unmet expectation,
// 2 configuration error.

#include "urlab/scenario.hpp"

#include "CLI11.hpp"

#include <iostream>
#include <string>

namespace {

using namespace urlab::cli;

struct Flags {
  int jobs = 1;
  double tol_sat = 0.0;
  double floor = 0.0;
  std::string out = "urlab-out";
  std::string format;
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--jobs,-j", f.jobs, "worker threads")->check(CLI::PositiveNumber);
  cmd->add_option("--tol-sat", f.tol_sat, "saturation tolerance")->check(CLI::PositiveNumber);
  cmd->add_option("--floor", f.floor, "violation floor")->check(CLI::PositiveNumber);
  cmd->add_option("--out,-o", f.out, "output directory");
  cmd->add_option("--format", f.format, "table format")->check(CLI::IsMember({"csv", "json"}));
}

RunOptions to_options(const Flags& f, const CLI::App* cmd) {
  RunOptions o;
  o.jobs = f.jobs;
  if (cmd->count("--tol-sat")) o.tol_sat = f.tol_sat;
  if (cmd->count("--floor")) o.floor = f.floor;
  o.out = f.out;
  o.format = f.format;
  o.seed_override = env_seed();
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"urlab: evaluate quantum uncertainty relations"};
  app.require_subcommand(1);

  Flags flags;
  std::string config;

  auto* eval = app.add_subcommand("eval", "evaluate a scenario or replay a report");
  eval->add_option("config", config, "scenario TOML or report JSON")->required();
  add_common(eval, flags);

  auto* sweep = app.add_subcommand("sweep", "grid sweep over $variables of a scenario");
  sweep->add_option("config", config, "scenario TOML or report JSON")->required();
  add_common(sweep, flags);

  auto* minimize = app.add_subcommand("minimize", "minimize a relation margin over a state family");
  minimize->add_option("config", config, "scenario TOML or report JSON")->required();
  add_common(minimize, flags);

  LemmaFuzzOptions fuzz;
  auto* lemma = app.add_subcommand("lemma-fuzz", "random PSD tuples through the matrix inequalities");
  lemma->add_option("--n", fuzz.n, "matrix dimension")->check(CLI::Range(1, 8));
  lemma->add_option("--m", fuzz.m, "matrices per tuple")->check(CLI::Range(1, 8));
  lemma->add_option("--samples", fuzz.samples, "number of tuples")->check(CLI::NonNegativeNumber);
  lemma->add_option("--seed", fuzz.seed, "random seed");
  add_common(lemma, flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*eval) return run_eval(load_config(config), to_options(flags, eval));
    if (*sweep) return run_sweep(load_config(config), to_options(flags, sweep));
    if (*minimize) return run_minimize(load_config(config), to_options(flags, minimize));
    if (*lemma) return run_lemma_fuzz(fuzz, to_options(flags, lemma));
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const urlab::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitConfig;
}
