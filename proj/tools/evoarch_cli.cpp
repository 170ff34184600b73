// Copyright 2026 The Evoarch Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "evoarch/compare.hpp"
#include "evoarch/engine.hpp"
#include "evoarch/gradcheck.hpp"

namespace fs = std::filesystem;
using namespace evoarch;

namespace {

constexpr int kOk = 0;
constexpr int kConfigFailure = 1;
constexpr int kDataFailure = 2;

struct DataFlags {
  std::string fitness = "surrogate";
  std::string dataset = "cifar10";
  std::string data_dir;
  std::size_t subset = 0;
  int iters = 600;
};

void add_data_flags(CLI::App* cmd, DataFlags& f) {
  cmd->add_option("--fitness", f.fitness, "Fitness evaluator")
      ->check(CLI::IsMember({"surrogate", "trained"}));
  cmd->add_option("--dataset", f.dataset, "Dataset (also fixes the input shape)")
      ->check(CLI::IsMember({"mnist", "cifar10"}));
  cmd->add_option("--data-dir", f.data_dir,
                  "Dataset root; defaults to $EVOARCH_DATA_DIR, then ./data");
  cmd->add_option("--subset", f.subset, "Use only the first N training images (0 = all)");
  cmd->add_option("--iters", f.iters, "Training iterations per individual");
}

TensorShape dataset_shape(const std::string& dataset) {
  return dataset == "mnist" ? TensorShape{1, 28, 28, true} : TensorShape{3, 32, 32, true};
}

fs::path data_root(const DataFlags& f) {
  if (!f.data_dir.empty()) return f.data_dir;
  if (const char* env = std::getenv("EVOARCH_DATA_DIR"); env && *env) return env;
  return "data";
}

std::unique_ptr<FitnessEvaluator> make_evaluator(const DataFlags& f, std::uint64_t seed) {
  if (f.fitness == "surrogate") return std::make_unique<SurrogateEvaluator>();
  std::optional<std::size_t> subset;
  if (f.subset > 0) subset = f.subset;
  const fs::path root = data_root(f);
  auto split = std::make_shared<const DatasetSplit>(
      f.dataset == "mnist" ? load_mnist_split(root, 0.1, seed, subset)
                           : load_cifar10_split(root, 0.1, seed, subset));
  std::fprintf(stderr, "loaded %s: %zu train / %zu validation images\n", f.dataset.c_str(),
               split->train.size(), split->validation.size());
  return std::make_unique<TrainedEvaluator>(split, TrainPlan::desk(f.iters));
}

Genome read_genome(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  std::stringstream text;
  text << in.rdbuf();
  return deserialize(text.str());
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream in(text);
  for (std::string item; std::getline(in, item, ',');) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Evolutionary search over convolutional network topologies"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);

  // evolve
  DataFlags evolve_data;
  EvolutionConfig evolve;
  std::string strategy = "aggressive";
  std::string evolve_out = "runs/evolve";
  std::string resume_path;
  auto* cmd_evolve = app.add_subcommand("evolve", "Run one evolution");
  add_data_flags(cmd_evolve, evolve_data);
  cmd_evolve->add_option("--k", evolve.selection.k, "Survivors per generation");
  cmd_evolve->add_option("--population", evolve.population_size, "Population size");
  cmd_evolve->add_option("--threshold", evolve.selection.distance_threshold,
                         "Minimum genome distance between survivors (exclusive)");
  cmd_evolve->add_option("--strategy", strategy, "Selection strategy")
      ->check(CLI::IsMember({"aggressive", "tournament", "sample_uniform", "sample_by_fitness"}));
  cmd_evolve->add_option("--generations", evolve.max_generations, "Maximum generations");
  cmd_evolve->add_option("--early-generations", evolve.early_stage_generations,
                         "Generations using the boosted mutation weights");
  cmd_evolve->add_option("--window", evolve.saturation_window, "Saturation window W");
  cmd_evolve->add_option("--epsilon", evolve.saturation_epsilon, "Saturation threshold");
  cmd_evolve->add_flag("!--no-saturation-stop", evolve.stop_on_saturation,
                       "Run all generations even after saturation");
  cmd_evolve->add_option("--seed", evolve.seed, "Run seed");
  cmd_evolve->add_option("--workers", evolve.workers, "Parallel fitness evaluations");
  cmd_evolve->add_option("--checkpoint-every", evolve.checkpoint_interval,
                         "Checkpoint interval in generations (0 = off)");
  cmd_evolve->add_option("--resume", resume_path, "Continue from a checkpoint file");
  cmd_evolve->add_option("--out-dir", evolve_out, "Run directory");

  // compare-selection
  DataFlags compare_data;
  ComparisonConfig compare;
  compare.base.max_generations = 100;
  std::string strategies = "aggressive,tournament,sample_uniform,sample_by_fitness";
  std::string k_sweep;
  std::string compare_out = "runs/compare";
  auto* cmd_compare = app.add_subcommand("compare-selection", "Race selection strategies");
  add_data_flags(cmd_compare, compare_data);
  cmd_compare->add_option("--strategies", strategies, "Comma-separated strategy names");
  cmd_compare->add_option("--k-sweep", k_sweep,
                          "Comma-separated k values for aggressive selection (replaces --strategies)");
  cmd_compare->add_option("--k", compare.base.selection.k, "k for the aggressive strategy");
  cmd_compare->add_option("--threshold", compare.base.selection.distance_threshold,
                          "Distance threshold for aggressive selection");
  cmd_compare->add_option("--population", compare.base.population_size, "Population size");
  cmd_compare->add_option("--generations", compare.base.max_generations,
                          "Generations per run");
  cmd_compare->add_option("--seeds", compare.n_seeds, "Runs per strategy");
  cmd_compare->add_option("--seed", compare.first_seed, "First run seed");
  cmd_compare->add_option("--workers", compare.base.workers, "Parallel fitness evaluations");
  cmd_compare->add_option("--out-dir", compare_out, "Output directory");

  // export-dot
  std::string dot_genome;
  auto* cmd_dot = app.add_subcommand("export-dot", "Print a genome as Graphviz DOT");
  cmd_dot->add_option("genome", dot_genome, "Genome JSON file")->required();

  // eval-genome
  std::string eval_genome;
  DataFlags eval_data;
  std::uint64_t eval_seed = 0;
  auto* cmd_eval = app.add_subcommand("eval-genome", "Score one genome");
  cmd_eval->add_option("genome", eval_genome, "Genome JSON file")->required();
  add_data_flags(cmd_eval, eval_data);
  cmd_eval->add_option("--seed", eval_seed, "Training seed");

  // grad-check
  std::uint64_t grad_seed = 0;
  int composites = 20;
  bool grad_verbose = false;
  auto* cmd_grad = app.add_subcommand("grad-check", "Finite-difference check of backprop");
  cmd_grad->add_option("--seed", grad_seed, "Seed for genomes and inputs");
  cmd_grad->add_option("--composites", composites, "Random composite genomes to check");
  cmd_grad->add_flag("--verbose", grad_verbose, "Print every case");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigFailure;
  }

  try {
    if (*cmd_evolve) {
      evolve.selection.strategy = *strategy_from_string(strategy);
      evolve.input_shape = dataset_shape(evolve_data.dataset);
      evolve.evaluator = *evaluator_from_string(evolve_data.fitness);
      evolve.plan = TrainPlan::desk(evolve_data.iters);
      std::optional<EvolutionState> resume;
      if (!resume_path.empty()) {
        Checkpoint cp = checkpoint_load(resume_path);
        const int generations = evolve.max_generations;
        const int workers = evolve.workers;
        evolve = cp.config;
        evolve.max_generations = generations;
        evolve.workers = workers;
        resume = std::move(cp.state);
      }
      evolve.check();
      const auto evaluator = make_evaluator(evolve_data, evolve.seed);
      const EvolutionResult result = run(evolve, *evaluator, fs::path(evolve_out), std::move(resume));
      std::printf("generations=%d saturated=%d\n", result.state.generation,
                  result.saturated ? 1 : 0);
      std::printf("best_fitness=%.6f\n", *result.best.fitness());
      std::printf("best_params=%lld\n", static_cast<long long>(result.best.params()));
      std::printf("best_genome=%s\n", (fs::path(evolve_out) / "best_genome.json").c_str());
      return kOk;
    }

    if (*cmd_compare) {
      compare.base.input_shape = dataset_shape(compare_data.dataset);
      compare.base.evaluator = *evaluator_from_string(compare_data.fitness);
      compare.base.plan = TrainPlan::desk(compare_data.iters);
      if (!k_sweep.empty()) {
        for (const auto& item : split_list(k_sweep)) {
          int k = 0;
          try {
            k = std::stoi(item);
          } catch (const std::exception&) {
            throw ConfigError("bad k value '" + item + "'");
          }
          compare.variants.push_back(k_variant(k, compare.base.selection.distance_threshold));
        }
      } else {
        for (const auto& name : split_list(strategies)) {
          const auto s = strategy_from_string(name);
          if (!s) throw ConfigError("unknown strategy '" + name + "'");
          compare.variants.push_back(make_variant(*s, compare.base.selection));
        }
      }
      for (const auto& v : compare.variants) {
        EvolutionConfig probe = compare.base;
        probe.selection = v.selection;
        probe.check();
      }
      const auto evaluator = make_evaluator(compare_data, compare.first_seed);
      const ComparisonResult result = compare_strategies(compare, *evaluator);
      fs::create_directories(compare_out);
      write_file(fs::path(compare_out) / "summary.csv", summary_csv(result));
      write_file(fs::path(compare_out) / "curves.csv", curves_csv(result));
      std::printf("%s", summary_csv(result).c_str());
      return kOk;
    }

    if (*cmd_dot) {
      std::printf("%s", to_dot(read_genome(dot_genome)).c_str());
      return kOk;
    }

    if (*cmd_eval) {
      const Genome genome = read_genome(eval_genome);
      const auto evaluator = make_evaluator(eval_data, eval_seed);
      const Evaluation e = evaluator->evaluate(genome, eval_seed);
      std::printf("%.6f\n", e.fitness);
      if (!e.note.empty()) std::fprintf(stderr, "%s\n", e.note.c_str());
      return kOk;
    }

    if (*cmd_grad) {
      const GradCheckReport report = run_gradient_suite(grad_seed, composites);
      if (grad_verbose) {
        for (const auto& c : report.cases) {
          std::printf("%-40s entries=%zu kinks=%zu max_rel_err=%.3e\n", c.name.c_str(),
                      c.entries, c.kinks, c.max_rel_err);
        }
      }
      std::printf("cases=%zu entries=%zu kinks_skipped=%zu\n", report.cases.size(),
                  report.entries, report.kinks);
      std::printf("max_rel_err=%.3e\n", report.max_rel_err);
      return report.passed(1e-4) ? kOk : kConfigFailure;
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kConfigFailure;
  } catch (const DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kDataFailure;
  } catch (const ParseError& e) {
    std::fprintf(stderr, "parse error: %s\n", e.what());
    return kDataFailure;
  } catch (const CheckpointError& e) {
    std::fprintf(stderr, "checkpoint error: %s\n", e.what());
    return kDataFailure;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kConfigFailure;
  }
  return kOk;
}
