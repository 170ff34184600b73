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

#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "evoarch/fitness.hpp"
#include "evoarch/individual.hpp"
#include "evoarch/mutation.hpp"
#include "evoarch/selection.hpp"
#include "evoarch/trainer.hpp"

namespace evoarch {

struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct CheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EvolutionConfig {
  int population_size = 10;
  SelectionConfig selection;
  /// Generations 1..early_stage_generations sample with the early weights.
  int early_stage_generations = 10;
  int max_generations = 100;
  int saturation_window = 10;
  double saturation_epsilon = 1e-3;
  bool stop_on_saturation = true;
  std::uint64_t seed = 0;
  int max_retries = kDefaultMaxRetries;
  int workers = 1;
  TensorShape input_shape{3, 32, 32, true};
  int num_classes = 10;
  MutationMenus menus;
  EvaluatorKind evaluator = EvaluatorKind::surrogate;
  TrainPlan plan;
  /// Write a checkpoint every this many generations (0 = never).
  int checkpoint_interval = 0;

  /// Throws ConfigError.
  void check() const;
};

std::string config_to_json(const EvolutionConfig& config);
EvolutionConfig config_from_json(std::string_view text);

struct GenerationStats {
  int generation = 0;
  double best_fitness = 0.0;
  double mean_fitness = 0.0;
  IndividualId best_id = 0;
  std::int64_t best_params = 0;
  std::vector<IndividualId> selected_ids;
  double wall_seconds = 0.0;
};

struct EvolutionState {
  int generation = 0;
  Population population;
  IdAllocator ids;
  Rng rng;
  std::vector<GenerationStats> history;
};

/// Appends JSON-lines audit records to a run directory. A default-constructed
/// recorder discards everything.
class RunRecorder {
 public:
  RunRecorder() = default;
  explicit RunRecorder(const std::filesystem::path& dir, bool append = false);

  bool active() const { return active_; }
  void mutation(const std::string& line);
  void selection(const std::string& line);
  void fitness(const std::string& line);
  void timing(int generation, double wall_seconds);

 private:
  bool active_ = false;
  std::ofstream mutation_;
  std::ofstream selection_;
  std::ofstream fitness_;
  std::ofstream timing_;
};

/// Alternating global_pool / fully_connected seeds with ids 0..P-1, all
/// unevaluated.
Population init_population(const EvolutionConfig& config, IdAllocator& ids);

/// Seeds, evaluates, and records generation 0.
EvolutionState initial_state(const EvolutionConfig& config, const FitnessEvaluator& evaluator,
                             RunRecorder& recorder);

/// One mutate / evaluate / select / clone cycle.
GenerationStats step_generation(EvolutionState& state, const EvolutionConfig& config,
                                const FitnessEvaluator& evaluator, RunRecorder& recorder);

/// Best fitness over the last W generations improved by less than epsilon.
bool saturated(const std::vector<GenerationStats>& history, int window, double epsilon);

struct EvolutionResult {
  Individual best;
  std::vector<GenerationStats> history;
  EvolutionState state;
  bool saturated = false;
};

/// Runs from generation 0, or continues `resume` when given. With an
/// output directory, writes config.json, stats.csv, timing.csv,
/// best_genome.json, audit logs and any checkpoints there.
EvolutionResult run(const EvolutionConfig& config, const FitnessEvaluator& evaluator,
                    const std::optional<std::filesystem::path>& out_dir = std::nullopt,
                    std::optional<EvolutionState> resume = std::nullopt);

inline constexpr int kCheckpointVersion = 1;

void checkpoint_save(const EvolutionState& state, const EvolutionConfig& config,
                     const std::filesystem::path& path);

struct Checkpoint {
  EvolutionState state;
  EvolutionConfig config;
};
Checkpoint checkpoint_load(const std::filesystem::path& path);

/// generation,best_fitness,mean_fitness,best_params,best_id
std::string stats_csv(const std::vector<GenerationStats>& history);

const Individual& best_of(const Population& population);

}  // namespace evoarch
