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

#include "evoarch/fitness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <thread>

namespace evoarch {

std::string_view to_string(EvaluatorKind kind) {
  return kind == EvaluatorKind::surrogate ? "surrogate" : "trained";
}

std::optional<EvaluatorKind> evaluator_from_string(std::string_view name) {
  if (name == "surrogate") return EvaluatorKind::surrogate;
  if (name == "trained") return EvaluatorKind::trained;
  return std::nullopt;
}

double evaluate_surrogate(const Genome& genome) {
  const auto c = static_cast<double>(genome.nodes_of(LayerType::convolution).size());
  const auto s = static_cast<double>(genome.nodes_of(LayerType::skip).size());
  const auto n = static_cast<double>(genome.nodes_of(LayerType::concat).size());
  const auto p = std::min(static_cast<double>(genome.nodes_of(LayerType::max_pool).size()), c);
  const double raw =
      1.0 - std::exp(-(0.15 * c + 0.08 * s + 0.08 * n + 0.05 * p)) - 0.02 * std::max(0.0, c - 12.0);
  return std::clamp(raw, 0.0, 1.0);
}

Evaluation evaluate_trained(const Genome& genome, const DatasetSplit& split,
                            const TrainPlan& plan) {
  try {
    return {train(genome, split, plan).validation_accuracy, ""};
  } catch (const DivergedTraining& e) {
    return {0.0, std::string("diverged: ") + e.what()};
  }
}

Evaluation SurrogateEvaluator::evaluate(const Genome& genome, std::uint64_t) const {
  return {evaluate_surrogate(genome), ""};
}

TrainedEvaluator::TrainedEvaluator(std::shared_ptr<const DatasetSplit> split, TrainPlan plan)
    : split_(std::move(split)), plan_(plan) {
  if (!split_) throw std::invalid_argument("trained evaluator needs a dataset");
  plan_.check();
}

Evaluation TrainedEvaluator::evaluate(const Genome& genome, std::uint64_t seed) const {
  TrainPlan plan = plan_;
  plan.seed = seed;
  return evaluate_trained(genome, *split_, plan);
}

std::uint64_t individual_seed(std::uint64_t run_seed, IndividualId id) {
  return mix_seed(run_seed, id);
}

std::vector<FitnessAuditEntry> evaluate_batch(Population& population,
                                              const FitnessEvaluator& evaluator, int workers,
                                              std::uint64_t run_seed) {
  if (workers < 1) throw std::invalid_argument("worker budget must be at least 1");
  std::vector<std::size_t> todo;
  for (std::size_t i = 0; i < population.size(); ++i) {
    if (!population[i].evaluated()) todo.push_back(i);
  }
  std::vector<FitnessAuditEntry> entries(todo.size());
  std::vector<std::string> errors(todo.size());
  std::atomic<std::size_t> cursor{0};

  auto work = [&] {
    for (std::size_t t = cursor++; t < todo.size(); t = cursor++) {
      const Individual& individual = population[todo[t]];
      const auto start = std::chrono::steady_clock::now();
      try {
        const Evaluation e =
            evaluator.evaluate(individual.genome(), individual_seed(run_seed, individual.id()));
        entries[t].fitness = std::clamp(e.fitness, 0.0, 1.0);
        entries[t].note = e.note;
      } catch (const std::exception& e) {
        errors[t] = "individual " + std::to_string(individual.id()) + ": " + e.what();
      }
      entries[t].individual_id = individual.id();
      entries[t].evaluator = evaluator.kind();
      entries[t].wall_seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
  };

  const auto threads = std::min<std::size_t>(static_cast<std::size_t>(workers), todo.size());
  if (threads <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < threads; ++i) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }

  std::vector<std::string> failures;
  for (const auto& e : errors) {
    if (!e.empty()) failures.push_back(e);
  }
  if (!failures.empty()) {
    const std::string what =
        std::to_string(failures.size()) + " evaluation(s) failed; first: " + failures.front();
    throw BatchEvaluationError(what, std::move(failures));
  }
  for (std::size_t t = 0; t < todo.size(); ++t) {
    population[todo[t]].set_fitness(entries[t].fitness);
  }
  return entries;
}

}  // namespace evoarch
