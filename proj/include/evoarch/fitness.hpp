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
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "evoarch/data.hpp"
#include "evoarch/individual.hpp"
#include "evoarch/trainer.hpp"

namespace evoarch {

enum class EvaluatorKind { surrogate, trained };

std::string_view to_string(EvaluatorKind kind);
std::optional<EvaluatorKind> evaluator_from_string(std::string_view name);

/// 1 - exp(-(0.15c + 0.08s + 0.08n + 0.05p)) - 0.02 max(0, c - 12), clamped
/// to [0,1], where c, s, n count convolutions, skips and concats and p is
/// the pool count capped at c.
double evaluate_surrogate(const Genome& genome);

struct Evaluation {
  double fitness = 0.0;
  std::string note;
};

/// Validation accuracy after training from scratch; a diverging run
/// scores 0.
Evaluation evaluate_trained(const Genome& genome, const DatasetSplit& split,
                            const TrainPlan& plan);

class FitnessEvaluator {
 public:
  virtual ~FitnessEvaluator() = default;
  virtual EvaluatorKind kind() const = 0;
  /// Must be deterministic in (genome, seed) and safe to call from
  /// several threads at once.
  virtual Evaluation evaluate(const Genome& genome, std::uint64_t seed) const = 0;
};

class SurrogateEvaluator final : public FitnessEvaluator {
 public:
  EvaluatorKind kind() const override { return EvaluatorKind::surrogate; }
  Evaluation evaluate(const Genome& genome, std::uint64_t seed) const override;
};

class TrainedEvaluator final : public FitnessEvaluator {
 public:
  TrainedEvaluator(std::shared_ptr<const DatasetSplit> split, TrainPlan plan);
  EvaluatorKind kind() const override { return EvaluatorKind::trained; }
  /// The plan's seed is replaced by `seed`.
  Evaluation evaluate(const Genome& genome, std::uint64_t seed) const override;
  const TrainPlan& plan() const { return plan_; }

 private:
  std::shared_ptr<const DatasetSplit> split_;
  TrainPlan plan_;
};

std::uint64_t individual_seed(std::uint64_t run_seed, IndividualId id);

struct FitnessAuditEntry {
  IndividualId individual_id = 0;
  EvaluatorKind evaluator = EvaluatorKind::surrogate;
  double fitness = 0.0;
  double wall_seconds = 0.0;
  std::string note;
};

struct BatchEvaluationError : std::runtime_error {
  BatchEvaluationError(const std::string& what, std::vector<std::string> failures)
      : std::runtime_error(what), failures(std::move(failures)) {}
  std::vector<std::string> failures;
};

/// Fills in fitness for every unevaluated individual, using up to
/// `workers` threads. Each individual is evaluated under
/// individual_seed(run_seed, id), so results do not depend on scheduling.
/// Entries come back in population order.
std::vector<FitnessAuditEntry> evaluate_batch(Population& population,
                                              const FitnessEvaluator& evaluator, int workers,
                                              std::uint64_t run_seed);

}  // namespace evoarch
