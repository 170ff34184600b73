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

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "evoarch/engine.hpp"

namespace evoarch {

struct StrategyVariant {
  std::string label;
  SelectionConfig selection;
};

/// "aggressive" runs with the base k and threshold; baselines ignore k.
StrategyVariant make_variant(SelectionStrategy strategy, const SelectionConfig& base);
/// Aggressive selection labelled "k=<k>".
StrategyVariant k_variant(int k, int threshold);

struct ComparisonConfig {
  EvolutionConfig base;  // stop_on_saturation is forced off
  std::vector<StrategyVariant> variants;
  int n_seeds = 20;
  std::uint64_t first_seed = 0;
  double tau_fraction = 0.9;
  /// Fixed threshold; otherwise tau_fraction times the best fitness seen
  /// in any run.
  std::optional<double> tau;
};

struct RunTrace {
  std::string label;
  std::uint64_t seed = 0;
  std::vector<double> best_fitness;
  std::vector<std::int64_t> best_params;
  int generations_to_tau = 0;
};

struct VariantSummary {
  std::string label;
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  int reached = 0;  // runs that hit tau within the budget
  int runs = 0;
};

struct ComparisonResult {
  double tau = 0.0;
  double max_observed = 0.0;
  std::vector<RunTrace> runs;
  std::vector<VariantSummary> summary;
};

/// First generation whose best fitness reaches tau, or series.size() if
/// it never does (one past the last generation).
int generations_to_reach(const std::vector<double>& best_fitness, double tau);

/// Linear-interpolation quantile of unsorted values, q in [0,1].
double quantile(std::vector<double> values, double q);

ComparisonResult compare_strategies(const ComparisonConfig& config,
                                    const FitnessEvaluator& evaluator);

/// label,median,q1,q3,reached,runs
std::string summary_csv(const ComparisonResult& result);
/// generation, then one column per variant with the median best fitness.
std::string curves_csv(const ComparisonResult& result);

}  // namespace evoarch
