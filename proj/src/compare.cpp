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

#include "evoarch/compare.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace evoarch {

StrategyVariant make_variant(SelectionStrategy strategy, const SelectionConfig& base) {
  SelectionConfig selection = base;
  selection.strategy = strategy;
  return {std::string(to_string(strategy)), selection};
}

StrategyVariant k_variant(int k, int threshold) {
  return {"k=" + std::to_string(k), SelectionConfig{k, threshold, SelectionStrategy::aggressive}};
}

int generations_to_reach(const std::vector<double>& best_fitness, double tau) {
  for (std::size_t g = 0; g < best_fitness.size(); ++g) {
    if (best_fitness[g] >= tau) return static_cast<int>(g);
  }
  return static_cast<int>(best_fitness.size());
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("quantile of an empty set");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

ComparisonResult compare_strategies(const ComparisonConfig& config,
                                    const FitnessEvaluator& evaluator) {
  if (config.n_seeds < 1) throw ConfigError("need at least one seed");
  if (config.variants.empty()) throw ConfigError("no strategies to compare");
  ComparisonResult result;
  for (const auto& variant : config.variants) {
    for (int s = 0; s < config.n_seeds; ++s) {
      EvolutionConfig run_config = config.base;
      run_config.selection = variant.selection;
      run_config.stop_on_saturation = false;
      run_config.seed = config.first_seed + static_cast<std::uint64_t>(s);
      const EvolutionResult run_result = run(run_config, evaluator);
      RunTrace trace;
      trace.label = variant.label;
      trace.seed = run_config.seed;
      for (const auto& stats : run_result.history) {
        trace.best_fitness.push_back(stats.best_fitness);
        trace.best_params.push_back(stats.best_params);
        result.max_observed = std::max(result.max_observed, stats.best_fitness);
      }
      result.runs.push_back(std::move(trace));
    }
  }
  result.tau = config.tau ? *config.tau : config.tau_fraction * result.max_observed;

  for (const auto& variant : config.variants) {
    std::vector<double> generations;
    VariantSummary summary;
    summary.label = variant.label;
    for (auto& trace : result.runs) {
      if (trace.label != variant.label) continue;
      trace.generations_to_tau = generations_to_reach(trace.best_fitness, result.tau);
      generations.push_back(trace.generations_to_tau);
      if (trace.generations_to_tau < static_cast<int>(trace.best_fitness.size())) {
        ++summary.reached;
      }
      ++summary.runs;
    }
    summary.median = quantile(generations, 0.5);
    summary.q1 = quantile(generations, 0.25);
    summary.q3 = quantile(generations, 0.75);
    result.summary.push_back(summary);
  }
  return result;
}

std::string summary_csv(const ComparisonResult& result) {
  std::string out = "label,median,q1,q3,reached,runs,tau\n";
  char line[200];
  for (const auto& s : result.summary) {
    std::snprintf(line, sizeof line, "%s,%.2f,%.2f,%.2f,%d,%d,%.10f\n", s.label.c_str(),
                  s.median, s.q1, s.q3, s.reached, s.runs, result.tau);
    out += line;
  }
  return out;
}

std::string curves_csv(const ComparisonResult& result) {
  std::size_t length = 0;
  for (const auto& r : result.runs) length = std::max(length, r.best_fitness.size());
  std::string out = "generation";
  for (const auto& s : result.summary) out += "," + s.label;
  out += "\n";
  char cell[48];
  for (std::size_t g = 0; g < length; ++g) {
    out += std::to_string(g);
    for (const auto& s : result.summary) {
      std::vector<double> values;
      for (const auto& r : result.runs) {
        if (r.label == s.label && !r.best_fitness.empty()) {
          values.push_back(r.best_fitness[std::min(g, r.best_fitness.size() - 1)]);
        }
      }
      std::snprintf(cell, sizeof cell, ",%.6f", quantile(values, 0.5));
      out += cell;
    }
    out += "\n";
  }
  return out;
}

}  // namespace evoarch
