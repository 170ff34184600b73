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

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "evoarch/individual.hpp"
#include "evoarch/rng.hpp"

namespace evoarch {

enum class SelectionStrategy { aggressive, tournament, sample_uniform, sample_by_fitness };

std::string_view to_string(SelectionStrategy strategy);
std::optional<SelectionStrategy> strategy_from_string(std::string_view name);

struct SelectionConfig {
  int k = 1;
  int distance_threshold = 1;
  SelectionStrategy strategy = SelectionStrategy::aggressive;
};

struct UnevaluatedIndividual : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Total order used for ranking: higher fitness, then fewer parameters,
/// then lower id.
bool ranks_before(const Individual& a, const Individual& b);

/// A population sorted best-first. Only `rank` constructs one.
class RankedPopulation {
 public:
  const Population& members() const { return members_; }
  std::size_t size() const { return members_.size(); }
  const Individual& operator[](std::size_t i) const { return members_[i]; }

 private:
  friend RankedPopulation rank(Population population);
  Population members_;
};

RankedPopulation rank(Population population);

/// Greedy top-k scan that admits an individual only if its genome distance
/// to every admitted one exceeds `threshold`. If fewer than k pass, the
/// best-ranked rejects fill the remaining slots. Output is in rank order.
Population aggressive_select(const RankedPopulation& ranked, int k, int threshold);

/// Fitter of two distinct uniformly drawn individuals.
Individual tournament_select(const Population& population, Rng& rng);

Population sample_uniform_select(const Population& population, Rng& rng, int k);
/// Roulette draws without replacement; all-zero fitness degrades to uniform.
Population sample_by_fitness_select(const Population& population, Rng& rng, int k);

/// Each selected individual is cloned floor(P/k) times and the first
/// P mod k (best-ranked) get one extra copy. `selected` must be in rank order.
Population clone_refill(const Population& selected, int population_size,
                        IdAllocator& ids, int generation);

}  // namespace evoarch
