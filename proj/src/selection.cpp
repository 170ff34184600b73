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

#include "evoarch/selection.hpp"

#include <algorithm>
#include <array>

namespace evoarch {

namespace {

constexpr std::array<std::string_view, 4> kStrategyNames = {
    "aggressive", "tournament", "sample_uniform", "sample_by_fitness"};

double fitness_of(const Individual& individual) {
  if (!individual.fitness()) {
    throw UnevaluatedIndividual("individual " + std::to_string(individual.id()) +
                                " has no fitness");
  }
  return *individual.fitness();
}

}  // namespace

std::string_view to_string(SelectionStrategy strategy) {
  return kStrategyNames[static_cast<std::size_t>(strategy)];
}

std::optional<SelectionStrategy> strategy_from_string(std::string_view name) {
  for (std::size_t i = 0; i < kStrategyNames.size(); ++i) {
    if (kStrategyNames[i] == name) return static_cast<SelectionStrategy>(i);
  }
  return std::nullopt;
}

bool ranks_before(const Individual& a, const Individual& b) {
  const double fa = fitness_of(a);
  const double fb = fitness_of(b);
  if (fa != fb) return fa > fb;
  if (a.params() != b.params()) return a.params() < b.params();
  return a.id() < b.id();
}

RankedPopulation rank(Population population) {
  for (const auto& individual : population) fitness_of(individual);
  std::sort(population.begin(), population.end(), ranks_before);
  RankedPopulation ranked;
  ranked.members_ = std::move(population);
  return ranked;
}

Population aggressive_select(const RankedPopulation& ranked, int k, int threshold) {
  if (k < 1) throw std::invalid_argument("k must be at least 1");
  const std::size_t target = std::min<std::size_t>(k, ranked.size());
  std::vector<std::string> sequences;
  sequences.reserve(ranked.size());
  for (const auto& individual : ranked.members()) {
    sequences.push_back(canonical_node_sequence(individual.genome()));
  }

  std::vector<bool> chosen(ranked.size(), false);
  std::vector<std::size_t> admitted;
  for (std::size_t j = 0; j < ranked.size() && admitted.size() < target; ++j) {
    bool far_enough = true;
    for (std::size_t i : admitted) {
      if (hamming_distance(sequences[i], sequences[j]) <=
          static_cast<std::size_t>(threshold)) {
        far_enough = false;
        break;
      }
    }
    if (far_enough) {
      admitted.push_back(j);
      chosen[j] = true;
    }
  }
  for (std::size_t j = 0; j < ranked.size() && admitted.size() < target; ++j) {
    if (!chosen[j]) {
      admitted.push_back(j);
      chosen[j] = true;
    }
  }

  Population out;
  for (std::size_t j = 0; j < ranked.size(); ++j) {
    if (chosen[j]) out.push_back(ranked[j]);
  }
  return out;
}

Individual tournament_select(const Population& population, Rng& rng) {
  if (population.size() < 2) {
    throw std::invalid_argument("tournament needs at least two individuals");
  }
  const std::size_t first = uniform_index(rng, population.size());
  std::size_t second = uniform_index(rng, population.size() - 1);
  if (second >= first) ++second;
  const Individual& a = population[first];
  const Individual& b = population[second];
  return ranks_before(a, b) ? a : b;
}

Population sample_uniform_select(const Population& population, Rng& rng, int k) {
  if (k < 0 || static_cast<std::size_t>(k) > population.size()) {
    throw std::invalid_argument("cannot draw " + std::to_string(k) +
                                " individuals without replacement from " +
                                std::to_string(population.size()));
  }
  std::vector<std::size_t> pool(population.size());
  for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i;
  Population out;
  for (int draw = 0; draw < k; ++draw) {
    const std::size_t slot = uniform_index(rng, pool.size());
    out.push_back(population[pool[slot]]);
    pool.erase(pool.begin() + static_cast<long>(slot));
  }
  return out;
}

Population sample_by_fitness_select(const Population& population, Rng& rng, int k) {
  if (k < 0 || static_cast<std::size_t>(k) > population.size()) {
    throw std::invalid_argument("cannot draw " + std::to_string(k) +
                                " individuals without replacement from " +
                                std::to_string(population.size()));
  }
  std::vector<std::size_t> pool(population.size());
  for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i;
  Population out;
  for (int draw = 0; draw < k; ++draw) {
    double total = 0.0;
    for (std::size_t i : pool) total += fitness_of(population[i]);
    std::size_t slot = 0;
    if (total > 0.0) {
      double target = uniform_real(rng) * total;
      slot = pool.size() - 1;
      for (std::size_t s = 0; s < pool.size(); ++s) {
        const double f = fitness_of(population[pool[s]]);
        if (f <= 0.0) continue;
        target -= f;
        if (target < 0.0) {
          slot = s;
          break;
        }
      }
      // Rounding can leave the walk at a zero-fitness tail entry.
      while (fitness_of(population[pool[slot]]) <= 0.0 && slot > 0) --slot;
    } else {
      slot = uniform_index(rng, pool.size());
    }
    out.push_back(population[pool[slot]]);
    pool.erase(pool.begin() + static_cast<long>(slot));
  }
  return out;
}

Population clone_refill(const Population& selected, int population_size,
                        IdAllocator& ids, int generation) {
  const int k = static_cast<int>(selected.size());
  if (k < 1 || k > population_size) {
    throw std::invalid_argument("clone_refill needs 1 <= |selected| <= population size");
  }
  const int base = population_size / k;
  const int extra = population_size % k;
  Population out;
  out.reserve(population_size);
  for (int i = 0; i < k; ++i) {
    const int copies = base + (i < extra ? 1 : 0);
    for (int c = 0; c < copies; ++c) {
      out.push_back(selected[i].clone_as(ids.next(), generation));
    }
  }
  return out;
}

}  // namespace evoarch
