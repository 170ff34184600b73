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

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "evoarch/genome.hpp"
#include "evoarch/individual.hpp"
#include "evoarch/mutation.hpp"
#include "evoarch/rng.hpp"

namespace evoarch::testing {

/// A seed genome pushed through up to `max_steps` accepted mutations.
inline Genome random_genome(Rng& rng, int max_steps = 12,
                            TensorShape shape = TensorShape{3, 32, 32, true}) {
  const auto kind = uniform_index(rng, 2) == 0 ? SeedKind::global_pool : SeedKind::fully_connected;
  Genome genome = new_seed_genome(kind, shape, 10);
  const int steps = static_cast<int>(uniform_index(rng, static_cast<std::size_t>(max_steps) + 1));
  for (int i = 0; i < steps; ++i) {
    const auto stage = uniform_index(rng, 2) == 0 ? EvolutionStage::early : EvolutionStage::late;
    try {
      genome = mutate_until_valid(genome, MutationWeights::for_stage(stage), rng).genome;
    } catch (const ExhaustedRetries&) {
    }
  }
  return genome;
}

// Oracles below deliberately avoid the library's own graph helpers.

inline char oracle_symbol(const NodeKind& kind) {
  static const char symbols[] = {'I', 'C', 'P', 'F', 'D', 'S', 'K', 'G', 'H'};
  return symbols[kind.index()];
}

/// Kahn's algorithm, smallest ready id first.
inline std::string oracle_sequence(const Genome& g) {
  std::map<NodeId, int> indegree;
  std::map<NodeId, std::vector<NodeId>> out;
  for (const auto& [id, node] : g.nodes()) {
    indegree[id] += 0;
    for (NodeId src : node.inputs) {
      ++indegree[id];
      out[src].push_back(id);
    }
  }
  std::set<NodeId> ready;
  for (const auto& [id, d] : indegree) {
    if (d == 0) ready.insert(id);
  }
  std::string seq;
  while (!ready.empty()) {
    const NodeId id = *ready.begin();
    ready.erase(ready.begin());
    seq.push_back(oracle_symbol(g.node(id).kind));
    for (NodeId dst : out[id]) {
      if (--indegree[dst] == 0) ready.insert(dst);
    }
  }
  return seq;
}

inline std::size_t oracle_hamming(const std::string& a, const std::string& b) {
  const std::size_t n = std::max(a.size(), b.size());
  std::size_t d = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const char x = i < a.size() ? a[i] : ' ';
    const char y = i < b.size() ? b[i] : ' ';
    if (x != y) ++d;
  }
  return d;
}

/// Sort by (fitness desc, params asc, id asc), admit greedily while every
/// pairwise distance exceeds the threshold, top up from the rest in rank
/// order, report in rank order.
inline std::vector<IndividualId> oracle_aggressive(std::vector<Individual> pop, int k,
                                                   int threshold) {
  std::sort(pop.begin(), pop.end(), [](const Individual& a, const Individual& b) {
    if (*a.fitness() != *b.fitness()) return *a.fitness() > *b.fitness();
    if (a.params() != b.params()) return a.params() < b.params();
    return a.id() < b.id();
  });
  const std::size_t want = std::min<std::size_t>(static_cast<std::size_t>(k), pop.size());
  std::vector<bool> take(pop.size(), false);
  std::size_t taken = 0;
  for (std::size_t j = 0; j < pop.size() && taken < want; ++j) {
    bool ok = true;
    for (std::size_t i = 0; i < j; ++i) {
      if (take[i] && oracle_hamming(oracle_sequence(pop[i].genome()),
                                    oracle_sequence(pop[j].genome())) <=
                         static_cast<std::size_t>(threshold)) {
        ok = false;
      }
    }
    if (ok) {
      take[j] = true;
      ++taken;
    }
  }
  for (std::size_t j = 0; j < pop.size() && taken < want; ++j) {
    if (!take[j]) {
      take[j] = true;
      ++taken;
    }
  }
  std::vector<IndividualId> ids;
  for (std::size_t j = 0; j < pop.size(); ++j) {
    if (take[j]) ids.push_back(pop[j].id());
  }
  return ids;
}

}  // namespace evoarch::testing
