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
#include <vector>

#include "evoarch/genome.hpp"

namespace evoarch {

using IndividualId = std::uint64_t;

/// A genome plus the bookkeeping evolution needs. The genome is shared and
/// immutable, so clones are cheap.
class Individual {
 public:
  Individual(IndividualId id, std::shared_ptr<const Genome> genome,
             int born_generation,
             std::optional<IndividualId> parent_id = std::nullopt)
      : id_(id),
        genome_(std::move(genome)),
        born_generation_(born_generation),
        parent_id_(parent_id),
        params_(parameter_count(*genome_)) {}

  IndividualId id() const { return id_; }
  const Genome& genome() const { return *genome_; }
  const std::shared_ptr<const Genome>& genome_ptr() const { return genome_; }
  int born_generation() const { return born_generation_; }
  std::optional<IndividualId> parent_id() const { return parent_id_; }
  std::int64_t params() const { return params_; }

  std::optional<double> fitness() const { return fitness_; }
  bool evaluated() const { return fitness_.has_value(); }

  /// Fitness is write-once.
  void set_fitness(double value) {
    if (fitness_) {
      throw std::logic_error("fitness of individual " + std::to_string(id_) +
                             " is already set");
    }
    fitness_ = value;
  }

  /// A copy under a fresh id that remembers its parent and keeps the
  /// memoized fitness.
  Individual clone_as(IndividualId id, int generation) const {
    Individual copy(id, genome_, generation, id_);
    copy.fitness_ = fitness_;
    return copy;
  }

 private:
  IndividualId id_;
  std::shared_ptr<const Genome> genome_;
  int born_generation_;
  std::optional<IndividualId> parent_id_;
  std::int64_t params_;
  std::optional<double> fitness_;
};

using Population = std::vector<Individual>;

class IdAllocator {
 public:
  explicit IdAllocator(IndividualId next = 0) : next_(next) {}
  IndividualId next() { return next_++; }
  IndividualId peek() const { return next_; }

 private:
  IndividualId next_;
};

}  // namespace evoarch
