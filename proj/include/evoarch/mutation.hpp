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

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "evoarch/genome.hpp"
#include "evoarch/rng.hpp"

namespace evoarch {

enum class MutationKind {
  add_convolution,
  remove_convolution,
  alter_channel_number,
  alter_filter_size,
  alter_stride,
  add_dropout,
  remove_dropout,
  add_pooling,
  remove_pooling,
  add_skip,
  remove_skip,
  add_concatenate,
  remove_concatenate,
  add_fully_connected,
  remove_fully_connected,
};

inline constexpr std::size_t kMutationKinds = 15;

inline constexpr std::array<MutationKind, kMutationKinds> kAllMutations = {
    MutationKind::add_convolution,      MutationKind::remove_convolution,
    MutationKind::alter_channel_number, MutationKind::alter_filter_size,
    MutationKind::alter_stride,         MutationKind::add_dropout,
    MutationKind::remove_dropout,       MutationKind::add_pooling,
    MutationKind::remove_pooling,       MutationKind::add_skip,
    MutationKind::remove_skip,          MutationKind::add_concatenate,
    MutationKind::remove_concatenate,   MutationKind::add_fully_connected,
    MutationKind::remove_fully_connected};

std::string_view to_string(MutationKind kind);
std::optional<MutationKind> mutation_from_string(std::string_view name);

enum class EvolutionStage { early, late };

/// Sampling weights over the operators. Early on, the six growth and
/// reshaping operators are drawn twice as often as the rest.
class MutationWeights {
 public:
  static MutationWeights for_stage(EvolutionStage stage, double base = 1.0);

  EvolutionStage stage() const { return stage_; }
  double weight(MutationKind kind) const {
    return weights_[static_cast<std::size_t>(kind)];
  }
  double total() const;
  double probability(MutationKind kind) const { return weight(kind) / total(); }

 private:
  EvolutionStage stage_ = EvolutionStage::late;
  std::array<double, kMutationKinds> weights_{};
};

bool boosted_early(MutationKind kind);

MutationKind sample_mutation(Rng& rng, const MutationWeights& weights);

/// Hyperparameter menus the operators draw from.
struct MutationMenus {
  std::vector<int> channels = {8, 16, 32, 48, 64, 96, 128};
  std::vector<int> filters = {1, 3, 5};
  std::vector<int> strides = {1, 2};
  std::vector<int> fc_units = {50, 100, 150, 200};
  int insert_channels = 32;
  double dropout_ratio = 0.5;
};

struct RepairOutcome {
  std::optional<Genome> genome;
  int fixes = 0;
  std::string failure;
};

/// Restores shape consistency by widening padding on the spatially smaller
/// branch of a merge, or by inserting a 1x1 convolution on the narrower
/// branch of a skip. Gives up after `max_fixes` edits.
RepairOutcome repair(const Genome& genome, int max_fixes = 8);

struct MutationOutcome {
  std::optional<Genome> genome;  // empty when rejected
  int repair_fixes = 0;
  std::string note;
  bool accepted() const { return genome.has_value(); }
};

MutationOutcome apply_mutation(const Genome& genome, MutationKind kind, Rng& rng,
                               const MutationMenus& menus = {});

/// Removes one node and reconnects around it. A skip or concat hands its
/// consumers back to its deeper input; a fully connected layer takes its
/// dropout with it.
Genome splice_out(const Genome& genome, NodeId id);

struct MutationAttempt {
  MutationKind kind;
  bool accepted = false;
  int repair_fixes = 0;
  std::string note;
};

struct MutatedGenome {
  Genome genome;
  MutationKind kind;
  int retries = 0;  // rejected attempts before the accepted one
  int repair_fixes = 0;
  std::vector<MutationAttempt> attempts;
};

struct ExhaustedRetries : std::runtime_error {
  ExhaustedRetries(int retries, std::vector<MutationAttempt> attempts)
      : std::runtime_error("no valid mutation after " + std::to_string(retries) +
                           " attempts"),
        attempts(std::move(attempts)) {}
  std::vector<MutationAttempt> attempts;
};

inline constexpr int kDefaultMaxRetries = 25;

MutatedGenome mutate_until_valid(const Genome& genome,
                                 const MutationWeights& weights, Rng& rng,
                                 int max_retries = kDefaultMaxRetries,
                                 const MutationMenus& menus = {});

}  // namespace evoarch
