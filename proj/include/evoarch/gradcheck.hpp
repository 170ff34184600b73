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
#include <string>
#include <vector>

#include "evoarch/genome.hpp"
#include "evoarch/rng.hpp"

namespace evoarch {

struct GradCheckCase {
  std::string name;
  double max_rel_err = 0.0;
  std::size_t entries = 0;  // parameter entries compared
  std::size_t kinks = 0;    // skipped: the probe crossed a ReLU or pooling switch
};

struct GradCheckReport {
  std::vector<GradCheckCase> cases;
  double max_rel_err = 0.0;
  std::size_t entries = 0;
  std::size_t kinks = 0;
  bool passed(double tolerance = 1e-4) const { return max_rel_err <= tolerance; }
};

struct GradCheckOptions {
  int batch = 3;
  double step = 1e-4;
  /// Tensors larger than this are spot-checked at this many entries.
  std::size_t max_entries_per_tensor = 256;
};

/// |a - n| / max(|a|, |n|, 1e-6).
double relative_error(double analytic, double numeric);

/// Compares backprop against five-point central differences of the train-mode loss
/// on a random batch, in double precision. Entries whose +/- probes change
/// the activation pattern are not smooth points and are skipped.
GradCheckCase check_gradients(const Genome& genome, std::uint64_t seed,
                              const GradCheckOptions& options = {});

/// Small hand-built genomes, each centred on one layer kind.
std::vector<std::pair<std::string, Genome>> layer_kind_genomes();

/// A seed genome grown by random mutations, at most `max_depth` hidden
/// layers deep, with narrow channel menus.
Genome random_composite_genome(Rng& rng, int max_depth = 6);

/// Every layer-kind genome plus `composites` random ones.
GradCheckReport run_gradient_suite(std::uint64_t seed, int composites = 20,
                                   const GradCheckOptions& options = {});

}  // namespace evoarch
