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

#include "evoarch/gradcheck.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "evoarch/mutation.hpp"
#include "evoarch/trainer.hpp"

namespace evoarch {

namespace {

constexpr TensorShape kCheckShape{2, 6, 6, true};
constexpr int kCheckClasses = 3;

MutationMenus narrow_menus() {
  MutationMenus menus;
  menus.channels = {2, 3, 4};
  menus.fc_units = {3, 4, 5};
  menus.insert_channels = 3;
  return menus;
}

// Longest run of hidden layers between input and head.
int hidden_depth(const Genome& genome) {
  std::map<NodeId, int> depth;
  int deepest = 0;
  for (NodeId id : genome.topological_order()) {
    int d = 0;
    for (NodeId src : genome.node(id).inputs) d = std::max(d, depth[src] + 1);
    depth[id] = d;
    deepest = std::max(deepest, d);
  }
  return deepest - 1;
}

struct Probe {
  double loss;
  std::vector<std::int32_t> pattern;
};

Probe probe(const ModelState<double>& model, const Genome& genome, const Matrix<double>& batch,
            const std::vector<int>& labels, std::uint64_t dropout_seed) {
  ModelState<double> copy = model;
  const Matrix<double> logits = forward(copy, genome, batch, Mode::train, dropout_seed);
  copy = model;
  return {cross_entropy<double>(logits, labels),
          activation_pattern(copy, genome, batch, Mode::train, dropout_seed)};
}

template <typename T>
void compare_tensor(T& param, const T& grad, ModelState<double>& model, const Genome& genome,
                    const Matrix<double>& batch, const std::vector<int>& labels,
                    std::uint64_t dropout_seed, const std::vector<std::int32_t>& base,
                    const GradCheckOptions& options, Rng& rng, GradCheckCase& result) {
  const auto size = static_cast<std::size_t>(param.size());
  if (size == 0) return;
  std::vector<std::size_t> entries;
  if (size <= options.max_entries_per_tensor) {
    for (std::size_t i = 0; i < size; ++i) entries.push_back(i);
  } else {
    for (std::size_t i = 0; i < options.max_entries_per_tensor; ++i) {
      entries.push_back(uniform_index(rng, size));
    }
  }
  for (std::size_t i : entries) {
    double& w = param.data()[i];
    const double saved = w;
    const double h = options.step;
    // Five-point stencil.
    std::array<Probe, 4> at;
    const std::array<double, 4> offsets = {2 * h, h, -h, -2 * h};
    bool smooth = true;
    for (std::size_t o = 0; o < at.size() && smooth; ++o) {
      w = saved + offsets[o];
      at[o] = probe(model, genome, batch, labels, dropout_seed);
      smooth = at[o].pattern == base;
    }
    w = saved;
    if (!smooth) {
      ++result.kinks;
      continue;
    }
    const double numeric =
        (-at[0].loss + 8.0 * at[1].loss - 8.0 * at[2].loss + at[3].loss) / (12.0 * h);
    result.max_rel_err = std::max(result.max_rel_err, relative_error(grad.data()[i], numeric));
    ++result.entries;
  }
}

Genome chain(std::vector<NodeKind> hidden) {
  Genome g(kCheckShape, kCheckClasses);
  NodeId prev = g.add_node(InputLayer{}, {});
  for (auto& kind : hidden) prev = g.add_node(std::move(kind), {prev});
  g.add_node(ClassifierHead{kCheckClasses}, {prev});
  return g;
}

}  // namespace

double relative_error(double analytic, double numeric) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
  return std::abs(analytic - numeric) / scale;
}

GradCheckCase check_gradients(const Genome& genome, std::uint64_t seed,
                              const GradCheckOptions& options) {
  ModelState<double> model = init_model<double>(genome, mix_seed(seed, 1));
  Rng rng(mix_seed(seed, 2));
  // Perturb biases and batch-norm affine terms away from their symmetric
  // initial values so every gradient path is exercised.
  for (auto& [id, block] : model.params) {
    for (auto* v : {&block.bias, &block.scale, &block.shift}) {
      for (Eigen::Index i = 0; i < v->size(); ++i) (*v)[i] += 0.1 * standard_normal(rng);
    }
  }
  const TensorShape& shape = genome.input_shape();
  Matrix<double> batch(shape.size(), options.batch);
  for (Eigen::Index j = 0; j < batch.cols(); ++j) {
    for (Eigen::Index i = 0; i < batch.rows(); ++i) batch(i, j) = standard_normal(rng);
  }
  std::vector<int> labels(static_cast<std::size_t>(options.batch));
  for (auto& label : labels) {
    label = static_cast<int>(uniform_index(rng, static_cast<std::size_t>(genome.num_classes())));
  }
  const std::uint64_t dropout_seed = mix_seed(seed, 3);

  ModelState<double> scratch = model;
  const auto analytic = loss_and_grads<double>(scratch, genome, batch, labels, dropout_seed);

  ModelState<double> base_model = model;
  const auto base = activation_pattern(base_model, genome, batch, Mode::train, dropout_seed);

  GradCheckCase result;
  for (auto& [id, block] : model.params) {
    const auto& g = analytic.grads.at(id);
    auto check = [&](auto& param, const auto& grad) {
      compare_tensor(param, grad, model, genome, batch, labels, dropout_seed, base, options, rng,
                     result);
    };
    check(block.weight, g.weight);
    check(block.bias, g.bias);
    check(block.scale, g.scale);
    check(block.shift, g.shift);
  }
  return result;
}

std::vector<std::pair<std::string, Genome>> layer_kind_genomes() {
  std::vector<std::pair<std::string, Genome>> out;
  out.emplace_back("fully_connected", chain({FullyConnected{4}}));
  out.emplace_back("convolution", chain({Convolution{3, 3, 1, 1}, GlobalPool{}}));
  out.emplace_back("convolution_strided",
                   chain({Convolution{3, 5, 2, 2}, FullyConnected{4}}));
  out.emplace_back("convolution_pointwise", chain({Convolution{3, 1, 1, 0}, GlobalPool{}}));
  out.emplace_back("max_pool", chain({Convolution{2, 3, 1, 1}, MaxPool{2, 2, 0},
                                      FullyConnected{4}}));
  out.emplace_back("max_pool_padded", chain({Convolution{2, 3, 1, 1}, MaxPool{3, 2, 1},
                                             FullyConnected{4}}));
  out.emplace_back("dropout", chain({FullyConnected{5}, Dropout{0.5}}));
  out.emplace_back("global_pool", new_seed_genome(SeedKind::global_pool, kCheckShape,
                                                  kCheckClasses));
  {
    Genome g(kCheckShape, kCheckClasses);
    const NodeId in = g.add_node(InputLayer{}, {});
    const NodeId a = g.add_node(Convolution{3, 3, 1, 1}, {in});
    const NodeId b = g.add_node(Convolution{3, 3, 1, 1}, {a});
    const NodeId s = g.add_node(Skip{}, {a, b});
    const NodeId p = g.add_node(GlobalPool{}, {s});
    g.add_node(ClassifierHead{kCheckClasses}, {p});
    out.emplace_back("skip", std::move(g));
  }
  {
    Genome g(kCheckShape, kCheckClasses);
    const NodeId in = g.add_node(InputLayer{}, {});
    const NodeId a = g.add_node(Convolution{2, 3, 1, 1}, {in});
    const NodeId b = g.add_node(Convolution{3, 1, 1, 0}, {a});
    const NodeId c = g.add_node(Concat{}, {a, b});
    const NodeId f = g.add_node(FullyConnected{4}, {c});
    g.add_node(ClassifierHead{kCheckClasses}, {f});
    out.emplace_back("concat", std::move(g));
  }
  return out;
}

Genome random_composite_genome(Rng& rng, int max_depth) {
  const MutationMenus menus = narrow_menus();
  const auto weights = MutationWeights::for_stage(EvolutionStage::early);
  const auto seed_kind = uniform_index(rng, 2) == 0 ? SeedKind::global_pool
                                                    : SeedKind::fully_connected;
  Genome genome = new_seed_genome(seed_kind, kCheckShape, kCheckClasses);
  const int steps = 2 + static_cast<int>(uniform_index(rng, 6));
  for (int i = 0; i < steps; ++i) {
    try {
      Genome next = mutate_until_valid(genome, weights, rng, kDefaultMaxRetries, menus).genome;
      if (hidden_depth(next) <= max_depth) genome = std::move(next);
    } catch (const ExhaustedRetries&) {
    }
  }
  return genome;
}

GradCheckReport run_gradient_suite(std::uint64_t seed, int composites,
                                   const GradCheckOptions& options) {
  GradCheckReport report;
  std::uint64_t case_seed = seed;
  for (auto& [name, genome] : layer_kind_genomes()) {
    GradCheckCase c = check_gradients(genome, mix_seed(case_seed++), options);
    c.name = name;
    report.cases.push_back(c);
  }
  Rng rng(mix_seed(seed, 0x9c));
  for (int i = 0; i < composites; ++i) {
    const Genome genome = random_composite_genome(rng);
    GradCheckCase c = check_gradients(genome, mix_seed(case_seed++), options);
    c.name = "composite_" + std::to_string(i) + ":" + canonical_node_sequence(genome);
    report.cases.push_back(c);
  }
  for (const auto& c : report.cases) {
    report.max_rel_err = std::max(report.max_rel_err, c.max_rel_err);
    report.entries += c.entries;
    report.kinks += c.kinks;
  }
  return report;
}

}  // namespace evoarch
