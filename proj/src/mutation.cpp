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

#include "evoarch/mutation.hpp"

#include <algorithm>
#include <set>
#include <utility>

#include "graph_edit.hpp"

namespace evoarch {

namespace {

constexpr std::array<std::string_view, kMutationKinds> kMutationNames = {
    "add_convolution",      "remove_convolution", "alter_channel_number",
    "alter_filter_size",    "alter_stride",       "add_dropout",
    "remove_dropout",       "add_pooling",        "remove_pooling",
    "add_skip",             "remove_skip",        "add_concatenate",
    "remove_concatenate",   "add_fully_connected", "remove_fully_connected"};

using Edge = std::pair<NodeId, NodeId>;

template <class T>
const T& pick(Rng& rng, const std::vector<T>& options) {
  return options[uniform_index(rng, options.size())];
}

MutationOutcome rejected(std::string note) {
  MutationOutcome outcome;
  outcome.note = std::move(note);
  return outcome;
}

// The node after `fc`, skipping over an attached dropout.
NodeId tail_successor(const Genome& genome, NodeId fc, NodeId* block_end) {
  NodeId end = fc;
  NodeId next = genome.consumers(fc).front();
  if (genome.node(next).type() == LayerType::dropout) {
    end = next;
    next = genome.consumers(next).front();
  }
  if (block_end) *block_end = end;
  return next;
}

std::vector<Edge> trunk_edges(const Genome& genome) {
  std::set<Edge> edges;
  for (const auto& [id, node] : genome.nodes()) {
    for (NodeId src : node.inputs) {
      if (is_trunk(genome.node(src).type())) edges.emplace(src, id);
    }
  }
  return {edges.begin(), edges.end()};
}

std::vector<Edge> merge_candidates(const Genome& genome, bool need_channels) {
  const ShapeMap shapes = infer_shapes(genome);
  std::vector<NodeId> trunk;
  for (const auto& [id, node] : genome.nodes()) {
    if (is_trunk(node.type())) trunk.push_back(id);
  }
  std::vector<Edge> pairs;
  for (NodeId deeper : trunk) {
    const std::set<NodeId> above = detail::ancestors(genome, deeper);
    const TensorShape& sd = shapes.at(deeper);
    for (NodeId earlier : trunk) {
      if (!above.count(earlier)) continue;
      const TensorShape& se = shapes.at(earlier);
      const bool spatial_match = se.height == sd.height && se.width == sd.width;
      if (!spatial_match) continue;
      if (need_channels && se.channels != sd.channels) continue;
      pairs.emplace_back(earlier, deeper);
    }
  }
  return pairs;
}

int redraw(Rng& rng, const std::vector<int>& menu, int current) {
  std::vector<int> options;
  for (int v : menu) {
    if (v != current) options.push_back(v);
  }
  if (options.empty()) return current;
  return pick(rng, options);
}

}  // namespace

std::string_view to_string(MutationKind kind) {
  return kMutationNames[static_cast<std::size_t>(kind)];
}

std::optional<MutationKind> mutation_from_string(std::string_view name) {
  for (std::size_t i = 0; i < kMutationNames.size(); ++i) {
    if (kMutationNames[i] == name) return static_cast<MutationKind>(i);
  }
  return std::nullopt;
}

bool boosted_early(MutationKind kind) {
  switch (kind) {
    case MutationKind::add_convolution:
    case MutationKind::add_skip:
    case MutationKind::add_concatenate:
    case MutationKind::alter_stride:
    case MutationKind::alter_filter_size:
    case MutationKind::alter_channel_number:
      return true;
    default:
      return false;
  }
}

MutationWeights MutationWeights::for_stage(EvolutionStage stage, double base) {
  MutationWeights weights;
  weights.stage_ = stage;
  for (MutationKind kind : kAllMutations) {
    const double factor =
        stage == EvolutionStage::early && boosted_early(kind) ? 2.0 : 1.0;
    weights.weights_[static_cast<std::size_t>(kind)] = factor * base;
  }
  return weights;
}

double MutationWeights::total() const {
  double sum = 0.0;
  for (double w : weights_) sum += w;
  return sum;
}

MutationKind sample_mutation(Rng& rng, const MutationWeights& weights) {
  double draw = uniform_real(rng) * weights.total();
  for (MutationKind kind : kAllMutations) {
    draw -= weights.weight(kind);
    if (draw < 0.0) return kind;
  }
  return kAllMutations.back();
}

Genome splice_out(const Genome& genome, NodeId id) {
  Genome out = genome;
  const Node node = out.node(id);
  switch (node.type()) {
    case LayerType::input:
    case LayerType::classifier_head:
      throw std::logic_error("cannot remove the input or the head");
    case LayerType::skip:
    case LayerType::concat: {
      const NodeId a = node.inputs[0];
      const NodeId b = node.inputs[1];
      NodeId deeper = b;
      if (a != b) {
        if (detail::ancestors(out, a).count(b)) {
          deeper = a;
        } else if (!detail::ancestors(out, b).count(a)) {
          const auto order = out.topological_order();
          const auto pos = [&](NodeId n) {
            return std::find(order.begin(), order.end(), n) - order.begin();
          };
          deeper = pos(a) > pos(b) ? a : b;
        }
      }
      for (NodeId c : out.consumers(id)) out.replace_input(c, id, deeper);
      out.erase_node(id);
      return out;
    }
    case LayerType::fully_connected: {
      const auto consumers = out.consumers(id);
      if (consumers.size() == 1 &&
          out.node(consumers.front()).type() == LayerType::dropout) {
        out = splice_out(out, consumers.front());
      }
      break;
    }
    default:
      break;
  }
  const NodeId src = node.inputs.front();
  for (NodeId c : out.consumers(id)) out.replace_input(c, id, src);
  out.erase_node(id);
  return out;
}

MutationOutcome apply_mutation(const Genome& genome, MutationKind kind, Rng& rng,
                               const MutationMenus& menus) {
  Genome g = genome;
  switch (kind) {
    case MutationKind::add_convolution: {
      const auto edges = trunk_edges(g);
      if (edges.empty()) return rejected("no trunk edge");
      const auto [src, dst] = pick(rng, edges);
      detail::insert_on_edge(g, src, dst,
                             Convolution{menus.insert_channels, 3, 1, 1});
      break;
    }
    case MutationKind::remove_convolution:
    case MutationKind::remove_pooling:
    case MutationKind::remove_dropout:
    case MutationKind::remove_skip:
    case MutationKind::remove_concatenate: {
      LayerType type = LayerType::convolution;
      if (kind == MutationKind::remove_pooling) type = LayerType::max_pool;
      if (kind == MutationKind::remove_dropout) type = LayerType::dropout;
      if (kind == MutationKind::remove_skip) type = LayerType::skip;
      if (kind == MutationKind::remove_concatenate) type = LayerType::concat;
      const auto candidates = g.nodes_of(type);
      if (candidates.empty()) {
        return rejected("no " + std::string(type_name(type)) + " layer");
      }
      g = splice_out(g, pick(rng, candidates));
      break;
    }
    case MutationKind::alter_channel_number:
    case MutationKind::alter_filter_size:
    case MutationKind::alter_stride: {
      const auto convs = g.nodes_of(LayerType::convolution);
      if (convs.empty()) return rejected("no convolution layer");
      auto& conv = std::get<Convolution>(g.node(pick(rng, convs)).kind);
      if (kind == MutationKind::alter_channel_number) {
        conv.channels = redraw(rng, menus.channels, conv.channels);
      } else if (kind == MutationKind::alter_filter_size) {
        conv.filter = redraw(rng, menus.filters, conv.filter);
      } else {
        conv.stride = redraw(rng, menus.strides, conv.stride);
      }
      conv.pad = conv.filter / 2;
      break;
    }
    case MutationKind::add_dropout: {
      std::vector<NodeId> sites;
      for (NodeId fc : g.nodes_of(LayerType::fully_connected)) {
        const NodeId next = g.consumers(fc).front();
        if (g.node(next).type() != LayerType::dropout) sites.push_back(fc);
      }
      if (sites.empty()) return rejected("no fully connected layer without dropout");
      detail::insert_after(g, pick(rng, sites), Dropout{menus.dropout_ratio});
      break;
    }
    case MutationKind::add_pooling: {
      const auto convs = g.nodes_of(LayerType::convolution);
      if (convs.empty()) return rejected("no convolution layer");
      detail::insert_after(g, pick(rng, convs), MaxPool{2, 2, 0});
      break;
    }
    case MutationKind::add_skip:
    case MutationKind::add_concatenate: {
      const bool skip = kind == MutationKind::add_skip;
      const auto pairs = merge_candidates(g, skip);
      if (pairs.empty()) return rejected("no compatible pair of layers");
      const auto [earlier, deeper] = pick(rng, pairs);
      const auto consumers = g.consumers(deeper);
      const NodeId merge = skip ? g.add_node(Skip{}, {earlier, deeper})
                                : g.add_node(Concat{}, {earlier, deeper});
      for (NodeId c : consumers) g.replace_input(c, deeper, merge);
      break;
    }
    case MutationKind::add_fully_connected: {
      std::set<Edge> sites;
      const NodeId head = *g.head_id();
      sites.emplace(g.node(head).inputs.front(), head);
      for (NodeId fc : g.nodes_of(LayerType::fully_connected)) {
        NodeId end = fc;
        const NodeId next = tail_successor(g, fc, &end);
        sites.emplace(end, next);
      }
      const std::vector<Edge> options(sites.begin(), sites.end());
      const auto [src, dst] = pick(rng, options);
      detail::insert_on_edge(g, src, dst, FullyConnected{pick(rng, menus.fc_units)});
      break;
    }
    case MutationKind::remove_fully_connected: {
      std::vector<NodeId> candidates;
      for (NodeId fc : g.nodes_of(LayerType::fully_connected)) {
        const bool flattens = is_trunk(g.node(g.node(fc).inputs.front()).type());
        const bool feeds_head =
            g.node(tail_successor(g, fc, nullptr)).type() ==
            LayerType::classifier_head;
        // Removing the only flattening layer would leave the head spatial.
        if (flattens && feeds_head) continue;
        candidates.push_back(fc);
      }
      if (candidates.empty()) return rejected("no removable fully connected layer");
      g = splice_out(g, pick(rng, candidates));
      break;
    }
  }

  RepairOutcome fixed = repair(g);
  if (!fixed.genome) {
    MutationOutcome outcome = rejected("repair failed: " + fixed.failure);
    outcome.repair_fixes = fixed.fixes;
    return outcome;
  }
  if (const Validation check = validate(*fixed.genome); !check) {
    MutationOutcome outcome = rejected("invalid result: " + check.reason);
    outcome.repair_fixes = fixed.fixes;
    return outcome;
  }
  if (*fixed.genome == genome) return rejected("mutation left the genome unchanged");
  MutationOutcome outcome;
  outcome.genome = std::move(fixed.genome);
  outcome.repair_fixes = fixed.fixes;
  return outcome;
}

MutatedGenome mutate_until_valid(const Genome& genome,
                                 const MutationWeights& weights, Rng& rng,
                                 int max_retries, const MutationMenus& menus) {
  if (max_retries < 1) throw std::invalid_argument("max_retries must be >= 1");
  std::vector<MutationAttempt> attempts;
  for (int attempt = 0; attempt < max_retries; ++attempt) {
    const MutationKind kind = sample_mutation(rng, weights);
    MutationOutcome outcome = apply_mutation(genome, kind, rng, menus);
    attempts.push_back({kind, outcome.accepted(), outcome.repair_fixes, outcome.note});
    if (outcome.accepted()) {
      return MutatedGenome{std::move(*outcome.genome), kind, attempt,
                           outcome.repair_fixes, std::move(attempts)};
    }
  }
  throw ExhaustedRetries(max_retries, std::move(attempts));
}

}  // namespace evoarch
