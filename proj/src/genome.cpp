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

#include "evoarch/genome.hpp"

#include <algorithm>
#include <array>
#include <queue>
#include <set>
#include <sstream>

namespace evoarch {

namespace {

constexpr std::array<std::string_view, 9> kTypeNames = {
    "input",   "convolution", "max_pool",    "fully_connected", "dropout",
    "skip",    "concat",      "global_pool", "classifier_head"};

constexpr std::array<char, 9> kTypeSymbols = {'I', 'C', 'P', 'F', 'D',
                                              'S', 'K', 'G', 'H'};

// floor((side + 2 * pad - window) / stride) + 1, or <= 0 when the window
// does not fit.
int sliding_output(int side, int window, int stride, int pad) {
  const int span = side + 2 * pad - window;
  if (span < 0) return 0;
  return span / stride + 1;
}

}  // namespace

std::string to_string(const TensorShape& shape) {
  std::ostringstream out;
  if (shape.spatial) {
    out << "(" << shape.channels << "," << shape.height << "," << shape.width
        << ")";
  } else {
    out << "(" << shape.channels << ")";
  }
  return out.str();
}

LayerType layer_type(const NodeKind& kind) {
  return static_cast<LayerType>(kind.index());
}

std::string_view type_name(LayerType type) {
  return kTypeNames[static_cast<std::size_t>(type)];
}

std::optional<LayerType> layer_type_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kTypeNames.size(); ++i) {
    if (kTypeNames[i] == name) return static_cast<LayerType>(i);
  }
  return std::nullopt;
}

char type_symbol(LayerType type) {
  return kTypeSymbols[static_cast<std::size_t>(type)];
}

int required_arity(LayerType type) {
  switch (type) {
    case LayerType::input:
      return 0;
    case LayerType::skip:
    case LayerType::concat:
      return 2;
    default:
      return 1;
  }
}

bool is_trunk(LayerType type) {
  switch (type) {
    case LayerType::input:
    case LayerType::convolution:
    case LayerType::max_pool:
    case LayerType::skip:
    case LayerType::concat:
      return true;
    default:
      return false;
  }
}

Genome::Genome(TensorShape input_shape, int num_classes)
    : input_shape_(input_shape), num_classes_(num_classes) {}

const Node& Genome::node(NodeId id) const {
  auto it = nodes_.find(id);
  if (it == nodes_.end()) {
    throw std::out_of_range("genome has no node " + std::to_string(id));
  }
  return it->second;
}

Node& Genome::node(NodeId id) {
  auto it = nodes_.find(id);
  if (it == nodes_.end()) {
    throw std::out_of_range("genome has no node " + std::to_string(id));
  }
  return it->second;
}

NodeId Genome::next_id() const {
  return nodes_.empty() ? 0 : nodes_.rbegin()->first + 1;
}

NodeId Genome::add_node(NodeKind kind, std::vector<NodeId> inputs) {
  const NodeId id = next_id();
  insert_node(id, Node{std::move(kind), std::move(inputs)});
  return id;
}

void Genome::insert_node(NodeId id, Node node) {
  std::sort(node.inputs.begin(), node.inputs.end());
  nodes_[id] = std::move(node);
}

void Genome::set_inputs(NodeId id, std::vector<NodeId> inputs) {
  std::sort(inputs.begin(), inputs.end());
  node(id).inputs = std::move(inputs);
}

void Genome::erase_node(NodeId id) { nodes_.erase(id); }

void Genome::replace_input(NodeId id, NodeId from, NodeId to) {
  auto& inputs = node(id).inputs;
  std::replace(inputs.begin(), inputs.end(), from, to);
  std::sort(inputs.begin(), inputs.end());
}

std::vector<NodeId> Genome::consumers(NodeId id) const {
  std::vector<NodeId> out;
  for (const auto& [other, node] : nodes_) {
    if (std::find(node.inputs.begin(), node.inputs.end(), id) !=
        node.inputs.end()) {
      out.push_back(other);
    }
  }
  return out;
}

std::vector<NodeId> Genome::nodes_of(LayerType type) const {
  std::vector<NodeId> out;
  for (const auto& [id, node] : nodes_) {
    if (node.type() == type) out.push_back(id);
  }
  return out;
}

std::optional<NodeId> Genome::input_id() const {
  for (const auto& [id, node] : nodes_) {
    if (node.type() == LayerType::input) return id;
  }
  return std::nullopt;
}

std::optional<NodeId> Genome::head_id() const {
  for (const auto& [id, node] : nodes_) {
    if (node.type() == LayerType::classifier_head) return id;
  }
  return std::nullopt;
}

std::vector<NodeId> Genome::topological_order() const {
  std::map<NodeId, int> pending;
  std::map<NodeId, std::vector<NodeId>> successors;
  for (const auto& [id, node] : nodes_) {
    pending[id] += 0;
    for (NodeId in : node.inputs) {
      if (!contains(in)) {
        throw ShapeError(id, "node " + std::to_string(id) +
                                 " reads missing node " + std::to_string(in));
      }
      pending[id] += 1;
      successors[in].push_back(id);
    }
  }
  std::priority_queue<NodeId, std::vector<NodeId>, std::greater<>> ready;
  for (const auto& [id, count] : pending) {
    if (count == 0) ready.push(id);
  }
  std::vector<NodeId> order;
  order.reserve(nodes_.size());
  while (!ready.empty()) {
    const NodeId id = ready.top();
    ready.pop();
    order.push_back(id);
    for (NodeId next : successors[id]) {
      if (--pending[next] == 0) ready.push(next);
    }
  }
  if (order.size() != nodes_.size()) {
    throw ShapeError(-1, "genome contains a cycle");
  }
  return order;
}

Genome new_seed_genome(SeedKind kind, TensorShape input_shape,
                       int num_classes) {
  Genome genome(input_shape, num_classes);
  const NodeId input = genome.add_node(InputLayer{}, {});
  const NodeId middle =
      kind == SeedKind::global_pool
          ? genome.add_node(GlobalPool{}, {input})
          : genome.add_node(FullyConnected{100}, {input});
  genome.add_node(ClassifierHead{num_classes}, {middle});
  return genome;
}

ShapeReport analyze_shapes(const Genome& genome) {
  ShapeReport report;
  std::vector<NodeId> order;
  try {
    order = genome.topological_order();
  } catch (const ShapeError& e) {
    report.issue = ShapeIssue{e.node, e.what(), false};
    return report;
  }
  auto fail = [&](NodeId id, const std::string& message, bool merge = false) {
    report.issue = ShapeIssue{id, "node " + std::to_string(id) + ": " + message,
                              merge};
    return report;
  };
  for (NodeId id : order) {
    const Node& node = genome.node(id);
    const LayerType type = node.type();
    if (static_cast<int>(node.inputs.size()) != required_arity(type)) {
      return fail(id, std::string(type_name(type)) + " expects " +
                          std::to_string(required_arity(type)) + " inputs");
    }
    std::vector<TensorShape> in;
    for (NodeId src : node.inputs) in.push_back(report.shapes.at(src));

    TensorShape out;
    switch (type) {
      case LayerType::input:
        out = genome.input_shape();
        out.spatial = true;
        break;
      case LayerType::convolution: {
        const auto& conv = std::get<Convolution>(node.kind);
        if (!in[0].spatial) return fail(id, "convolution needs a spatial input");
        const int h = sliding_output(in[0].height, conv.filter, conv.stride,
                                     conv.pad);
        const int w = sliding_output(in[0].width, conv.filter, conv.stride,
                                     conv.pad);
        if (h <= 0 || w <= 0) {
          return fail(id, "convolution output would be empty for input " +
                              to_string(in[0]));
        }
        out = TensorShape{conv.channels, h, w, true};
        break;
      }
      case LayerType::max_pool: {
        const auto& pool = std::get<MaxPool>(node.kind);
        if (!in[0].spatial) return fail(id, "pooling needs a spatial input");
        const int h = sliding_output(in[0].height, pool.kernel, pool.stride,
                                     pool.pad);
        const int w = sliding_output(in[0].width, pool.kernel, pool.stride,
                                     pool.pad);
        if (h <= 0 || w <= 0) {
          return fail(id, "pooling output would be empty for input " +
                              to_string(in[0]));
        }
        out = TensorShape{in[0].channels, h, w, true};
        break;
      }
      case LayerType::fully_connected:
        out = TensorShape{std::get<FullyConnected>(node.kind).units, 1, 1,
                          false};
        break;
      case LayerType::dropout:
        out = in[0];
        break;
      case LayerType::skip:
        if (in[0] != in[1]) {
          return fail(id,
                      "skip inputs " + to_string(in[0]) + " and " +
                          to_string(in[1]) + " differ",
                      true);
        }
        out = in[0];
        break;
      case LayerType::concat:
        if (!in[0].spatial || !in[1].spatial ||
            in[0].height != in[1].height || in[0].width != in[1].width) {
          return fail(id,
                      "concat inputs " + to_string(in[0]) + " and " +
                          to_string(in[1]) + " are not spatially aligned",
                      true);
        }
        out = TensorShape{in[0].channels + in[1].channels, in[0].height,
                          in[0].width, true};
        break;
      case LayerType::global_pool:
        if (!in[0].spatial) return fail(id, "global pooling needs a spatial input");
        out = TensorShape{in[0].channels, 1, 1, false};
        break;
      case LayerType::classifier_head:
        out = TensorShape{std::get<ClassifierHead>(node.kind).classes, 1, 1,
                          false};
        break;
    }
    report.shapes[id] = out;
  }
  return report;
}

ShapeMap infer_shapes(const Genome& genome) {
  ShapeReport report = analyze_shapes(genome);
  if (report.issue) throw ShapeError(report.issue->node, report.issue->message);
  return std::move(report.shapes);
}

Validation validate(const Genome& genome) {
  auto bad = [](std::string reason) { return Validation{false, std::move(reason)}; };
  const TensorShape& in_shape = genome.input_shape();
  if (in_shape.channels <= 0 || in_shape.height <= 0 || in_shape.width <= 0) {
    return bad("input shape must be positive");
  }
  if (genome.num_classes() < 2) return bad("need at least two classes");
  if (genome.nodes_of(LayerType::input).size() != 1) {
    return bad("genome must have exactly one input node");
  }
  if (genome.nodes_of(LayerType::classifier_head).size() != 1) {
    return bad("genome must have exactly one classifier head");
  }

  std::map<NodeId, int> consumer_count;
  std::map<NodeId, std::set<NodeId>> distinct_consumers;
  for (const auto& [id, node] : genome.nodes()) {
    const LayerType type = node.type();
    if (static_cast<int>(node.inputs.size()) != required_arity(type)) {
      return bad("node " + std::to_string(id) + " has wrong arity");
    }
    for (NodeId src : node.inputs) {
      if (!genome.contains(src)) {
        return bad("node " + std::to_string(id) + " reads missing node " +
                   std::to_string(src));
      }
      consumer_count[src] += 1;
      distinct_consumers[src].insert(id);
    }
  }

  int crossings = 0;
  for (const auto& [id, node] : genome.nodes()) {
    const LayerType type = node.type();
    const std::string where = "node " + std::to_string(id) + " (" +
                              std::string(type_name(type)) + ")";
    if (type == LayerType::classifier_head) {
      if (consumer_count[id] != 0) return bad(where + " must be the sink");
    } else if (consumer_count[id] == 0) {
      return bad(where + " has no consumer");
    }

    for (NodeId src : node.inputs) {
      const LayerType src_type = genome.node(src).type();
      if (src_type == LayerType::classifier_head) {
        return bad(where + " reads from the head");
      }
      if (is_trunk(type) && !is_trunk(src_type)) {
        return bad(where + " reads a flat tensor");
      }
      if (is_trunk(src_type) && !is_trunk(type)) ++crossings;
    }
    switch (type) {
      case LayerType::global_pool:
        if (!is_trunk(genome.node(node.inputs[0]).type())) {
          return bad(where + " must follow the convolutional trunk");
        }
        break;
      case LayerType::dropout:
        if (genome.node(node.inputs[0]).type() != LayerType::fully_connected) {
          return bad(where + " must directly follow a fully connected layer");
        }
        break;
      case LayerType::classifier_head:
        if (is_trunk(genome.node(node.inputs[0]).type())) {
          return bad(where + " reads a spatial tensor");
        }
        break;
      default:
        break;
    }
    if (!is_trunk(type) && type != LayerType::classifier_head &&
        distinct_consumers[id].size() != 1) {
      return bad(where + " must have exactly one consumer");
    }

    if (const auto* conv = std::get_if<Convolution>(&node.kind)) {
      if (conv->channels < 1) return bad(where + " has no channels");
      if (conv->filter != 1 && conv->filter != 3 && conv->filter != 5) {
        return bad(where + " filter must be 1, 3 or 5");
      }
      if (conv->stride != 1 && conv->stride != 2) {
        return bad(where + " stride must be 1 or 2");
      }
      if (conv->pad < 0) return bad(where + " has negative padding");
    } else if (const auto* pool = std::get_if<MaxPool>(&node.kind)) {
      if (pool->kernel < 1 || pool->stride < 1 || pool->pad < 0 ||
          pool->pad >= pool->kernel) {
        return bad(where + " has invalid pooling window");
      }
    } else if (const auto* fc = std::get_if<FullyConnected>(&node.kind)) {
      if (fc->units < 1) return bad(where + " has no units");
    } else if (const auto* drop = std::get_if<Dropout>(&node.kind)) {
      if (!(drop->ratio > 0.0 && drop->ratio < 1.0)) {
        return bad(where + " ratio must lie in (0,1)");
      }
    } else if (const auto* head = std::get_if<ClassifierHead>(&node.kind)) {
      if (head->classes != genome.num_classes()) {
        return bad(where + " class count disagrees with the genome");
      }
    }
  }
  if (crossings != 1) {
    return bad("expected exactly one edge from the trunk into the tail, found " +
               std::to_string(crossings));
  }

  const ShapeReport report = analyze_shapes(genome);
  if (report.issue) return bad(report.issue->message);
  return {};
}

std::string canonical_node_sequence(const Genome& genome) {
  std::string sequence;
  for (NodeId id : genome.topological_order()) {
    sequence.push_back(type_symbol(genome.node(id).type()));
  }
  return sequence;
}

std::size_t hamming_distance(std::string_view a, std::string_view b) {
  const std::size_t common = std::min(a.size(), b.size());
  std::size_t distance = std::max(a.size(), b.size()) - common;
  for (std::size_t i = 0; i < common; ++i) {
    if (a[i] != b[i]) ++distance;
  }
  return distance;
}

std::size_t hamming_distance(const Genome& a, const Genome& b) {
  return hamming_distance(canonical_node_sequence(a),
                          canonical_node_sequence(b));
}

std::int64_t parameter_count(const Genome& genome, const ShapeMap& shapes) {
  std::int64_t total = 0;
  for (const auto& [id, node] : genome.nodes()) {
    if (const auto* conv = std::get_if<Convolution>(&node.kind)) {
      const std::int64_t in = shapes.at(node.inputs[0]).channels;
      const std::int64_t out = conv->channels;
      const std::int64_t f = conv->filter;
      total += out * in * f * f + out + 2 * out;
    } else if (const auto* fc = std::get_if<FullyConnected>(&node.kind)) {
      const std::int64_t in = shapes.at(node.inputs[0]).size();
      total += fc->units * in + fc->units;
    } else if (const auto* head = std::get_if<ClassifierHead>(&node.kind)) {
      const std::int64_t in = shapes.at(node.inputs[0]).size();
      total += head->classes * in + head->classes;
    }
  }
  return total;
}

std::int64_t parameter_count(const Genome& genome) {
  return parameter_count(genome, infer_shapes(genome));
}

}  // namespace evoarch
