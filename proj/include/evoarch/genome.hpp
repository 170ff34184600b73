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
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace evoarch {

using NodeId = int;

/// Shape of one sample flowing out of a node. Flat outputs (after global
/// pooling or a fully connected layer) carry their feature count in
/// `channels` with unit spatial extent.
struct TensorShape {
  int channels = 0;
  int height = 1;
  int width = 1;
  bool spatial = true;

  std::int64_t size() const {
    return static_cast<std::int64_t>(channels) * height * width;
  }
  bool operator==(const TensorShape&) const = default;
};

std::string to_string(const TensorShape& shape);

struct InputLayer {
  bool operator==(const InputLayer&) const = default;
};

struct Convolution {
  int channels = 32;
  int filter = 3;
  int stride = 1;
  int pad = 1;
  bool operator==(const Convolution&) const = default;
};

struct MaxPool {
  int kernel = 2;
  int stride = 2;
  int pad = 0;
  bool operator==(const MaxPool&) const = default;
};

struct FullyConnected {
  int units = 100;
  bool operator==(const FullyConnected&) const = default;
};

struct Dropout {
  double ratio = 0.5;
  bool operator==(const Dropout&) const = default;
};

/// Elementwise sum of two identically shaped inputs.
struct Skip {
  bool operator==(const Skip&) const = default;
};

/// Channel stacking of two spatially aligned inputs.
struct Concat {
  bool operator==(const Concat&) const = default;
};

/// Spatial average per channel.
struct GlobalPool {
  bool operator==(const GlobalPool&) const = default;
};

struct ClassifierHead {
  int classes = 10;
  bool operator==(const ClassifierHead&) const = default;
};

using NodeKind = std::variant<InputLayer, Convolution, MaxPool, FullyConnected,
                              Dropout, Skip, Concat, GlobalPool, ClassifierHead>;

/// Kind-level tag; hyperparameters are deliberately absent.
enum class LayerType {
  input,
  convolution,
  max_pool,
  fully_connected,
  dropout,
  skip,
  concat,
  global_pool,
  classifier_head,
};

LayerType layer_type(const NodeKind& kind);
std::string_view type_name(LayerType type);
std::optional<LayerType> layer_type_from_name(std::string_view name);
/// One-letter alphabet used by the genome distance.
char type_symbol(LayerType type);
/// Number of predecessors a node of this type must have.
int required_arity(LayerType type);
/// Trunk layers produce spatial feature maps.
bool is_trunk(LayerType type);

template <class T>
bool holds(const NodeKind& kind) {
  return std::holds_alternative<T>(kind);
}

struct Node {
  NodeKind kind;
  /// Predecessors, kept sorted ascending. Duplicates are legal for
  /// two-input nodes (e.g. a skip whose branch was spliced away).
  std::vector<NodeId> inputs;

  LayerType type() const { return layer_type(kind); }
  bool operator==(const Node&) const = default;
};

struct ShapeError : std::runtime_error {
  ShapeError(NodeId node, const std::string& what)
      : std::runtime_error(what), node(node) {}
  NodeId node;
};

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Acyclic directed graph of typed layers. Node ids double as creation
/// order: a newly added node always receives max(id) + 1.
class Genome {
 public:
  Genome() = default;
  Genome(TensorShape input_shape, int num_classes);

  const TensorShape& input_shape() const { return input_shape_; }
  int num_classes() const { return num_classes_; }
  const std::map<NodeId, Node>& nodes() const { return nodes_; }
  std::size_t size() const { return nodes_.size(); }

  bool contains(NodeId id) const { return nodes_.count(id) != 0; }
  const Node& node(NodeId id) const;
  Node& node(NodeId id);

  NodeId next_id() const;
  NodeId add_node(NodeKind kind, std::vector<NodeId> inputs);
  /// Inserts a node with an explicit id; used by deserialization.
  void insert_node(NodeId id, Node node);
  void set_inputs(NodeId id, std::vector<NodeId> inputs);
  void erase_node(NodeId id);
  /// Replaces every occurrence of `from` in `id`'s inputs with `to`.
  void replace_input(NodeId id, NodeId from, NodeId to);

  /// Consumers of `id`, one entry per distinct consumer, ascending.
  std::vector<NodeId> consumers(NodeId id) const;
  std::vector<NodeId> nodes_of(LayerType type) const;
  std::optional<NodeId> input_id() const;
  std::optional<NodeId> head_id() const;

  /// Kahn order with ties broken by ascending id. Throws ShapeError on a cycle.
  std::vector<NodeId> topological_order() const;

  bool operator==(const Genome&) const = default;

 private:
  TensorShape input_shape_;
  int num_classes_ = 0;
  std::map<NodeId, Node> nodes_;
};

enum class SeedKind { global_pool, fully_connected };

Genome new_seed_genome(SeedKind kind, TensorShape input_shape, int num_classes);

using ShapeMap = std::map<NodeId, TensorShape>;

/// Problem found while propagating shapes. `merge_inputs` is set when the
/// failing node is a skip or concat whose inputs disagree.
struct ShapeIssue {
  NodeId node = -1;
  std::string message;
  bool merge_mismatch = false;
};

struct ShapeReport {
  ShapeMap shapes;
  std::optional<ShapeIssue> issue;
  bool ok() const { return !issue.has_value(); }
};

/// Non-throwing shape propagation; stops at the first problem.
ShapeReport analyze_shapes(const Genome& genome);
ShapeMap infer_shapes(const Genome& genome);

struct Validation {
  bool ok = true;
  std::string reason;
  explicit operator bool() const { return ok; }
};

/// Full structural check: one input, one head sink, arity, reachability,
/// acyclicity, tail placement rules, hyperparameter ranges and shapes.
Validation validate(const Genome& genome);

std::string canonical_node_sequence(const Genome& genome);
std::size_t hamming_distance(std::string_view a, std::string_view b);
std::size_t hamming_distance(const Genome& a, const Genome& b);

std::int64_t parameter_count(const Genome& genome);
std::int64_t parameter_count(const Genome& genome, const ShapeMap& shapes);

std::string serialize(const Genome& genome);
Genome deserialize(std::string_view text);
std::string to_dot(const Genome& genome);
std::string describe(const NodeKind& kind);

}  // namespace evoarch
