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

#include <algorithm>
#include <sstream>
#include <utility>

#include "evoarch/genome.hpp"
#include "json.hpp"

namespace evoarch {

namespace {

using json = nlohmann::json;

json params_of(const NodeKind& kind) {
  json params = json::object();
  if (const auto* conv = std::get_if<Convolution>(&kind)) {
    params["channels"] = conv->channels;
    params["filter"] = conv->filter;
    params["stride"] = conv->stride;
    params["pad"] = conv->pad;
  } else if (const auto* pool = std::get_if<MaxPool>(&kind)) {
    params["kernel"] = pool->kernel;
    params["stride"] = pool->stride;
    params["pad"] = pool->pad;
  } else if (const auto* fc = std::get_if<FullyConnected>(&kind)) {
    params["units"] = fc->units;
  } else if (const auto* drop = std::get_if<Dropout>(&kind)) {
    params["ratio"] = drop->ratio;
  } else if (const auto* head = std::get_if<ClassifierHead>(&kind)) {
    params["classes"] = head->classes;
  }
  return params;
}

[[noreturn]] void field_error(const std::string& field, const std::string& what) {
  throw ParseError("genome field '" + field + "': " + what);
}

const json& require(const json& object, const std::string& key,
                    const std::string& path) {
  if (!object.is_object()) field_error(path, "expected an object");
  auto it = object.find(key);
  if (it == object.end()) field_error(path + "." + key, "missing");
  return *it;
}

int require_int(const json& object, const std::string& key,
                const std::string& path) {
  const json& value = require(object, key, path);
  if (!value.is_number_integer()) field_error(path + "." + key, "expected an integer");
  return value.get<int>();
}

NodeKind kind_from(LayerType type, const json& params, const std::string& path) {
  switch (type) {
    case LayerType::input:
      return InputLayer{};
    case LayerType::convolution:
      return Convolution{require_int(params, "channels", path),
                         require_int(params, "filter", path),
                         require_int(params, "stride", path),
                         require_int(params, "pad", path)};
    case LayerType::max_pool:
      return MaxPool{require_int(params, "kernel", path),
                     require_int(params, "stride", path),
                     require_int(params, "pad", path)};
    case LayerType::fully_connected:
      return FullyConnected{require_int(params, "units", path)};
    case LayerType::dropout: {
      const json& ratio = require(params, "ratio", path);
      if (!ratio.is_number()) field_error(path + ".ratio", "expected a number");
      return Dropout{ratio.get<double>()};
    }
    case LayerType::skip:
      return Skip{};
    case LayerType::concat:
      return Concat{};
    case LayerType::global_pool:
      return GlobalPool{};
    case LayerType::classifier_head:
      return ClassifierHead{require_int(params, "classes", path)};
  }
  field_error(path, "unknown kind");
}

std::string escape_label(const std::string& text) {
  std::string out;
  for (char c : text) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  return out;
}

}  // namespace

std::string describe(const NodeKind& kind) {
  std::ostringstream out;
  if (const auto* conv = std::get_if<Convolution>(&kind)) {
    out << "Conv " << conv->channels << " " << conv->filter << "x"
        << conv->filter << " s" << conv->stride << " p" << conv->pad;
  } else if (const auto* pool = std::get_if<MaxPool>(&kind)) {
    out << "MaxPool " << pool->kernel << "x" << pool->kernel << " s"
        << pool->stride;
    if (pool->pad > 0) out << " p" << pool->pad;
  } else if (const auto* fc = std::get_if<FullyConnected>(&kind)) {
    out << "FC " << fc->units;
  } else if (const auto* drop = std::get_if<Dropout>(&kind)) {
    out << "Dropout " << drop->ratio;
  } else if (const auto* head = std::get_if<ClassifierHead>(&kind)) {
    out << "Head " << head->classes;
  } else if (holds<InputLayer>(kind)) {
    out << "Input";
  } else if (holds<Skip>(kind)) {
    out << "Skip";
  } else if (holds<Concat>(kind)) {
    out << "Concat";
  } else {
    out << "GlobalPool";
  }
  return out.str();
}

std::string serialize(const Genome& genome) {
  json doc;
  const TensorShape& shape = genome.input_shape();
  doc["input_shape"] = {shape.channels, shape.height, shape.width};
  doc["num_classes"] = genome.num_classes();
  json nodes = json::array();
  std::vector<std::pair<NodeId, NodeId>> edges;
  for (const auto& [id, node] : genome.nodes()) {
    nodes.push_back({{"id", id},
                     {"kind", std::string(type_name(node.type()))},
                     {"params", params_of(node.kind)}});
    for (NodeId src : node.inputs) edges.emplace_back(src, id);
  }
  std::sort(edges.begin(), edges.end());
  json edge_list = json::array();
  for (const auto& [src, dst] : edges) edge_list.push_back({src, dst});
  doc["nodes"] = std::move(nodes);
  doc["edges"] = std::move(edge_list);
  return doc.dump(2) + "\n";
}

Genome deserialize(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    const std::size_t upto = std::min<std::size_t>(e.byte, text.size());
    const auto line =
        1 + std::count(text.begin(), text.begin() + static_cast<long>(upto), '\n');
    throw ParseError("genome JSON syntax error at line " + std::to_string(line) +
                     ": " + e.what());
  }
  if (!doc.is_object()) throw ParseError("genome document must be an object");

  const json& shape = require(doc, "input_shape", "$");
  if (!shape.is_array() || shape.size() != 3) {
    field_error("input_shape", "expected [channels, height, width]");
  }
  for (const auto& dim : shape) {
    if (!dim.is_number_integer()) field_error("input_shape", "expected integers");
  }
  Genome genome(TensorShape{shape[0].get<int>(), shape[1].get<int>(),
                            shape[2].get<int>(), true},
                require_int(doc, "num_classes", "$"));

  const json& nodes = require(doc, "nodes", "$");
  if (!nodes.is_array()) field_error("nodes", "expected an array");
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const std::string path = "nodes[" + std::to_string(i) + "]";
    const json& entry = nodes[i];
    const NodeId id = require_int(entry, "id", path);
    const json& kind_name = require(entry, "kind", path);
    if (!kind_name.is_string()) field_error(path + ".kind", "expected a string");
    const auto type = layer_type_from_name(kind_name.get<std::string>());
    if (!type) {
      field_error(path + ".kind", "unknown kind '" + kind_name.get<std::string>() + "'");
    }
    const json params = entry.contains("params") ? entry["params"] : json::object();
    if (genome.contains(id)) field_error(path + ".id", "duplicate id");
    if (id < 0) field_error(path + ".id", "negative id");
    genome.insert_node(id, Node{kind_from(*type, params, path + ".params"), {}});
  }

  const json& edges = require(doc, "edges", "$");
  if (!edges.is_array()) field_error("edges", "expected an array");
  std::map<NodeId, std::vector<NodeId>> inputs;
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const std::string path = "edges[" + std::to_string(i) + "]";
    const json& edge = edges[i];
    if (!edge.is_array() || edge.size() != 2 || !edge[0].is_number_integer() ||
        !edge[1].is_number_integer()) {
      field_error(path, "expected [src, dst]");
    }
    const NodeId src = edge[0].get<int>();
    const NodeId dst = edge[1].get<int>();
    if (!genome.contains(src) || !genome.contains(dst)) {
      field_error(path, "references an unknown node");
    }
    inputs[dst].push_back(src);
  }
  for (auto& [dst, srcs] : inputs) genome.set_inputs(dst, std::move(srcs));

  if (const Validation check = validate(genome); !check) {
    throw ParseError("invalid genome: " + check.reason);
  }
  return genome;
}

std::string to_dot(const Genome& genome) {
  std::ostringstream out;
  out << "digraph genome {\n";
  out << "  rankdir=TB;\n";
  out << "  node [shape=box];\n";
  for (const auto& [id, node] : genome.nodes()) {
    std::string label = describe(node.kind);
    if (node.type() == LayerType::input) {
      const TensorShape& s = genome.input_shape();
      label += " " + std::to_string(s.channels) + "x" + std::to_string(s.height) +
               "x" + std::to_string(s.width);
    }
    out << "  n" << id << " [label=\"" << escape_label(label) << "\"];\n";
  }
  for (const auto& [id, node] : genome.nodes()) {
    for (NodeId src : node.inputs) {
      out << "  n" << src << " -> n" << id << ";\n";
    }
  }
  out << "}\n";
  return out.str();
}

}  // namespace evoarch
