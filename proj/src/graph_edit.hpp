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

#include <set>

#include "evoarch/genome.hpp"

namespace evoarch::detail {

// Inserts `kind` on one src -> dst edge.
inline NodeId insert_on_edge(Genome& genome, NodeId src, NodeId dst,
                             NodeKind kind) {
  const NodeId fresh = genome.add_node(std::move(kind), {src});
  auto inputs = genome.node(dst).inputs;
  for (auto& in : inputs) {
    if (in == src) {
      in = fresh;
      break;
    }
  }
  genome.set_inputs(dst, std::move(inputs));
  return fresh;
}

// Inserts `kind` directly after `src`, taking over all of its consumers.
inline NodeId insert_after(Genome& genome, NodeId src, NodeKind kind) {
  const auto consumers = genome.consumers(src);
  const NodeId fresh = genome.add_node(std::move(kind), {src});
  for (NodeId c : consumers) genome.replace_input(c, src, fresh);
  return fresh;
}

// Strict ancestors of `id`.
inline std::set<NodeId> ancestors(const Genome& genome, NodeId id) {
  std::set<NodeId> seen;
  std::vector<NodeId> stack(genome.node(id).inputs);
  while (!stack.empty()) {
    const NodeId next = stack.back();
    stack.pop_back();
    if (!seen.insert(next).second) continue;
    for (NodeId in : genome.node(next).inputs) stack.push_back(in);
  }
  return seen;
}

}  // namespace evoarch::detail
