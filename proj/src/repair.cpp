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

#include <map>

#include "evoarch/mutation.hpp"
#include "graph_edit.hpp"

namespace evoarch {

namespace {

constexpr int kMaxExtraPadding = 2;

}  // namespace

RepairOutcome repair(const Genome& genome, int max_fixes) {
  RepairOutcome outcome;
  Genome current = genome;
  std::map<NodeId, int> extra_padding;

  for (;;) {
    const ShapeReport report = analyze_shapes(current);
    if (report.ok()) {
      outcome.genome = std::move(current);
      return outcome;
    }
    const ShapeIssue& issue = *report.issue;
    if (!issue.merge_mismatch) {
      outcome.failure = issue.message;
      return outcome;
    }
    if (outcome.fixes >= max_fixes) {
      outcome.failure = "fix budget exhausted: " + issue.message;
      return outcome;
    }

    const Node& merge = current.node(issue.node);
    const NodeId a = merge.inputs[0];
    const NodeId b = merge.inputs[1];
    const TensorShape& sa = report.shapes.at(a);
    const TensorShape& sb = report.shapes.at(b);

    if (sa.height != sb.height || sa.width != sb.width) {
      const bool a_smaller =
          sa.height < sb.height || (sa.height == sb.height && sa.width < sb.width);
      const NodeId smaller = a_smaller ? a : b;
      Node& target = current.node(smaller);
      int& used = extra_padding[smaller];
      if (used >= kMaxExtraPadding) {
        outcome.failure = "padding budget exhausted on node " +
                          std::to_string(smaller) + ": " + issue.message;
        return outcome;
      }
      if (auto* conv = std::get_if<Convolution>(&target.kind)) {
        conv->pad += 1;
      } else if (auto* pool = std::get_if<MaxPool>(&target.kind)) {
        if (pool->pad + 1 >= pool->kernel) {
          outcome.failure = "pooling node " + std::to_string(smaller) +
                            " cannot take more padding";
          return outcome;
        }
        pool->pad += 1;
      } else {
        outcome.failure = "no paddable layer feeds " + issue.message;
        return outcome;
      }
      ++used;
    } else if (merge.type() == LayerType::skip && sa.channels != sb.channels) {
      const bool a_narrower = sa.channels < sb.channels;
      const NodeId narrow = a_narrower ? a : b;
      const int wanted = a_narrower ? sb.channels : sa.channels;
      detail::insert_on_edge(current, narrow, issue.node,
                             Convolution{wanted, 1, 1, 0});
    } else {
      outcome.failure = issue.message;
      return outcome;
    }
    ++outcome.fixes;
  }
}

}  // namespace evoarch
