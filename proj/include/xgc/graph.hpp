/*
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <map>
#include <string>
#include <vector>

#include "xgc/op.hpp"

namespace xgc {

// A node writing into a shared destination tensor (the residue of a pruned
// concat): the node's output rows land at `chan_offset` within each pixel of
// `dest`, whose channel count is the row stride.
struct SaveAnnotation {
  TensorId dest = -1;
  int64_t chan_offset = 0;
};

struct XNode {
  NodeId id = -1;
  std::string name;                     // manifest identifier
  OpKind kind = OpKind::Input;
  OpAttrs attrs;
  std::vector<TensorId> inputs;         // ordered input tensors
  std::vector<std::string> param_refs;  // weight/bias blob names, in that order
  TensorShape output_shape;
  bool host_executed = false;
};

// The framework-independent computation graph. Vertices are coarse-grained
// operations; a vertex's output tensor shares its id. Pruned concats leave a
// virtual tensor written by several producers via SaveAnnotations.
//
// Graphs are immutable once validated; passes build modified copies.
class XGraph {
 public:
  std::string name;
  std::map<NodeId, XNode> nodes;
  std::map<TensorId, TensorShape> virtual_tensors;
  std::map<NodeId, SaveAnnotation> annotations;

  bool has_node(NodeId id) const { return nodes.count(id) != 0; }
  const XNode& node(NodeId id) const;

  bool is_tensor(TensorId t) const {
    return nodes.count(t) != 0 || virtual_tensors.count(t) != 0;
  }
  const TensorShape& tensor_shape(TensorId t) const;

  // Nodes whose bytes make up tensor `t` (one node normally, several writers
  // for a virtual tensor).
  std::vector<NodeId> producers_of_tensor(TensorId t) const;

  // Nodes that read tensor `t` directly.
  std::vector<NodeId> readers_of_tensor(TensorId t) const;

  // The tensor that node `n` writes: its own id, or its annotation target.
  TensorId written_tensor(NodeId n) const;

  // Dataflow successors/predecessors at node granularity (via written
  // tensors), deduplicated and sorted.
  std::vector<NodeId> consumers(NodeId n) const;
  std::vector<NodeId> producers(NodeId n) const;

  int64_t in_degree(NodeId n) const { return static_cast<int64_t>(producers(n).size()); }
  int64_t out_degree(NodeId n) const { return static_cast<int64_t>(consumers(n).size()); }

  // True when `b` reads `a`'s own (non-annotated) output tensor; this is the
  // edge relation fusion templates match over.
  bool direct_edge(NodeId a, NodeId b) const;

  // Shapes of a node's inputs, in declared order.
  std::vector<TensorShape> input_shapes(NodeId n) const;

  // Structural and shape validation; throws on malformed graphs.
  void validate() const;

  int64_t count_nodes(OpKind k) const;
};

// Deterministic topological order: producers before consumers, ties broken by
// ascending node id. Throws CycleError on cyclic graphs.
std::vector<NodeId> topo_order(const XGraph& g);

}  // namespace xgc
