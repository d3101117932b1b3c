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
#include "xgc/graph.hpp"

#include <algorithm>
#include <queue>
#include <set>

namespace xgc {

const XNode& XGraph::node(NodeId id) const {
  auto it = nodes.find(id);
  require(it != nodes.end(), ErrCode::Invalid, "no node with id " + std::to_string(id));
  return it->second;
}

const TensorShape& XGraph::tensor_shape(TensorId t) const {
  if (auto it = nodes.find(t); it != nodes.end()) return it->second.output_shape;
  auto it = virtual_tensors.find(t);
  require(it != virtual_tensors.end(), ErrCode::Invalid,
          "no tensor with id " + std::to_string(t));
  return it->second;
}

std::vector<NodeId> XGraph::producers_of_tensor(TensorId t) const {
  if (nodes.count(t)) return {t};
  std::vector<NodeId> out;
  for (const auto& [nid, ann] : annotations)
    if (ann.dest == t) out.push_back(nid);
  return out;  // map iteration keeps this sorted
}

std::vector<NodeId> XGraph::readers_of_tensor(TensorId t) const {
  std::vector<NodeId> out;
  for (const auto& [nid, n] : nodes)
    for (TensorId in : n.inputs)
      if (in == t) {
        out.push_back(nid);
        break;
      }
  return out;
}

TensorId XGraph::written_tensor(NodeId n) const {
  auto it = annotations.find(n);
  return it == annotations.end() ? n : it->second.dest;
}

std::vector<NodeId> XGraph::consumers(NodeId n) const {
  return readers_of_tensor(written_tensor(n));
}

std::vector<NodeId> XGraph::producers(NodeId n) const {
  std::set<NodeId> acc;
  for (TensorId t : node(n).inputs)
    for (NodeId p : producers_of_tensor(t)) acc.insert(p);
  return {acc.begin(), acc.end()};
}

bool XGraph::direct_edge(NodeId a, NodeId b) const {
  if (!has_node(a) || !has_node(b)) return false;
  if (annotations.count(a)) return false;
  const auto& ins = node(b).inputs;
  return std::find(ins.begin(), ins.end(), a) != ins.end();
}

std::vector<TensorShape> XGraph::input_shapes(NodeId n) const {
  std::vector<TensorShape> out;
  for (TensorId t : node(n).inputs) out.push_back(tensor_shape(t));
  return out;
}

int64_t XGraph::count_nodes(OpKind k) const {
  int64_t c = 0;
  for (const auto& [id, n] : nodes)
    if (n.kind == k) ++c;
  return c;
}

std::vector<NodeId> topo_order(const XGraph& g) {
  std::map<NodeId, int64_t> pending;
  for (const auto& [id, n] : g.nodes) pending[id] = g.in_degree(id);
  std::priority_queue<NodeId, std::vector<NodeId>, std::greater<NodeId>> ready;
  for (const auto& [id, deg] : pending)
    if (deg == 0) ready.push(id);
  std::vector<NodeId> order;
  order.reserve(g.nodes.size());
  while (!ready.empty()) {
    NodeId id = ready.top();
    ready.pop();
    order.push_back(id);
    for (NodeId c : g.consumers(id))
      if (--pending[c] == 0) ready.push(c);
  }
  require(order.size() == g.nodes.size(), ErrCode::Cycle,
          "graph " + g.name + " contains a cycle");
  return order;
}

void XGraph::validate() const {
  require(!nodes.empty(), ErrCode::Schema, "graph has no nodes");
  for (const auto& [id, n] : nodes) {
    require(id == n.id, ErrCode::Invalid, "node id mismatch");
    check_attrs(n.kind, n.attrs, n.name);
    n.output_shape.validate();
    for (TensorId t : n.inputs)
      require(is_tensor(t), ErrCode::DanglingRef,
              n.name + " reads unknown tensor " + std::to_string(t));
    if (n.kind == OpKind::Input)
      require(n.inputs.empty(), ErrCode::Schema, n.name + ": input nodes take no inputs");
  }

  // Annotation consistency: writers of a virtual tensor tile its channel
  // range exactly and agree on spatial extents.
  for (const auto& [vid, vshape] : virtual_tensors) {
    auto writers = producers_of_tensor(vid);
    require(!writers.empty(), ErrCode::Invalid,
            "virtual tensor " + std::to_string(vid) + " has no writers");
    std::vector<std::pair<int64_t, int64_t>> ranges;
    for (NodeId w : writers) {
      const auto& ws = node(w).output_shape;
      const auto& ann = annotations.at(w);
      require(ws.h == vshape.h && ws.w == vshape.w, ErrCode::ShapeMismatch,
              node(w).name + ": strided-save spatial extents differ from destination");
      require(ann.chan_offset >= 0 && ann.chan_offset + ws.c <= vshape.c,
              ErrCode::OutOfBounds, node(w).name + ": strided-save channel range escapes");
      ranges.emplace_back(ann.chan_offset, ann.chan_offset + ws.c);
    }
    std::sort(ranges.begin(), ranges.end());
    int64_t at = 0;
    for (auto [lo, hi] : ranges) {
      require(lo == at, ErrCode::ShapeMismatch,
              "strided saves do not tile virtual tensor " + std::to_string(vid));
      at = hi;
    }
    require(at == vshape.c, ErrCode::ShapeMismatch,
            "strided saves do not cover virtual tensor " + std::to_string(vid));
  }
  for (const auto& [nid, ann] : annotations) {
    require(has_node(nid), ErrCode::Invalid, "annotation on unknown node");
    require(virtual_tensors.count(ann.dest), ErrCode::Invalid,
            "annotation target is not a virtual tensor");
  }

  // Acyclic + shape re-inference along the order.
  auto order = topo_order(*this);
  for (NodeId id : order) {
    const XNode& n = node(id);
    if (n.kind == OpKind::Input) continue;
    TensorShape got = infer_shape(n.kind, n.attrs, input_shapes(id), n.name);
    if (n.kind == OpKind::FullyConnected || n.kind == OpKind::Flatten) {
      // Host-side reshape boundary: byte count is what matters.
      require(got.elems() == n.output_shape.elems(), ErrCode::ShapeMismatch,
              n.name + ": element count mismatch");
    } else {
      require(got == n.output_shape, ErrCode::ShapeMismatch,
              n.name + ": declared " + n.output_shape.str() + ", computed " + got.str());
    }
  }

  // Single weakly-connected component.
  if (nodes.size() > 1) {
    std::set<NodeId> seen;
    std::vector<NodeId> stack = {nodes.begin()->first};
    while (!stack.empty()) {
      NodeId id = stack.back();
      stack.pop_back();
      if (!seen.insert(id).second) continue;
      for (NodeId c : consumers(id)) stack.push_back(c);
      for (NodeId p : producers(id)) stack.push_back(p);
    }
    require(seen.size() == nodes.size(), ErrCode::Schema,
            "graph " + name + " is not connected");
  }
}

}  // namespace xgc
