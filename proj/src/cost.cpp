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
#include "xgc/cost.hpp"

#include <set>

namespace xgc {

int64_t conv_macs(const TensorShape& in_shape, const OpAttrs& a) {
  TensorShape out = infer_shape(OpKind::Conv, a, {in_shape}, "conv_macs");
  return 2 * a.kw() * a.kh() * in_shape.c * *a.out_channels * out.h * out.w;
}

int64_t op_compute_ops(const XGraph& g, NodeId id) {
  const XNode& n = g.node(id);
  const TensorShape& out = n.output_shape;
  switch (n.kind) {
    case OpKind::Conv:
    case OpKind::DilatedConv:
      return conv_macs(g.tensor_shape(n.inputs[0]), n.attrs);
    case OpKind::DepthwiseConv:
      return 2 * n.attrs.kw() * n.attrs.kh() * out.elems();
    case OpKind::Deconv: {
      const TensorShape& in = g.tensor_shape(n.inputs[0]);
      return 2 * n.attrs.kw() * n.attrs.kh() * in.elems() * out.c;
    }
    case OpKind::Pool:
      return n.attrs.kw() * n.attrs.kh() * out.elems();
    case OpKind::EltwiseAdd:
      return (static_cast<int64_t>(n.inputs.size()) - 1) * out.elems();
    case OpKind::ReLU:
      return out.elems();
    default:
      return 0;  // movement ops contribute no arithmetic
  }
}

CtcParts compute_ctc(const Model& m, const std::vector<ExecGroup>& groups, bool fused) {
  const XGraph& g = m.graph;
  CtcParts parts;
  for (const ExecGroup& grp : groups) {
    std::set<NodeId> members(grp.members.begin(), grp.members.end());
    for (NodeId id : grp.members) {
      const XNode& n = g.node(id);
      parts.a_comp += op_compute_ops(g, id);
      for (TensorId t : n.inputs) parts.a_ac += g.tensor_shape(t).bytes();
      for (const auto& p : n.param_refs) {
        auto it = m.params.find(p);
        require(it != m.params.end(), ErrCode::DanglingRef, "missing parameter " + p);
        parts.a_ac += it->second.elems();
      }
      parts.a_ac += n.output_shape.bytes();
      // Intra-group intermediate: this member's output feeds only other
      // members, so fusion keeps it on-chip (one save and one load avoided).
      if (!grp.horizontal) {
        auto consumers = g.consumers(id);
        bool internal = !consumers.empty();
        for (NodeId c : consumers)
          if (!members.count(c)) internal = false;
        if (internal) parts.intermediate_bytes += n.output_shape.bytes();
      }
    }
    if (grp.horizontal && grp.members.size() > 1) {
      // Siblings share one input load instead of one each.
      const XNode& head = g.node(grp.members[0]);
      parts.shared_input_bytes += g.tensor_shape(head.inputs[0]).bytes() *
                                  (static_cast<int64_t>(grp.members.size()) - 1);
    }
  }
  if (fused) parts.a_ac -= 2 * parts.intermediate_bytes + parts.shared_input_bytes;
  parts.ctc = parts.a_ac > 0 ? double(parts.a_comp) / double(parts.a_ac) : 0.0;
  return parts;
}

GroupEvaluator::GroupEvaluator(const Model& m, const Quantization& q,
                               const HwConfig& hw)
    : model_(m), quant_(q), hw_(hw), engines_(EngineModel::from_hw(hw)) {
  // Pricing never executes data, so a reuse-free layout keeps evaluation
  // streams free of spurious write-after-read serialization.
  plan_ = allocate_ddr_staged(m, {topo_order(m.graph)});
}

int64_t GroupEvaluator::cycles(const std::vector<NodeId>& members, bool horizontal) {
  ExecGroup grp;
  grp.members = members;
  grp.horizontal = horizontal;
  return cycles(grp);
}

int64_t GroupEvaluator::cycles(const ExecGroup& group) {
  std::string key = group.horizontal ? "h" : "c";
  for (NodeId id : group.members) key += ":" + std::to_string(id);
  {
    std::lock_guard<std::mutex> lock(mu_);
    if (auto it = memo_.find(key); it != memo_.end()) return it->second;
  }
  LowerInput in{model_, quant_, plan_, hw_};
  Stream body;
  BufferCaches caches(hw_);
  lower_group(in, group, caches, body);
  body = assign_dependencies(std::move(body));
  Stream program = finalize_stream(std::move(body));
  int64_t total = simulate(program, engines_).report.total_cycles;
  std::lock_guard<std::mutex> lock(mu_);
  memo_[key] = total;
  return total;
}

}  // namespace xgc
