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
#include "xgc/quant.hpp"

#include <cmath>

namespace xgc {

int choose_radix(const std::vector<float>& data) {
  int best = 0;
  double best_sse = -1.0;
  for (int r = 0; r <= 7; ++r) {
    double sse = 0.0;
    double scale = double(1 << r);
    for (float x : data) {
      double q = double(quantize_value(x, r)) / scale;
      double e = double(x) - q;
      sse += e * e;
    }
    if (best_sse < 0.0 || sse < best_sse || (sse == best_sse && r > best)) {
      best = r;
      best_sse = sse;
    }
  }
  return best;
}

QTensor quantize(const FloatTensor& t, const TensorShape& shape,
                 const FixedPointPolicy&) {
  require(t.elems() == shape.elems(), ErrCode::ShapeMismatch,
          "float tensor does not match the requested shape");
  QTensor q;
  q.shape = shape;
  q.radix = choose_radix(t.data);
  q.data.reserve(t.data.size());
  for (float x : t.data) q.data.push_back(quantize_value(x, q.radix));
  return q;
}

QParam quantize_param(const FloatTensor& t, const FixedPointPolicy&) {
  QParam q;
  q.dims = t.dims;
  q.radix = choose_radix(t.data);
  q.data.reserve(t.data.size());
  for (float x : t.data) q.data.push_back(quantize_value(x, q.radix));
  return q;
}

Quantization quantize_model(const Model& m, const FixedPointPolicy& policy) {
  Quantization q;

  for (const auto& [id, n] : m.graph.nodes) {
    if (n.host_executed) continue;
    for (const auto& p : n.param_refs)
      if (!q.params.count(p)) {
        auto it = m.params.find(p);
        require(it != m.params.end(), ErrCode::DanglingRef, "missing parameter " + p);
        q.params[p] = quantize_param(it->second, policy);
        q.radix.param[p] = q.params[p].radix;
      }
  }

  for (NodeId id : topo_order(m.graph)) {
    const XNode& n = m.graph.node(id);
    auto input_radix = [&](size_t i) {
      TensorId t = n.inputs.at(i);
      auto it = q.radix.tensor.find(t);
      require(it != q.radix.tensor.end(), ErrCode::Invalid,
              n.name + ": input radix not assigned yet");
      return it->second;
    };
    int r = 0;
    switch (n.kind) {
      case OpKind::Input:
        r = n.attrs.out_radix.value_or(4);
        break;
      case OpKind::Conv:
      case OpKind::Deconv:
      case OpKind::DepthwiseConv:
      case OpKind::DilatedConv:
      case OpKind::FullyConnected:
        r = n.attrs.out_radix.value_or(4);
        break;
      case OpKind::EltwiseAdd: {
        int widest = 0;
        for (size_t i = 0; i < n.inputs.size(); ++i)
          widest = std::max(widest, input_radix(i));
        r = n.attrs.out_radix.value_or(widest);
        break;
      }
      case OpKind::Upsample:
      case OpKind::Reorg:
      case OpKind::Concat:
      case OpKind::Flatten:
      case OpKind::Output: {
        r = input_radix(0);
        if (n.kind == OpKind::Concat)
          for (size_t i = 1; i < n.inputs.size(); ++i)
            require(input_radix(i) == r, ErrCode::Invalid,
                    n.name + ": concat operands must share one radix");
        require(!n.attrs.out_radix || *n.attrs.out_radix == r, ErrCode::Invalid,
                n.name + ": data movement cannot change the radix");
        break;
      }
      default:
        // pool, relu, bn, scale, pad, bias_add: follow the input by default
        r = n.attrs.out_radix.value_or(n.inputs.empty() ? 4 : input_radix(0));
        break;
    }
    q.radix.tensor[id] = r;
    // A node writing into a pruned-concat destination fixes that tensor's
    // radix; all writers must agree.
    if (auto it = m.graph.annotations.find(id); it != m.graph.annotations.end()) {
      auto [vit, fresh] = q.radix.tensor.emplace(it->second.dest, r);
      require(fresh || vit->second == r, ErrCode::Invalid,
              n.name + ": strided-save writers disagree on the destination radix");
    }
  }
  return q;
}

}  // namespace xgc
