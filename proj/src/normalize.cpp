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
#include "xgc/normalize.hpp"

#include <algorithm>
#include <cmath>

namespace xgc {

namespace {

// Removes node v; consumers read tensor `replacement` instead.
void splice_out(XGraph& g, NodeId v, TensorId replacement) {
  for (auto& [id, n] : g.nodes)
    for (TensorId& t : n.inputs)
      if (t == v) t = replacement;
  g.nodes.erase(v);
}

// The single producing node of v's only input, when that input is a plain
// node tensor; -1 otherwise.
NodeId sole_producer(const XGraph& g, const XNode& v) {
  if (v.inputs.size() != 1) return -1;
  TensorId t = v.inputs[0];
  if (!g.has_node(t)) return -1;  // virtual tensor
  return t;
}

bool only_consumer_is(const XGraph& g, NodeId p, NodeId v) {
  auto cs = g.consumers(p);
  return cs.size() == 1 && cs[0] == v;
}

std::string fresh_param_name(const ParamTable& params, const std::string& base) {
  std::string name = base;
  int i = 0;
  while (params.count(name)) name = base + "." + std::to_string(i++);
  return name;
}

// Applies y = s[c]*x + add[c] on top of a convolution by rewriting weights
// and bias. Weights are OWHC, so the output channel is the outermost dim.
void scale_conv_params(Model& m, XNode& conv, const std::vector<double>& s,
                       const std::vector<double>& add) {
  const FloatTensor& w = m.params.at(conv.param_refs[0]);
  FloatTensor w2 = w;
  int64_t per_oc = w.elems() / w.dims[0];
  for (int64_t o = 0; o < w.dims[0]; ++o)
    for (int64_t i = 0; i < per_oc; ++i)
      w2.data[o * per_oc + i] = static_cast<float>(w.data[o * per_oc + i] * s[o]);

  FloatTensor b2;
  b2.dims = {w.dims[0]};
  b2.data.assign(w.dims[0], 0.0f);
  if (conv.param_refs.size() == 2) {
    const FloatTensor& b = m.params.at(conv.param_refs[1]);
    for (int64_t o = 0; o < w.dims[0]; ++o)
      b2.data[o] = static_cast<float>(b.data[o] * s[o] + add[o]);
  } else {
    for (int64_t o = 0; o < w.dims[0]; ++o) b2.data[o] = static_cast<float>(add[o]);
  }

  std::string wn = fresh_param_name(m.params, conv.name + "#w");
  m.params[wn] = std::move(w2);
  std::string bn = fresh_param_name(m.params, conv.name + "#b");
  m.params[bn] = std::move(b2);
  conv.param_refs = {wn, bn};
}

}  // namespace

Model fold_bn_scale(const Model& in, NormalizeReport* rep) {
  Model m = in;
  bool changed = true;
  while (changed) {
    changed = false;
    for (NodeId id : topo_order(m.graph)) {
      XNode& v = m.graph.nodes.at(id);
      if (v.kind != OpKind::BatchNorm && v.kind != OpKind::Scale) continue;
      NodeId pid = sole_producer(m.graph, v);
      if (pid < 0) continue;
      XNode& p = m.graph.nodes.at(pid);
      if (!is_conv_family(p.kind) || !only_consumer_is(m.graph, pid, id)) continue;

      int64_t c = v.output_shape.c;
      std::vector<double> s(c), add(c);
      if (v.kind == OpKind::BatchNorm) {
        double eps = v.attrs.eps.value_or(1e-5);
        const auto& mean = m.params.at(v.param_refs[0]).data;
        const auto& var = m.params.at(v.param_refs[1]).data;
        const auto& gamma = m.params.at(v.param_refs[2]).data;
        const auto& beta = m.params.at(v.param_refs[3]).data;
        for (int64_t i = 0; i < c; ++i) {
          s[i] = gamma[i] / std::sqrt(var[i] + eps);
          add[i] = beta[i] - mean[i] * s[i];
        }
      } else {
        const auto& gamma = m.params.at(v.param_refs[0]).data;
        const auto& beta = m.params.at(v.param_refs[1]).data;
        for (int64_t i = 0; i < c; ++i) {
          s[i] = gamma[i];
          add[i] = beta[i];
        }
      }
      scale_conv_params(m, p, s, add);
      if (v.attrs.out_radix) p.attrs.out_radix = v.attrs.out_radix;
      splice_out(m.graph, id, pid);
      changed = true;
      break;  // ids changed; restart the sweep
    }
  }
  if (rep) {
    for (const auto& [id, n] : m.graph.nodes)
      if (n.kind == OpKind::BatchNorm || n.kind == OpKind::Scale)
        rep->unfoldable.push_back(n.name);
  }
  m.graph.validate();
  return m;
}

Model fuse_pointwise(const Model& in) {
  Model m = in;
  bool changed = true;
  while (changed) {
    changed = false;
    for (NodeId id : topo_order(m.graph)) {
      XNode& v = m.graph.nodes.at(id);

      if (v.kind == OpKind::Pad) {
        auto cs = m.graph.consumers(id);
        if (cs.size() != 1) continue;
        XNode& q = m.graph.nodes.at(cs[0]);
        if (!is_conv_family(q.kind) || m.graph.annotations.count(id)) continue;
        q.attrs.pad_top = q.attrs.pt() + v.attrs.pt();
        q.attrs.pad_bottom = q.attrs.pb() + v.attrs.pb();
        q.attrs.pad_left = q.attrs.pl() + v.attrs.pl();
        q.attrs.pad_right = q.attrs.pr() + v.attrs.pr();
        splice_out(m.graph, id, v.inputs[0]);
        changed = true;
        break;
      }

      if (v.kind == OpKind::BiasAdd || v.kind == OpKind::ReLU) {
        NodeId pid = sole_producer(m.graph, v);
        if (pid < 0) continue;
        XNode& p = m.graph.nodes.at(pid);
        if (!only_consumer_is(m.graph, pid, id)) continue;
        if (v.kind == OpKind::BiasAdd) {
          if (!is_conv_family(p.kind)) continue;
          const auto& extra = m.params.at(v.param_refs[0]).data;
          int64_t oc = p.output_shape.c;
          std::vector<double> s(oc, 1.0), add(extra.begin(), extra.end());
          scale_conv_params(m, p, s, add);
        } else {
          if (!is_conv_family(p.kind) && p.kind != OpKind::EltwiseAdd) continue;
          p.attrs.nonlinear = Nonlinear::Relu;
        }
        if (v.attrs.out_radix) p.attrs.out_radix = v.attrs.out_radix;
        splice_out(m.graph, id, pid);
        changed = true;
        break;
      }
    }
  }
  m.graph.validate();
  return m;
}

Model prune_dim_transforms(const Model& in, NormalizeReport* rep) {
  Model m = in;

  for (const auto& [id, n] : m.graph.nodes)
    require(n.kind != OpKind::Pad && n.kind != OpKind::BiasAdd,
            ErrCode::UnsupportedTransform,
            n.name + ": " + kind_name(n.kind) + " was not absorbed by a convolution");

  // Flatten disappears: channel-fastest layout already stores the flattened
  // bytes contiguously.
  bool changed = true;
  while (changed) {
    changed = false;
    for (NodeId id : topo_order(m.graph)) {
      const XNode& v = m.graph.nodes.at(id);
      if (v.kind != OpKind::Flatten) continue;
      require(!m.graph.annotations.count(id), ErrCode::UnsupportedTransform,
              v.name + ": flatten into a strided save");
      splice_out(m.graph, id, v.inputs[0]);
      changed = true;
      break;
    }
  }

  // Concat becomes strided-save annotations. Reverse topological order lets
  // nested concats compose: the outer one is pruned first, so an inner concat
  // carries an annotation whose destination its own producers inherit.
  auto order = topo_order(m.graph);
  std::reverse(order.begin(), order.end());
  for (NodeId id : order) {
    const XNode v = m.graph.nodes.at(id);  // copy; we mutate the graph below
    if (v.kind != OpKind::Concat) continue;

    bool absorbable = true;
    for (TensorId t : v.inputs) {
      if (!m.graph.has_node(t) || m.graph.annotations.count(t) ||
          m.graph.nodes.at(t).kind == OpKind::Input ||
          !only_consumer_is(m.graph, t, id)) {
        absorbable = false;
        break;
      }
    }
    if (!absorbable) {
      if (rep) rep->kept_concats.push_back(v.name);
      continue;  // kept as a data-movement vertex
    }

    // Destination: this concat's own tensor id, unless the concat itself was
    // already annotated into an outer destination.
    TensorId dest = id;
    int64_t base_offset = 0;
    if (auto it = m.graph.annotations.find(id); it != m.graph.annotations.end()) {
      dest = it->second.dest;
      base_offset = it->second.chan_offset;
      m.graph.annotations.erase(it);
    } else {
      m.graph.virtual_tensors[id] = v.output_shape;
    }
    int64_t offset = base_offset;
    for (TensorId t : v.inputs) {
      m.graph.annotations[t] = SaveAnnotation{dest, offset};
      offset += m.graph.tensor_shape(t).c;
    }
    m.graph.nodes.erase(id);
  }

  m.graph.validate();
  return m;
}

Model normalize(const Model& m, NormalizeReport* rep) {
  return prune_dim_transforms(fuse_pointwise(fold_bn_scale(m, rep)), rep);
}

}  // namespace xgc
