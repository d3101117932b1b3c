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
#include "xgc/interp.hpp"

#include <algorithm>
#include <set>

namespace xgc {

namespace {

int8_t at(const QTensor& t, int64_t y, int64_t x, int64_t c) {
  return t.data[nhwc_offset(t.shape, y, x, c)];
}

// One convolution output element, exact 64-bit accumulation. Weights are
// OWHC ([oc][kx][ky][ic]); depthwise weights are [c][kx][ky].
int64_t conv_acc(const QTensor& in, const std::vector<int8_t>& w, int64_t oc,
                 int64_t oy, int64_t ox, const OpAttrs& a, OpKind kind) {
  int64_t kw = a.kw(), kh = a.kh(), dil = a.dil();
  int64_t acc = 0;
  if (kind == OpKind::Deconv) {
    for (int64_t ky = 0; ky < kh; ++ky) {
      int64_t ty = oy + a.pt() - ky;
      if (ty < 0 || ty % a.sh() != 0) continue;
      int64_t iy = ty / a.sh();
      if (iy >= in.shape.h) continue;
      for (int64_t kx = 0; kx < kw; ++kx) {
        int64_t tx = ox + a.pl() - kx;
        if (tx < 0 || tx % a.sw() != 0) continue;
        int64_t ix = tx / a.sw();
        if (ix >= in.shape.w) continue;
        for (int64_t ic = 0; ic < in.shape.c; ++ic)
          acc += int64_t(at(in, iy, ix, ic)) *
                 w[((oc * kw + kx) * kh + ky) * in.shape.c + ic];
      }
    }
    return acc;
  }
  for (int64_t ky = 0; ky < kh; ++ky) {
    int64_t iy = oy * a.sh() + ky * dil - a.pt();
    if (iy < 0 || iy >= in.shape.h) continue;
    for (int64_t kx = 0; kx < kw; ++kx) {
      int64_t ix = ox * a.sw() + kx * dil - a.pl();
      if (ix < 0 || ix >= in.shape.w) continue;
      if (kind == OpKind::DepthwiseConv) {
        acc += int64_t(at(in, iy, ix, oc)) * w[(oc * kw + kx) * kh + ky];
      } else {
        for (int64_t ic = 0; ic < in.shape.c; ++ic)
          acc += int64_t(at(in, iy, ix, ic)) *
                 w[((oc * kw + kx) * kh + ky) * in.shape.c + ic];
      }
    }
  }
  return acc;
}

}  // namespace

std::map<TensorId, QTensor> run_graph(const Model& m, const Quantization& q,
                                      const std::map<NodeId, QTensor>& inputs,
                                      ExecDiag* diag) {
  const XGraph& g = m.graph;
  std::map<TensorId, QTensor> tensors;

  auto qparam = [&](const std::string& name) -> const QParam& {
    auto it = q.params.find(name);
    require(it != q.params.end(), ErrCode::DanglingRef, "missing parameter " + name);
    return it->second;
  };
  auto radix_of = [&](TensorId t) { return q.radix.tensor.at(t); };

  // Virtual destinations are materialized up front so writers can stripe
  // into them.
  for (const auto& [vid, shape] : g.virtual_tensors) {
    QTensor vt;
    vt.shape = shape;
    vt.radix = radix_of(vid);
    vt.data.assign(shape.elems(), 0);
    tensors[vid] = std::move(vt);
  }

  for (NodeId id : topo_order(g)) {
    const XNode& n = g.node(id);
    if (n.kind == OpKind::Output || n.host_executed) continue;

    QTensor out;
    out.shape = n.output_shape;
    out.radix = radix_of(id);

    if (n.kind == OpKind::Input) {
      auto it = inputs.find(id);
      require(it != inputs.end(), ErrCode::Invalid, "no input data for " + n.name);
      require(it->second.shape == n.output_shape, ErrCode::ShapeMismatch,
              n.name + ": input tensor shape mismatch");
      require(it->second.radix == out.radix, ErrCode::Invalid,
              n.name + ": input radix does not match the compiled radix");
      out.data = it->second.data;
    } else {
      std::vector<const QTensor*> ins;
      for (TensorId t : n.inputs) {
        auto it = tensors.find(t);
        require(it != tensors.end(), ErrCode::Invalid, "tensor not ready");
        ins.push_back(&it->second);
      }
      const QTensor& in0 = *ins.at(0);
      out.data.assign(out.shape.elems(), 0);
      int r_out = out.radix;

      switch (n.kind) {
        case OpKind::Conv:
        case OpKind::DilatedConv:
        case OpKind::Deconv:
        case OpKind::DepthwiseConv: {
          const QParam& w = qparam(n.param_refs[0]);
          const QParam* b = n.param_refs.size() > 1 ? &qparam(n.param_refs[1]) : nullptr;
          int acc_radix = in0.radix + w.radix;
          int out_shift = acc_radix - r_out;
          int bias_shift = b ? acc_radix - b->radix : 0;
          bool relu = n.attrs.nonlinear == Nonlinear::Relu;
          for (int64_t oy = 0; oy < out.shape.h; ++oy)
            for (int64_t ox = 0; ox < out.shape.w; ++ox)
              for (int64_t oc = 0; oc < out.shape.c; ++oc) {
                int64_t acc = b ? bias_to_acc(b->data[oc], bias_shift) : 0;
                acc += conv_acc(in0, w.data, oc, oy, ox, n.attrs, n.kind);
                out.data[nhwc_offset(out.shape, oy, ox, oc)] =
                    requantize(acc, out_shift, relu, diag);
              }
          break;
        }
        case OpKind::Pool: {
          bool avg = n.attrs.pool_type == PoolType::Avg;
          int out_shift = in0.radix - r_out;
          int64_t kw = n.attrs.kw(), kh = n.attrs.kh();
          for (int64_t oy = 0; oy < out.shape.h; ++oy)
            for (int64_t ox = 0; ox < out.shape.w; ++ox)
              for (int64_t c = 0; c < out.shape.c; ++c) {
                int64_t acc = avg ? 0 : INT64_MIN;
                for (int64_t ky = 0; ky < kh; ++ky) {
                  int64_t iy = oy * n.attrs.sh() + ky - n.attrs.pt();
                  for (int64_t kx = 0; kx < kw; ++kx) {
                    int64_t ix = ox * n.attrs.sw() + kx - n.attrs.pl();
                    bool inside = iy >= 0 && iy < in0.shape.h && ix >= 0 &&
                                  ix < in0.shape.w;
                    if (avg)
                      acc += inside ? at(in0, iy, ix, c) : 0;
                    else if (inside)
                      acc = std::max<int64_t>(acc, at(in0, iy, ix, c));
                  }
                }
                int8_t v;
                if (avg) {
                  v = avg_pool_value(acc, kw * kh, out_shift, diag);
                } else {
                  require(acc != INT64_MIN, ErrCode::Invalid,
                          n.name + ": fully padded pool window");
                  v = requantize(acc, out_shift, false, diag);
                }
                out.data[nhwc_offset(out.shape, oy, ox, c)] = v;
              }
          break;
        }
        case OpKind::EltwiseAdd: {
          int common = 0;
          for (const QTensor* t : ins) common = std::max(common, t->radix);
          int out_shift = common - r_out;
          bool relu = n.attrs.nonlinear == Nonlinear::Relu;
          for (int64_t i = 0; i < out.shape.elems(); ++i) {
            int64_t acc = 0;
            for (const QTensor* t : ins)
              acc += int64_t(t->data[i]) << (common - t->radix);
            out.data[i] = requantize(acc, out_shift, relu, diag);
          }
          break;
        }
        case OpKind::ReLU: {
          int out_shift = in0.radix - r_out;
          for (int64_t i = 0; i < out.shape.elems(); ++i)
            out.data[i] = requantize(in0.data[i], out_shift, true, diag);
          break;
        }
        case OpKind::Upsample: {
          for (int64_t oy = 0; oy < out.shape.h; ++oy)
            for (int64_t ox = 0; ox < out.shape.w; ++ox)
              for (int64_t c = 0; c < out.shape.c; ++c)
                out.data[nhwc_offset(out.shape, oy, ox, c)] =
                    at(in0, oy / n.attrs.sh(), ox / n.attrs.sw(), c);
          break;
        }
        case OpKind::Reorg: {
          int64_t s = n.attrs.sh();
          for (int64_t oy = 0; oy < out.shape.h; ++oy)
            for (int64_t ox = 0; ox < out.shape.w; ++ox)
              for (int64_t c = 0; c < in0.shape.c; ++c)
                for (int64_t py = 0; py < s; ++py)
                  for (int64_t px = 0; px < s; ++px)
                    out.data[nhwc_offset(out.shape, oy, ox,
                                         c * s * s + py * s + px)] =
                        at(in0, oy * s + py, ox * s + px, c);
          break;
        }
        case OpKind::Concat: {
          int64_t c_at = 0;
          for (const QTensor* t : ins) {
            for (int64_t y = 0; y < out.shape.h; ++y)
              for (int64_t x = 0; x < out.shape.w; ++x)
                for (int64_t c = 0; c < t->shape.c; ++c)
                  out.data[nhwc_offset(out.shape, y, x, c_at + c)] = at(*t, y, x, c);
            c_at += t->shape.c;
          }
          break;
        }
        default:
          fail(ErrCode::UnsupportedOp,
               n.name + ": cannot execute " + kind_name(n.kind));
      }
    }

    // Stripe into the virtual destination when annotated.
    if (auto it = g.annotations.find(id); it != g.annotations.end()) {
      QTensor& dest = tensors.at(it->second.dest);
      int64_t off = it->second.chan_offset;
      for (int64_t y = 0; y < out.shape.h; ++y)
        for (int64_t x = 0; x < out.shape.w; ++x)
          for (int64_t c = 0; c < out.shape.c; ++c)
            dest.data[nhwc_offset(dest.shape, y, x, off + c)] =
                out.data[nhwc_offset(out.shape, y, x, c)];
    }
    tensors[id] = std::move(out);
  }
  return tensors;
}

std::vector<TensorId> device_output_tensors(const XGraph& g) {
  std::set<TensorId> out;
  for (const auto& [id, n] : g.nodes) {
    if (n.kind != OpKind::Output && !n.host_executed) continue;
    for (TensorId t : n.inputs) {
      bool device_made = true;  // host results never land in device DDR
      for (NodeId w : g.producers_of_tensor(t))
        if (g.node(w).host_executed) device_made = false;
      if (device_made) out.insert(t);
    }
  }
  return {out.begin(), out.end()};
}

}  // namespace xgc
