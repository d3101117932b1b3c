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
#include "xgc/exec.hpp"

#include <algorithm>
#include <map>

namespace xgc {

std::vector<uint8_t> build_ddr_image(const Model& m, const Quantization& q,
                                     const DdrPlan& plan,
                                     const std::map<NodeId, QTensor>& inputs) {
  std::vector<uint8_t> ddr(plan.total_bytes, 0);
  for (const auto& [name, region] : plan.params) {
    const QParam& p = q.params.at(name);
    require(static_cast<int64_t>(p.data.size()) == region.length, ErrCode::Invalid,
            "parameter size mismatch for " + name);
    std::copy(p.data.begin(), p.data.end(),
              reinterpret_cast<int8_t*>(ddr.data()) + region.base);
  }
  for (const auto& [id, t] : inputs) {
    const XNode& n = m.graph.node(id);
    require(n.kind == OpKind::Input, ErrCode::Invalid, n.name + " is not an input");
    require(t.shape == n.output_shape, ErrCode::ShapeMismatch,
            n.name + ": input shape mismatch");
    require(t.radix == q.radix.tensor.at(id), ErrCode::Invalid,
            n.name + ": input radix does not match the compiled radix");
    const DdrRegion& region = plan.tensor(id);
    std::copy(t.data.begin(), t.data.end(),
              reinterpret_cast<int8_t*>(ddr.data()) + region.base);
  }
  return ddr;
}

namespace {

struct Machine {
  std::vector<uint8_t>* spaces[4];
  // Partial sums of in-flight convolution tiles, keyed by output region.
  std::map<std::pair<int, uint32_t>, std::vector<int64_t>> acc;

  std::vector<uint8_t>& of(Space s) { return *spaces[static_cast<int>(s)]; }

  void check(const Region& r) {
    int64_t end = r.pat.span_end();
    require(end <= static_cast<int64_t>(of(r.space).size()) && r.pat.bytes() >= 0,
            ErrCode::OutOfBounds,
            std::string("region escapes ") + space_name(r.space) + " (end " +
                std::to_string(end) + ")");
  }

  // Bytes of a region in pattern order.
  std::vector<int8_t> gather(const Region& r) {
    check(r);
    const auto& mem = of(r.space);
    std::vector<int8_t> out;
    out.reserve(r.pat.bytes());
    for (uint32_t i0 = 0; i0 < r.pat.n0; ++i0)
      for (uint32_t i1 = 0; i1 < r.pat.n1; ++i1) {
        int64_t base = int64_t(r.pat.base) + int64_t(i0) * r.pat.s0 +
                       int64_t(i1) * r.pat.s1;
        for (uint32_t b = 0; b < r.pat.run; ++b)
          out.push_back(static_cast<int8_t>(mem[base + b]));
      }
    return out;
  }

  void scatter(const Region& r, const std::vector<int8_t>& bytes) {
    check(r);
    require(static_cast<int64_t>(bytes.size()) == r.pat.bytes(), ErrCode::Invalid,
            "scatter size mismatch");
    auto& mem = of(r.space);
    size_t at = 0;
    for (uint32_t i0 = 0; i0 < r.pat.n0; ++i0)
      for (uint32_t i1 = 0; i1 < r.pat.n1; ++i1) {
        int64_t base = int64_t(r.pat.base) + int64_t(i0) * r.pat.s0 +
                       int64_t(i1) * r.pat.s1;
        for (uint32_t b = 0; b < r.pat.run; ++b)
          mem[base + b] = static_cast<uint8_t>(bytes[at++]);
      }
  }
};

void exec_conv(Machine& mc, const Instruction& ins, ExecDiag* diag) {
  const auto& a = std::get<ConvArgs>(ins.args);
  std::vector<int8_t> in = mc.gather(ins.reads.at(0));
  std::vector<int8_t> wt = mc.gather(ins.reads.at(1));
  require(static_cast<int64_t>(in.size()) == int64_t(a.in_h) * a.in_w * a.in_c,
          ErrCode::Invalid, "conv input region does not match its geometry");

  auto key = std::make_pair(static_cast<int>(ins.write->space), ins.write->pat.base);
  int64_t out_elems = int64_t(a.out_h) * a.out_w * a.out_c;
  if (!a.accumulate) {
    std::vector<int64_t> init(out_elems, 0);
    if (a.has_bias) {
      std::vector<int8_t> bias = mc.gather(ins.reads.at(2));
      for (int64_t oy = 0; oy < a.out_h; ++oy)
        for (int64_t ox = 0; ox < a.out_w; ++ox)
          for (int64_t oc = 0; oc < a.out_c; ++oc)
            init[(oy * a.out_w + ox) * a.out_c + oc] =
                bias_to_acc(bias[oc], a.bias_shift);
    }
    mc.acc[key] = std::move(init);
  }
  auto it = mc.acc.find(key);
  require(it != mc.acc.end() &&
              static_cast<int64_t>(it->second.size()) == out_elems,
          ErrCode::Invalid, "accumulating conv without an initialized tile");
  std::vector<int64_t>& acc = it->second;

  auto in_at = [&](int64_t y, int64_t x, int64_t c) {
    return int64_t(in[(y * a.in_w + x) * a.in_c + c]);
  };
  int64_t taps_c = a.mode == 1 ? 1 : a.in_c;
  auto w_at = [&](int64_t oc, int64_t kx, int64_t ky, int64_t c) {
    return int64_t(wt[((oc * a.k_w + kx) * a.k_h + ky) * taps_c + c]);
  };

  for (int64_t oy = 0; oy < a.out_h; ++oy)
    for (int64_t ox = 0; ox < a.out_w; ++ox)
      for (int64_t oc = 0; oc < a.out_c; ++oc) {
        int64_t sum = 0;
        for (int64_t ky = 0; ky < a.k_h; ++ky)
          for (int64_t kx = 0; kx < a.k_w; ++kx) {
            int64_t iy, ix;
            if (a.mode == 2) {
              int64_t ty = oy + a.pad_top - ky;
              int64_t tx = ox + a.pad_left - kx;
              if (ty < 0 || tx < 0 || ty % a.s_h || tx % a.s_w) continue;
              iy = ty / a.s_h;
              ix = tx / a.s_w;
            } else {
              iy = oy * a.s_h + ky * a.dilation - a.pad_top;
              ix = ox * a.s_w + kx * a.dilation - a.pad_left;
            }
            if (iy < 0 || iy >= a.in_h || ix < 0 || ix >= a.in_w) continue;
            if (a.mode == 1)
              sum += in_at(iy, ix, oc) * w_at(oc, kx, ky, 0);
            else
              for (int64_t ic = 0; ic < a.in_c; ++ic)
                sum += in_at(iy, ix, ic) * w_at(oc, kx, ky, ic);
          }
        acc[(oy * a.out_w + ox) * a.out_c + oc] += sum;
      }

  if (a.requant) {
    std::vector<int8_t> out(out_elems);
    for (int64_t i = 0; i < out_elems; ++i)
      out[i] = requantize(acc[i], a.out_shift, a.relu, diag);
    mc.scatter(*ins.write, out);
    mc.acc.erase(key);
  }
}

void exec_pool(Machine& mc, const Instruction& ins, ExecDiag* diag) {
  const auto& a = std::get<PoolArgs>(ins.args);
  std::vector<int8_t> in = mc.gather(ins.reads.at(0));
  require(static_cast<int64_t>(in.size()) == int64_t(a.in_h) * a.in_w * a.channels,
          ErrCode::Invalid, "pool input region does not match its geometry");
  std::vector<int8_t> out(int64_t(a.out_h) * a.out_w * a.channels);
  for (int64_t oy = 0; oy < a.out_h; ++oy)
    for (int64_t ox = 0; ox < a.out_w; ++ox)
      for (int64_t c = 0; c < a.channels; ++c) {
        int64_t acc = a.avg ? 0 : INT64_MIN;
        for (int64_t ky = 0; ky < a.k_h; ++ky)
          for (int64_t kx = 0; kx < a.k_w; ++kx) {
            int64_t iy = oy * a.s_h + ky - a.pad_top;
            int64_t ix = ox * a.s_w + kx - a.pad_left;
            bool inside = iy >= 0 && iy < a.in_h && ix >= 0 && ix < a.in_w;
            int64_t v = inside ? in[(iy * a.in_w + ix) * a.channels + c] : 0;
            if (a.avg)
              acc += inside ? v : 0;
            else if (inside)
              acc = std::max(acc, v);
          }
        int8_t q;
        if (a.avg) {
          q = avg_pool_value(acc, int64_t(a.k_w) * a.k_h, a.out_shift, diag);
        } else {
          require(acc != INT64_MIN, ErrCode::Invalid, "fully padded pool window");
          q = requantize(acc, a.out_shift, false, diag);
        }
        out[(oy * a.out_w + ox) * a.channels + c] = q;
      }
  mc.scatter(*ins.write, out);
}

void exec_eltwise(Machine& mc, const Instruction& ins, ExecDiag* diag) {
  const auto& a = std::get<EltwiseArgs>(ins.args);
  std::vector<std::vector<int8_t>> arms;
  for (const Region& r : ins.reads) arms.push_back(mc.gather(r));
  for (const auto& arm : arms)
    require(arm.size() == a.elems, ErrCode::Invalid, "eltwise arm size mismatch");
  std::vector<int8_t> out(a.elems);
  for (uint32_t i = 0; i < a.elems; ++i) {
    int64_t acc = 0;
    for (int k = 0; k < a.arity; ++k)
      acc += int64_t(arms[k][i]) << a.in_shift[k];
    out[i] = requantize(acc, a.out_shift, a.relu, diag);
  }
  mc.scatter(*ins.write, out);
}

void exec_reorg(Machine& mc, const Instruction& ins) {
  const auto& a = std::get<ReorgArgs>(ins.args);
  std::vector<int8_t> in = mc.gather(ins.reads.at(0));
  int64_t s = a.stride;
  int64_t ow = a.in_w / s, oh = a.in_h / s, oc = int64_t(a.in_c) * s * s;
  std::vector<int8_t> out(oh * ow * oc);
  for (int64_t oy = 0; oy < oh; ++oy)
    for (int64_t ox = 0; ox < ow; ++ox)
      for (int64_t c = 0; c < a.in_c; ++c)
        for (int64_t py = 0; py < s; ++py)
          for (int64_t px = 0; px < s; ++px)
            out[(oy * ow + ox) * oc + c * s * s + py * s + px] =
                in[((oy * s + py) * a.in_w + (ox * s + px)) * a.in_c + c];
  mc.scatter(*ins.write, out);
}

}  // namespace

std::vector<uint8_t> run_stream(const Stream& stream, const HwConfig& hw,
                                std::vector<uint8_t> ddr, ExecDiag* diag) {
  std::vector<uint8_t> buf_in(hw.b_in, 0), buf_wt(hw.b_weights, 0), buf_out(hw.b_out, 0);
  Machine mc{{&ddr, &buf_in, &buf_wt, &buf_out}, {}};

  std::vector<const Instruction*> order;
  order.reserve(stream.size());
  for (const Instruction& ins : stream) order.push_back(&ins);
  std::sort(order.begin(), order.end(),
            [](const Instruction* x, const Instruction* y) { return x->seq < y->seq; });

  for (const Instruction* ins : order) {
    switch (ins->kind) {
      case InstrKind::Load:
      case InstrKind::Save: {
        std::vector<int8_t> bytes = mc.gather(ins->reads.at(0));
        require(static_cast<int64_t>(bytes.size()) == ins->write->pat.bytes(),
                ErrCode::Invalid, "move size mismatch");
        mc.scatter(*ins->write, bytes);
        break;
      }
      case InstrKind::Conv:
        exec_conv(mc, *ins, diag);
        break;
      case InstrKind::Pool:
        exec_pool(mc, *ins, diag);
        break;
      case InstrKind::Misc:
        if (ins->misc == MiscOp::Eltwise)
          exec_eltwise(mc, *ins, diag);
        else if (ins->misc == MiscOp::Reorg)
          exec_reorg(mc, *ins);
        break;
    }
  }
  return ddr;
}

std::vector<uint8_t> extract_tensor(const std::vector<uint8_t>& ddr,
                                    const DdrPlan& plan, TensorId t) {
  const DdrRegion& r = plan.tensor(t);
  require(r.base + r.length <= static_cast<int64_t>(ddr.size()), ErrCode::OutOfBounds,
          "tensor region escapes the DDR image");
  return {ddr.begin() + r.base, ddr.begin() + r.base + r.length};
}

}  // namespace xgc
