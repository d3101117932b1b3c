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
#include "xgc/lower.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <unordered_map>

namespace xgc {

// ---------------------------------------------------------------------------
// Buffer caches: bounded first-fit allocation with LRU eviction of unpinned
// slabs. Keys are content-addressed, so a hit means the bytes are already
// on-chip and no LOAD is needed.

struct BufferCaches::Impl {
  struct Slab {
    int64_t base = 0;
    int64_t size = 0;
    uint64_t last_use = 0;
    int pins = 0;
  };
  struct Buf {
    int64_t capacity = 0;
    std::map<std::string, Slab> slabs;
    std::map<int64_t, int64_t> holes;  // base -> size
    uint64_t tick = 0;

    int64_t try_alloc(int64_t size) {
      for (auto it = holes.begin(); it != holes.end(); ++it) {
        if (it->second >= size) {
          int64_t base = it->first;
          int64_t rest = it->second - size;
          holes.erase(it);
          if (rest > 0) holes[base + size] = rest;
          return base;
        }
      }
      return -1;
    }
    void free_range(int64_t base, int64_t size) {
      holes[base] = size;
      auto it = holes.find(base);
      if (it != holes.begin()) {
        auto prev = std::prev(it);
        if (prev->first + prev->second == it->first) {
          prev->second += it->second;
          holes.erase(it);
          it = prev;
        }
      }
      auto next = std::next(it);
      if (next != holes.end() && it->first + it->second == next->first) {
        it->second += next->second;
        holes.erase(next);
      }
    }
  };
  Buf bufs[3];  // BufIn, BufWt, BufOut
  uint64_t uniq = 0;

  Buf& of(Space s) {
    require(s != Space::Ddr, ErrCode::Invalid, "no cache for DDR");
    return bufs[static_cast<int>(s) - 1];
  }
};

uint64_t BufferCaches::next_uniq() { return impl_->uniq++; }

BufferCaches::BufferCaches(const HwConfig& hw) : impl_(new Impl) {
  const int64_t caps[3] = {hw.b_in, hw.b_weights, hw.b_out};
  for (int i = 0; i < 3; ++i) {
    impl_->bufs[i].capacity = caps[i];
    impl_->bufs[i].holes[0] = caps[i];
  }
}

BufferCaches::~BufferCaches() { delete impl_; }

BufferCaches::Ensure BufferCaches::ensure(Space space, const std::string& key,
                                          int64_t size) {
  auto& buf = impl_->of(space);
  buf.tick++;
  if (auto it = buf.slabs.find(key); it != buf.slabs.end()) {
    it->second.last_use = buf.tick;
    return {it->second.base, true};
  }
  int64_t base = buf.try_alloc(size);
  while (base < 0) {
    std::string victim;
    uint64_t oldest = UINT64_MAX;
    for (const auto& [k, s] : buf.slabs)
      if (s.pins == 0 && s.last_use < oldest) {
        oldest = s.last_use;
        victim = k;
      }
    require(!victim.empty(), ErrCode::BufferOverflow,
            "buffer " + std::string(space_name(space)) + " cannot hold slab '" + key +
                "' (" + std::to_string(size) + " bytes)");
    buf.free_range(buf.slabs.at(victim).base, buf.slabs.at(victim).size);
    buf.slabs.erase(victim);
    base = buf.try_alloc(size);
  }
  buf.slabs[key] = {base, size, buf.tick, 0};
  return {base, false};
}

void BufferCaches::pin(Space space, const std::string& key) {
  impl_->of(space).slabs.at(key).pins++;
}

void BufferCaches::unpin(Space space, const std::string& key) {
  auto& s = impl_->of(space).slabs.at(key);
  require(s.pins > 0, ErrCode::Invalid, "unpin of unpinned slab " + key);
  s.pins--;
}

void BufferCaches::release(Space space, const std::string& key) {
  auto& buf = impl_->of(space);
  auto it = buf.slabs.find(key);
  if (it == buf.slabs.end()) return;
  require(it->second.pins == 0, ErrCode::Invalid, "release of pinned slab " + key);
  buf.free_range(it->second.base, it->second.size);
  buf.slabs.erase(it);
}

// ---------------------------------------------------------------------------
// Geometry.

namespace {

int64_t floor_div(int64_t a, int64_t b) {
  int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}
int64_t ceil_div_i(int64_t a, int64_t b) { return -floor_div(-a, b); }

struct Rect {
  int64_t x0 = 0, w = 0;
  int64_t y0 = 0, h = 0;
  int64_t c0 = 0, c = 0;
};

struct AxisWin {
  int64_t in0 = 0;     // first input index (clamped)
  int64_t len = 0;     // input extent (clamped)
  int64_t pad_lo = 0;  // virtual padding before in0 / deconv phase offset
};

AxisWin fwd_window(int64_t o0, int64_t olen, int64_t k, int64_t s, int64_t dil,
                   int64_t pad, int64_t in_size) {
  int64_t eff_k = (k - 1) * dil + 1;
  int64_t u0 = o0 * s - pad;
  int64_t u1 = (o0 + olen - 1) * s - pad + eff_k;
  AxisWin w;
  w.in0 = std::max<int64_t>(0, u0);
  int64_t end = std::min(in_size, u1);
  w.len = std::max<int64_t>(0, end - w.in0);
  w.pad_lo = w.in0 - u0;
  return w;
}

AxisWin deconv_window(int64_t o0, int64_t olen, int64_t k, int64_t s, int64_t pad,
                      int64_t in_size) {
  int64_t lo = ceil_div_i(o0 + pad - (k - 1), s);
  int64_t hi = floor_div(o0 + olen - 1 + pad, s);
  AxisWin w;
  w.in0 = std::max<int64_t>(0, lo);
  int64_t end = std::min(in_size - 1, hi);
  w.len = std::max<int64_t>(0, end - w.in0 + 1);
  w.pad_lo = o0 + pad - w.in0 * s;
  return w;
}

AxisWin op_window(const XNode& n, bool axis_w, int64_t o0, int64_t olen,
                  int64_t in_size) {
  const OpAttrs& a = n.attrs;
  int64_t k = axis_w ? a.kw() : a.kh();
  int64_t s = axis_w ? a.sw() : a.sh();
  int64_t pad = axis_w ? a.pl() : a.pt();
  switch (n.kind) {
    case OpKind::Conv:
    case OpKind::DepthwiseConv:
    case OpKind::DilatedConv:
      return fwd_window(o0, olen, k, s, a.dil(), pad, in_size);
    case OpKind::Pool:
      return fwd_window(o0, olen, k, s, 1, pad, in_size);
    case OpKind::Deconv:
      return deconv_window(o0, olen, k, s, pad, in_size);
    default:  // element-wise members pass coordinates through
      return AxisWin{o0, olen, 0};
  }
}

uint32_t u32c(int64_t v) {
  require(v >= 0 && v <= UINT32_MAX, ErrCode::OutOfBounds, "value exceeds 32-bit field");
  return static_cast<uint32_t>(v);
}

Region ddr_rect(const DdrPlan& plan, const XGraph& g, TensorId t, const Rect& r,
                int64_t extra_chan_offset = 0) {
  const TensorShape& s = g.tensor_shape(t);
  const DdrRegion& reg = plan.tensor(t);
  Region out;
  out.space = Space::Ddr;
  out.pat.base = u32c(reg.base + (r.y0 * s.w + r.x0) * s.c + r.c0 + extra_chan_offset);
  out.pat.n0 = u32c(r.h);
  out.pat.s0 = u32c(s.w * s.c);
  out.pat.n1 = u32c(r.w);
  out.pat.s1 = u32c(s.c);
  out.pat.run = u32c(r.c);
  return out;
}

// A packed on-chip slab [rows][cols][depth] holding channels
// [chan_base, chan_base+depth) of some tensor; `view` reads the window at
// (dy, dx) of extent win_rows x win_cols, channels [c0, c0+cnt).
struct SlabIn {
  Space space = Space::BufIn;
  int64_t base = 0;
  int64_t rows = 0, cols = 0, depth = 0;
  int64_t chan_base = 0;
  int64_t dy = 0, dx = 0;
  int64_t win_rows = 0, win_cols = 0;

  Region view(int64_t c0, int64_t cnt) const {
    Region r;
    r.space = space;
    r.pat.base = u32c(base + (dy * cols + dx) * depth + (c0 - chan_base));
    r.pat.n0 = u32c(win_rows);
    r.pat.s0 = u32c(cols * depth);
    r.pat.n1 = u32c(win_cols);
    r.pat.s1 = u32c(depth);
    r.pat.run = u32c(cnt);
    return r;
  }
};

struct SlabOut {
  Space space = Space::BufOut;
  int64_t base = 0;
  int64_t rows = 0, cols = 0, depth = 0;
  int64_t chan_base = 0;

  Region view(int64_t c0, int64_t cnt) const {
    Region r;
    r.space = space;
    r.pat.base = u32c(base + (c0 - chan_base));
    r.pat.n0 = u32c(rows);
    r.pat.s0 = u32c(cols * depth);
    r.pat.n1 = u32c(cols);
    r.pat.s1 = u32c(depth);
    r.pat.run = u32c(cnt);
    return r;
  }
};

using InputFor = std::function<SlabIn(int64_t c0, int64_t cnt)>;

// ---------------------------------------------------------------------------
// Emitter.

struct Emitter {
  const LowerInput& in;
  BufferCaches& caches;
  Stream& body;
  std::vector<std::pair<Space, std::string>> tile_pins;

  uint64_t uniq() { return caches.next_uniq(); }

  const XGraph& g() const { return in.model.graph; }

  void push(Instruction ins) {
    ins.seq = static_cast<uint32_t>(body.size());
    body.push_back(std::move(ins));
  }

  int tensor_radix(TensorId t) const {
    auto it = in.quant.radix.tensor.find(t);
    require(it != in.quant.radix.tensor.end(), ErrCode::Invalid,
            "no radix for tensor " + std::to_string(t));
    return it->second;
  }
  int param_radix(const std::string& p) const {
    auto it = in.quant.radix.param.find(p);
    require(it != in.quant.radix.param.end(), ErrCode::Invalid,
            "no radix for parameter " + p);
    return it->second;
  }

  void pin(Space s, const std::string& k) {
    caches.pin(s, k);
    tile_pins.emplace_back(s, k);
  }
  void unpin_loads() {
    for (auto& [s, k] : tile_pins) caches.unpin(s, k);
    tile_pins.clear();
  }

  SlabIn ensure_fm_slab(TensorId tensor, const Rect& r) {
    std::string key = "t" + std::to_string(tensor) + ":" + std::to_string(r.y0) + "+" +
                      std::to_string(r.h) + ":" + std::to_string(r.x0) + "+" +
                      std::to_string(r.w) + ":" + std::to_string(r.c0) + "+" +
                      std::to_string(r.c);
    auto got = caches.ensure(Space::BufIn, key, r.h * r.w * r.c);
    pin(Space::BufIn, key);
    SlabIn slab{Space::BufIn, got.offset, r.h, r.w, r.c, r.c0, 0, 0, r.h, r.w};
    if (!got.hit) {
      Instruction load;
      load.kind = InstrKind::Load;
      load.reads = {ddr_rect(in.plan, g(), tensor, r)};
      load.write = slab.view(r.c0, r.c);
      push(std::move(load));
    }
    return slab;
  }

  int64_t ensure_wt_slab(const std::string& pname, bool depthwise, int64_t kw,
                         int64_t kh, int64_t ic_total, int64_t o0, int64_t ocnt,
                         int64_t c0, int64_t ccnt) {
    std::string key = "p:" + pname + ":o" + std::to_string(o0) + "+" +
                      std::to_string(ocnt) + ":c" + std::to_string(c0) + "+" +
                      std::to_string(ccnt);
    int64_t size = depthwise ? ocnt * kw * kh : ocnt * kw * kh * ccnt;
    auto got = caches.ensure(Space::BufWt, key, size);
    pin(Space::BufWt, key);
    if (!got.hit) {
      const DdrRegion& reg = in.plan.param(pname);
      Instruction load;
      load.kind = InstrKind::Load;
      if (depthwise) {
        load.reads = {Region{Space::Ddr,
                             {u32c(reg.base + o0 * kw * kh), u32c(ocnt), u32c(kw * kh),
                              1, 0, u32c(kw * kh)}}};
        load.write = Region{Space::BufWt, {u32c(got.offset), u32c(ocnt), u32c(kw * kh),
                                           1, 0, u32c(kw * kh)}};
      } else {
        load.reads = {Region{Space::Ddr,
                             {u32c(reg.base + o0 * kw * kh * ic_total + c0), u32c(ocnt),
                              u32c(kw * kh * ic_total), u32c(kw * kh), u32c(ic_total),
                              u32c(ccnt)}}};
        load.write = Region{Space::BufWt,
                            {u32c(got.offset), u32c(ocnt), u32c(kw * kh * ccnt),
                             u32c(kw * kh), u32c(ccnt), u32c(ccnt)}};
      }
      push(std::move(load));
    }
    return got.offset;
  }

  int64_t ensure_bias_slab(const std::string& pname, int64_t o0, int64_t ocnt) {
    std::string key = "b:" + pname + ":o" + std::to_string(o0) + "+" +
                      std::to_string(ocnt);
    auto got = caches.ensure(Space::BufWt, key, ocnt);
    pin(Space::BufWt, key);
    if (!got.hit) {
      const DdrRegion& reg = in.plan.param(pname);
      Instruction load;
      load.kind = InstrKind::Load;
      load.reads = {Region{Space::Ddr, {u32c(reg.base + o0), 1, 0, 1, 0, u32c(ocnt)}}};
      load.write = Region{Space::BufWt, {u32c(got.offset), 1, 0, 1, 0, u32c(ocnt)}};
      push(std::move(load));
    }
    return got.offset;
  }

  std::pair<TensorId, int64_t> save_target(NodeId id) const {
    if (auto it = g().annotations.find(id); it != g().annotations.end())
      return {it->second.dest, it->second.chan_offset};
    return {id, 0};
  }

  void emit_save(NodeId member, const Rect& r, const SlabOut& slab) {
    auto [dest, chan_off] = save_target(member);
    Instruction save;
    save.kind = InstrKind::Save;
    save.reads = {slab.view(r.c0, r.c)};
    save.write = ddr_rect(in.plan, g(), dest, r, chan_off);
    push(std::move(save));
  }

  // Conv-family and pool compute for one output-channel chunk; the
  // input-channel reduction loop lives here.
  void emit_member(const XNode& n, const Rect& out_r, const InputFor& input_for,
                   const AxisWin& wx, const AxisWin& wy, const SlabOut& dst,
                   int r_in, int r_out) {
    if (n.kind == OpKind::Pool) {
      SlabIn src = input_for(out_r.c0, out_r.c);
      Instruction pool;
      pool.kind = InstrKind::Pool;
      pool.reads = {src.view(out_r.c0, out_r.c)};
      pool.write = dst.view(out_r.c0, out_r.c);
      PoolArgs a;
      a.in_w = static_cast<uint16_t>(src.win_cols);
      a.in_h = static_cast<uint16_t>(src.win_rows);
      a.out_w = static_cast<uint16_t>(out_r.w);
      a.out_h = static_cast<uint16_t>(out_r.h);
      a.channels = static_cast<uint16_t>(out_r.c);
      a.k_w = static_cast<uint8_t>(n.attrs.kw());
      a.k_h = static_cast<uint8_t>(n.attrs.kh());
      a.s_w = static_cast<uint8_t>(n.attrs.sw());
      a.s_h = static_cast<uint8_t>(n.attrs.sh());
      a.pad_top = static_cast<int16_t>(wy.pad_lo);
      a.pad_left = static_cast<int16_t>(wx.pad_lo);
      a.avg = n.attrs.pool_type == PoolType::Avg ? 1 : 0;
      a.out_shift = static_cast<int8_t>(r_in - r_out);
      pool.args = a;
      push(std::move(pool));
      return;
    }
    require(is_conv_family(n.kind), ErrCode::UnsupportedOp,
            n.name + ": no tiled compute for " + kind_name(n.kind));

    bool depthwise = n.kind == OpKind::DepthwiseConv;
    const std::string& wname = n.param_refs.at(0);
    bool has_bias = n.param_refs.size() > 1;
    int acc_radix = r_in + param_radix(wname);
    int64_t ic_total = g().tensor_shape(n.inputs[0]).c;
    int64_t ic_step = depthwise ? out_r.c : std::min(in.hw.inc_p, ic_total);
    int64_t n_passes = depthwise ? 1 : ceil_div(ic_total, ic_step);

    for (int64_t pass = 0; pass < n_passes; ++pass) {
      int64_t c0 = depthwise ? out_r.c0 : pass * ic_step;
      int64_t ccnt = depthwise ? out_r.c : std::min(ic_step, ic_total - c0);
      SlabIn src = input_for(c0, ccnt);
      int64_t wt_base = ensure_wt_slab(wname, depthwise, n.attrs.kw(), n.attrs.kh(),
                                       ic_total, out_r.c0, out_r.c, c0, ccnt);
      bool first = pass == 0;
      bool last = pass == n_passes - 1;

      Instruction conv;
      conv.kind = InstrKind::Conv;
      conv.reads = {src.view(c0, ccnt)};
      int64_t taps = n.attrs.kw() * n.attrs.kh();
      int64_t wdepth = depthwise ? 1 : ccnt;
      conv.reads.push_back(
          Region{Space::BufWt,
                 {u32c(wt_base), u32c(out_r.c), u32c(taps * wdepth), u32c(taps),
                  u32c(wdepth), u32c(wdepth)}});
      ConvArgs a;
      if (has_bias && first) {
        const std::string& bname = n.param_refs[1];
        int64_t b_base = ensure_bias_slab(bname, out_r.c0, out_r.c);
        conv.reads.push_back(
            Region{Space::BufWt, {u32c(b_base), 1, 0, 1, 0, u32c(out_r.c)}});
        a.has_bias = 1;
        a.bias_shift = static_cast<int8_t>(acc_radix - param_radix(bname));
      }
      conv.write = dst.view(out_r.c0, out_r.c);
      a.in_w = static_cast<uint16_t>(src.win_cols);
      a.in_h = static_cast<uint16_t>(src.win_rows);
      a.in_c = static_cast<uint16_t>(ccnt);
      a.out_w = static_cast<uint16_t>(out_r.w);
      a.out_h = static_cast<uint16_t>(out_r.h);
      a.out_c = static_cast<uint16_t>(out_r.c);
      a.k_w = static_cast<uint8_t>(n.attrs.kw());
      a.k_h = static_cast<uint8_t>(n.attrs.kh());
      a.s_w = static_cast<uint8_t>(n.attrs.sw());
      a.s_h = static_cast<uint8_t>(n.attrs.sh());
      a.dilation = static_cast<uint8_t>(n.attrs.dil());
      a.mode = depthwise ? 1 : (n.kind == OpKind::Deconv ? 2 : 0);
      a.pad_top = static_cast<int16_t>(wy.pad_lo);
      a.pad_left = static_cast<int16_t>(wx.pad_lo);
      a.accumulate = first ? 0 : 1;
      a.requant = last ? 1 : 0;
      a.relu = (last && n.attrs.nonlinear == Nonlinear::Relu) ? 1 : 0;
      a.out_shift = static_cast<int8_t>(acc_radix - r_out);
      conv.args = a;
      push(std::move(conv));
    }
  }

  // Eltwise-add (any arity) and standalone relu for one channel chunk. When
  // `fused_arm` is set it carries the on-chip arm and its tensor id; other
  // operands are loaded from DDR.
  void emit_eltwise(const XNode& n, const Rect& out_r,
                    const std::optional<std::pair<SlabIn, TensorId>>& fused_arm,
                    const SlabOut& dst, int r_out) {
    Instruction misc;
    misc.kind = InstrKind::Misc;
    misc.misc = MiscOp::Eltwise;
    std::vector<int> radices;
    std::vector<TensorId> ddr_arms(n.inputs.begin(), n.inputs.end());
    if (fused_arm) {
      misc.reads.push_back(fused_arm->first.view(out_r.c0, out_r.c));
      radices.push_back(tensor_radix(fused_arm->second));
      auto it = std::find(ddr_arms.begin(), ddr_arms.end(), fused_arm->second);
      require(it != ddr_arms.end(), ErrCode::Invalid,
              n.name + ": fused arm is not an operand");
      ddr_arms.erase(it);
    }
    for (TensorId t : ddr_arms) {
      SlabIn slab = ensure_fm_slab(t, Rect{out_r.x0, out_r.w, out_r.y0, out_r.h,
                                           out_r.c0, out_r.c});
      misc.reads.push_back(slab.view(out_r.c0, out_r.c));
      radices.push_back(tensor_radix(t));
    }
    require(misc.reads.size() >= 1 && misc.reads.size() <= 4, ErrCode::UnsupportedOp,
            n.name + ": eltwise arity out of range");
    EltwiseArgs a;
    a.arity = static_cast<uint8_t>(misc.reads.size());
    a.relu = (n.attrs.nonlinear == Nonlinear::Relu || n.kind == OpKind::ReLU) ? 1 : 0;
    a.elems = static_cast<uint32_t>(out_r.w * out_r.h * out_r.c);
    int common = *std::max_element(radices.begin(), radices.end());
    for (size_t i = 0; i < radices.size(); ++i)
      a.in_shift[i] = static_cast<int8_t>(common - radices[i]);
    a.out_shift = static_cast<int8_t>(common - r_out);
    misc.write = dst.view(out_r.c0, out_r.c);
    misc.args = a;
    push(std::move(misc));
  }
};

// ---------------------------------------------------------------------------
// Group drivers.

bool is_tiled_kind(OpKind k) {
  return is_conv_family(k) || k == OpKind::Pool || k == OpKind::EltwiseAdd ||
         k == OpKind::ReLU;
}

// Chains (fused or single op). Tiles walk height, width, then output
// channels of the last member; intermediates are produced whole per spatial
// tile, so the last member's channel sweep reuses them.
void lower_chain(Emitter& em, const ExecGroup& group, const TileConfig& tile) {
  const XGraph& g = em.g();
  size_t k = group.members.size();
  std::vector<const XNode*> nodes;
  for (NodeId id : group.members) nodes.push_back(&g.node(id));
  const XNode& last = *nodes[k - 1];
  int64_t W = last.output_shape.w, H = last.output_shape.h;

  for (int64_t y0 = 0; y0 < H; y0 += tile.t_h) {
    int64_t th = std::min(tile.t_h, H - y0);
    for (int64_t x0 = 0; x0 < W; x0 += tile.t_w) {
      int64_t tw = std::min(tile.t_w, W - x0);

      std::vector<Rect> rect(k);
      std::vector<AxisWin> wx(k), wy(k);
      rect[k - 1] = {x0, tw, y0, th, 0, 0};
      for (size_t i = k; i-- > 0;) {
        const TensorShape& in_shape = g.tensor_shape(nodes[i]->inputs[0]);
        wx[i] = op_window(*nodes[i], true, rect[i].x0, rect[i].w, in_shape.w);
        wy[i] = op_window(*nodes[i], false, rect[i].y0, rect[i].h, in_shape.h);
        if (i > 0) rect[i - 1] = {wx[i].in0, wx[i].len, wy[i].in0, wy[i].len, 0, 0};
      }

      SlabIn inter_slab;
      std::string inter_key;
      for (size_t i = 0; i < k; ++i) {
        const XNode& n = *nodes[i];
        bool is_last = i + 1 == k;
        int64_t oc_total = n.output_shape.c;
        int r_out = em.tensor_radix(n.id);
        int r_in = i == 0 ? em.tensor_radix(n.inputs[0])
                          : em.tensor_radix(nodes[i - 1]->id);

        InputFor input_for;
        if (i == 0) {
          TensorId src_tensor = n.inputs[0];
          AxisWin ix = wx[0], iy = wy[0];
          Emitter* e = &em;
          input_for = [e, src_tensor, ix, iy](int64_t c0, int64_t cnt) {
            return e->ensure_fm_slab(src_tensor,
                                     Rect{ix.in0, ix.len, iy.in0, iy.len, c0, cnt});
          };
        } else {
          SlabIn from = inter_slab;
          input_for = [from](int64_t, int64_t) { return from; };
        }

        std::string out_key;
        SlabOut dst;
        if (!is_last) {
          out_key = "m" + std::to_string(n.id) + "@" + std::to_string(em.uniq());
          auto got = em.caches.ensure(Space::BufIn, out_key,
                                      rect[i].h * rect[i].w * oc_total);
          em.caches.pin(Space::BufIn, out_key);
          dst = SlabOut{Space::BufIn, got.offset, rect[i].h, rect[i].w, oc_total, 0};
        }

        for (int64_t c0 = 0; c0 < oc_total; c0 += tile.t_oc) {
          int64_t cnt = std::min(tile.t_oc, oc_total - c0);
          Rect out_r = rect[i];
          out_r.c0 = c0;
          out_r.c = cnt;
          if (is_last) {
            out_key = "o@" + std::to_string(em.uniq());
            auto got = em.caches.ensure(Space::BufOut, out_key, out_r.h * out_r.w * cnt);
            dst = SlabOut{Space::BufOut, got.offset, out_r.h, out_r.w, cnt, c0};
          }
          if (n.kind == OpKind::EltwiseAdd || n.kind == OpKind::ReLU) {
            std::optional<std::pair<SlabIn, TensorId>> fused;
            if (i > 0) fused = {inter_slab, nodes[i - 1]->id};
            if (i == 0 && n.kind == OpKind::ReLU) {
              // Unary: route the single operand through the fused-arm slot.
              SlabIn slab = input_for(c0, cnt);
              fused = {slab, n.inputs[0]};
            }
            em.emit_eltwise(n, out_r, fused, dst, r_out);
          } else {
            em.emit_member(n, out_r, input_for, wx[i], wy[i], dst, r_in, r_out);
          }
          if (is_last) {
            em.emit_save(n.id, out_r, dst);
            em.caches.release(Space::BufOut, out_key);
          }
        }

        em.unpin_loads();
        if (i > 0) {
          em.caches.unpin(Space::BufIn, inter_key);
          em.caches.release(Space::BufIn, inter_key);
        }
        if (!is_last) {
          inter_slab = SlabIn{Space::BufIn, dst.base, rect[i].h, rect[i].w,
                              oc_total,     0,        0, 0,
                              rect[i].h,    rect[i].w};
          inter_key = out_key;
        }
      }
    }
  }
}

// Horizontal siblings: one shared input slab per channel pass, each member
// running its own output-channel sweep over it.
void lower_horizontal(Emitter& em, const ExecGroup& group, const TileConfig& tile) {
  const XGraph& g = em.g();
  size_t k = group.members.size();
  std::vector<const XNode*> nodes;
  for (NodeId id : group.members) nodes.push_back(&g.node(id));

  TensorId shared = -1;
  for (TensorId t : nodes[0]->inputs) {
    bool common = true;
    for (size_t i = 1; i < k; ++i) {
      const auto& ins = nodes[i]->inputs;
      if (std::find(ins.begin(), ins.end(), t) == ins.end()) common = false;
    }
    if (common) {
      shared = t;
      break;
    }
  }
  require(shared >= 0, ErrCode::Invalid, "horizontal group lacks a shared input");
  const TensorShape& in_shape = g.tensor_shape(shared);
  int64_t W = nodes[0]->output_shape.w, H = nodes[0]->output_shape.h;
  for (size_t i = 1; i < k; ++i)
    require(nodes[i]->output_shape.w == W && nodes[i]->output_shape.h == H,
            ErrCode::UnsupportedOp, "horizontal members must share output extents");
  int r_in = em.tensor_radix(shared);

  for (int64_t y0 = 0; y0 < H; y0 += tile.t_h) {
    int64_t th = std::min(tile.t_h, H - y0);
    for (int64_t x0 = 0; x0 < W; x0 += tile.t_w) {
      int64_t tw = std::min(tile.t_w, W - x0);

      std::vector<AxisWin> wxs(k), wys(k);
      int64_t ux0 = INT64_MAX, uy0 = INT64_MAX, ux1 = 0, uy1 = 0;
      for (size_t i = 0; i < k; ++i) {
        wxs[i] = op_window(*nodes[i], true, x0, tw, in_shape.w);
        wys[i] = op_window(*nodes[i], false, y0, th, in_shape.h);
        ux0 = std::min(ux0, wxs[i].in0);
        uy0 = std::min(uy0, wys[i].in0);
        ux1 = std::max(ux1, wxs[i].in0 + wxs[i].len);
        uy1 = std::max(uy1, wys[i].in0 + wys[i].len);
      }

      for (size_t i = 0; i < k; ++i) {
        const XNode& n = *nodes[i];
        int64_t oc_total = n.output_shape.c;
        int r_out = em.tensor_radix(n.id);
        // The member reads its own window inside the shared union slab.
        int64_t dy = wys[i].in0 - uy0, dx = wxs[i].in0 - ux0;
        int64_t wr = wys[i].len, wc = wxs[i].len;
        Emitter* e = &em;
        InputFor input_for = [e, shared, ux0, uy0, ux1, uy1, dy, dx, wr,
                              wc](int64_t c0, int64_t cnt) {
          SlabIn slab = e->ensure_fm_slab(
              shared, Rect{ux0, ux1 - ux0, uy0, uy1 - uy0, c0, cnt});
          slab.dy = dy;
          slab.dx = dx;
          slab.win_rows = wr;
          slab.win_cols = wc;
          return slab;
        };
        for (int64_t c0 = 0; c0 < oc_total; c0 += tile.t_oc) {
          int64_t cnt = std::min(tile.t_oc, oc_total - c0);
          Rect out_r{x0, tw, y0, th, c0, cnt};
          std::string okey = "o@" + std::to_string(em.uniq());
          auto got = em.caches.ensure(Space::BufOut, okey, th * tw * cnt);
          SlabOut dst{Space::BufOut, got.offset, th, tw, cnt, c0};
          em.emit_member(n, out_r, input_for, wxs[i], wys[i], dst, r_in, r_out);
          em.emit_save(n.id, out_r, dst);
          em.caches.release(Space::BufOut, okey);
        }
      }
      em.unpin_loads();
    }
  }
}

// Nearest-neighbour upsample as pure data movement: each loaded input row
// block is saved s_h*s_w times with strided destinations.
void lower_upsample(Emitter& em, const XNode& n) {
  const XGraph& g = em.g();
  TensorId src = n.inputs[0];
  const TensorShape& is = g.tensor_shape(src);
  int64_t sh = n.attrs.sh(), sw = n.attrs.sw();
  auto [dest, chan_off] = em.save_target(n.id);
  const TensorShape& ds = g.tensor_shape(dest);
  const DdrRegion& dreg = em.in.plan.tensor(dest);

  int64_t row_bytes = is.w * is.c;
  require(row_bytes <= em.in.hw.b_in, ErrCode::BufferOverflow,
          n.name + ": input row exceeds B_in");
  int64_t rows = std::min(is.h, em.in.hw.b_in / row_bytes);

  for (int64_t y0 = 0; y0 < is.h; y0 += rows) {
    int64_t rh = std::min(rows, is.h - y0);
    SlabIn slab = em.ensure_fm_slab(src, Rect{0, is.w, y0, rh, 0, is.c});
    for (int64_t ddy = 0; ddy < sh; ++ddy) {
      for (int64_t ddx = 0; ddx < sw; ++ddx) {
        Instruction save;
        save.kind = InstrKind::Save;
        save.reads = {slab.view(0, is.c)};
        Region dst;
        dst.space = Space::Ddr;
        dst.pat.base = u32c(dreg.base +
                            ((y0 * sh + ddy) * ds.w + ddx) * ds.c + chan_off);
        dst.pat.n0 = u32c(rh);
        dst.pat.s0 = u32c(sh * ds.w * ds.c);
        dst.pat.n1 = u32c(is.w);
        dst.pat.s1 = u32c(sw * ds.c);
        dst.pat.run = u32c(is.c);
        save.write = dst;
        em.push(std::move(save));
      }
    }
    em.unpin_loads();
  }
}

// Space-to-depth kept as a MISC-executed whole-plane op:
//   out[y][x][c*s*s + py*s + px] = in[y*s+py][x*s+px][c]
void lower_reorg(Emitter& em, const XNode& n) {
  const XGraph& g = em.g();
  TensorId src = n.inputs[0];
  const TensorShape& is = g.tensor_shape(src);
  const TensorShape& os = n.output_shape;
  require(is.bytes() <= em.in.hw.b_in && os.bytes() <= em.in.hw.b_out,
          ErrCode::BufferOverflow, n.name + ": reorg tensor exceeds on-chip buffers");

  SlabIn slab = em.ensure_fm_slab(src, Rect{0, is.w, 0, is.h, 0, is.c});
  std::string okey = "o@" + std::to_string(em.uniq());
  auto got = em.caches.ensure(Space::BufOut, okey, os.bytes());
  SlabOut dst{Space::BufOut, got.offset, os.h, os.w, os.c, 0};

  Instruction misc;
  misc.kind = InstrKind::Misc;
  misc.misc = MiscOp::Reorg;
  misc.reads = {slab.view(0, is.c)};
  misc.write = dst.view(0, os.c);
  ReorgArgs a;
  a.in_w = static_cast<uint16_t>(is.w);
  a.in_h = static_cast<uint16_t>(is.h);
  a.in_c = static_cast<uint16_t>(is.c);
  a.stride = static_cast<uint8_t>(n.attrs.sh());
  misc.args = a;
  em.push(std::move(misc));

  em.emit_save(n.id, Rect{0, os.w, 0, os.h, 0, os.c}, dst);
  em.caches.release(Space::BufOut, okey);
  em.unpin_loads();
}

// A concat that could not become save annotations: copy each operand into
// its channel stripe of the destination.
void lower_concat_move(Emitter& em, const XNode& n) {
  const XGraph& g = em.g();
  int64_t chan_at = 0;
  for (TensorId t : n.inputs) {
    const TensorShape& is = g.tensor_shape(t);
    int64_t row_bytes = is.w * is.c;
    require(row_bytes <= em.in.hw.b_in, ErrCode::BufferOverflow,
            n.name + ": operand row exceeds B_in");
    int64_t rows = std::min(is.h, em.in.hw.b_in / row_bytes);
    for (int64_t y0 = 0; y0 < is.h; y0 += rows) {
      int64_t rh = std::min(rows, is.h - y0);
      SlabIn slab = em.ensure_fm_slab(t, Rect{0, is.w, y0, rh, 0, is.c});
      Instruction save;
      save.kind = InstrKind::Save;
      save.reads = {slab.view(0, is.c)};
      save.write = ddr_rect(em.in.plan, g, n.id, Rect{0, is.w, y0, rh, chan_at, is.c});
      em.push(std::move(save));
      em.unpin_loads();
    }
    chan_at += is.c;
  }
}

}  // namespace

void lower_group(const LowerInput& in, const ExecGroup& group, BufferCaches& caches,
                 Stream& body) {
  Emitter em{in, caches, body};
  // Unique slab keys must stay unique across groups sharing the caches.

  require(!group.members.empty(), ErrCode::Invalid, "empty group");
  const XNode& head = in.model.graph.node(group.members[0]);

  if (group.members.size() == 1 && !is_tiled_kind(head.kind)) {
    switch (head.kind) {
      case OpKind::Upsample: lower_upsample(em, head); return;
      case OpKind::Reorg: lower_reorg(em, head); return;
      case OpKind::Concat: lower_concat_move(em, head); return;
      default:
        fail(ErrCode::UnsupportedOp, head.name + ": not a device instruction kind");
    }
  }
  for (NodeId id : group.members)
    require(is_tiled_kind(in.model.graph.node(id).kind), ErrCode::UnsupportedOp,
            in.model.graph.node(id).name + " cannot join a fused group");

  TileConfig tile;
  if (group.tile) {
    tile = *group.tile;
  } else {
    auto solved = solve_tile_config(
        make_tile_group(in.model.graph, group.members, group.horizontal), in.hw);
    require(solved.has_value(), ErrCode::BufferOverflow,
            "group starting at " + head.name + " does not tile");
    tile = *solved;
  }
  if (group.horizontal)
    lower_horizontal(em, group, tile);
  else
    lower_chain(em, group, tile);
}

// ---------------------------------------------------------------------------
// Dependency assignment.

namespace {

bool spans_intersect(int64_t a_lo, int64_t a_hi, int64_t b_lo, int64_t b_hi) {
  return a_lo < b_hi && b_lo < a_hi;
}

// Does pattern `p` touch the byte interval [lo, hi)?  Bounded lattice probe.
bool pattern_touches(const Pattern& p, int64_t lo, int64_t hi, int* budget) {
  if (p.run == 0) return false;
  int64_t inner_span = int64_t(p.n1 - 1) * p.s1 + p.run;
  int64_t i0_lo = 0, i0_hi = int64_t(p.n0) - 1;
  if (p.s0 > 0) {
    i0_lo = std::max<int64_t>(0, floor_div(lo - p.base - inner_span + 1, p.s0));
    i0_hi = std::min<int64_t>(p.n0 - 1, floor_div(hi - 1 - p.base, p.s0));
  }
  for (int64_t i0 = i0_lo; i0 <= i0_hi; ++i0) {
    int64_t row = p.base + i0 * p.s0;
    int64_t j_lo = 0, j_hi = int64_t(p.n1) - 1;
    if (p.s1 > 0) {
      j_lo = std::max<int64_t>(0, floor_div(lo - row - int64_t(p.run) + 1, p.s1));
      j_hi = std::min<int64_t>(p.n1 - 1, floor_div(hi - 1 - row, p.s1));
    }
    for (int64_t j = j_lo; j <= j_hi; ++j) {
      if (--*budget < 0) return true;  // conservative
      int64_t b = row + j * p.s1;
      if (spans_intersect(b, b + p.run, lo, hi)) return true;
    }
  }
  return false;
}

}  // namespace

bool regions_overlap(const Region& ra, const Region& rb) {
  if (ra.space != rb.space) return false;
  const Pattern& a = ra.pat;
  const Pattern& b = rb.pat;
  if (a.bytes() == 0 || b.bytes() == 0) return false;
  if (!spans_intersect(a.base, a.span_end(), b.base, b.span_end())) return false;

  // Channel stripes of one destination row lattice (concat arms): disjoint
  // when the inner runs never meet modulo the shared channel stride.
  if (a.s1 == b.s1 && a.s1 > 0 && a.run <= a.s1 && b.run <= b.s1 && a.s0 == b.s0 &&
      (a.s0 % a.s1 == 0)) {
    int64_t d = (int64_t(b.base) - int64_t(a.base)) % int64_t(a.s1);
    if (d < 0) d += a.s1;
    bool inner_overlap = (d < a.run) || (d + b.run > a.s1);
    if (!inner_overlap) return false;
  }

  // Exact check: probe the larger pattern with every run of the smaller.
  const Pattern& small = a.n0 * a.n1 <= b.n0 * b.n1 ? a : b;
  const Pattern& large = (&small == &a) ? b : a;
  if (int64_t(small.n0) * small.n1 <= 4096) {
    int budget = 1 << 16;
    for (uint32_t i0 = 0; i0 < small.n0; ++i0)
      for (uint32_t j = 0; j < small.n1; ++j) {
        int64_t lo = int64_t(small.base) + int64_t(i0) * small.s0 + int64_t(j) * small.s1;
        if (pattern_touches(large, lo, lo + small.run, &budget)) return true;
        if (budget < 0) return true;  // gave up: conservative
      }
    return false;
  }
  return true;  // large irregular pair: conservative
}

Stream assign_dependencies(Stream stream) {
  for (size_t i = 0; i < stream.size(); ++i)
    require(stream[i].seq == i, ErrCode::Invalid,
            "assign_dependencies expects a densely numbered stream");
  struct Event {
    uint32_t idx;
    Region region;
    bool alive = true;
  };
  std::vector<Event> events;
  // space -> page -> event indices (writes and reads tracked separately)
  using PageMap = std::unordered_map<int64_t, std::vector<size_t>>;
  PageMap write_pages[4], read_pages[4];
  constexpr int64_t kPage = 4096;

  auto pages_of = [&](const Region& r, auto&& fn) {
    int64_t lo = r.pat.base / kPage;
    int64_t hi = (std::max<int64_t>(r.pat.base, r.pat.span_end() - 1)) / kPage;
    for (int64_t p = lo; p <= hi; ++p) fn(p);
  };
  auto collect = [&](PageMap* maps, const Region& r, std::set<size_t>& out) {
    int si = static_cast<int>(r.space);
    pages_of(r, [&](int64_t page) {
      auto it = maps[si].find(page);
      if (it == maps[si].end()) return;
      for (size_t e : it->second)
        if (events[e].alive && regions_overlap(events[e].region, r)) out.insert(e);
    });
  };
  auto record = [&](PageMap* maps, uint32_t idx, const Region& r) {
    events.push_back({idx, r});
    size_t e = events.size() - 1;
    int si = static_cast<int>(r.space);
    pages_of(r, [&](int64_t page) { maps[si][page].push_back(e); });
  };
  auto dense = [](const Pattern& p) {
    return p.s1 == p.run && p.s0 == int64_t(p.n1) * p.s1;
  };

  for (Instruction& ins : stream) {
    std::set<size_t> dep_events;
    for (const Region& r : ins.reads) collect(write_pages, r, dep_events);
    if (ins.write) {
      collect(write_pages, *ins.write, dep_events);
      collect(read_pages, *ins.write, dep_events);
    }
    std::set<uint32_t> deps;
    for (size_t e : dep_events) deps.insert(events[e].idx);

    // Transitive reduction: drop a dep reachable from a later kept dep.
    std::vector<uint32_t> cand(deps.rbegin(), deps.rend());
    std::vector<uint32_t> kept;
    for (uint32_t d : cand) {
      bool implied = false;
      int budget = 100000;
      std::vector<uint32_t> stack(kept);
      std::set<uint32_t> seen;
      while (!stack.empty() && budget-- > 0) {
        uint32_t u = stack.back();
        stack.pop_back();
        if (u == d) {
          implied = true;
          break;
        }
        if (u < d || !seen.insert(u).second) continue;
        for (uint32_t nd : stream[u].deps) stack.push_back(nd);
      }
      if (!implied) kept.push_back(d);
    }
    std::sort(kept.begin(), kept.end());
    ins.deps = std::move(kept);

    // Record this instruction's footprint; a write that fully covers an
    // older event shields it from all future queries.
    if (ins.write) {
      int si = static_cast<int>(ins.write->space);
      pages_of(*ins.write, [&](int64_t page) {
        for (auto* maps : {&write_pages[si], &read_pages[si]}) {
          auto it = maps->find(page);
          if (it == maps->end()) continue;
          for (size_t e : it->second) {
            if (!events[e].alive) continue;
            const Region& old = events[e].region;
            if (old.space != ins.write->space) continue;
            if (old.pat == ins.write->pat ||
                (dense(ins.write->pat) && old.pat.base >= ins.write->pat.base &&
                 old.pat.span_end() <= ins.write->pat.span_end()))
              events[e].alive = false;
          }
        }
      });
      record(write_pages, ins.seq, *ins.write);
    }
    for (const Region& r : ins.reads) record(read_pages, ins.seq, r);
  }
  return stream;
}

Stream assemble_program(const LowerInput& in, const std::vector<ExecGroup>& groups) {
  Stream body;
  BufferCaches caches(in.hw);
  for (const auto& g : groups) lower_group(in, g, caches, body);
  body = assign_dependencies(std::move(body));
  return finalize_stream(std::move(body));
}

}  // namespace xgc
