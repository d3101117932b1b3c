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
#include "xgc/tiling.hpp"

#include <algorithm>

namespace xgc {

int64_t input_extent(int64_t out_extent, int64_t kernel, int64_t stride) {
  require(out_extent >= 1 && kernel >= 1 && stride >= 1, ErrCode::Invalid,
          "input_extent arguments must be >= 1");
  return (out_extent - 1) * stride + kernel;
}

namespace {

int64_t inv_extent(OpKind kind, int64_t out, int64_t k, int64_t s, int64_t dil) {
  switch (kind) {
    case OpKind::Conv:
    case OpKind::DepthwiseConv:
    case OpKind::DilatedConv:
    case OpKind::Pool:
      return input_extent(out, (k - 1) * dil + 1, s);
    case OpKind::Deconv:
      // Interior upper bound on contributing input pixels.
      return (out + k - 2) / s + 1;
    case OpKind::Upsample:
      return ceil_div(out, s);
    case OpKind::Reorg:
      return out * s;
    default:
      return out;  // element-wise and movement ops
  }
}

}  // namespace

int64_t TiledOp::inv_w(int64_t out) const { return inv_extent(kind, out, k_w, s_w, dilation); }
int64_t TiledOp::inv_h(int64_t out) const { return inv_extent(kind, out, k_h, s_h, dilation); }

TileGroup make_tile_group(const XGraph& g, const std::vector<NodeId>& members,
                          bool horizontal) {
  TileGroup group;
  group.horizontal = horizontal;
  for (NodeId id : members) {
    const XNode& n = g.node(id);
    TiledOp op;
    op.id = id;
    op.kind = n.kind;
    op.k_w = n.attrs.kw();
    op.k_h = n.attrs.kh();
    op.s_w = n.attrs.sw();
    op.s_h = n.attrs.sh();
    op.dilation = n.attrs.dil();
    op.out_shape = n.output_shape;
    op.in_shape = n.inputs.empty() ? n.output_shape : g.tensor_shape(n.inputs[0]);
    if (n.kind == OpKind::EltwiseAdd)
      op.extra_operands = static_cast<int64_t>(n.inputs.size()) - 1;
    group.ops.push_back(op);
  }
  require(!group.ops.empty(), ErrCode::Invalid, "empty tile group");
  return group;
}

namespace {

// Derived interior output-tile extents per member, from the group's final
// output tile backwards through each member's input requirement (clamped to
// real tensor extents).
std::vector<MemberTile> derive_member_tiles(const TileGroup& g, int64_t t_w, int64_t t_h) {
  size_t m = g.ops.size();
  std::vector<MemberTile> tiles(m);
  if (g.horizontal) {
    for (size_t i = 0; i < m; ++i)
      tiles[i] = {std::min(t_w, g.ops[i].out_shape.w), std::min(t_h, g.ops[i].out_shape.h)};
    return tiles;
  }
  tiles[m - 1] = {std::min(t_w, g.ops[m - 1].out_shape.w),
                  std::min(t_h, g.ops[m - 1].out_shape.h)};
  for (size_t i = m - 1; i > 0; --i) {
    const TiledOp& consumer = g.ops[i];
    tiles[i - 1] = {std::min(consumer.inv_w(tiles[i].w), g.ops[i - 1].out_shape.w),
                    std::min(consumer.inv_h(tiles[i].h), g.ops[i - 1].out_shape.h)};
  }
  return tiles;
}

int64_t weight_slab_bytes(const TiledOp& op, int64_t t_ic, int64_t t_oc) {
  if (!is_conv_family(op.kind)) return 0;
  int64_t oc = std::min(t_oc, op.out_shape.c);
  if (op.kind == OpKind::DepthwiseConv) return oc * op.k_w * op.k_h;
  int64_t ic = std::min(t_ic, op.in_shape.c);
  return ic * op.k_w * op.k_h * oc;
}

int64_t in_slab_bytes(const TiledOp& op, const MemberTile& t, int64_t t_ic) {
  int64_t ic = std::min(t_ic, op.in_shape.c);
  int64_t w = std::min(op.inv_w(t.w), op.in_shape.w);
  int64_t h = std::min(op.inv_h(t.h), op.in_shape.h);
  return ic * w * h;
}

}  // namespace

bool tile_feasible(const TileGroup& g, const HwConfig& hw, int64_t t_w) {
  if (t_w < 1) return false;
  const int64_t t_h = hw.h_p, t_oc = hw.oc_p, t_ic = hw.inc_p;
  auto tiles = derive_member_tiles(g, t_w, t_h);
  size_t m = g.ops.size();

  for (size_t i = 0; i < m; ++i) {
    const TiledOp& op = g.ops[i];
    // Output tile vs B_out.
    if (tiles[i].w * tiles[i].h * std::min(t_oc, op.out_shape.c) > hw.b_out) return false;
    // Weight slab vs B_weights.
    if (weight_slab_bytes(op, t_ic, t_oc) > hw.b_weights) return false;
    // Input slab vs B_in, with the input width the tile really needs.
    int64_t ic = std::min(t_ic, op.in_shape.c);
    int64_t in_w = std::min(op.inv_w(tiles[i].w), op.in_shape.w);
    if (ic * in_w * tiles[i].h > hw.b_in) return false;
  }

  // Residency: whole intermediate tiles (full channel depth) plus the live
  // stage's input slab must coexist in B_in.
  if (g.horizontal) {
    int64_t shared = 0;
    for (size_t i = 0; i < m; ++i)
      shared = std::max(shared, in_slab_bytes(g.ops[i], tiles[i], t_ic));
    return shared <= hw.b_in;
  }
  std::vector<int64_t> inter(m, 0);  // inter[i]: full-depth tile flowing i -> i+1
  for (size_t i = 0; i + 1 < m; ++i)
    inter[i] = tiles[i].w * tiles[i].h * g.ops[i].out_shape.c;
  for (size_t i = 0; i < m; ++i) {
    int64_t live = 0;
    if (i == 0)
      live += in_slab_bytes(g.ops[0], tiles[0], t_ic);
    else
      live += inter[i - 1];
    if (i + 1 < m) live += inter[i];
    if (g.ops[i].extra_operands > 0)
      live += g.ops[i].extra_operands *
              std::min(t_ic, g.ops[i].in_shape.c) * tiles[i].w * tiles[i].h;
    if (live > hw.b_in) return false;
  }
  return true;
}

std::optional<TileConfig> solve_tile_config(const TileGroup& g, const HwConfig& hw) {
  int64_t w_cap = 0;
  for (const TiledOp& op : g.ops) w_cap = std::max(w_cap, op.out_shape.w);
  if (!g.horizontal) w_cap = g.ops.back().out_shape.w;

  for (int64_t t_w = w_cap; t_w >= 1; --t_w) {
    if (!tile_feasible(g, hw, t_w)) continue;
    TileConfig cfg;
    cfg.t_w = t_w;
    cfg.t_h = hw.h_p;
    cfg.t_oc = hw.oc_p;
    cfg.t_ic = hw.inc_p;
    cfg.member_tiles = derive_member_tiles(g, t_w, hw.h_p);
    return cfg;
  }
  return std::nullopt;
}

int64_t tile_count(const TensorShape& shape, const TileConfig& tile) {
  return ceil_div(shape.w, tile.t_w) * ceil_div(shape.h, tile.t_h) *
         ceil_div(shape.c, tile.t_oc);
}

}  // namespace xgc
