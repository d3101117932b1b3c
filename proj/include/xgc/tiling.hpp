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

#include <optional>
#include <vector>

#include "xgc/graph.hpp"
#include "xgc/hw.hpp"

namespace xgc {

// Width of the input window that produces `out_extent` outputs under a
// sliding kernel (interior tiles; borders are clamped by codegen).
int64_t input_extent(int64_t out_extent, int64_t kernel, int64_t stride);

// What the tiler needs to know about one member of a fused group.
struct TiledOp {
  NodeId id = -1;
  OpKind kind = OpKind::Conv;
  int64_t k_w = 1, k_h = 1, s_w = 1, s_h = 1, dilation = 1;
  TensorShape in_shape;   // primary operand
  TensorShape out_shape;
  int64_t extra_operands = 0;  // second eltwise arm etc., loaded from DDR

  // Input extent needed along one axis for `out` outputs of this op.
  int64_t inv_w(int64_t out) const;
  int64_t inv_h(int64_t out) const;
};

struct TileGroup {
  std::vector<TiledOp> ops;  // dataflow order; parallel siblings if horizontal
  bool horizontal = false;
};

// Members in dataflow order (for a chain) or siblings sharing an input (for
// a horizontal group).
TileGroup make_tile_group(const XGraph& g, const std::vector<NodeId>& members,
                          bool horizontal);

struct MemberTile {
  int64_t w = 1;
  int64_t h = 1;
};

struct TileConfig {
  int64_t t_w = 1;
  int64_t t_h = 1;   // fixed to h_p
  int64_t t_oc = 1;  // fixed to oc_p
  int64_t t_ic = 1;  // fixed to inc_p
  // Derived interior output-tile extents per member; for chains the last one
  // is (t_w, t_h).
  std::vector<MemberTile> member_tiles;
};

// True when the tile satisfies, for every member, the three buffer
// inequalities (output tile vs B_out, weight slab vs B_weights, input slab
// vs B_in) plus on-chip residency of whole intermediate tiles.
bool tile_feasible(const TileGroup& group, const HwConfig& hw, int64_t t_w);

// Fixes t_h/t_oc/t_ic to the hardware parallelism and maximizes t_w, capped
// at the group's output width. Returns nothing when even t_w = 1 violates a
// constraint.
std::optional<TileConfig> solve_tile_config(const TileGroup& group, const HwConfig& hw);

// Number of output tiles covering `shape` (input-channel passes are costed
// inside each tile, not counted here).
int64_t tile_count(const TensorShape& shape, const TileConfig& tile);

}  // namespace xgc
