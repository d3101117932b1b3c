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
#include <doctest.h>

#include "support/testutil.hpp"
#include "xgc/tiling.hpp"

using namespace xgc;
using test::ModelBuilder;

namespace {

// The worked example shapes: conv 28x28x32 -> 28x28x256 k5 pad2, pool 3x3 s1.
Model conv_pool_model() {
  ModelBuilder b("cp", 5);
  auto in = b.input("in", 28, 28, 32, 5);
  auto c = b.conv("c", in, 256, 5, 1, 2, true);
  b.pool("p", c, 3, 1, 1);
  return b.build();
}

}  // namespace

TEST_CASE("input_extent: receptive-field arithmetic") {
  // 28 stride-1 windows of width 5 cover 32 input columns.
  CHECK(input_extent(28, 5, 1) == 32);
  CHECK(input_extent(1, 3, 2) == 3);
  // Four outputs under k=4 s=2 need (4-1)*2+4 = 10 inputs.
  CHECK(input_extent(4, 4, 2) == 10);
}

TEST_CASE("solve: generous buffers give whole-row tiles") {
  ModelBuilder b("single", 5);
  auto in = b.input("in", 28, 28, 32, 5);
  b.conv("c", in, 256, 5, 1, 2);
  Model m = b.build();
  HwConfig hw = hw_preset("zu2");
  auto tg = make_tile_group(m.graph, {1}, false);
  auto cfg = solve_tile_config(tg, hw);
  REQUIRE(cfg.has_value());
  CHECK(cfg->t_w == 28);
  CHECK(cfg->t_h == hw.h_p);
  CHECK(cfg->t_oc == hw.oc_p);
  CHECK(cfg->t_ic == hw.inc_p);
}

TEST_CASE("solve: maximality confirmed by exhaustive scan") {
  Model m = conv_pool_model();
  HwConfig hw = hw_preset("zu2");
  for (auto members : {std::vector<NodeId>{1}, std::vector<NodeId>{1, 2}}) {
    auto tg = make_tile_group(m.graph, members, false);
    auto cfg = solve_tile_config(tg, hw);
    REQUIRE(cfg.has_value());
    int64_t W = m.graph.node(members.back()).output_shape.w;
    int64_t best = 0;
    for (int64_t t_w = 1; t_w <= W; ++t_w)
      if (tile_feasible(tg, hw, t_w)) best = t_w;
    CHECK(cfg->t_w == best);
    CHECK((cfg->t_w == W || !tile_feasible(tg, hw, cfg->t_w + 1)));
  }
}

TEST_CASE("solve: weights alone past B_weights is infeasible") {
  ModelBuilder b("fat", 5);
  auto in = b.input("in", 8, 8, 512, 5);
  b.conv("c", in, 512, 7, 1, 3);
  Model m = b.build();
  HwConfig hw = hw_preset("zu2");
  hw.b_weights = 1024;  // one 7x7 slab at inc_p x oc_p wants 24*49*12 bytes
  auto cfg = solve_tile_config(make_tile_group(m.graph, {1}, false), hw);
  CHECK(!cfg.has_value());
}

TEST_CASE("tile_count: ceiling arithmetic") {
  TileConfig t;
  t.t_w = 28;
  t.t_h = 4;
  t.t_oc = 12;
  CHECK(tile_count(TensorShape{1, 28, 28, 256}, t) == 1 * 7 * 22);
  TileConfig whole{28, 28, 256, 32, {}};
  CHECK(tile_count(TensorShape{1, 28, 28, 256}, whole) == 1);
}

TEST_CASE("tile_count: matches explicit grid enumeration") {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 50; ++i) {
    auto pick = [&](int64_t lo, int64_t hi) {
      return std::uniform_int_distribution<int64_t>(lo, hi)(rng);
    };
    TensorShape s{1, pick(1, 37), pick(1, 37), pick(1, 130)};
    TileConfig t;
    t.t_w = pick(1, s.w);
    t.t_h = pick(1, s.h);
    t.t_oc = pick(1, s.c);
    int64_t count = 0;
    for (int64_t y = 0; y < s.h; y += t.t_h)
      for (int64_t x = 0; x < s.w; x += t.t_w)
        for (int64_t c = 0; c < s.c; c += t.t_oc) ++count;
    CHECK(tile_count(s, t) == count);
  }
}

TEST_CASE("property: every returned config satisfies the buffer inequalities") {
  std::mt19937_64 rng(11);
  auto pick = [&](int64_t lo, int64_t hi) {
    return std::uniform_int_distribution<int64_t>(lo, hi)(rng);
  };
  int solved = 0;
  for (int trial = 0; trial < 200; ++trial) {
    ModelBuilder b("prop" + std::to_string(trial), trial);
    int64_t hw_extent = pick(4, 40);
    int64_t ic = pick(1, 64);
    auto in = b.input("in", hw_extent, hw_extent, ic, 5);
    int64_t k = std::vector<int64_t>{1, 3, 5, 7}[pick(0, 3)];
    b.conv("c", in, pick(1, 300), k, pick(1, 2), (k - 1) / 2);
    Model m = b.build();

    HwConfig hw;
    hw.name = "rand";
    hw.inc_p = pick(4, 32);
    hw.oc_p = pick(4, 16);
    hw.h_p = pick(1, 8);
    hw.b_in = pick(256, 300000);
    hw.b_weights = pick(256, 300000);
    hw.b_out = pick(128, 60000);

    auto tg = make_tile_group(m.graph, {1}, false);
    auto cfg = solve_tile_config(tg, hw);
    if (!cfg) continue;
    ++solved;
    const XNode& conv = m.graph.node(1);
    int64_t t_w = cfg->t_w;
    // The three inequalities, checked directly.
    int64_t out_tile = std::min(t_w, conv.output_shape.w) *
                       std::min(hw.h_p, conv.output_shape.h) *
                       std::min(hw.oc_p, conv.output_shape.c);
    CHECK(out_tile <= hw.b_out);
    int64_t wt = std::min(hw.inc_p, ic) * k * k * std::min(hw.oc_p, conv.output_shape.c);
    CHECK(wt <= hw.b_weights);
    int64_t in_w = std::min(input_extent(t_w, k, conv.attrs.sw()),
                            m.graph.node(0).output_shape.w);
    CHECK(std::min(hw.inc_p, ic) * in_w * std::min(hw.h_p, conv.output_shape.h) <=
          hw.b_in);
    // Maximality.
    CHECK((t_w == conv.output_shape.w || !tile_feasible(tg, hw, t_w + 1)));
  }
  CHECK(solved > 50);  // the generator must exercise real solves
}

TEST_CASE("property: enlarging a buffer never shrinks t_w") {
  Model m = conv_pool_model();
  HwConfig hw = hw_preset("zu2");
  auto tg = make_tile_group(m.graph, {1, 2}, false);
  std::mt19937_64 rng(13);
  for (int i = 0; i < 40; ++i) {
    HwConfig small = hw;
    small.b_in = std::uniform_int_distribution<int64_t>(512, hw.b_in)(rng);
    small.b_out = std::uniform_int_distribution<int64_t>(128, hw.b_out)(rng);
    HwConfig big = small;
    big.b_in += 4096;
    big.b_out += 4096;
    auto a = solve_tile_config(tg, small);
    auto b2 = solve_tile_config(tg, big);
    if (a) {
      REQUIRE(b2.has_value());
      CHECK(b2->t_w >= a->t_w);
    }
  }
}

TEST_CASE("fused chain: derived extents compose through the members") {
  Model m = conv_pool_model();
  HwConfig hw = hw_preset("zu2");
  auto tg = make_tile_group(m.graph, {1, 2}, false);
  auto cfg = solve_tile_config(tg, hw);
  REQUIRE(cfg.has_value());
  REQUIRE(cfg->member_tiles.size() == 2);
  // Pool tile (t_w, 4) needs a conv tile of (t_w+2, 6) under k3 s1.
  CHECK(cfg->member_tiles[1].w == cfg->t_w);
  CHECK(cfg->member_tiles[1].h == 4);
  CHECK(cfg->member_tiles[0].w == std::min<int64_t>(cfg->t_w + 2, 28));
  CHECK(cfg->member_tiles[0].h == 6);
}
