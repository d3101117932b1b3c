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
#include "xgc/compile.hpp"

using namespace xgc;
using test::ModelBuilder;

namespace {

// Compiles with every mode and checks all schedules and the direct
// interpreter agree byte-for-byte on the device outputs.
void check_bit_exact(const Model& m, const std::string& hw_name = "zu2") {
  HwConfig hw = hw_preset(hw_name);
  auto templates = builtin_templates();
  CompileResult base = compile(m, hw, "none", templates);
  auto inputs = test::random_inputs(base.model, base.quant, 4242);
  auto graph_tensors = run_graph(base.model, base.quant, inputs);
  auto outputs = device_output_tensors(base.model.graph);
  REQUIRE(!outputs.empty());

  for (const std::string mode : {"none", "greedy", "optimal"}) {
    CAPTURE(mode);
    CompileResult res = compile(m, hw, mode, templates);
    auto image = build_ddr_image(res.model, res.quant, res.plan, inputs);
    auto ddr = run_stream(res.program, hw, std::move(image));
    for (TensorId t : outputs) {
      CAPTURE(t);
      auto got = extract_tensor(ddr, res.plan, t);
      const auto& want = graph_tensors.at(t).data;
      REQUIRE(got.size() == want.size());
      bool same = true;
      size_t first = 0;
      for (size_t i = 0; i < got.size(); ++i)
        if (static_cast<int8_t>(got[i]) != want[i]) {
          same = false;
          first = i;
          break;
        }
      if (!same) {
        CAPTURE(first);
        CAPTURE(int(static_cast<int8_t>(got[first])));
        CAPTURE(int(want[first]));
      }
      CHECK(same);
    }
  }
}

}  // namespace

TEST_CASE("quantize: values in [-1,1) select radix 7") {
  FloatTensor t;
  t.dims = {16};
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<float> dist(-0.99f, 0.99f);
  t.data.resize(16);
  for (auto& v : t.data) v = dist(rng);
  QParam q = quantize_param(t);
  CHECK(q.radix == 7);
}

TEST_CASE("quantize: all zeros tie-breaks to the largest radix") {
  FloatTensor t;
  t.dims = {8};
  t.data.assign(8, 0.0f);
  QParam q = quantize_param(t);
  CHECK(q.radix == 7);
  for (int8_t v : q.data) CHECK(v == 0);
}

TEST_CASE("quantize: chosen radix minimizes SSE over all eight candidates") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 30; ++trial) {
    std::uniform_real_distribution<float> mag(0.1f, 30.0f);
    float span = mag(rng);
    std::uniform_real_distribution<float> dist(-span, span);
    FloatTensor t;
    t.dims = {64};
    t.data.resize(64);
    for (auto& v : t.data) v = dist(rng);
    int chosen = choose_radix(t.data);
    auto sse_at = [&](int r) {
      double sse = 0;
      for (float x : t.data) {
        double q = double(quantize_value(x, r)) / double(1 << r);
        sse += (double(x) - q) * (double(x) - q);
      }
      return sse;
    };
    double best = sse_at(chosen);
    for (int r = 0; r <= 7; ++r) CHECK(best <= sse_at(r) + 1e-12);
  }
}

TEST_CASE("run_graph: identity 1x1 conv reproduces its input") {
  ModelBuilder b("id", 1);
  auto in = b.input("in", 3, 3, 2, 4);
  b.conv("c", in, 2, 1, 1, 0, false, false, /*out_radix=*/4);
  Model m = normalize(b.build());
  // Weight = identity matrix at radix 0.
  auto& w = m.params.at("c.w");
  w.data = {1, 0, 0, 1};  // OWHC [2,1,1,2]
  Quantization q = quantize_model(m);
  // Pin the weight to an exact identity at radix 0.
  q.params.at("c.w").radix = 0;
  q.params.at("c.w").data = {1, 0, 0, 1};
  q.radix.param.at("c.w") = 0;

  auto inputs = test::random_inputs(m, q, 9);
  auto tensors = run_graph(m, q, inputs);
  CHECK(tensors.at(1).data == inputs.at(0).data);
}

TEST_CASE("run_graph: 2x2 max pool picks the maximum") {
  ModelBuilder b("mp", 1);
  auto in = b.input("in", 2, 2, 1, 0);
  b.pool("p", in, 2, 2);
  Model m = normalize(b.build());
  Quantization q = quantize_model(m);
  QTensor t;
  t.shape = {1, 2, 2, 1};
  t.radix = 0;
  t.data = {1, 3, 2, 4};
  auto tensors = run_graph(m, q, {{0, t}});
  REQUIRE(tensors.at(1).data.size() == 1);
  CHECK(tensors.at(1).data[0] == 4);
}

TEST_CASE("run_stream: out-of-bounds regions are rejected") {
  Stream s;
  Instruction load;
  load.kind = InstrKind::Load;
  load.seq = 0;
  load.reads = {Region{Space::Ddr, {0, 1, 0, 1, 0, 64}}};
  load.write = Region{Space::BufIn, {static_cast<uint32_t>(1 << 30), 1, 0, 1, 0, 64}};
  s.push_back(load);
  HwConfig hw = hw_preset("zu2");
  std::vector<uint8_t> ddr(4096, 0);
  CHECK_THROWS_AS(run_stream(s, hw, ddr), CompileError);
}

TEST_CASE("bit exact: single conv end to end") {
  ModelBuilder b("one", 2);
  auto in = b.input("in", 9, 7, 5, 5);
  b.conv("c", in, 13, 3, 2, 1, true);
  check_bit_exact(b.build());
}

TEST_CASE("bit exact: strided, padded, dilated and depthwise variants") {
  ModelBuilder b("variants", 3);
  auto in = b.input("in", 13, 13, 8, 5);
  auto c1 = b.conv("c1", in, 12, 5, 2, 2, true);
  auto c2 = b.dilated_conv("c2", c1, 10, 3, 2);
  auto c3 = b.depthwise("c3", c2, 3, 1, 1);
  b.pool("p", c3, 3, 2, 1, /*avg=*/true);
  check_bit_exact(b.build());
}

TEST_CASE("bit exact: deconv upsampling path") {
  ModelBuilder b("dec", 4);
  auto in = b.input("in", 6, 6, 8, 5);
  auto d = b.deconv("d", in, 12, 4, 2, 1);
  b.conv("c", d, 8, 3, 1, 1, true);
  check_bit_exact(b.build());
}

TEST_CASE("bit exact: eltwise arms with different radices") {
  ModelBuilder b("mix", 5);
  auto in = b.input("in", 10, 10, 8, 5);
  auto a = b.conv("a", in, 8, 3, 1, 1, true, true, /*out_radix=*/3);
  auto c = b.conv("c", in, 8, 3, 1, 1, false, true, /*out_radix=*/6);
  b.eltwise("j", {a, c}, true, 4);
  check_bit_exact(b.build());
}

TEST_CASE("bit exact: every corpus graph, all strategy modes") {
  for (const auto& entry : test::corpus()) {
    CAPTURE(entry.name);
    check_bit_exact(entry.model);
  }
}

TEST_CASE("bit exact: corpus on the larger preset too") {
  for (const auto& entry : test::corpus()) {
    CAPTURE(entry.name);
    check_bit_exact(entry.model, "zu9");
  }
}

TEST_CASE("tiling invariance: different feasible widths give identical bytes") {
  ModelBuilder b("tile", 6);
  auto in = b.input("in", 12, 12, 16, 5);
  auto c = b.conv("c", in, 24, 3, 1, 1, true);
  b.pool("p", c, 2, 2);
  Model m0 = normalize(b.build());
  Quantization q = quantize_model(m0);
  HwConfig hw = hw_preset("zu2");
  // The fused pair executes interleaved: plan it as one liveness stage.
  DdrPlan plan = allocate_ddr_staged(m0, {{0}, {1, 2}, {3}});
  auto inputs = test::random_inputs(m0, q, 31);
  auto want = run_graph(m0, q, inputs);

  auto tg = make_tile_group(m0.graph, {1, 2}, false);
  for (int64_t t_w : {1, 2, 3, 5, 6}) {
    CAPTURE(t_w);
    REQUIRE(tile_feasible(tg, hw, t_w));
    TileConfig cfg;
    cfg.t_w = t_w;
    cfg.t_h = hw.h_p;
    cfg.t_oc = hw.oc_p;
    cfg.t_ic = hw.inc_p;
    ExecGroup g;
    g.members = {1, 2};
    g.tile = cfg;
    LowerInput li{m0, q, plan, hw};
    BufferCaches caches(hw);
    Stream body;
    lower_group(li, g, caches, body);
    body = assign_dependencies(std::move(body));
    Stream prog = finalize_stream(std::move(body));
    auto ddr = run_stream(prog, hw, build_ddr_image(m0, q, plan, inputs));
    auto got = extract_tensor(ddr, plan, 2);
    const auto& ref = want.at(2).data;
    REQUIRE(got.size() == ref.size());
    for (size_t i = 0; i < got.size(); ++i) CHECK(static_cast<int8_t>(got[i]) == ref[i]);
  }
}
