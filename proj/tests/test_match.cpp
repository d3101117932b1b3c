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
#include <filesystem>
#include <fstream>

#include <doctest.h>

#include "support/testutil.hpp"
#include "xgc/hw.hpp"

using namespace xgc;
using test::ModelBuilder;

namespace {

FusionTemplate by_id(const std::string& id) {
  for (const auto& t : builtin_templates())
    if (t.id == id) return t;
  FAIL("no such template ", id);
  return {};
}

// A graph with 120 convolutions and 15 poolings (conv chains broken up by
// pools every 8 convs).
Model conv_heavy() {
  ModelBuilder b("heavy", 1);
  std::string cur = b.input("in", 64, 64, 8, 5);
  int convs = 0, pools = 0;
  while (convs < 120) {
    for (int i = 0; i < 8 && convs < 120; ++i)
      cur = b.conv("c" + std::to_string(convs++), cur, 8, 3, 1, 1);
    if (pools < 15) cur = b.pool("p" + std::to_string(pools++), cur, 1, 1, 0);
  }
  while (pools < 15) cur = b.pool("p" + std::to_string(pools++), cur, 1, 1, 0);
  return b.build();
}

}  // namespace

TEST_CASE("filter_candidates: pools in a 120-conv 15-pool graph") {
  Model m = conv_heavy();
  FusionTemplate cp = by_id("conv_pool");
  CHECK(filter_candidates(cp, m.graph, 0).size() == 120);
  CHECK(filter_candidates(cp, m.graph, 1).size() == 15);
  // Start point is the rarer kind: the pool side.
  CHECK(define_start_point(cp, m.graph) == 1);
}

TEST_CASE("filter_candidates: kernel-size predicates narrow the scan") {
  ModelBuilder b("mix", 2);
  auto in = b.input("in", 8, 8, 4, 5);
  auto a = b.conv("a", in, 4, 3);
  auto c = b.conv("b", a, 4, 1);
  b.conv("c", c, 4, 3);
  Model m = b.build();

  FusionTemplate t = by_id("conv_conv");
  t.vertices[0].kernel_h = 3;
  t.vertices[0].kernel_w = 3;
  auto got = filter_candidates(t, m.graph, 0);
  // Independent linear scan.
  std::vector<NodeId> want;
  for (const auto& [id, n] : m.graph.nodes)
    if (n.kind == OpKind::Conv && n.attrs.kh() == 3 && n.attrs.kw() == 3)
      want.push_back(id);
  CHECK(got == want);
}

TEST_CASE("define_start_point: ties break to declaration order") {
  ModelBuilder b("tie", 2);
  auto in = b.input("in", 8, 8, 4, 5);
  auto a = b.conv("a", in, 4, 3);
  b.pool("p", a, 2, 2);
  Model m = b.build();
  // conv_conv: both query vertices see the same candidate set.
  CHECK(define_start_point(by_id("conv_conv"), m.graph) == 0);
}

TEST_CASE("subgraph_search: two disjoint conv->pool pairs") {
  ModelBuilder b("two", 3);
  auto in = b.input("in", 16, 16, 4, 5);
  auto c1 = b.conv("c1", in, 4, 3);
  auto p1 = b.pool("p1", c1, 2, 2);
  auto c2 = b.conv("c2", p1, 8, 3);
  b.pool("p2", c2, 2, 2);
  Model m = b.build();
  auto found = subgraph_search(by_id("conv_pool"), m.graph);
  REQUIRE(found.size() == 2);
  CHECK(found[0].mapping == std::vector<NodeId>{1, 2});
  CHECK(found[1].mapping == std::vector<NodeId>{3, 4});
}

TEST_CASE("subgraph_search: overlapping conv->conv embeddings both reported") {
  ModelBuilder b("chain3", 3);
  auto in = b.input("in", 8, 8, 4, 5);
  auto c1 = b.conv("c1", in, 4, 3);
  auto c2 = b.conv("c2", c1, 4, 3);
  b.conv("c3", c2, 4, 3);
  Model m = b.build();
  auto found = subgraph_search(by_id("conv_conv"), m.graph);
  REQUIRE(found.size() == 2);
  CHECK(found[0].mapping == std::vector<NodeId>{1, 2});
  CHECK(found[1].mapping == std::vector<NodeId>{2, 3});
}

TEST_CASE("subgraph_search: predicate with no candidates skips the template") {
  ModelBuilder b("nopool", 3);
  auto in = b.input("in", 8, 8, 4, 5);
  auto c1 = b.conv("c1", in, 4, 3);
  b.conv("c2", c1, 4, 3);
  Model m = b.build();
  CHECK(subgraph_search(by_id("conv_pool"), m.graph).empty());
}

TEST_CASE("subgraph_search: horizontal siblings deduplicate to one canonical form") {
  ModelBuilder b("hor", 3);
  auto in = b.input("in", 8, 8, 8, 5);
  auto s = b.conv("s", in, 8, 1, 1, 0);
  b.conv("a", s, 4, 1, 1, 0);
  b.conv("c", s, 4, 3, 1, 1);
  b.conv("d", s, 4, 5, 1, 2);
  Model m = b.build();
  FusionTemplate h2 = by_id("horizontal_conv2");
  auto found = subgraph_search(h2, m.graph);
  // Three unordered pairs out of three siblings; the stem's own input has
  // only one conv reader.
  REQUIRE(found.size() == 3);
  for (const auto& e : found) {
    std::vector<NodeId> sorted = e.mapping;
    std::sort(sorted.begin(), sorted.end());
    CHECK(sorted == e.mapping);  // canonical ascending
  }
}

TEST_CASE("oracle: search equals brute force on random DAGs") {
  auto templates = builtin_templates();
  for (uint64_t seed = 0; seed < 40; ++seed) {
    Model m = test::random_dag(seed);
    for (const auto& t : templates) {
      auto fast = subgraph_search(t, m.graph);
      auto slow = test::brute_force_match(t, m.graph);
      CAPTURE(seed);
      CAPTURE(t.id);
      REQUIRE(fast.size() == slow.size());
      for (size_t i = 0; i < fast.size(); ++i) CHECK(fast[i] == slow[i]);
    }
  }
}

TEST_CASE("soundness: every embedding satisfies its template independently") {
  auto templates = builtin_templates();
  for (uint64_t seed = 50; seed < 60; ++seed) {
    Model m = test::random_dag(seed);
    for (const auto& t : templates)
      for (const auto& e : subgraph_search(t, m.graph))
        CHECK(embedding_sound(t, m.graph, e));
  }
}

TEST_CASE("determinism: two runs produce identical embedding lists") {
  Model m = test::random_dag(123);
  for (const auto& t : builtin_templates()) {
    auto a = subgraph_search(t, m.graph);
    auto b = subgraph_search(t, m.graph);
    CHECK(a == b);
  }
}

TEST_CASE("start-point optimality: chosen vertex has the smallest candidate set") {
  for (uint64_t seed = 70; seed < 80; ++seed) {
    Model m = test::random_dag(seed);
    for (const auto& t : builtin_templates()) {
      if (t.shape == TemplateShape::Horizontal) continue;
      size_t smallest = SIZE_MAX;
      for (int v = 0; v < static_cast<int>(t.vertices.size()); ++v)
        smallest = std::min(smallest, filter_candidates(t, m.graph, v).size());
      int chosen = define_start_point(t, m.graph);
      CHECK(filter_candidates(t, m.graph, chosen).size() == smallest);
    }
  }
}

TEST_CASE("check_onchip_fit: worked conv+pool fits on zu2 with tiling") {
  ModelBuilder b("cp", 5);
  auto in = b.input("in", 28, 28, 32, 5);
  auto c = b.conv("c", in, 256, 5, 1, 2, true);
  b.pool("p", c, 3, 1, 1);
  Model m = b.build();
  auto found = subgraph_search(by_id("conv_pool"), m.graph);
  REQUIRE(found.size() == 1);
  CandidateGroup grp = check_onchip_fit(m.graph, found[0], hw_preset("zu2"));
  CHECK(grp.fits_onchip);
  REQUIRE(grp.tile.has_value());
  CHECK(grp.members == std::vector<NodeId>{1, 2});
}

TEST_CASE("check_onchip_fit: oversized weights reject the group") {
  ModelBuilder b("fat", 5);
  auto in = b.input("in", 8, 8, 512, 5);
  auto c = b.conv("c", in, 512, 7, 1, 3);
  b.pool("p", c, 3, 1, 1);
  Model m = b.build();
  HwConfig hw = hw_preset("zu2");
  hw.b_weights = 1024;
  auto found = subgraph_search(by_id("conv_pool"), m.graph);
  REQUIRE(found.size() == 1);
  CandidateGroup grp = check_onchip_fit(m.graph, found[0], hw);
  CHECK(!grp.fits_onchip);
}

TEST_CASE("check_onchip_fit: agrees with an exhaustive width scan") {
  std::mt19937_64 rng(31);
  auto pick = [&](int64_t lo, int64_t hi) {
    return std::uniform_int_distribution<int64_t>(lo, hi)(rng);
  };
  for (int trial = 0; trial < 30; ++trial) {
    ModelBuilder b("fit" + std::to_string(trial), trial + 500);
    auto in = b.input("in", 14, 14, pick(4, 48), 5);
    auto c = b.conv("c", in, pick(8, 128), 3, 1, 1);
    b.pool("p", c, 3, 1, 1);
    Model m = b.build();
    HwConfig hw = hw_preset("zu2");
    hw.b_in = pick(512, 40000);
    hw.b_out = pick(128, 8000);
    hw.b_weights = pick(512, 40000);
    auto found = subgraph_search(by_id("conv_pool"), m.graph);
    REQUIRE(found.size() == 1);
    CandidateGroup grp = check_onchip_fit(m.graph, found[0], hw);
    auto tg = make_tile_group(m.graph, {1, 2}, false);
    bool any = false;
    for (int64_t w = 1; w <= 14; ++w)
      if (tile_feasible(tg, hw, w)) any = true;
    CHECK(grp.fits_onchip == any);
  }
}

TEST_CASE("templates: a catalog file overrides the built-ins") {
  namespace fs = std::filesystem;
  fs::path file = fs::temp_directory_path() / "xgc_templates.json";
  {
    std::ofstream out(file);
    out << R"([{"id": "pool_pool", "class": "kernel", "shape": "chain",
                "vertices": [{"kinds": ["pool"]}, {"kinds": ["pool"]}],
                "edges": [[0, 1]]},
               {"id": "strided_conv", "class": "kernel", "shape": "chain",
                "vertices": [{"kinds": ["conv"], "stride_h": 2, "stride_w": 2},
                             {"kinds": ["pool"]}],
                "edges": [[0, 1]]}])";
  }
  auto catalog = load_templates(file.string());
  REQUIRE(catalog.size() == 2);

  ModelBuilder b("tpl", 9);
  auto in = b.input("in", 16, 16, 8, 5);
  auto p1 = b.pool("p1", in, 2, 2);
  auto p2 = b.pool("p2", p1, 2, 2);
  auto c = b.conv("c", p2, 8, 3, 2, 1);
  b.pool("p3", c, 2, 2);
  Model m = b.build();
  auto e1 = subgraph_search(catalog[0], m.graph);
  REQUIRE(e1.size() == 1);
  CHECK(e1[0].mapping == std::vector<NodeId>{1, 2});
  auto e2 = subgraph_search(catalog[1], m.graph);
  REQUIRE(e2.size() == 1);
  CHECK(e2[0].mapping == std::vector<NodeId>{3, 4});
  fs::remove(file);
}

TEST_CASE("hw: a JSON config file loads and validates") {
  namespace fs = std::filesystem;
  fs::path file = fs::temp_directory_path() / "xgc_hw.json";
  {
    std::ofstream out(file);
    out << R"({"name": "mini", "inc_p": 8, "oc_p": 4, "h_p": 2,
               "total_onchip_bytes": 65536, "freq_mhz": 200,
               "ddr_bandwidth_bytes_per_cycle": 8})";
  }
  HwConfig hw = load_hw(file.string());
  CHECK(hw.name == "mini");
  CHECK(hw.inc_p == 8);
  CHECK(hw.b_in == 65536 * 2 / 5);
  CHECK(hw.b_out == 65536 / 5);
  CHECK(hw.ddr_bandwidth_bytes_per_cycle == 8);
  fs::remove(file);
  CHECK_THROWS_AS(load_hw("not_a_preset"), CompileError);
}
