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
#include <set>

#include <doctest.h>

#include "support/testutil.hpp"
#include "xgc/compile.hpp"

using namespace xgc;
using test::ModelBuilder;
using test::SyntheticCosts;
using test::random_segment_graph;
using test::synthetic_candidates;

namespace {

}  // namespace

TEST_CASE("find_barriers: plain chains have sentinels only") {
  ModelBuilder b("chain", 1);
  auto in = b.input("in", 8, 8, 8, 5);
  auto a = b.conv("a", in, 8, 3, 1, 1, true);
  auto c = b.conv("c", a, 8, 3, 1, 1, true);
  b.pool("p", c, 2, 2);
  Model m = normalize(b.build());
  auto barriers = find_barriers(m.graph);
  REQUIRE(barriers.size() == 2);
  for (const auto& bar : barriers) CHECK(bar.reason == Barrier::Reason::Sentinel);
}

TEST_CASE("find_barriers: residual fork and join carry degree reasons") {
  Model m = normalize(test::residual_block());
  auto barriers = find_barriers(m.graph);
  std::map<std::string, Barrier::Reason> by_name;
  for (const auto& bar : barriers) by_name[m.graph.node(bar.id).name] = bar.reason;
  REQUIRE(by_name.count("head"));
  CHECK(by_name.at("head") == Barrier::Reason::FanOut);
  REQUIRE(by_name.count("join"));
  CHECK(by_name.at("join") == Barrier::Reason::FanIn);
}

TEST_CASE("find_barriers: the shared stem of an inception cell fans out") {
  Model m = normalize(test::inception_cell());
  auto barriers = find_barriers(m.graph);
  std::map<std::string, Barrier::Reason> by_name;
  for (const auto& bar : barriers) by_name[m.graph.node(bar.id).name] = bar.reason;
  REQUIRE(by_name.count("stem"));
  CHECK(by_name.at("stem") == Barrier::Reason::FanOut);
  // Independent degree count.
  for (const auto& [id, n] : m.graph.nodes) {
    bool flagged = by_name.count(n.name) != 0;
    bool degree = m.graph.in_degree(id) > 1 || m.graph.out_degree(id) > 1 ||
                  n.kind == OpKind::Input || n.kind == OpKind::Output ||
                  n.host_executed;
    CHECK(flagged == degree);
  }
}

TEST_CASE("build_cost_graph: unit edges plus one fused edge") {
  ModelBuilder b("cg", 2);
  auto in = b.input("in", 8, 8, 8, 5);
  auto a = b.conv("a", in, 8, 3, 1, 1, true);
  auto c = b.conv("c", a, 8, 3, 1, 1, true);
  b.pool("p", c, 2, 2);
  Model m = normalize(b.build());

  SyntheticCosts costs(7);
  auto cands = synthetic_candidates(m.graph, 7);
  // keep only the conv+conv pair {1,2}
  std::vector<CandidateGroup> one;
  for (auto& cand : cands)
    if (cand.members == std::vector<NodeId>{1, 2}) {
      cand.fits_onchip = true;
      one.push_back(cand);
    }
  REQUIRE(one.size() == 1);
  GroupCostFn fn = [&](const std::vector<NodeId>& mem, bool hor) {
    return costs(mem, hor);
  };
  CostGraph cg = build_cost_graph({1, 2, 3}, one, fn);
  REQUIRE(cg.edges.size() == 4);  // three unit edges + the fused one
  CHECK(cg.edges[3].from == 0);
  CHECK(cg.edges[3].to == 2);
  CHECK(cg.edges[3].w == costs({1, 2}, false));
}

TEST_CASE("floyd: picks the fused edge exactly when it is cheaper") {
  CostGraph cg;
  cg.n = 2;
  cg.edges = {{0, 1, 5, -1}, {1, 2, 7, -1}, {0, 2, 9, 0}};
  PathResult r = floyd_shortest(cg);
  CHECK(r.cost == 9);
  REQUIRE(r.path.size() == 1);
  CHECK(r.path[0].cand == 0);

  CostGraph cg2;
  cg2.n = 2;
  cg2.edges = {{0, 1, 5, -1}, {1, 2, 7, -1}, {0, 2, 13, 0}};
  PathResult r2 = floyd_shortest(cg2);
  CHECK(r2.cost == 12);
  CHECK(r2.path.size() == 2);
}

TEST_CASE("select_strategy: absorbing arm is the cheaper one, exactly once") {
  Model m = normalize(test::residual_two_arm());
  // ids: in=0, head=1, arm_a=2, arm_b=3, join=4, tail=5
  auto cands = synthetic_candidates(m.graph, 3);
  std::map<std::string, int64_t> fixed;
  GroupCostFn fn = [&](const std::vector<NodeId>& mem, bool hor) -> int64_t {
    (void)hor;
    if (mem.size() == 1) return 1000;
    if (mem == std::vector<NodeId>{2, 4}) return 1100;  // arm_a absorbs: saves 900
    if (mem == std::vector<NodeId>{3, 4}) return 1600;  // arm_b absorbs: saves 400
    return 5000;  // any other fusion is a bad idea
  };
  for (auto& c : cands) c.fits_onchip = true, c.tile = TileConfig{};
  Strategy s = select_strategy(m.graph, cands, fn);
  int join_count = 0;
  bool arm_a_absorbed = false;
  for (const auto& g : s.groups)
    for (NodeId mem : g.members) {
      if (mem == 4) {
        join_count++;
        arm_a_absorbed = g.members == std::vector<NodeId>{2, 4};
      }
    }
  CHECK(join_count == 1);
  CHECK(arm_a_absorbed);
  CHECK(s.total_cycles == 1000 * 3 + 1100);  // head, arm_b, tail as singles
}

TEST_CASE("select_strategy: branchless chain reduces to the shortest path") {
  ModelBuilder b("line", 2);
  auto in = b.input("in", 8, 8, 8, 5);
  auto a = b.conv("a", in, 8, 3, 1, 1, true);
  auto c = b.conv("c", a, 8, 3, 1, 1, true);
  b.pool("p", c, 2, 2);
  Model m = normalize(b.build());
  auto cands = synthetic_candidates(m.graph, 11);
  SyntheticCosts costs(11);
  GroupCostFn fn = [&](const std::vector<NodeId>& mem, bool hor) {
    return costs(mem, hor);
  };
  Strategy s = select_strategy(m.graph, cands, fn);
  // Oracle on the same space.
  int64_t want = test::strategy_oracle(m.graph, cands, fn);
  CHECK(s.total_cycles == want);
}

TEST_CASE("oracle: optimal equals exhaustive enumeration on random segments") {
  int branched_seen = 0;
  for (uint64_t seed = 0; seed < 90; ++seed) {
    Model m = normalize(random_segment_graph(seed));
    auto cands = synthetic_candidates(m.graph, seed);
    SyntheticCosts costs(seed * 17 + 1);
    GroupCostFn fn = [&](const std::vector<NodeId>& mem, bool hor) {
      return costs(mem, hor);
    };
    Strategy s = select_strategy(m.graph, cands, fn);
    int64_t want = test::strategy_oracle(m.graph, cands, fn);
    CAPTURE(seed);
    CHECK(s.total_cycles == want);
    for (const auto& [id, n] : m.graph.nodes)
      if (m.graph.in_degree(id) > 1 && !n.host_executed && n.kind != OpKind::Output) {
        branched_seen++;
        break;
      }
  }
  CHECK(branched_seen >= 20);
}

TEST_CASE("strategies: each covered vertex appears exactly once") {
  for (const auto& entry : test::corpus()) {
    CAPTURE(entry.name);
    Model m = normalize(entry.model);
    Quantization q = quantize_model(m);
    HwConfig hw = hw_preset("zu2");
    auto cands = enumerate_groups(builtin_templates(), m.graph, hw);
    GroupEvaluator ev(m, q, hw);
    GroupCostFn fn = [&](const std::vector<NodeId>& mem, bool hor) {
      return ev.cycles(mem, hor);
    };
    for (auto* s : {new Strategy(baseline_strategy(m.graph, fn)),
                    new Strategy(greedy_strategy(m.graph, cands, fn)),
                    new Strategy(select_strategy(m.graph, cands, fn))}) {
      std::set<NodeId> seen;
      for (const auto& g : s->groups)
        for (NodeId mem : g.members) CHECK(seen.insert(mem).second);
      int64_t covered = 0;
      for (const auto& [id, n] : m.graph.nodes)
        if (!n.host_executed &&
            (is_device_compute(n.kind) || n.kind == OpKind::Concat))
          covered++;
      CHECK(static_cast<int64_t>(seen.size()) == covered);
      delete s;
    }
  }
}

TEST_CASE("dominance: optimal <= greedy <= baseline on the corpus") {
  bool strict_somewhere = false;
  for (const auto& entry : test::corpus()) {
    CAPTURE(entry.name);
    Model m = normalize(entry.model);
    Quantization q = quantize_model(m);
    HwConfig hw = hw_preset("zu2");
    auto cands = enumerate_groups(builtin_templates(), m.graph, hw);
    GroupEvaluator ev(m, q, hw);
    GroupCostFn fn = [&](const std::vector<NodeId>& mem, bool hor) {
      return ev.cycles(mem, hor);
    };
    Strategy base = baseline_strategy(m.graph, fn);
    Strategy greedy = greedy_strategy(m.graph, cands, fn);
    Strategy opt = select_strategy(m.graph, cands, fn);
    CHECK(opt.total_cycles <= greedy.total_cycles);
    CHECK(greedy.total_cycles <= base.total_cycles);
    if (opt.total_cycles < greedy.total_cycles) strict_somewhere = true;
  }
  CHECK(strict_somewhere);
}

TEST_CASE("determinism: identical inputs give identical strategies") {
  Model m = normalize(test::inception_cell());
  Quantization q = quantize_model(m);
  HwConfig hw = hw_preset("zu2");
  auto cands = enumerate_groups(builtin_templates(), m.graph, hw);
  GroupEvaluator ev(m, q, hw);
  GroupCostFn fn = [&](const std::vector<NodeId>& mem, bool hor) {
    return ev.cycles(mem, hor);
  };
  Strategy a = select_strategy(m.graph, cands, fn);
  Strategy b = select_strategy(m.graph, cands, fn);
  REQUIRE(a.groups.size() == b.groups.size());
  for (size_t i = 0; i < a.groups.size(); ++i) {
    CHECK(a.groups[i].members == b.groups[i].members);
    CHECK(a.groups[i].cycles == b.groups[i].cycles);
  }
}
