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
#include <algorithm>
#include <set>

#include <doctest.h>

#include "support/testutil.hpp"
#include "xgc/compile.hpp"

using namespace xgc;
using test::ModelBuilder;

namespace {

struct Lowered {
  Model model;
  Quantization quant;
  HwConfig hw;
  DdrPlan plan;
  Stream body;  // dependency-annotated, unframed
};

Lowered lower_model(Model m, const std::vector<ExecGroup>& groups,
                    const std::string& preset = "zu2") {
  Lowered l{normalize(m), {}, hw_preset(preset), {}, {}};
  l.quant = quantize_model(l.model);
  l.plan = allocate_ddr(l.model, topo_order(l.model.graph));
  LowerInput in{l.model, l.quant, l.plan, l.hw};
  BufferCaches caches(l.hw);
  for (const auto& g : groups) lower_group(in, g, caches, l.body);
  l.body = assign_dependencies(std::move(l.body));
  return l;
}

ExecGroup group_of(std::vector<NodeId> members, bool horizontal = false) {
  ExecGroup g;
  g.members = std::move(members);
  g.horizontal = horizontal;
  return g;
}

bool touches(const Instruction& ins, const DdrRegion& r) {
  Region probe{Space::Ddr, {static_cast<uint32_t>(r.base), 1, 0, 1, 0,
                            static_cast<uint32_t>(r.length)}};
  for (const auto& rd : ins.reads)
    if (regions_overlap(rd, probe)) return true;
  return ins.write && regions_overlap(*ins.write, probe);
}

}  // namespace

TEST_CASE("allocate_ddr: chain reuse after the last consumer") {
  ModelBuilder b("chain", 1);
  auto in = b.input("in", 8, 8, 8, 5);
  auto a = b.conv("a", in, 8, 1, 1, 0);
  auto c = b.conv("c", a, 8, 1, 1, 0);
  b.conv("d", c, 8, 1, 1, 0);
  Model m = b.build();
  DdrPlan plan = allocate_ddr(m, topo_order(m.graph));
  // a's region is dead once c has run; d's output can take its bytes.
  CHECK(plan.tensor(1).base == plan.tensor(3).base);
  CHECK(check_plan_safety(m, topo_order(m.graph), plan).empty());
}

TEST_CASE("allocate_ddr: diamond keeps the fork live until both arms ran") {
  ModelBuilder b("diamond", 1);
  auto in = b.input("in", 8, 8, 8, 5);
  auto a = b.conv("a", in, 8, 1, 1, 0);
  auto l = b.conv("l", a, 8, 1, 1, 0);
  auto r = b.conv("r", a, 8, 1, 1, 0);
  b.eltwise("j", {l, r});
  Model m = b.build();
  auto order = topo_order(m.graph);
  DdrPlan plan = allocate_ddr(m, order);
  // l executes before r; a must not share bytes with l's output.
  auto overlap = [](const DdrRegion& x, const DdrRegion& y) {
    return x.base < y.base + y.length && y.base < x.base + x.length;
  };
  CHECK(!overlap(plan.tensor(1), plan.tensor(2)));
  CHECK(!overlap(plan.tensor(1), plan.tensor(3)));
  CHECK(check_plan_safety(m, order, plan).empty());
}

TEST_CASE("allocate_ddr: corpus plans are overlap-free, parameters protected") {
  for (const auto& entry : test::corpus()) {
    CAPTURE(entry.name);
    Model m = normalize(entry.model);
    auto order = topo_order(m.graph);
    DdrPlan plan = allocate_ddr(m, order);
    auto issues = check_plan_safety(m, order, plan);
    CHECK(issues.empty());
    for (const auto& [name, r] : plan.params) CHECK(r.persistent);
  }
}

TEST_CASE("lower: minimal conv stream is LOAD, LOAD, CONV, SAVE") {
  ModelBuilder b("min", 1);
  auto in = b.input("in", 1, 1, 24, 5);
  b.conv("c", in, 8, 1, 1, 0, false, /*bias=*/false);
  Lowered l = lower_model(b.build(), {group_of({1})});
  REQUIRE(l.body.size() == 4);
  CHECK(l.body[0].kind == InstrKind::Load);
  CHECK(l.body[1].kind == InstrKind::Load);
  CHECK(l.body[2].kind == InstrKind::Conv);
  CHECK(l.body[3].kind == InstrKind::Save);
  // The conv waits on both loads; the loads are mutually unordered.
  CHECK(l.body[2].deps == std::vector<uint32_t>{0, 1});
  CHECK(l.body[0].deps.empty());
  CHECK(l.body[1].deps.empty());
  CHECK(l.body[3].deps == std::vector<uint32_t>{2});
}

TEST_CASE("lower: fused conv+pool keeps the intermediate off DDR") {
  ModelBuilder b("cp", 5);
  auto in = b.input("in", 28, 28, 32, 5);
  auto c = b.conv("c", in, 64, 5, 1, 2, true);
  b.pool("p", c, 3, 1, 1);
  Model m = b.build();

  Lowered fused = lower_model(m, {group_of({1, 2})});
  const DdrRegion& inter = fused.plan.tensor(1);  // conv output region
  for (const Instruction& ins : fused.body) {
    if (ins.kind != InstrKind::Load && ins.kind != InstrKind::Save) continue;
    CHECK(!touches(ins, inter));
  }
  // The serial schedule, by contrast, must move it.
  Lowered serial = lower_model(m, {group_of({1}), group_of({2})});
  bool moved = false;
  for (const Instruction& ins : serial.body)
    if ((ins.kind == InstrKind::Load || ins.kind == InstrKind::Save) &&
        touches(ins, serial.plan.tensor(1)))
      moved = true;
  CHECK(moved);
}

TEST_CASE("lower: conv+eltwise fusion skips the save and reload of the arm") {
  Model m = test::residual_block();
  // head=1, body_a=2, body_b=3, join=4 after normalization.
  Lowered fused = lower_model(m, {group_of({1}), group_of({2}), group_of({3, 4})});
  const DdrRegion& fused_arm = fused.plan.tensor(3);  // body_b output
  for (const Instruction& ins : fused.body) {
    if (ins.kind != InstrKind::Load && ins.kind != InstrKind::Save) continue;
    CHECK(!touches(ins, fused_arm));
  }
  // The other arm (head output) still loads for the eltwise.
  bool head_loaded = false;
  for (const Instruction& ins : fused.body)
    if (ins.kind == InstrKind::Load && touches(ins, fused.plan.tensor(1)))
      head_loaded = true;
  CHECK(head_loaded);
}

TEST_CASE("deps: random dependency-respecting execution orders agree") {
  ModelBuilder b("rnd", 5);
  auto in = b.input("in", 10, 10, 16, 5);
  auto c = b.conv("c", in, 24, 3, 1, 1, true);
  b.pool("p", c, 2, 2);
  Model m0 = b.build();
  Lowered l = lower_model(m0, {group_of({1, 2})});
  Stream base = finalize_stream(l.body);

  auto inputs = test::random_inputs(l.model, l.quant, 77);
  auto image = build_ddr_image(l.model, l.quant, l.plan, inputs);
  auto want = run_stream(base, l.hw, image);

  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 5; ++trial) {
    // Random topological linearization of the dependency DAG.
    size_t n = base.size();
    std::vector<int> pending(n, 0);
    std::vector<std::vector<uint32_t>> consumers(n);
    for (const auto& ins : base) {
      pending[ins.seq] = static_cast<int>(ins.deps.size());
      for (uint32_t d : ins.deps) consumers[d].push_back(ins.seq);
    }
    std::vector<uint32_t> ready, order;
    for (size_t i = 0; i < n; ++i)
      if (!pending[i]) ready.push_back(static_cast<uint32_t>(i));
    while (!ready.empty()) {
      size_t pick = std::uniform_int_distribution<size_t>(0, ready.size() - 1)(rng);
      uint32_t u = ready[pick];
      ready.erase(ready.begin() + pick);
      order.push_back(u);
      for (uint32_t c2 : consumers[u])
        if (--pending[c2] == 0) ready.push_back(c2);
    }
    REQUIRE(order.size() == n);
    // Renumber into the new order.
    std::vector<uint32_t> new_seq(n);
    for (size_t pos = 0; pos < n; ++pos) new_seq[order[pos]] = static_cast<uint32_t>(pos);
    Stream shuffled(n);
    for (const auto& ins : base) {
      Instruction moved = ins;
      moved.seq = new_seq[ins.seq];
      for (auto& d : moved.deps) d = new_seq[d];
      std::sort(moved.deps.begin(), moved.deps.end());
      shuffled[moved.seq] = std::move(moved);
    }
    auto got = run_stream(shuffled, l.hw, image);
    CHECK(got == want);
  }
}

TEST_CASE("deps: acyclic and only backwards") {
  Model m = test::inception_cell();
  Model norm = normalize(m);
  auto strat_groups = std::vector<ExecGroup>{};
  for (NodeId id : topo_order(norm.graph)) {
    const XNode& n = norm.graph.node(id);
    if (n.kind == OpKind::Input || n.kind == OpKind::Output || n.host_executed)
      continue;
    strat_groups.push_back(group_of({id}));
  }
  Lowered l = lower_model(m, strat_groups);
  for (const auto& ins : l.body)
    for (uint32_t d : ins.deps) CHECK(d < ins.seq);
}

TEST_CASE("reload freedom: no identical load while its slab is intact") {
  for (const auto& name : {std::string("vgg_like"), std::string("residual_block")}) {
    Model src;
    for (auto& e : test::corpus())
      if (e.name == name) src = e.model;
    CAPTURE(name);
    Model norm = normalize(src);
    std::vector<ExecGroup> singles;
    for (NodeId id : topo_order(norm.graph)) {
      const XNode& n = norm.graph.node(id);
      if (n.kind == OpKind::Input || n.kind == OpKind::Output || n.host_executed)
        continue;
      singles.push_back(group_of({id}));
    }
    Lowered l = lower_model(src, singles);

    // Replay: a LOAD with identical source and destination while the
    // destination bytes are untouched would be a wasted reload.
    std::map<std::string, std::string> resident;  // dst key -> src key
    auto key = [](const Region& r) {
      return std::to_string(int(r.space)) + "@" + std::to_string(r.pat.base) + ":" +
             std::to_string(r.pat.n0) + "," + std::to_string(r.pat.s0) + "," +
             std::to_string(r.pat.n1) + "," + std::to_string(r.pat.s1) + "," +
             std::to_string(r.pat.run);
    };
    std::map<std::string, Region> regions;  // dst key -> dst region
    for (const auto& ins : l.body) {
      if (ins.kind == InstrKind::Load) {
        std::string dst = key(*ins.write), src2 = key(ins.reads[0]);
        auto it = resident.find(dst);
        CHECK(!(it != resident.end() && it->second == src2));
      }
      if (ins.write) {
        // Any write invalidates the slabs it overlaps.
        std::vector<std::string> dead;
        for (const auto& [dst, r] : regions)
          if (regions_overlap(r, *ins.write)) dead.push_back(dst);
        for (const auto& dst : dead) {
          resident.erase(dst);
          regions.erase(dst);
        }
        if (ins.kind == InstrKind::Load) {
          resident[key(*ins.write)] = key(ins.reads[0]);
          regions[key(*ins.write)] = *ins.write;
        }
      }
    }
  }
}

TEST_CASE("emit: text and binary round-trip exactly") {
  ModelBuilder b("rt", 5);
  auto in = b.input("in", 12, 12, 16, 5);
  auto c = b.conv("c", in, 24, 3, 1, 1, true);
  b.pool("p", c, 2, 2);
  Lowered l = lower_model(b.build(), {group_of({1, 2})});
  Stream s = finalize_stream(l.body);

  auto bytes = encode_binary(s);
  Stream back = decode_binary(bytes);
  CHECK(back == s);

  std::string text = emit_text(s);
  Stream back2 = parse_text(text);
  CHECK(back2 == s);
}

TEST_CASE("emit: empty program frames to start+end records only") {
  Stream s = finalize_stream({});
  REQUIRE(s.size() == 2);
  CHECK(s[0].misc == MiscOp::Start);
  CHECK(s[1].misc == MiscOp::End);
  auto bytes = encode_binary(s);
  Stream back = decode_binary(bytes);
  CHECK(back == s);
}

TEST_CASE("emit: golden bytes for the minimal conv stream") {
  ModelBuilder b("min", 1);
  auto in = b.input("in", 1, 1, 24, 5);
  b.conv("c", in, 8, 1, 1, 0, false, false);
  Lowered l = lower_model(b.build(), {group_of({1})});
  Stream s = finalize_stream(l.body);
  auto bytes = encode_binary(s);
  // Generated once, audited record by record (start marker; input and weight
  // LOADs with DDR patterns at bases 192 and 0; one CONV with acc=0/rq=1;
  // SAVE; end marker waiting on the last instruction of each engine), then
  // frozen. docs/isa.md documents the field layout.
  std::string hex;
  for (uint8_t by : bytes) {
    static const char* digits = "0123456789abcdef";
    hex += digits[by >> 4];
    hex += digits[by & 0xf];
  }
  CHECK(hex ==
        "050800000000000000000139010000000100c000000001000000180000000100000018"
        "0000001800000001010000000001000000180000000100000018000000180000000001"
        "3902000000010000000000080000001800000001000000180000001800000001020000"
        "0000080000001800000001000000180000001800000000037a03000000020100000000"
        "0100000018000000010000001800000018000000020000000008000000180000000100"
        "0000180000001800000001030000000001000000080000000100000008000000080000"
        "0001000100180001000100080001010101010000000000000000000000010000080201"
        "00000002000000023d0400000001030000000001000000080000000100000008000000"
        "0800000001000001000001000000080000000100000008000000080000000103000000"
        "05140500000001000003020000000300000004000000");
}
