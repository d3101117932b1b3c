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
#include "xgc/sim.hpp"

#include <algorithm>
#include <map>
#include <sstream>

#include <json.hpp>

namespace xgc {

const char* engine_name(Engine e) {
  switch (e) {
    case Engine::Load: return "LOAD";
    case Engine::Save: return "SAVE";
    case Engine::Conv: return "CONV";
    case Engine::Pool: return "POOL";
    case Engine::Misc: return "MISC";
  }
  return "?";
}

Engine engine_of(const Instruction& ins) {
  switch (ins.kind) {
    case InstrKind::Load: return Engine::Load;
    case InstrKind::Save: return Engine::Save;
    case InstrKind::Conv: return Engine::Conv;
    case InstrKind::Pool: return Engine::Pool;
    case InstrKind::Misc: return Engine::Misc;
  }
  return Engine::Misc;
}

EngineModel EngineModel::from_hw(const HwConfig& hw) {
  EngineModel em;
  em.load_bytes_per_cycle = hw.ddr_bandwidth_bytes_per_cycle;
  em.save_bytes_per_cycle = hw.ddr_bandwidth_bytes_per_cycle;
  em.conv_macs_per_cycle = hw.inc_p * hw.oc_p * hw.h_p;
  em.pool_elems_per_cycle = hw.h_p * hw.oc_p;
  em.misc_elems_per_cycle = hw.oc_p * hw.h_p;
  em.issue_overhead = hw.issue_overhead_cycles;
  return em;
}

namespace {

int64_t conv_instr_macs(const ConvArgs& a) {
  int64_t taps = int64_t(a.k_w) * a.k_h;
  int64_t out = int64_t(a.out_w) * a.out_h * a.out_c;
  switch (a.mode) {
    case 1:  // depthwise: one input channel per kernel
      return taps * out;
    case 2:  // transposed: each output sees roughly taps/stride^2 inputs
      return std::max<int64_t>(1, taps * a.in_c * out / (int64_t(a.s_w) * a.s_h));
    default:
      return taps * int64_t(a.in_c) * out;
  }
}

}  // namespace

int64_t EngineModel::workload(const Instruction& ins) const {
  switch (ins.kind) {
    case InstrKind::Load:
    case InstrKind::Save:
      return ins.kind == InstrKind::Load ? ins.reads.at(0).pat.bytes()
                                         : ins.write->pat.bytes();
    case InstrKind::Conv:
      return conv_instr_macs(std::get<ConvArgs>(ins.args));
    case InstrKind::Pool: {
      const auto& a = std::get<PoolArgs>(ins.args);
      return int64_t(a.out_w) * a.out_h * a.channels * a.k_w * a.k_h;
    }
    case InstrKind::Misc: {
      if (ins.misc == MiscOp::Eltwise) {
        const auto& a = std::get<EltwiseArgs>(ins.args);
        return int64_t(a.elems) * a.arity;
      }
      if (ins.misc == MiscOp::Reorg) {
        const auto& a = std::get<ReorgArgs>(ins.args);
        return int64_t(a.in_w) * a.in_h * a.in_c;
      }
      return 0;  // start / end markers
    }
  }
  return 0;
}

int64_t EngineModel::duration(const Instruction& ins) const {
  if (ins.kind == InstrKind::Misc &&
      (ins.misc == MiscOp::Start || ins.misc == MiscOp::End))
    return 0;
  int64_t rate = 1;
  switch (engine_of(ins)) {
    case Engine::Load: rate = load_bytes_per_cycle; break;
    case Engine::Save: rate = save_bytes_per_cycle; break;
    case Engine::Conv: rate = conv_macs_per_cycle; break;
    case Engine::Pool: rate = pool_elems_per_cycle; break;
    case Engine::Misc: rate = misc_elems_per_cycle; break;
  }
  return ceil_div(workload(ins), rate) + issue_overhead;
}

int64_t EngineModel::compute_ops(const Instruction& ins) {
  switch (ins.kind) {
    case InstrKind::Conv:
      return 2 * conv_instr_macs(std::get<ConvArgs>(ins.args));
    case InstrKind::Pool: {
      const auto& a = std::get<PoolArgs>(ins.args);
      return int64_t(a.out_w) * a.out_h * a.channels * a.k_w * a.k_h;
    }
    case InstrKind::Misc: {
      if (ins.misc == MiscOp::Eltwise) {
        const auto& a = std::get<EltwiseArgs>(ins.args);
        return a.arity > 1 ? int64_t(a.elems) * (a.arity - 1) : int64_t(a.elems);
      }
      return 0;
    }
    default:
      return 0;
  }
}

SimResult simulate(const Stream& stream, const EngineModel& em, bool no_overlap) {
  // Process in seq order so list permutations cannot change the schedule.
  std::vector<const Instruction*> order;
  order.reserve(stream.size());
  for (const Instruction& ins : stream) order.push_back(&ins);
  std::sort(order.begin(), order.end(),
            [](const Instruction* a, const Instruction* b) { return a->seq < b->seq; });

  std::map<uint32_t, int64_t> finish;
  std::array<int64_t, kNumEngines> engine_free = {};
  int64_t prev_finish = 0;

  SimResult sim;
  for (const Instruction* ins : order) {
    for (uint32_t d : ins->deps)
      require(d < ins->seq && finish.count(d), ErrCode::Deadlock,
              "instruction " + std::to_string(ins->seq) +
                  " depends on a non-preceding instruction " + std::to_string(d));
    Engine eng = engine_of(*ins);
    int64_t start = no_overlap ? prev_finish : engine_free[static_cast<int>(eng)];
    for (uint32_t d : ins->deps) start = std::max(start, finish.at(d));
    int64_t dur = em.duration(*ins);
    int64_t end = start + dur;
    finish[ins->seq] = end;
    engine_free[static_cast<int>(eng)] = end;
    prev_finish = std::max(prev_finish, end);

    sim.report.engine_busy[static_cast<int>(eng)] += dur;
    sim.report.total_cycles = std::max(sim.report.total_cycles, end);
    sim.report.a_comp += EngineModel::compute_ops(*ins);
    if (ins->kind == InstrKind::Load) sim.report.bytes_loaded += em.workload(*ins);
    if (ins->kind == InstrKind::Save) sim.report.bytes_saved += em.workload(*ins);
    if (dur > 0) sim.spans.push_back({ins->seq, eng, start, end});
  }
  int64_t moved = sim.report.bytes_loaded + sim.report.bytes_saved;
  sim.report.ctc = moved > 0 ? double(sim.report.a_comp) / double(moved) : 0.0;
  return sim;
}

std::string CostReport::to_json() const {
  nlohmann::json j;
  j["total_cycles"] = total_cycles;
  for (int e = 0; e < kNumEngines; ++e)
    j["engine_busy"][engine_name(static_cast<Engine>(e))] = engine_busy[e];
  j["bytes_loaded"] = bytes_loaded;
  j["bytes_saved"] = bytes_saved;
  j["a_comp"] = a_comp;
  j["ctc"] = ctc;
  return j.dump(2);
}

std::string render_trace(const SimResult& sim) {
  std::ostringstream os;
  int64_t total = std::max<int64_t>(1, sim.report.total_cycles);
  constexpr int kCols = 96;
  os << "# timeline, " << total << " cycles, " << kCols << " columns\n";
  for (int e = 0; e < kNumEngines; ++e) {
    std::string bar(kCols, '.');
    for (const Span& s : sim.spans) {
      if (static_cast<int>(s.engine) != e) continue;
      int lo = static_cast<int>(s.start * kCols / total);
      int hi = static_cast<int>((s.end * kCols + total - 1) / total);
      for (int c = lo; c < hi && c < kCols; ++c) bar[c] = '#';
    }
    os << engine_name(static_cast<Engine>(e)) << " |" << bar << "| busy "
       << sim.report.engine_busy[e] << "\n";
  }
  os << "#\n# seq engine start end\n";
  for (const Span& s : sim.spans)
    os << s.seq << " " << engine_name(s.engine) << " " << s.start << " " << s.end
       << "\n";
  return os.str();
}

}  // namespace xgc
