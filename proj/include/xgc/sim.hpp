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

#include <array>
#include <string>
#include <vector>

#include "xgc/hw.hpp"
#include "xgc/isa.hpp"

namespace xgc {

// The five concurrent engines; each is serial in issue order.
enum class Engine { Load = 0, Save = 1, Conv = 2, Pool = 3, Misc = 4 };
constexpr int kNumEngines = 5;
const char* engine_name(Engine e);
Engine engine_of(const Instruction& ins);

// Transaction-level throughput model: work units per cycle per engine plus a
// fixed per-instruction issue overhead.
struct EngineModel {
  int64_t load_bytes_per_cycle = 4;
  int64_t save_bytes_per_cycle = 4;
  int64_t conv_macs_per_cycle = 1;   // inc_p * oc_p * h_p
  int64_t pool_elems_per_cycle = 1;  // h_p * oc_p window elements
  int64_t misc_elems_per_cycle = 1;  // oc_p * h_p operand elements
  int64_t issue_overhead = 32;

  static EngineModel from_hw(const HwConfig& hw);

  // Work units an instruction carries (bytes, MACs, window elements...).
  int64_t workload(const Instruction& ins) const;
  // Occupancy in cycles, including issue overhead; start/end markers are free.
  int64_t duration(const Instruction& ins) const;
  // Operation count an instruction contributes to the CTC numerator
  // (a multiply and an add count separately for convolutions).
  static int64_t compute_ops(const Instruction& ins);
};

struct CostReport {
  int64_t total_cycles = 0;
  std::array<int64_t, kNumEngines> engine_busy = {};
  int64_t bytes_loaded = 0;
  int64_t bytes_saved = 0;
  int64_t a_comp = 0;
  double ctc = 0.0;  // a_comp over actual bytes moved by this stream

  std::string to_json() const;
};

struct Span {
  uint32_t seq = 0;
  Engine engine = Engine::Load;
  int64_t start = 0;
  int64_t end = 0;
};

struct SimResult {
  CostReport report;
  std::vector<Span> spans;
};

// Event-driven schedule: an instruction starts when its engine is free and
// all dependencies have completed. `no_overlap` serializes everything for
// per-tile time decomposition. Deterministic; DeadlockError on a dependency
// that does not precede its instruction.
SimResult simulate(const Stream& stream, const EngineModel& em, bool no_overlap = false);

// Per-engine text Gantt chart of a simulation.
std::string render_trace(const SimResult& sim);

}  // namespace xgc
