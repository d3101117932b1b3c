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

#include "xgc/cost.hpp"
#include "xgc/exec.hpp"
#include "xgc/interp.hpp"
#include "xgc/normalize.hpp"
#include "xgc/search.hpp"

namespace xgc {

struct CompileOptions {
  std::string model_path;
  std::string params_path;
  std::string hw = "zu2";               // preset name or JSON file
  std::string strategy_mode = "optimal";  // none | greedy | optimal
  std::string out_dir;
  std::string templates_path;  // optional catalog override
  bool emit_asm = true;
  bool emit_bin = true;
  bool emit_strategy = true;
  bool emit_trace = false;
};

struct CompileResult {
  Model model;  // normalized
  Quantization quant;
  HwConfig hw;
  std::vector<CandidateGroup> candidates;
  Strategy strategy;
  std::vector<NodeId> exec_order;  // all vertices, strategy-ordered
  DdrPlan plan;
  Stream program;
  CostReport predicted;
  std::map<std::string, double> phase_ms;
};

// The full pipeline on an in-memory model: normalize, quantize, match
// (unless mode is "none"), price candidates, choose a strategy, plan DDR,
// lower and frame the program.
CompileResult compile(Model model, const HwConfig& hw, const std::string& mode,
                      const std::vector<FusionTemplate>& templates);

// File-based front door used by the CLI.
CompileResult compile_model(const CompileOptions& opts);

// Writes the requested artifacts (asm, bin, strategy/plan JSON, summary,
// trace) into opts.out_dir.
void write_artifacts(const CompileResult& result, const CompileOptions& opts);

// Strategy-consistent total order over all vertices (inputs first, then
// group members in execution order, then sentinels and host vertices).
std::vector<NodeId> strategy_exec_order(const XGraph& g, const Strategy& s);

// The same order at stage granularity: one stage per fused group, whose
// members execute interleaved and count as simultaneous for DDR liveness.
std::vector<std::vector<NodeId>> strategy_exec_stages(const XGraph& g,
                                                      const Strategy& s);

// ExecGroup view of a strategy for the lowering pipeline.
std::vector<ExecGroup> strategy_exec_groups(const Strategy& s);

}  // namespace xgc
