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

#include <mutex>

#include "xgc/lower.hpp"
#include "xgc/sim.hpp"

namespace xgc {

// Total operations of a convolution (multiplies and accumulates counted
// separately): 2 * Kw * Kh * IC * OC * outH * outW.
int64_t conv_macs(const TensorShape& in_shape, const OpAttrs& attrs);

// Per-vertex operation count used as the CTC numerator.
int64_t op_compute_ops(const XGraph& g, NodeId id);

struct CtcParts {
  int64_t a_comp = 0;
  int64_t a_ac = 0;                 // bytes exchanged with DDR
  int64_t intermediate_bytes = 0;   // chain tensors kept on-chip by fusion
  int64_t shared_input_bytes = 0;   // sibling loads merged by horizontal fusion
  double ctc = 0.0;
};

// Computation-to-communication ratio over a grouping of the graph. Unfused
// accounting charges every operation its inputs, parameters and outputs;
// fused accounting removes each intra-group intermediate twice (the producer
// save and the consumer load). Buffers are assumed large enough that tensors
// move once; the simulator reports actual per-schedule traffic separately.
CtcParts compute_ctc(const Model& m, const std::vector<ExecGroup>& groups, bool fused);

// Lower + simulate with memoization, so path search can price thousands of
// candidate groups cheaply. Thread-safe (get-or-compute under a lock).
class GroupEvaluator {
 public:
  GroupEvaluator(const Model& m, const Quantization& q, const HwConfig& hw);

  int64_t cycles(const std::vector<NodeId>& members, bool horizontal);
  int64_t cycles(const ExecGroup& group);

  const DdrPlan& plan() const { return plan_; }
  const HwConfig& hw() const { return hw_; }

 private:
  const Model& model_;
  const Quantization& quant_;
  HwConfig hw_;
  DdrPlan plan_;
  EngineModel engines_;
  std::mutex mu_;
  std::map<std::string, int64_t> memo_;
};

}  // namespace xgc
