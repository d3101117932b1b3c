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

#include "xgc/fixed_point.hpp"
#include "xgc/quant.hpp"

namespace xgc {

// Direct fixed-point execution of a normalized graph: vertices run in
// topological order, strided-save annotations write into their destination
// tensors, host-executed vertices and sentinels are skipped. Returns every
// materialized tensor (node outputs and virtual destinations) keyed by id.
std::map<TensorId, QTensor> run_graph(const Model& m, const Quantization& q,
                                      const std::map<NodeId, QTensor>& inputs,
                                      ExecDiag* diag = nullptr);

// Tensors the device hands back: inputs of Output sentinels and of
// host-executed vertices, deduplicated, ascending.
std::vector<TensorId> device_output_tensors(const XGraph& g);

}  // namespace xgc
