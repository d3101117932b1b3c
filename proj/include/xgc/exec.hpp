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

#include "xgc/ddr.hpp"
#include "xgc/fixed_point.hpp"
#include "xgc/hw.hpp"
#include "xgc/isa.hpp"
#include "xgc/quant.hpp"

namespace xgc {

// Initial DDR byte image for a compilation: quantized parameters at their
// plan addresses plus the given input tensors; everything else zero.
std::vector<uint8_t> build_ddr_image(const Model& m, const Quantization& q,
                                     const DdrPlan& plan,
                                     const std::map<NodeId, QTensor>& inputs);

// Interprets a dependency-sound stream against a modelled DDR array and the
// three on-chip buffers, computing CONV/POOL/MISC with the shared fixed-point
// policy. Instructions run in seq order (a valid topological order of the
// dependency graph; any other such order yields the same image). Throws
// OutOfBounds when a region escapes its space.
std::vector<uint8_t> run_stream(const Stream& stream, const HwConfig& hw,
                                std::vector<uint8_t> ddr, ExecDiag* diag = nullptr);

// Bytes of one tensor's region within a DDR image.
std::vector<uint8_t> extract_tensor(const std::vector<uint8_t>& ddr,
                                    const DdrPlan& plan, TensorId t);

}  // namespace xgc
