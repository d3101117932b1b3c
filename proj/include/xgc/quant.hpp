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

#include <cmath>
#include <map>
#include <vector>

#include "xgc/import.hpp"

namespace xgc {

// Fixed-point behaviour shared by every executor: 32-bit accumulators that
// saturate (never wrap), round-half-away-from-zero on radix shifts, int8
// saturation on writeback. One policy, so bit-exactness is meaningful.
struct FixedPointPolicy {
  int data_bits = 8;
  int acc_bits = 32;
};

// 8-bit signed tensor with a per-tensor binary point, NHWC order.
struct QTensor {
  TensorShape shape;
  int radix = 0;
  std::vector<int8_t> data;
};

// A quantized parameter blob (same dims as its float source).
struct QParam {
  std::vector<int64_t> dims;
  int radix = 0;
  std::vector<int8_t> data;
};

// std::llround rounds halfway cases away from zero, matching the policy.
inline int8_t quantize_value(float x, int radix) {
  return sat8(std::llround(double(x) * (1 << radix)));
}

// Binary point minimizing the sum of squared quantization error over the
// eight candidate positions; ties resolve to the largest radix.
int choose_radix(const std::vector<float>& data);

// Quantizes with the SSE-minimizing radix.
QTensor quantize(const FloatTensor& t, const TensorShape& shape,
                 const FixedPointPolicy& policy = {});
QParam quantize_param(const FloatTensor& t, const FixedPointPolicy& policy = {});

// Per-tensor radix assignment for a normalized model. Inputs and convolution
// outputs use their declared out_radix (default 4); channel-preserving ops
// follow their input; eltwise-add takes the widest input radix unless
// overridden; pure data movers (upsample, reorg, concat) must preserve the
// radix exactly.
struct RadixMap {
  std::map<TensorId, int> tensor;
  std::map<std::string, int> param;
};

struct Quantization {
  RadixMap radix;
  std::map<std::string, QParam> params;
};

Quantization quantize_model(const Model& m, const FixedPointPolicy& policy = {});

}  // namespace xgc
