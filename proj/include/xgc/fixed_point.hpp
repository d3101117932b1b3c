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

#include "xgc/common.hpp"

namespace xgc {

// Scalar fixed-point semantics shared bit-for-bit by the graph interpreter
// and the instruction-stream executor. Accumulation is exact in 64 bits and
// therefore order-independent; the hardware's 32-bit accumulator width is
// modelled by saturating the final sum before requantization.
struct ExecDiag {
  int64_t acc_saturations = 0;
  int64_t value_saturations = 0;
};

// Aligns a bias value (at its own radix) to the accumulator radix.
inline int64_t bias_to_acc(int64_t bias, int bias_shift) {
  if (bias_shift >= 0) return bias << bias_shift;
  return round_shift(bias, -bias_shift);
}

// Final accumulator -> int8: clamp to 32 bits, shift to the output radix
// with round-half-away-from-zero, saturate, then the optional relu.
inline int8_t requantize(int64_t acc, int out_shift, bool relu, ExecDiag* diag) {
  bool sat = false;
  int64_t clamped = sat32(acc, &sat);
  if (sat && diag) diag->acc_saturations++;
  int64_t shifted = round_shift(clamped, out_shift);
  if ((shifted > 127 || shifted < -128) && diag) diag->value_saturations++;
  int8_t q = sat8(shifted);
  if (relu && q < 0) q = 0;
  return q;
}

// Average pooling: round(sum / div / 2^shift) in one exact division.
inline int8_t avg_pool_value(int64_t sum, int64_t div, int out_shift, ExecDiag* diag) {
  int64_t q;
  if (out_shift >= 0)
    q = round_div_away(sum, div << out_shift);
  else
    q = round_div_away(sum << (-out_shift), div);
  if ((q > 127 || q < -128) && diag) diag->value_saturations++;
  return sat8(q);
}

}  // namespace xgc
