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

#include <string>

#include "xgc/common.hpp"

namespace xgc {

// Feature maps are laid out NHWC (channel fastest); weights OWHC.
// Elements are one byte wide (8-bit fixed point) throughout the compiler.
struct TensorShape {
  int64_t n = 1;
  int64_t h = 1;
  int64_t w = 1;
  int64_t c = 1;

  int64_t elems() const { return n * h * w * c; }
  int64_t bytes() const { return elems(); }

  bool operator==(const TensorShape&) const = default;

  std::string str() const {
    return std::to_string(n) + "x" + std::to_string(h) + "x" + std::to_string(w) +
           "x" + std::to_string(c);
  }

  void validate() const {
    require(n >= 1 && h >= 1 && w >= 1 && c >= 1, ErrCode::Invalid,
            "tensor extents must be >= 1, got " + str());
    require(n == 1, ErrCode::Invalid, "batch > 1 is not supported");
  }
};

// Byte offset of element (y, x, ch) in an NHWC tensor.
inline int64_t nhwc_offset(const TensorShape& s, int64_t y, int64_t x, int64_t ch) {
  return (y * s.w + x) * s.c + ch;
}

}  // namespace xgc
