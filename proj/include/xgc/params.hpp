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

#include <map>
#include <string>
#include <vector>

#include "xgc/common.hpp"

namespace xgc {

// A parameter blob: 32-bit floats, row-major over `dims`. Weights use OWHC
// order (kernels outermost, channels innermost), biases and per-channel
// factors are 1-d.
struct FloatTensor {
  std::vector<int64_t> dims;
  std::vector<float> data;

  int64_t elems() const {
    int64_t n = 1;
    for (int64_t d : dims) n *= d;
    return n;
  }
};

using ParamTable = std::map<std::string, FloatTensor>;

// Reads a blob-store directory: an index.json mapping blob name to
// {"file": relative path, "shape": [dims]}, plus one little-endian f32 file
// per blob.
ParamTable load_param_store(const std::string& dir);

// Writes a ParamTable in the same on-disk format (used by tests and tools).
void write_param_store(const std::string& dir, const ParamTable& params);

}  // namespace xgc
