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

// Accelerator description: compute parallelism, on-chip buffer capacities and
// the DDR link. Elements are one byte, so capacities count elements too.
struct HwConfig {
  std::string name = "custom";
  int64_t inc_p = 24;  // input-channel parallelism
  int64_t oc_p = 12;   // output-channel parallelism
  int64_t h_p = 4;     // height parallelism
  int64_t b_in = 0;    // input-buffer bytes
  int64_t b_weights = 0;
  int64_t b_out = 0;
  int64_t freq_mhz = 330;
  // No vendor figure exists for the DDR link; 4 bytes/cycle is a placeholder
  // users should calibrate. Only absolute cycle counts depend on it.
  int64_t ddr_bandwidth_bytes_per_cycle = 4;
  int64_t issue_overhead_cycles = 32;  // per-instruction decode/dispatch cost

  void validate() const {
    require(inc_p > 0 && oc_p > 0 && h_p > 0, ErrCode::Invalid, "parallelism must be > 0");
    require(b_in > 0 && b_weights > 0 && b_out > 0, ErrCode::Invalid,
            "buffer capacities must be > 0");
    require(ddr_bandwidth_bytes_per_cycle > 0, ErrCode::Invalid, "bandwidth must be > 0");
    require(issue_overhead_cycles >= 0, ErrCode::Invalid, "issue overhead must be >= 0");
  }
};

// Splits a device's total on-chip memory 40/40/20 across input, weight and
// output buffers. The ratio is a configuration default, not a hardware fact.
HwConfig make_hw(const std::string& name, int64_t inc_p, int64_t oc_p, int64_t h_p,
                 int64_t total_onchip_bytes, int64_t freq_mhz);

// Named presets: "zu2" (24/12/4, 0.66 MB, 330 MHz) and "zu9" (32/16/8, 4 MB,
// 330 MHz). Unknown names raise InvalidArgument.
HwConfig hw_preset(const std::string& name);

// Loads a preset by name, or a JSON config file if `name_or_path` ends in
// ".json" ({"name","inc_p","oc_p","h_p","b_in","b_weights","b_out",
// "freq_mhz","ddr_bandwidth_bytes_per_cycle","issue_overhead_cycles"}).
HwConfig load_hw(const std::string& name_or_path);

}  // namespace xgc
