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
#include "xgc/hw.hpp"

#include <fstream>

#include <json.hpp>

namespace xgc {

using nlohmann::json;

HwConfig make_hw(const std::string& name, int64_t inc_p, int64_t oc_p, int64_t h_p,
                 int64_t total_onchip_bytes, int64_t freq_mhz) {
  HwConfig hw;
  hw.name = name;
  hw.inc_p = inc_p;
  hw.oc_p = oc_p;
  hw.h_p = h_p;
  hw.b_in = total_onchip_bytes * 2 / 5;
  hw.b_weights = total_onchip_bytes * 2 / 5;
  hw.b_out = total_onchip_bytes / 5;
  hw.freq_mhz = freq_mhz;
  hw.validate();
  return hw;
}

HwConfig hw_preset(const std::string& name) {
  if (name == "zu2") return make_hw("zu2", 24, 12, 4, 692060, 330);  // 0.66 MB
  if (name == "zu9") return make_hw("zu9", 32, 16, 8, 4194304, 330);  // 4 MB
  fail(ErrCode::Invalid, "unknown hardware preset '" + name + "'");
}

HwConfig load_hw(const std::string& name_or_path) {
  if (name_or_path.size() < 5 ||
      name_or_path.substr(name_or_path.size() - 5) != ".json")
    return hw_preset(name_or_path);

  std::ifstream in(name_or_path);
  require(in.good(), ErrCode::Io, "cannot open " + name_or_path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    fail(ErrCode::Schema, std::string("bad hardware config: ") + e.what());
  }
  HwConfig hw;
  hw.name = j.value("name", name_or_path);
  hw.inc_p = j.value("inc_p", hw.inc_p);
  hw.oc_p = j.value("oc_p", hw.oc_p);
  hw.h_p = j.value("h_p", hw.h_p);
  if (j.contains("total_onchip_bytes")) {
    HwConfig split = make_hw(hw.name, hw.inc_p, hw.oc_p, hw.h_p,
                             j.at("total_onchip_bytes").get<int64_t>(),
                             j.value("freq_mhz", hw.freq_mhz));
    hw.b_in = split.b_in;
    hw.b_weights = split.b_weights;
    hw.b_out = split.b_out;
  }
  hw.b_in = j.value("b_in", hw.b_in);
  hw.b_weights = j.value("b_weights", hw.b_weights);
  hw.b_out = j.value("b_out", hw.b_out);
  hw.freq_mhz = j.value("freq_mhz", hw.freq_mhz);
  hw.ddr_bandwidth_bytes_per_cycle =
      j.value("ddr_bandwidth_bytes_per_cycle", hw.ddr_bandwidth_bytes_per_cycle);
  hw.issue_overhead_cycles = j.value("issue_overhead_cycles", hw.issue_overhead_cycles);
  hw.validate();
  return hw;
}

}  // namespace xgc
