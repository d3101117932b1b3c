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

#include "xgc/import.hpp"

namespace xgc {

struct DdrRegion {
  int64_t base = 0;
  int64_t length = 0;
  bool persistent = false;
};

// DDR layout for one compilation: parameter regions are permanent, feature
// maps are freed after their last consumer and their space reused.
struct DdrPlan {
  std::map<std::string, DdrRegion> params;   // by blob name
  std::map<TensorId, DdrRegion> tensors;     // by tensor id
  int64_t total_bytes = 0;

  const DdrRegion& param(const std::string& name) const;
  const DdrRegion& tensor(TensorId t) const;
  std::string to_json(const XGraph& g) const;
};

// First-fit linear allocation over execution stages: every parameter is
// placed once and protected; a feature map's region is released after the
// last stage reading it. A stage is an atomic execution unit — a fused
// group's members interleave per tile, so everything one stage touches is
// simultaneously live. Tensors feeding Output sentinels or host-executed
// nodes stay live to the end.
DdrPlan allocate_ddr_staged(const Model& m,
                            const std::vector<std::vector<NodeId>>& stages);

// One stage per vertex: correct for serial, unfused execution orders.
DdrPlan allocate_ddr(const Model& m, const std::vector<NodeId>& order);

// Independent safety check: recomputes live ranges over the stages and
// reports any pair of simultaneously-live regions that intersect, and any
// parameter region ever overlapped by a tensor. Empty result means safe.
std::vector<std::string> check_plan_safety(const Model& m,
                                           const std::vector<std::vector<NodeId>>& stages,
                                           const DdrPlan& plan);
std::vector<std::string> check_plan_safety(const Model& m,
                                           const std::vector<NodeId>& order,
                                           const DdrPlan& plan);

}  // namespace xgc
