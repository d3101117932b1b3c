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

#include "xgc/graph.hpp"
#include "xgc/params.hpp"

namespace xgc {

// A model is a validated graph plus the float parameters its nodes reference.
struct Model {
  XGraph graph;
  ParamTable params;
};

// Imports the neutral JSON model format:
//   {"name": ..., "inputs": [{"id", "shape": [n,h,w,c], "radix"?}],
//    "nodes": [{"id", "kind", "attrs": {...}, "inputs": [ids],
//               "params": [blob names], "shape"?: [n,h,w,c]}]}
// Every declared shape is recomputed and verified; params must resolve in the
// table. Output sentinels are appended for terminal tensors.
Model import_model(const std::string& manifest_json, ParamTable params);

Model import_model_file(const std::string& manifest_path, const std::string& params_dir);

}  // namespace xgc
