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

#include <optional>
#include <string>
#include <vector>

#include "xgc/graph.hpp"

namespace xgc {

enum class FusionClass { Intrinsic, Pointwise, Kernel };
enum class TemplateShape { Chain, Horizontal, ChainWithEltwise };

// Predicate a query vertex imposes on a graph vertex: an op-kind set plus
// optional attribute constraints.
struct VertexPred {
  std::vector<OpKind> kinds;
  std::optional<int64_t> kernel_h, kernel_w;
  std::optional<int64_t> stride_h, stride_w;

  bool matches(const XNode& n) const;
};

struct QueryEdge {
  int from = 0;  // query vertex indices; direction follows dataflow
  int to = 0;
};

// A small pattern graph whose embeddings in an XGraph denote fusible groups.
// Horizontal templates carry no edges; their side condition is that all
// matched vertices read one common input tensor.
struct FusionTemplate {
  std::string id;
  FusionClass cls = FusionClass::Kernel;
  TemplateShape shape = TemplateShape::Chain;
  std::vector<VertexPred> vertices;
  std::vector<QueryEdge> edges;

  void validate() const;
};

// The shipped kernel-class catalog: conv+pool, conv+conv, conv+eltwise-add,
// injective chains of length 2 and 3, and 2..4 convolutions sharing an input.
// Intrinsic and point-wise fusion are consumed by graph normalization, so the
// matcher only ever sees kernel-class templates.
std::vector<FusionTemplate> builtin_templates();

// Loads a template catalog from JSON:
//   [{"id", "class": "kernel", "shape": "chain"|"horizontal"|"chain_eltwise",
//     "vertices": [{"kinds": ["conv",...], "kernel_h"?, "kernel_w"?,
//                   "stride_h"?, "stride_w"?}],
//     "edges": [[from,to], ...]}]
std::vector<FusionTemplate> load_templates(const std::string& path);

}  // namespace xgc
