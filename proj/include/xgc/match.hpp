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

#include "xgc/templates.hpp"
#include "xgc/tiling.hpp"

namespace xgc {

// An injective, predicate-satisfying map of a template's query vertices into
// graph vertices.
struct Embedding {
  std::string template_id;
  TemplateShape shape = TemplateShape::Chain;
  std::vector<NodeId> mapping;  // query vertex index -> node id

  bool operator==(const Embedding&) const = default;
};

// Graph vertices satisfying query vertex `v`'s predicate.
std::vector<NodeId> filter_candidates(const FusionTemplate& q, const XGraph& g, int v);

// The query vertex with the fewest candidates (ties to declaration order).
int define_start_point(const FusionTemplate& q, const XGraph& g);

// All distinct embeddings of `q` in `g`, in lexicographic mapping order.
// Horizontal templates match sets of vertices sharing one input tensor and
// are deduplicated to ascending vertex-id order.
std::vector<Embedding> subgraph_search(const FusionTemplate& q, const XGraph& g);

// Every embedding of every kernel-class template.
std::vector<Embedding> match_all(const std::vector<FusionTemplate>& templates,
                                 const XGraph& g);

// Independent validity check used by tests.
bool embedding_sound(const FusionTemplate& q, const XGraph& g, const Embedding& e);

// A matched group annotated with its tiling feasibility.
struct CandidateGroup {
  Embedding embedding;
  std::vector<NodeId> members;  // dataflow order (chains) / ascending (horizontal)
  bool horizontal = false;
  bool fits_onchip = false;
  std::optional<TileConfig> tile;
};

CandidateGroup check_onchip_fit(const XGraph& g, const Embedding& e, const HwConfig& hw);

// Matches, fit-checks, and deduplicates by member set (templates overlap, and
// one group is one group regardless of which template found it).
std::vector<CandidateGroup> enumerate_groups(const std::vector<FusionTemplate>& templates,
                                             const XGraph& g, const HwConfig& hw);

}  // namespace xgc
