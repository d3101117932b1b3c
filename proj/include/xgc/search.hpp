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

#include <functional>

#include "xgc/match.hpp"

namespace xgc {

struct Barrier {
  NodeId id = -1;
  enum class Reason { FanIn, FanOut, Sentinel } reason = Reason::Sentinel;
};

// Vertices with more than one producer or consumer, plus the graph's
// input/output sentinels (host-executed vertices count as sentinels: the
// device pipeline ends there). Ascending id order.
std::vector<Barrier> find_barriers(const XGraph& g);

// Cycles for executing `members` as one group; never called for infeasible
// candidates. Injectable so strategy search can be tested against synthetic
// costs.
using GroupCostFn =
    std::function<int64_t(const std::vector<NodeId>& members, bool horizontal)>;

// Node/edge exchange for one linear run of ops: cut vertices 0..n with a
// unit edge per op and one extra edge per feasible candidate group lying
// wholly inside the run.
struct CostGraph {
  struct Edge {
    int from = 0, to = 0;
    int64_t w = 0;
    int cand = -1;  // index into the candidate list, -1 for unit edges
  };
  int n = 0;  // cut vertices are 0..n
  std::vector<Edge> edges;
  std::vector<std::vector<int64_t>> cost;  // filled by floyd_shortest
};

CostGraph build_cost_graph(const std::vector<NodeId>& chain,
                           const std::vector<CandidateGroup>& candidates,
                           const GroupCostFn& cost_fn);

// All-pairs relaxation; returns the 0..n distance and the edge sequence of
// one optimal path (ties prefer fewer edges, then the earliest relaxation,
// which is deterministic).
struct PathResult {
  int64_t cost = 0;
  std::vector<CostGraph::Edge> path;
};
PathResult floyd_shortest(CostGraph& cg);

struct StrategyGroup {
  std::vector<NodeId> members;
  bool horizontal = false;
  std::optional<TileConfig> tile;
  int64_t cycles = 0;
};

struct Strategy {
  std::string mode;  // none | greedy | optimal
  std::vector<StrategyGroup> groups;  // execution order
  int64_t total_cycles = 0;

  std::string to_json(const XGraph& g) const;
};

// Every device vertex alone, in topological order.
Strategy baseline_strategy(const XGraph& g, const GroupCostFn& cost_fn);

// First-match template application: walk vertices in topological order and
// claim the first admissible candidate whose members are all unclaimed.
Strategy greedy_strategy(const XGraph& g, const std::vector<CandidateGroup>& candidates,
                         const GroupCostFn& cost_fn);

// Barrier-partitioned optimal search: per barrier-to-barrier region, Floyd
// over each branch with enumeration of which branch absorbs the destination
// op and which sibling sets fuse horizontally at the source.
Strategy select_strategy(const XGraph& g, const std::vector<CandidateGroup>& candidates,
                         const GroupCostFn& cost_fn);

}  // namespace xgc
