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
#include "xgc/match.hpp"

#include <algorithm>
#include <map>
#include <set>

namespace xgc {

std::vector<NodeId> filter_candidates(const FusionTemplate& q, const XGraph& g, int v) {
  std::vector<NodeId> out;
  for (const auto& [id, n] : g.nodes)
    if (q.vertices.at(v).matches(n)) out.push_back(id);
  return out;
}

int define_start_point(const FusionTemplate& q, const XGraph& g) {
  int best = 0;
  size_t best_count = filter_candidates(q, g, 0).size();
  for (int v = 1; v < static_cast<int>(q.vertices.size()); ++v) {
    size_t count = filter_candidates(q, g, v).size();
    if (count < best_count) {
      best = v;
      best_count = count;
    }
  }
  return best;
}

namespace {

// Breadth-first visit order of query vertices starting from `start`,
// following template edges in either direction in declaration order.
std::vector<int> bfs_query_order(const FusionTemplate& q, int start) {
  std::vector<int> order = {start};
  std::set<int> seen = {start};
  for (size_t at = 0; at < order.size(); ++at) {
    int v = order[at];
    for (const auto& e : q.edges) {
      int next = -1;
      if (e.from == v) next = e.to;
      if (e.to == v) next = e.from;
      if (next >= 0 && !seen.count(next)) {
        seen.insert(next);
        order.push_back(next);
      }
    }
  }
  return order;
}

struct ChainSearch {
  const FusionTemplate& q;
  const XGraph& g;
  std::vector<std::vector<NodeId>> candidates;  // per query vertex
  std::vector<int> order;                       // BFS matching order
  std::vector<NodeId> mapping;                  // -1 when unmatched
  std::vector<Embedding>& out;

  // Candidates for query vertex v that connect correctly to every already
  // matched query neighbour.
  std::vector<NodeId> refine(int v) const {
    std::vector<NodeId> refined;
    for (NodeId u : candidates[v]) {
      if (std::find(mapping.begin(), mapping.end(), u) != mapping.end()) continue;
      bool ok = true;
      for (const auto& e : q.edges) {
        if (e.from == v && mapping[e.to] >= 0 && !g.direct_edge(u, mapping[e.to]))
          ok = false;
        if (e.to == v && mapping[e.from] >= 0 && !g.direct_edge(mapping[e.from], u))
          ok = false;
        if (!ok) break;
      }
      if (ok) refined.push_back(u);
    }
    return refined;
  }

  void search(size_t depth) {
    if (depth == order.size()) {
      Embedding e;
      e.template_id = q.id;
      e.shape = q.shape;
      e.mapping = mapping;
      out.push_back(std::move(e));
      return;
    }
    int v = order[depth];
    for (NodeId u : refine(v)) {
      mapping[v] = u;
      search(depth + 1);
      mapping[v] = -1;
    }
  }
};

// Horizontal matching: vertex tuples that all read one common tensor.
void search_horizontal(const FusionTemplate& q, const XGraph& g,
                       std::vector<Embedding>& out) {
  std::set<std::vector<NodeId>> seen;
  std::vector<TensorId> tensors;
  for (const auto& [id, n] : g.nodes) tensors.push_back(id);
  for (const auto& [id, s] : g.virtual_tensors) tensors.push_back(id);
  std::sort(tensors.begin(), tensors.end());

  size_t k = q.vertices.size();
  for (TensorId t : tensors) {
    auto readers = g.readers_of_tensor(t);
    if (readers.size() < k) continue;
    std::vector<NodeId> pick(k, -1);
    auto rec = [&](auto&& self, size_t depth) -> void {
      if (depth == k) {
        // Sibling order is immaterial: one member set is one group. Keep the
        // lexicographically smallest valid assignment (ascending ids when the
        // slot predicates coincide).
        std::vector<NodeId> canon = pick;
        std::sort(canon.begin(), canon.end());
        if (!seen.insert(canon).second) return;
        Embedding e;
        e.template_id = q.id;
        e.shape = q.shape;
        e.mapping = pick;
        out.push_back(std::move(e));
        return;
      }
      for (NodeId u : readers) {
        if (std::find(pick.begin(), pick.begin() + depth, u) != pick.begin() + depth)
          continue;
        if (!q.vertices[depth].matches(g.node(u))) continue;
        pick[depth] = u;
        self(self, depth + 1);
      }
    };
    rec(rec, 0);
  }
}

}  // namespace

std::vector<Embedding> subgraph_search(const FusionTemplate& q, const XGraph& g) {
  std::vector<Embedding> out;
  if (q.shape == TemplateShape::Horizontal) {
    search_horizontal(q, g, out);
  } else {
    std::vector<std::vector<NodeId>> cands;
    for (int v = 0; v < static_cast<int>(q.vertices.size()); ++v) {
      cands.push_back(filter_candidates(q, g, v));
      if (cands.back().empty()) return {};  // template cannot occur
    }
    int start = define_start_point(q, g);
    ChainSearch s{q, g, std::move(cands), bfs_query_order(q, start),
                  std::vector<NodeId>(q.vertices.size(), -1), out};
    s.search(0);
  }
  std::sort(out.begin(), out.end(),
            [](const Embedding& a, const Embedding& b) { return a.mapping < b.mapping; });
  return out;
}

std::vector<Embedding> match_all(const std::vector<FusionTemplate>& templates,
                                 const XGraph& g) {
  std::vector<Embedding> out;
  for (const auto& q : templates) {
    if (q.cls != FusionClass::Kernel) continue;
    auto found = subgraph_search(q, g);
    out.insert(out.end(), found.begin(), found.end());
  }
  return out;
}

bool embedding_sound(const FusionTemplate& q, const XGraph& g, const Embedding& e) {
  if (e.mapping.size() != q.vertices.size()) return false;
  std::set<NodeId> distinct(e.mapping.begin(), e.mapping.end());
  if (distinct.size() != e.mapping.size()) return false;
  for (size_t v = 0; v < q.vertices.size(); ++v) {
    if (!g.has_node(e.mapping[v])) return false;
    if (!q.vertices[v].matches(g.node(e.mapping[v]))) return false;
  }
  if (q.shape == TemplateShape::Horizontal) {
    // One tensor read by every member.
    std::set<TensorId> common(g.node(e.mapping[0]).inputs.begin(),
                              g.node(e.mapping[0]).inputs.end());
    for (size_t v = 1; v < e.mapping.size(); ++v) {
      std::set<TensorId> next;
      for (TensorId t : g.node(e.mapping[v]).inputs)
        if (common.count(t)) next.insert(t);
      common = std::move(next);
    }
    return !common.empty();
  }
  for (const auto& qe : q.edges)
    if (!g.direct_edge(e.mapping[qe.from], e.mapping[qe.to])) return false;
  return true;
}

CandidateGroup check_onchip_fit(const XGraph& g, const Embedding& e, const HwConfig& hw) {
  CandidateGroup group;
  group.embedding = e;
  group.horizontal = (e.shape == TemplateShape::Horizontal);
  if (group.horizontal) {
    group.members = e.mapping;
    std::sort(group.members.begin(), group.members.end());
  } else {
    // Dataflow order: repeatedly pick the member with no producer inside the
    // group. Template chains are short, so the quadratic walk is fine.
    std::vector<NodeId> rest = e.mapping;
    while (!rest.empty()) {
      for (size_t i = 0; i < rest.size(); ++i) {
        bool has_pred = false;
        for (NodeId other : rest)
          if (other != rest[i] && g.direct_edge(other, rest[i])) has_pred = true;
        if (!has_pred) {
          group.members.push_back(rest[i]);
          rest.erase(rest.begin() + i);
          break;
        }
      }
    }
  }
  auto tg = make_tile_group(g, group.members, group.horizontal);
  group.tile = solve_tile_config(tg, hw);
  group.fits_onchip = group.tile.has_value();
  return group;
}

std::vector<CandidateGroup> enumerate_groups(const std::vector<FusionTemplate>& templates,
                                             const XGraph& g, const HwConfig& hw) {
  std::vector<CandidateGroup> out;
  std::set<std::vector<NodeId>> seen;
  for (const Embedding& e : match_all(templates, g)) {
    CandidateGroup group = check_onchip_fit(g, e, hw);
    std::vector<NodeId> key = group.members;
    std::sort(key.begin(), key.end());
    if (!seen.insert(key).second) continue;
    out.push_back(std::move(group));
  }
  return out;
}

}  // namespace xgc
