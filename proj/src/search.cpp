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
#include "xgc/search.hpp"

#include <algorithm>
#include <map>
#include <set>

#include <json.hpp>

namespace xgc {

namespace {

constexpr int64_t kInf = INT64_MAX / 4;

bool strategy_covered(const XNode& n) {
  return !n.host_executed && (is_device_compute(n.kind) || n.kind == OpKind::Concat);
}

bool is_barrier(const XGraph& g, const XNode& n) {
  return n.kind == OpKind::Input || n.kind == OpKind::Output || n.host_executed ||
         g.in_degree(n.id) > 1 || g.out_degree(n.id) > 1;
}

}  // namespace

std::vector<Barrier> find_barriers(const XGraph& g) {
  std::vector<Barrier> out;
  for (const auto& [id, n] : g.nodes) {
    if (!is_barrier(g, n)) continue;
    Barrier b;
    b.id = id;
    if (g.in_degree(id) > 1)
      b.reason = Barrier::Reason::FanIn;
    else if (g.out_degree(id) > 1)
      b.reason = Barrier::Reason::FanOut;
    else
      b.reason = Barrier::Reason::Sentinel;
    out.push_back(b);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Region decomposition.

namespace {

struct Segment {
  NodeId dest = -1;
  bool dest_covered = false;  // destination op is executed (and costed) here
  std::vector<std::vector<NodeId>> branches;  // interior ops, dataflow order
};

std::vector<Segment> decompose(const XGraph& g) {
  std::set<NodeId> barriers;
  for (const auto& [id, n] : g.nodes)
    if (is_barrier(g, n)) barriers.insert(id);

  std::vector<Segment> segments;
  for (NodeId d : barriers) {
    const XNode& dn = g.node(d);
    Segment seg;
    seg.dest = d;
    seg.dest_covered = strategy_covered(dn);
    for (TensorId t : dn.inputs) {
      for (NodeId w : g.producers_of_tensor(t)) {
        std::vector<NodeId> ops;
        NodeId cur = w;
        while (!barriers.count(cur)) {
          ops.insert(ops.begin(), cur);
          auto preds = g.producers(cur);
          require(preds.size() == 1, ErrCode::Invalid,
                  "interior vertex with unexpected fan-in");
          cur = preds[0];
        }
        seg.branches.push_back(std::move(ops));
      }
    }
    if (!seg.branches.empty() || seg.dest_covered) segments.push_back(std::move(seg));
  }
  return segments;
}

// Where a candidate sits relative to the segment decomposition. Fusion never
// crosses a barrier: a chain may contain a barrier only as its final member
// (absorption into the branch that feeds it); horizontal members must all be
// interior vertices (their shared producer is a barrier by the degree rule).
struct ChainLoc {
  size_t seg = 0, branch = 0, pos = 0;
  bool with_dest = false;
};

struct Admissibility {
  std::vector<Segment> segments;
  std::map<int, ChainLoc> chains;   // candidate index -> location
  std::vector<int> horizontals;     // admissible horizontal candidate indices
};

Admissibility admit(const XGraph& g, const std::vector<CandidateGroup>& candidates) {
  Admissibility adm;
  adm.segments = decompose(g);

  std::map<NodeId, std::tuple<size_t, size_t, size_t>> interior;  // op -> seg,branch,pos
  for (size_t s = 0; s < adm.segments.size(); ++s)
    for (size_t b = 0; b < adm.segments[s].branches.size(); ++b)
      for (size_t p = 0; p < adm.segments[s].branches[b].size(); ++p)
        interior[adm.segments[s].branches[b][p]] = {s, b, p};

  for (int c = 0; c < static_cast<int>(candidates.size()); ++c) {
    const CandidateGroup& cand = candidates[c];
    if (!cand.fits_onchip) continue;
    if (cand.horizontal) {
      bool ok = true;
      for (NodeId m : cand.members)
        if (!interior.count(m)) ok = false;  // a barrier member cannot fuse
      if (ok) adm.horizontals.push_back(c);
      continue;
    }
    // Chain: all but possibly the last member are consecutive in one branch;
    // the last may instead be that segment's destination (absorption).
    size_t k = cand.members.size();
    auto first = interior.find(cand.members[0]);
    if (first == interior.end()) continue;
    auto [s, b, p] = first->second;
    const auto& ops = adm.segments[s].branches[b];
    bool ok = true;
    bool with_dest = false;
    for (size_t i = 1; i < k; ++i) {
      NodeId m = cand.members[i];
      if (p + i < ops.size() && ops[p + i] == m) continue;
      if (i + 1 == k && p + i == ops.size() && adm.segments[s].dest_covered &&
          adm.segments[s].dest == m) {
        with_dest = true;
        continue;
      }
      ok = false;
      break;
    }
    if (ok) adm.chains[c] = ChainLoc{s, b, p, with_dest};
  }
  return adm;
}

}  // namespace

// ---------------------------------------------------------------------------
// Cost graph and Floyd relaxation.

CostGraph build_cost_graph(const std::vector<NodeId>& chain,
                           const std::vector<CandidateGroup>& candidates,
                           const GroupCostFn& cost_fn) {
  CostGraph cg;
  cg.n = static_cast<int>(chain.size());
  for (int i = 0; i < cg.n; ++i)
    cg.edges.push_back({i, i + 1, cost_fn({chain[i]}, false), -1});
  for (int c = 0; c < static_cast<int>(candidates.size()); ++c) {
    const CandidateGroup& cand = candidates[c];
    if (!cand.fits_onchip || cand.horizontal) continue;
    // A candidate whose members are a consecutive run chain[i..j) becomes an
    // extra edge i -> j.
    auto it = std::search(chain.begin(), chain.end(), cand.members.begin(),
                          cand.members.end());
    if (it == chain.end()) continue;
    int from = static_cast<int>(it - chain.begin());
    cg.edges.push_back({from, from + static_cast<int>(cand.members.size()),
                        cost_fn(cand.members, false), c});
  }
  return cg;
}

PathResult floyd_shortest(CostGraph& cg) {
  int n = cg.n + 1;
  cg.cost.assign(n, std::vector<int64_t>(n, kInf));
  std::vector<std::vector<int64_t>> cnt(n, std::vector<int64_t>(n, kInf));
  std::vector<std::vector<int>> via(n, std::vector<int>(n, -1));
  std::vector<std::vector<int>> edge_at(n, std::vector<int>(n, -1));
  for (int i = 0; i < n; ++i) {
    cg.cost[i][i] = 0;
    cnt[i][i] = 0;
  }
  for (int e = 0; e < static_cast<int>(cg.edges.size()); ++e) {
    const auto& ed = cg.edges[e];
    if (ed.w < cg.cost[ed.from][ed.to] ||
        (ed.w == cg.cost[ed.from][ed.to] && cnt[ed.from][ed.to] > 1)) {
      cg.cost[ed.from][ed.to] = ed.w;
      cnt[ed.from][ed.to] = 1;
      edge_at[ed.from][ed.to] = e;
      via[ed.from][ed.to] = -1;
    }
  }
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        if (cg.cost[i][k] == kInf || cg.cost[k][j] == kInf) continue;
        int64_t c = cg.cost[i][k] + cg.cost[k][j];
        int64_t e = cnt[i][k] + cnt[k][j];
        if (c < cg.cost[i][j] || (c == cg.cost[i][j] && e < cnt[i][j])) {
          cg.cost[i][j] = c;
          cnt[i][j] = e;
          via[i][j] = k;
        }
      }

  PathResult res;
  res.cost = cg.cost[0][cg.n];
  std::function<void(int, int)> expand = [&](int i, int j) {
    if (i == j) return;
    if (via[i][j] < 0) {
      require(edge_at[i][j] >= 0, ErrCode::Invalid, "path without an edge");
      res.path.push_back(cg.edges[edge_at[i][j]]);
      return;
    }
    expand(i, via[i][j]);
    expand(via[i][j], j);
  };
  if (cg.n > 0) expand(0, cg.n);
  return res;
}

// ---------------------------------------------------------------------------
// Strategies.

namespace {

StrategyGroup make_group(const std::vector<NodeId>& members, bool horizontal,
                         const std::optional<TileConfig>& tile, int64_t cycles) {
  StrategyGroup g;
  g.members = members;
  g.horizontal = horizontal;
  g.tile = tile;
  g.cycles = cycles;
  return g;
}

// Dataflow-valid deterministic ordering: topological sort of the group DAG
// (group A precedes B when B reads anything A writes), ties by smallest
// member id.
void order_groups(const XGraph& g, std::vector<StrategyGroup>& groups) {
  size_t n = groups.size();
  std::map<NodeId, size_t> owner;
  for (size_t i = 0; i < n; ++i)
    for (NodeId m : groups[i].members) owner[m] = i;

  std::vector<std::set<size_t>> preds(n);
  for (size_t i = 0; i < n; ++i)
    for (NodeId m : groups[i].members)
      for (NodeId p : g.producers(m)) {
        auto it = owner.find(p);
        if (it != owner.end() && it->second != i) preds[i].insert(it->second);
      }

  std::vector<int64_t> pending(n);
  std::vector<std::vector<size_t>> succ(n);
  for (size_t i = 0; i < n; ++i) {
    pending[i] = static_cast<int64_t>(preds[i].size());
    for (size_t p : preds[i]) succ[p].push_back(i);
  }
  auto key = [&](size_t i) {
    return *std::min_element(groups[i].members.begin(), groups[i].members.end());
  };
  std::set<std::pair<NodeId, size_t>> ready;
  for (size_t i = 0; i < n; ++i)
    if (!pending[i]) ready.insert({key(i), i});
  std::vector<StrategyGroup> ordered;
  while (!ready.empty()) {
    size_t i = ready.begin()->second;
    ready.erase(ready.begin());
    ordered.push_back(std::move(groups[i]));
    for (size_t s : succ[i])
      if (--pending[s] == 0) ready.insert({key(s), s});
  }
  require(ordered.size() == n, ErrCode::Invalid, "strategy groups form a cycle");
  groups = std::move(ordered);
}

Strategy finish(const XGraph& g, std::string mode, std::vector<StrategyGroup> groups) {
  Strategy s;
  s.mode = std::move(mode);
  order_groups(g, groups);
  s.groups = std::move(groups);
  s.total_cycles = 0;
  for (const auto& grp : s.groups) s.total_cycles += grp.cycles;
  return s;
}

}  // namespace

Strategy baseline_strategy(const XGraph& g, const GroupCostFn& cost_fn) {
  std::vector<StrategyGroup> groups;
  for (NodeId id : topo_order(g)) {
    const XNode& n = g.node(id);
    if (!strategy_covered(n)) continue;
    groups.push_back(make_group({id}, false, std::nullopt, cost_fn({id}, false)));
  }
  return finish(g, "none", std::move(groups));
}

Strategy greedy_strategy(const XGraph& g, const std::vector<CandidateGroup>& candidates,
                         const GroupCostFn& cost_fn) {
  Admissibility adm = admit(g, candidates);
  std::set<NodeId> claimed;
  std::vector<StrategyGroup> groups;

  for (NodeId id : topo_order(g)) {
    const XNode& n = g.node(id);
    if (!strategy_covered(n) || claimed.count(id)) continue;
    // First admissible candidate (catalog order) led by this vertex with all
    // members unclaimed.
    std::set<int> hor_ok(adm.horizontals.begin(), adm.horizontals.end());
    int pick = -1;
    for (int c = 0; c < static_cast<int>(candidates.size()) && pick < 0; ++c) {
      bool admissible = adm.chains.count(c) || hor_ok.count(c);
      if (!admissible) continue;
      const auto& members = candidates[c].members;
      NodeId lead = candidates[c].horizontal
                        ? *std::min_element(members.begin(), members.end())
                        : members.front();
      if (lead != id) continue;
      bool free = true;
      for (NodeId m : members)
        if (claimed.count(m)) free = false;
      if (free) pick = c;
    }
    if (pick >= 0) {
      const CandidateGroup& cand = candidates[pick];
      for (NodeId m : cand.members) claimed.insert(m);
      groups.push_back(make_group(cand.members, cand.horizontal, cand.tile,
                                  cost_fn(cand.members, cand.horizontal)));
    } else {
      claimed.insert(id);
      groups.push_back(make_group({id}, false, std::nullopt, cost_fn({id}, false)));
    }
  }
  return finish(g, "greedy", std::move(groups));
}

Strategy select_strategy(const XGraph& g, const std::vector<CandidateGroup>& candidates,
                         const GroupCostFn& cost_fn) {
  Admissibility adm = admit(g, candidates);

  struct Case {
    int64_t total = kInf;
    int64_t n_groups = kInf;
    std::vector<StrategyGroup> groups;
  };

  // Solves one region for a given set of horizontally claimed heads:
  // enumerate which branch absorbs the destination op, Floyd over each
  // branch chain (competing branches simply have no edge into the
  // destination, the matrix form of pricing them at infinity).
  auto solve_segment = [&](const Segment& seg, size_t seg_idx,
                           const std::set<NodeId>& claimed) -> Case {
    size_t nb = seg.branches.size();
    std::vector<std::vector<int>> chain_cands(nb);
    for (const auto& [c, loc] : adm.chains)
      if (loc.seg == seg_idx) chain_cands[loc.branch].push_back(c);

    Case best;
    size_t absorb_options = seg.dest_covered ? std::max<size_t>(nb, 1) : 1;
    for (size_t absorb = 0; absorb < absorb_options; ++absorb) {
      Case cand_case;
      cand_case.total = 0;
      cand_case.n_groups = 0;
      bool dest_placed = false;
      for (size_t b = 0; b < nb; ++b) {
        std::vector<NodeId> chain = seg.branches[b];
        if (!chain.empty() && claimed.count(chain.front()))
          chain.erase(chain.begin());  // head fused horizontally
        if (seg.dest_covered && absorb == b && !dest_placed) {
          chain.push_back(seg.dest);
          dest_placed = true;
        }
        if (chain.empty()) continue;
        std::vector<CandidateGroup> local;
        for (int c : chain_cands[b]) local.push_back(candidates[c]);
        CostGraph cg = build_cost_graph(chain, local, cost_fn);
        PathResult path = floyd_shortest(cg);
        cand_case.total += path.cost;
        for (const auto& e : path.path) {
          if (e.cand < 0) {
            std::vector<NodeId> members(chain.begin() + e.from, chain.begin() + e.to);
            cand_case.groups.push_back(make_group(members, false, std::nullopt, e.w));
          } else {
            cand_case.groups.push_back(
                make_group(local[e.cand].members, false, local[e.cand].tile, e.w));
          }
          cand_case.n_groups += 1;
        }
      }
      if (seg.dest_covered && !dest_placed) {
        int64_t w = cost_fn({seg.dest}, false);
        cand_case.groups.push_back(make_group({seg.dest}, false, std::nullopt, w));
        cand_case.total += w;
        cand_case.n_groups += 1;
      }
      if (cand_case.total < best.total ||
          (cand_case.total == best.total && cand_case.n_groups < best.n_groups))
        best = std::move(cand_case);
    }
    return best;
  };

  // Horizontal groups can span regions ending at different barriers, so the
  // disjoint sets are enumerated globally; regions then solve independently.
  std::vector<std::vector<int>> hsets = {{}};
  {
    std::function<void(size_t, std::vector<int>&, std::set<NodeId>&)> rec =
        [&](size_t at, std::vector<int>& cur, std::set<NodeId>& used) {
          for (size_t i = at; i < adm.horizontals.size(); ++i) {
            int c = adm.horizontals[i];
            bool clash = false;
            for (NodeId m : candidates[c].members)
              if (used.count(m)) clash = true;
            if (clash) continue;
            for (NodeId m : candidates[c].members) used.insert(m);
            cur.push_back(c);
            hsets.push_back(cur);
            rec(i + 1, cur, used);
            cur.pop_back();
            for (NodeId m : candidates[c].members) used.erase(m);
          }
        };
    std::vector<int> cur;
    std::set<NodeId> used;
    rec(0, cur, used);
  }

  Case best;
  for (const auto& hset : hsets) {
    Case total;
    total.total = 0;
    total.n_groups = 0;
    std::set<NodeId> claimed;
    for (int c : hset) {
      int64_t w = cost_fn(candidates[c].members, true);
      total.groups.push_back(make_group(candidates[c].members, true,
                                        candidates[c].tile, w));
      total.total += w;
      total.n_groups += 1;
      for (NodeId m : candidates[c].members) claimed.insert(m);
    }
    for (size_t s = 0; s < adm.segments.size(); ++s) {
      Case seg_case = solve_segment(adm.segments[s], s, claimed);
      total.total += seg_case.total;
      total.n_groups += seg_case.n_groups;
      for (auto& grp : seg_case.groups) total.groups.push_back(std::move(grp));
    }
    if (total.total < best.total ||
        (total.total == best.total && total.n_groups < best.n_groups))
      best = std::move(total);
  }
  return finish(g, "optimal", std::move(best.groups));
}

std::string Strategy::to_json(const XGraph& g) const {
  nlohmann::json j;
  j["mode"] = mode;
  j["total_cycles"] = total_cycles;
  j["groups"] = nlohmann::json::array();
  for (const auto& grp : groups) {
    nlohmann::json jg;
    for (NodeId m : grp.members) jg["members"].push_back(g.node(m).name);
    jg["horizontal"] = grp.horizontal;
    jg["cycles"] = grp.cycles;
    if (grp.tile) {
      jg["tile"] = {{"t_w", grp.tile->t_w},
                    {"t_h", grp.tile->t_h},
                    {"t_oc", grp.tile->t_oc},
                    {"t_ic", grp.tile->t_ic}};
    }
    j["groups"].push_back(std::move(jg));
  }
  return j.dump(2);
}

}  // namespace xgc
