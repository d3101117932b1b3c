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
#include "xgc/ddr.hpp"

#include <algorithm>

#include <json.hpp>

namespace xgc {

namespace {

constexpr int64_t kAlign = 64;

// First-fit free-list allocator over an unbounded byte range.
class FreeList {
 public:
  int64_t allocate(int64_t size) {
    size = (size + kAlign - 1) / kAlign * kAlign;
    for (auto it = holes_.begin(); it != holes_.end(); ++it) {
      if (it->second >= size) {
        int64_t base = it->first;
        int64_t rest = it->second - size;
        holes_.erase(it);
        if (rest > 0) holes_[base + size] = rest;
        high_water_ = std::max(high_water_, base + size);
        return base;
      }
    }
    int64_t base = frontier_;
    frontier_ += size;
    high_water_ = std::max(high_water_, frontier_);
    return base;
  }

  void release(int64_t base, int64_t size) {
    size = (size + kAlign - 1) / kAlign * kAlign;
    if (base + size == frontier_) {
      frontier_ = base;
    } else {
      holes_[base] = size;
    }
    // Merge adjacent holes (and absorb holes touching the frontier).
    bool merged = true;
    while (merged) {
      merged = false;
      for (auto it = holes_.begin(); it != holes_.end(); ++it) {
        auto next = std::next(it);
        if (next != holes_.end() && it->first + it->second == next->first) {
          it->second += next->second;
          holes_.erase(next);
          merged = true;
          break;
        }
        if (it->first + it->second == frontier_) {
          frontier_ = it->first;
          holes_.erase(it);
          merged = true;
          break;
        }
      }
    }
  }

  int64_t high_water() const { return high_water_; }

 private:
  std::map<int64_t, int64_t> holes_;  // base -> size
  int64_t frontier_ = 0;
  int64_t high_water_ = 0;
};

// Stage of the last reader of tensor `t`; INT64_MAX when a reader is an
// Output sentinel or runs on the host.
int64_t last_use(const Model& m, const std::map<NodeId, int64_t>& stage_of, TensorId t) {
  int64_t last = -1;
  for (NodeId r : m.graph.readers_of_tensor(t)) {
    const XNode& n = m.graph.node(r);
    if (n.kind == OpKind::Output || n.host_executed) return INT64_MAX;
    auto it = stage_of.find(r);
    last = std::max(last, it == stage_of.end() ? INT64_MAX : it->second);
  }
  return last;
}

}  // namespace

const DdrRegion& DdrPlan::param(const std::string& name) const {
  auto it = params.find(name);
  require(it != params.end(), ErrCode::PlanMiss, "no DDR region for parameter " + name);
  return it->second;
}

const DdrRegion& DdrPlan::tensor(TensorId t) const {
  auto it = tensors.find(t);
  require(it != tensors.end(), ErrCode::PlanMiss,
          "no DDR region for tensor " + std::to_string(t));
  return it->second;
}

std::string DdrPlan::to_json(const XGraph& g) const {
  nlohmann::json j;
  j["total_bytes"] = total_bytes;
  auto& jp = j["params"] = nlohmann::json::object();
  for (const auto& [name, r] : params)
    jp[name] = {{"base", r.base}, {"length", r.length}};
  auto& jt = j["tensors"] = nlohmann::json::object();
  for (const auto& [t, r] : tensors) {
    std::string name = g.has_node(t) ? g.node(t).name : "virtual:" + std::to_string(t);
    jt[name] = {{"base", r.base}, {"length", r.length}, {"persistent", r.persistent}};
  }
  return j.dump(2);
}

DdrPlan allocate_ddr_staged(const Model& m,
                            const std::vector<std::vector<NodeId>>& stages) {
  DdrPlan plan;
  FreeList heap;

  // Parameters first: quantized to one byte per element, never reclaimed.
  std::vector<std::string> used_params;
  for (const auto& [id, n] : m.graph.nodes)
    if (!n.host_executed)
      for (const auto& p : n.param_refs) used_params.push_back(p);
  std::sort(used_params.begin(), used_params.end());
  used_params.erase(std::unique(used_params.begin(), used_params.end()),
                    used_params.end());
  for (const auto& name : used_params) {
    auto it = m.params.find(name);
    require(it != m.params.end(), ErrCode::DanglingRef, "missing parameter " + name);
    int64_t size = it->second.elems();
    plan.params[name] = {heap.allocate(size), size, true};
  }

  std::map<NodeId, int64_t> stage_of;
  for (size_t s = 0; s < stages.size(); ++s)
    for (NodeId id : stages[s]) stage_of[id] = static_cast<int64_t>(s);

  // One region per written tensor, opened at the first writing stage and
  // closed only after the last reading stage has fully finished.
  std::map<TensorId, int64_t> close_at;
  for (size_t s = 0; s < stages.size(); ++s) {
    for (NodeId id : stages[s]) {
      const XNode& n = m.graph.node(id);
      if (n.kind == OpKind::Output || n.host_executed) continue;
      TensorId t = m.graph.written_tensor(n.id);
      if (plan.tensors.count(t)) continue;
      int64_t size = m.graph.tensor_shape(t).bytes();
      int64_t lu = last_use(m, stage_of, t);
      plan.tensors[t] = {heap.allocate(size), size, lu == INT64_MAX};
      close_at[t] = lu;
    }
    for (auto& [tensor, lu] : close_at) {
      if (lu == static_cast<int64_t>(s)) {
        const DdrRegion& r = plan.tensors.at(tensor);
        heap.release(r.base, r.length);
        lu = -2;  // closed
      }
    }
  }

  plan.total_bytes = heap.high_water();
  return plan;
}

DdrPlan allocate_ddr(const Model& m, const std::vector<NodeId>& order) {
  std::vector<std::vector<NodeId>> stages;
  for (NodeId id : order) stages.push_back({id});
  return allocate_ddr_staged(m, stages);
}

std::vector<std::string> check_plan_safety(const Model& m,
                                           const std::vector<std::vector<NodeId>>& stages,
                                           const DdrPlan& plan) {
  std::vector<std::string> issues;
  std::map<NodeId, int64_t> stage_of;
  for (size_t s = 0; s < stages.size(); ++s)
    for (NodeId id : stages[s]) stage_of[id] = static_cast<int64_t>(s);

  struct Live {
    TensorId t;
    int64_t from, to;  // inclusive stages
    DdrRegion r;
  };
  std::vector<Live> lives;
  for (const auto& [t, r] : plan.tensors) {
    int64_t from = INT64_MAX;
    for (NodeId w : m.graph.producers_of_tensor(t)) {
      auto it = stage_of.find(w);
      if (it != stage_of.end()) from = std::min(from, it->second);
    }
    if (from == INT64_MAX) continue;
    int64_t to = last_use(m, stage_of, t);
    lives.push_back({t, from, to, r});
  }
  auto intersects = [](const DdrRegion& a, const DdrRegion& b) {
    return a.base < b.base + b.length && b.base < a.base + a.length;
  };
  for (size_t i = 0; i < lives.size(); ++i)
    for (size_t j = i + 1; j < lives.size(); ++j) {
      bool overlap_time = lives[i].from <= lives[j].to && lives[j].from <= lives[i].to;
      if (overlap_time && intersects(lives[i].r, lives[j].r))
        issues.push_back("tensors " + std::to_string(lives[i].t) + " and " +
                         std::to_string(lives[j].t) + " share bytes while both live");
    }
  for (const auto& [name, pr] : plan.params)
    for (const Live& l : lives)
      if (intersects(pr, l.r))
        issues.push_back("parameter " + name + " overlapped by tensor " +
                         std::to_string(l.t));
  return issues;
}

std::vector<std::string> check_plan_safety(const Model& m,
                                           const std::vector<NodeId>& order,
                                           const DdrPlan& plan) {
  std::vector<std::vector<NodeId>> stages;
  for (NodeId id : order) stages.push_back({id});
  return check_plan_safety(m, stages, plan);
}

}  // namespace xgc
