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

#include "xgc/ddr.hpp"
#include "xgc/hw.hpp"
#include "xgc/isa.hpp"
#include "xgc/quant.hpp"
#include "xgc/tiling.hpp"

namespace xgc {

// One execution unit of a strategy: a single vertex or a fused group.
struct ExecGroup {
  std::vector<NodeId> members;  // dataflow order (ascending ids if horizontal)
  bool horizontal = false;
  std::optional<TileConfig> tile;  // required for tiled kinds, absent for movers
};

struct LowerInput {
  const Model& model;
  const Quantization& quant;
  const DdrPlan& plan;
  const HwConfig& hw;
};

// Lowers one group into instructions appended to `body` (densely numbered).
// Dependencies are left empty; assign_dependencies derives them afterwards
// from region footprints. On-chip residency is tracked across calls by
// `caches` so tiles already loaded are not reloaded.
class BufferCaches;
void lower_group(const LowerInput& in, const ExecGroup& group, BufferCaches& caches,
                 Stream& body);

// deps = producers of each read region, plus write-after-read and
// write-after-write orderings on overlapping regions; transitively implied
// edges are removed.
Stream assign_dependencies(Stream stream);

// Lowers every group in order, assigns dependencies, and frames the result
// with MISC start/end.
Stream assemble_program(const LowerInput& in, const std::vector<ExecGroup>& groups);

// Exact-where-it-matters byte overlap test used for dependency assignment;
// conservative (returns true) only for large irregular pattern pairs.
bool regions_overlap(const Region& a, const Region& b);

// On-chip buffer state shared across one program's lowering.
class BufferCaches {
 public:
  explicit BufferCaches(const HwConfig& hw);
  ~BufferCaches();

  struct Ensure {
    int64_t offset;
    bool hit;
  };
  // Returns the slab's offset, allocating (and evicting unpinned slabs) on a
  // miss. `hit` tells the caller whether a LOAD is needed.
  Ensure ensure(Space space, const std::string& key, int64_t size);
  void pin(Space space, const std::string& key);
  void unpin(Space space, const std::string& key);
  void release(Space space, const std::string& key);
  uint64_t next_uniq();  // counter for one-shot slab keys

 private:
  struct Impl;
  Impl* impl_;
};

}  // namespace xgc
