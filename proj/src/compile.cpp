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
#include "xgc/compile.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <set>

#include <json.hpp>

namespace xgc {

namespace {

class PhaseClock {
 public:
  explicit PhaseClock(std::map<std::string, double>& out) : out_(out) {}
  template <typename F>
  auto time(const std::string& phase, F&& fn) {
    auto t0 = std::chrono::steady_clock::now();
    if constexpr (std::is_void_v<decltype(fn())>) {
      fn();
      out_[phase] = ms_since(t0);
    } else {
      auto r = fn();
      out_[phase] = ms_since(t0);
      return r;
    }
  }

 private:
  static double ms_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                     t0)
        .count();
  }
  std::map<std::string, double>& out_;
};

void check_device_closure(const XGraph& g) {
  // A device vertex consuming a host-produced tensor has nothing to load.
  for (const auto& [id, n] : g.nodes) {
    if (n.host_executed || n.kind == OpKind::Output) continue;
    for (NodeId p : g.producers(id))
      require(!g.node(p).host_executed, ErrCode::UnsupportedOp,
              n.name + " consumes host-computed data");
  }
}

}  // namespace

std::vector<ExecGroup> strategy_exec_groups(const Strategy& s) {
  std::vector<ExecGroup> out;
  for (const StrategyGroup& g : s.groups) {
    ExecGroup e;
    e.members = g.members;
    e.horizontal = g.horizontal;
    e.tile = g.tile;
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<NodeId> strategy_exec_order(const XGraph& g, const Strategy& s) {
  std::vector<NodeId> order;
  for (const auto& stage : strategy_exec_stages(g, s))
    order.insert(order.end(), stage.begin(), stage.end());
  return order;
}

std::vector<std::vector<NodeId>> strategy_exec_stages(const XGraph& g,
                                                      const Strategy& s) {
  std::vector<std::vector<NodeId>> stages;
  std::set<NodeId> placed;
  for (const auto& [id, n] : g.nodes)
    if (n.kind == OpKind::Input) {
      stages.push_back({id});
      placed.insert(id);
    }
  for (const StrategyGroup& grp : s.groups) {
    stages.push_back(grp.members);
    for (NodeId m : grp.members) placed.insert(m);
  }
  for (NodeId id : topo_order(g))
    if (!placed.count(id)) stages.push_back({id});
  return stages;
}

CompileResult compile(Model model, const HwConfig& hw, const std::string& mode,
                      const std::vector<FusionTemplate>& templates) {
  require(mode == "none" || mode == "greedy" || mode == "optimal", ErrCode::Invalid,
          "unknown strategy mode '" + mode + "'");
  CompileResult res;
  res.hw = hw;
  PhaseClock clock(res.phase_ms);

  res.model = clock.time("graph_generation", [&] { return normalize(model); });
  check_device_closure(res.model.graph);
  res.quant = quantize_model(res.model);
  XGC_LOG_INFO("normalized '" << res.model.graph.name << "' to "
                              << res.model.graph.nodes.size() << " vertices");

  if (mode != "none")
    res.candidates = clock.time("isomorphism_fusion", [&] {
      return enumerate_groups(templates, res.model.graph, hw);
    });
  else
    res.phase_ms["isomorphism_fusion"] = 0.0;
  XGC_LOG_INFO("matched " << res.candidates.size() << " candidate groups");

  GroupEvaluator evaluator(res.model, res.quant, hw);
  GroupCostFn cost_fn = [&](const std::vector<NodeId>& members, bool horizontal) {
    return evaluator.cycles(members, horizontal);
  };

  clock.time("evaluation", [&] {
    for (const CandidateGroup& c : res.candidates)
      if (c.fits_onchip) evaluator.cycles(c.members, c.horizontal);
  });

  res.strategy = clock.time("auto_tuning", [&] {
    if (mode == "none") return baseline_strategy(res.model.graph, cost_fn);
    if (mode == "greedy")
      return greedy_strategy(res.model.graph, res.candidates, cost_fn);
    return select_strategy(res.model.graph, res.candidates, cost_fn);
  });
  XGC_LOG_INFO("strategy '" << mode << "': " << res.strategy.groups.size()
                            << " groups, " << res.strategy.total_cycles
                            << " predicted cycles");
  XGC_LOG_DEBUG(res.strategy.to_json(res.model.graph));

  clock.time("codegen", [&] {
    res.exec_order = strategy_exec_order(res.model.graph, res.strategy);
    res.plan = allocate_ddr_staged(res.model,
                                   strategy_exec_stages(res.model.graph, res.strategy));
    LowerInput in{res.model, res.quant, res.plan, res.hw};
    res.program = assemble_program(in, strategy_exec_groups(res.strategy));
  });

  res.predicted = simulate(res.program, EngineModel::from_hw(hw)).report;
  return res;
}

CompileResult compile_model(const CompileOptions& opts) {
  Model m = import_model_file(opts.model_path, opts.params_path);
  HwConfig hw = load_hw(opts.hw);
  std::vector<FusionTemplate> templates = opts.templates_path.empty()
                                              ? builtin_templates()
                                              : load_templates(opts.templates_path);
  return compile(std::move(m), hw, opts.strategy_mode, templates);
}

void write_artifacts(const CompileResult& res, const CompileOptions& opts) {
  namespace fs = std::filesystem;
  require(!opts.out_dir.empty(), ErrCode::Invalid, "no output directory");
  fs::create_directories(opts.out_dir);
  fs::path dir(opts.out_dir);
  nlohmann::json manifest;
  manifest["model"] = res.model.graph.name;
  manifest["hw"] = res.hw.name;
  manifest["mode"] = res.strategy.mode;

  auto write_file = [&](const fs::path& p, const std::string& text) {
    std::ofstream out(p);
    require(out.good(), ErrCode::Io, "cannot write " + p.string());
    out << text;
  };

  if (opts.emit_asm) {
    write_file(dir / "program.asm", emit_text(res.program));
    manifest["asm"] = "program.asm";
  }
  if (opts.emit_bin) {
    auto bytes = encode_binary(res.program);
    std::ofstream out(dir / "program.bin", std::ios::binary);
    require(out.good(), ErrCode::Io, "cannot write program.bin");
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    manifest["bin"] = "program.bin";
  }
  if (opts.emit_strategy) {
    write_file(dir / "strategy.json", res.strategy.to_json(res.model.graph));
    manifest["strategy"] = "strategy.json";
  }
  {
    // The plan always ships: executors need it to place and find tensors.
    nlohmann::json jp;
    jp["total_bytes"] = res.plan.total_bytes;
    for (const auto& [name, r] : res.plan.params)
      jp["params"][name] = {{"base", r.base}, {"length", r.length}};
    for (const auto& [t, r] : res.plan.tensors) {
      std::string name = res.model.graph.has_node(t)
                             ? res.model.graph.node(t).name
                             : "virtual:" + std::to_string(t);
      jp["tensors"][std::to_string(t)] = {{"name", name},
                                          {"base", r.base},
                                          {"length", r.length},
                                          {"persistent", r.persistent}};
    }
    write_file(dir / "plan.json", jp.dump(2));
    manifest["plan"] = "plan.json";
  }
  if (opts.emit_trace) {
    SimResult sim = simulate(res.program, EngineModel::from_hw(res.hw));
    write_file(dir / "trace.txt", render_trace(sim));
    manifest["trace"] = "trace.txt";
  }
  {
    nlohmann::json js;
    js["model"] = res.model.graph.name;
    js["hw"] = res.hw.name;
    js["mode"] = res.strategy.mode;
    js["groups"] = res.strategy.groups.size();
    js["fused_groups"] = 0;
    for (const auto& g : res.strategy.groups)
      if (g.members.size() > 1) js["fused_groups"] = int(js["fused_groups"]) + 1;
    js["predicted_total_cycles"] = res.strategy.total_cycles;
    js["simulated_cycles"] = res.predicted.total_cycles;
    js["bytes_loaded"] = res.predicted.bytes_loaded;
    js["bytes_saved"] = res.predicted.bytes_saved;
    js["instructions"] = res.program.size();
    for (const auto& [phase, ms] : res.phase_ms) js["phase_ms"][phase] = ms;
    write_file(dir / "summary.json", js.dump(2));
    manifest["summary"] = "summary.json";
  }
  write_file(dir / "artifact.json", manifest.dump(2));
}

}  // namespace xgc
