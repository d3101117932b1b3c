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
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "xgc/compile.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  xgc::require(in.good(), xgc::ErrCode::Io, "cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

xgc::Stream load_artifact_stream(const std::string& path) {
  if (path.size() > 4 && path.substr(path.size() - 4) == ".asm")
    return xgc::parse_text(read_file(path));
  std::string raw = read_file(path);
  std::vector<uint8_t> bytes(raw.begin(), raw.end());
  return xgc::decode_binary(bytes);
}

// Reads plan.json back into a DdrPlan.
xgc::DdrPlan load_plan(const std::string& path) {
  json j = json::parse(read_file(path));
  xgc::DdrPlan plan;
  plan.total_bytes = j.at("total_bytes").get<int64_t>();
  if (j.contains("params"))
    for (auto it = j.at("params").begin(); it != j.at("params").end(); ++it)
      plan.params[it.key()] = {it.value().at("base").get<int64_t>(),
                               it.value().at("length").get<int64_t>(), true};
  if (j.contains("tensors"))
    for (auto it = j.at("tensors").begin(); it != j.at("tensors").end(); ++it)
      plan.tensors[std::stoi(it.key())] = {
          it.value().at("base").get<int64_t>(),
          it.value().at("length").get<int64_t>(),
          it.value().at("persistent").get<bool>()};
  return plan;
}

// Deterministic pseudo-random inputs; a raw int8 file may override per input.
std::map<xgc::NodeId, xgc::QTensor> make_inputs(
    const xgc::Model& m, const xgc::Quantization& q,
    const std::map<std::string, std::string>& files, uint64_t seed) {
  std::map<xgc::NodeId, xgc::QTensor> inputs;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> dist(-128, 127);
  for (const auto& [id, n] : m.graph.nodes) {
    if (n.kind != xgc::OpKind::Input) continue;
    xgc::QTensor t;
    t.shape = n.output_shape;
    t.radix = q.radix.tensor.at(id);
    if (auto it = files.find(n.name); it != files.end()) {
      std::string raw = read_file(it->second);
      xgc::require(static_cast<int64_t>(raw.size()) == t.shape.elems(),
                   xgc::ErrCode::Invalid,
                   n.name + ": input file must hold exactly " +
                       std::to_string(t.shape.elems()) + " bytes");
      t.data.assign(raw.begin(), raw.end());
    } else {
      t.data.resize(t.shape.elems());
      for (auto& v : t.data) v = static_cast<int8_t>(dist(rng));
    }
    inputs[id] = std::move(t);
  }
  return inputs;
}

struct VerifySide {
  xgc::Stream stream;
  xgc::DdrPlan plan;
  std::string label;
};

VerifySide load_side(const std::string& dir) {
  json manifest = json::parse(read_file((fs::path(dir) / "artifact.json").string()));
  VerifySide side;
  side.label = dir;
  std::string prog = manifest.contains("bin") ? manifest.at("bin").get<std::string>()
                                              : manifest.at("asm").get<std::string>();
  side.stream = load_artifact_stream((fs::path(dir) / prog).string());
  side.plan = load_plan((fs::path(dir) / "plan.json").string());
  return side;
}

int cmd_compile(const xgc::CompileOptions& opts) {
  xgc::CompileResult res = xgc::compile_model(opts);
  xgc::write_artifacts(res, opts);
  std::cout << read_file((fs::path(opts.out_dir) / "summary.json").string()) << "\n";
  return 0;
}

int cmd_simulate(const std::string& artifact, const std::string& hw_name,
                 const std::string& trace_path, bool no_overlap) {
  xgc::HwConfig hw = xgc::load_hw(hw_name);
  xgc::Stream stream = load_artifact_stream(artifact);
  xgc::SimResult sim =
      xgc::simulate(stream, xgc::EngineModel::from_hw(hw), no_overlap);
  std::cout << sim.report.to_json() << "\n";
  if (!trace_path.empty()) {
    std::ofstream out(trace_path);
    out << xgc::render_trace(sim);
  }
  return 0;
}

int cmd_verify(const std::string& model, const std::string& params,
               const std::string& hw_name, const std::string& dir_a,
               const std::string& dir_b,
               const std::map<std::string, std::string>& input_files, uint64_t seed) {
  xgc::HwConfig hw = xgc::load_hw(hw_name);
  xgc::Model m = xgc::normalize(xgc::import_model_file(model, params));
  xgc::Quantization q = xgc::quantize_model(m);
  auto inputs = make_inputs(m, q, input_files, seed);

  VerifySide a = load_side(dir_a);
  VerifySide b = load_side(dir_b);
  auto ddr_a = xgc::run_stream(a.stream, hw, xgc::build_ddr_image(m, q, a.plan, inputs));
  auto ddr_b = xgc::run_stream(b.stream, hw, xgc::build_ddr_image(m, q, b.plan, inputs));
  auto graph_out = xgc::run_graph(m, q, inputs);

  for (xgc::TensorId t : xgc::device_output_tensors(m.graph)) {
    auto bytes_a = xgc::extract_tensor(ddr_a, a.plan, t);
    auto bytes_b = xgc::extract_tensor(ddr_b, b.plan, t);
    const auto& ref = graph_out.at(t).data;
    std::string name = m.graph.has_node(t) ? m.graph.node(t).name
                                           : "virtual:" + std::to_string(t);
    for (size_t i = 0; i < bytes_a.size(); ++i) {
      if (bytes_a[i] != bytes_b[i]) {
        std::cout << "FAIL tensor " << name << " byte " << i << ": "
                  << int(static_cast<int8_t>(bytes_a[i])) << " vs "
                  << int(static_cast<int8_t>(bytes_b[i])) << "\n";
        return 1;
      }
      if (static_cast<int8_t>(bytes_a[i]) != ref[i]) {
        std::cout << "FAIL tensor " << name << " byte " << i
                  << ": stream disagrees with the graph interpreter\n";
        return 1;
      }
    }
  }
  std::cout << "PASS\n";
  return 0;
}

int cmd_report(const std::string& strategy_path) {
  json j = json::parse(read_file(strategy_path));
  std::cout << "strategy: " << j.value("mode", "?") << ", total predicted cycles "
            << j.value("total_cycles", 0L) << "\n";
  bool any_fused = false;
  for (const auto& g : j.at("groups")) {
    std::string members;
    for (const auto& mname : g.at("members"))
      members += (members.empty() ? "" : " + ") + mname.get<std::string>();
    std::cout << "  " << members;
    if (g.at("members").size() > 1) {
      any_fused = true;
      std::cout << (g.value("horizontal", false) ? "  [horizontal]" : "  [fused]");
    }
    if (g.contains("tile"))
      std::cout << "  tile " << g["tile"]["t_w"] << "x" << g["tile"]["t_h"] << "x"
                << g["tile"]["t_oc"];
    std::cout << "  " << g.value("cycles", 0L) << " cycles\n";
  }
  if (!any_fused) std::cout << "no fusion applied\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CNN-to-accelerator compiler: fusion, tiling and instruction "
               "generation for an instruction-driven tiled device"};
  app.require_subcommand(1);

  xgc::CompileOptions copts;
  std::string emit = "asm,bin,strategy";
  auto* compile = app.add_subcommand("compile", "compile a model to instructions");
  compile->add_option("--model", copts.model_path, "model manifest JSON")->required();
  compile->add_option("--params", copts.params_path, "parameter blob directory");
  compile->add_option("--hw", copts.hw, "hardware preset name or JSON file");
  compile->add_option("--strategy", copts.strategy_mode, "none | greedy | optimal");
  compile->add_option("--out", copts.out_dir, "output directory")->required();
  compile->add_option("--emit", emit, "artifacts: asm,bin,strategy,trace");
  compile->add_option("--templates", copts.templates_path, "template catalog JSON");

  std::string artifact, hw_name = "zu2", trace_path;
  bool no_overlap = false;
  auto* simulate = app.add_subcommand("simulate", "cost-simulate an instruction artifact");
  simulate->add_option("artifact", artifact, "program.bin or program.asm")->required();
  simulate->add_option("--hw", hw_name, "hardware preset name or JSON file");
  simulate->add_option("--trace", trace_path, "write a per-engine timeline here");
  simulate->add_flag("--no-overlap", no_overlap, "serialize all engines");

  std::string vmodel, vparams, vhw = "zu2", dir_a, dir_b;
  std::vector<std::string> input_specs;
  uint64_t seed = 1234;
  auto* verify = app.add_subcommand("verify",
                                    "check two schedules for bit-identical outputs");
  verify->add_option("--model", vmodel, "model manifest JSON")->required();
  verify->add_option("--params", vparams, "parameter blob directory");
  verify->add_option("--hw", vhw, "hardware preset name or JSON file");
  verify->add_option("--a", dir_a, "first artifact directory")->required();
  verify->add_option("--b", dir_b, "second artifact directory")->required();
  verify->add_option("--input", input_specs, "name=rawfile (int8), repeatable");
  verify->add_option("--seed", seed, "seed for generated inputs");

  std::string strategy_path;
  auto* report = app.add_subcommand("report", "print a strategy file");
  report->add_option("strategy", strategy_path, "strategy.json")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (compile->parsed()) {
      copts.emit_asm = emit.find("asm") != std::string::npos;
      copts.emit_bin = emit.find("bin") != std::string::npos;
      copts.emit_strategy = emit.find("strategy") != std::string::npos;
      copts.emit_trace = emit.find("trace") != std::string::npos;
      return cmd_compile(copts);
    }
    if (simulate->parsed()) return cmd_simulate(artifact, hw_name, trace_path, no_overlap);
    if (verify->parsed()) {
      std::map<std::string, std::string> input_files;
      for (const auto& spec : input_specs) {
        auto eq = spec.find('=');
        xgc::require(eq != std::string::npos, xgc::ErrCode::Invalid,
                     "--input expects name=file");
        input_files[spec.substr(0, eq)] = spec.substr(eq + 1);
      }
      return cmd_verify(vmodel, vparams, vhw, dir_a, dir_b, input_files, seed);
    }
    if (report->parsed()) return cmd_report(strategy_path);
  } catch (const xgc::CompileError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
