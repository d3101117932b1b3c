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
#include "xgc/import.hpp"

#include <fstream>
#include <map>

#include <json.hpp>

namespace xgc {

using nlohmann::json;

namespace {

OpAttrs parse_attrs(const json& j, const std::string& who) {
  OpAttrs a;
  if (j.is_null()) return a;
  require(j.is_object(), ErrCode::Schema, who + ": attrs must be an object");
  auto geti = [&](const char* key) -> std::optional<int64_t> {
    if (!j.contains(key)) return std::nullopt;
    require(j.at(key).is_number_integer(), ErrCode::Schema,
            who + ": attr " + key + " must be an integer");
    return j.at(key).get<int64_t>();
  };
  a.kernel_h = geti("kernel_h");
  a.kernel_w = geti("kernel_w");
  a.stride_h = geti("stride_h");
  a.stride_w = geti("stride_w");
  a.pad_top = geti("pad_top");
  a.pad_bottom = geti("pad_bottom");
  a.pad_left = geti("pad_left");
  a.pad_right = geti("pad_right");
  a.out_channels = geti("out_channels");
  a.dilation = geti("dilation");
  a.arity = geti("arity");
  if (auto r = geti("out_radix")) {
    require(*r >= 0 && *r <= 7, ErrCode::Schema, who + ": out_radix must be in 0..7");
    a.out_radix = static_cast<int>(*r);
  }
  if (j.contains("eps")) {
    require(j.at("eps").is_number(), ErrCode::Schema, who + ": eps must be a number");
    a.eps = j.at("eps").get<double>();
  }
  if (j.contains("nonlinear")) {
    std::string v = j.at("nonlinear").get<std::string>();
    if (v == "relu")
      a.nonlinear = Nonlinear::Relu;
    else
      require(v == "none", ErrCode::Schema, who + ": unknown nonlinear " + v);
  }
  if (j.contains("pool_type")) {
    std::string v = j.at("pool_type").get<std::string>();
    if (v == "max")
      a.pool_type = PoolType::Max;
    else if (v == "avg")
      a.pool_type = PoolType::Avg;
    else
      fail(ErrCode::Schema, who + ": unknown pool_type " + v);
  }
  return a;
}

TensorShape parse_shape(const json& j, const std::string& who) {
  require(j.is_array() && j.size() == 4, ErrCode::Schema,
          who + ": shape must be [n,h,w,c]");
  TensorShape s;
  s.n = j[0].get<int64_t>();
  s.h = j[1].get<int64_t>();
  s.w = j[2].get<int64_t>();
  s.c = j[3].get<int64_t>();
  s.validate();
  return s;
}

const FloatTensor& blob(const ParamTable& params, const std::string& name,
                        const std::string& who) {
  auto it = params.find(name);
  require(it != params.end(), ErrCode::DanglingRef,
          who + ": parameter blob '" + name + "' not found in store");
  return it->second;
}

void check_param_shapes(const XNode& n, const XGraph& g, const ParamTable& params) {
  const std::string& who = n.name;
  auto dims_eq = [](const FloatTensor& t, std::vector<int64_t> want) {
    return t.dims == want;
  };
  auto dims_str = [](const FloatTensor& t) {
    std::string s = "[";
    for (size_t i = 0; i < t.dims.size(); ++i)
      s += (i ? "," : "") + std::to_string(t.dims[i]);
    return s + "]";
  };
  int64_t in_c = n.inputs.empty() ? 0 : g.tensor_shape(n.inputs[0]).c;
  switch (n.kind) {
    case OpKind::Conv:
    case OpKind::DilatedConv:
    case OpKind::Deconv: {
      require(n.param_refs.size() == 1 || n.param_refs.size() == 2, ErrCode::Schema,
              who + ": conv takes [weights] or [weights, bias]");
      const auto& w = blob(params, n.param_refs[0], who);
      std::vector<int64_t> want = {*n.attrs.out_channels, n.attrs.kw(), n.attrs.kh(), in_c};
      require(dims_eq(w, want), ErrCode::ShapeMismatch,
              who + ": weights shape " + dims_str(w) + " does not match [O,W,H,C]");
      if (n.param_refs.size() == 2) {
        const auto& b = blob(params, n.param_refs[1], who);
        require(dims_eq(b, {*n.attrs.out_channels}), ErrCode::ShapeMismatch,
                who + ": bias shape mismatch");
      }
      break;
    }
    case OpKind::DepthwiseConv: {
      require(n.param_refs.size() == 1 || n.param_refs.size() == 2, ErrCode::Schema,
              who + ": depthwise conv takes [weights] or [weights, bias]");
      const auto& w = blob(params, n.param_refs[0], who);
      require(dims_eq(w, {in_c, n.attrs.kw(), n.attrs.kh(), 1}), ErrCode::ShapeMismatch,
              who + ": depthwise weights must be [C,W,H,1], got " + dims_str(w));
      if (n.param_refs.size() == 2) {
        const auto& b = blob(params, n.param_refs[1], who);
        require(dims_eq(b, {in_c}), ErrCode::ShapeMismatch, who + ": bias shape mismatch");
      }
      break;
    }
    case OpKind::BatchNorm: {
      require(n.param_refs.size() == 4, ErrCode::Schema,
              who + ": batch_norm takes [mean, var, gamma, beta]");
      for (const auto& p : n.param_refs)
        require(dims_eq(blob(params, p, who), {in_c}), ErrCode::ShapeMismatch,
                who + ": batch_norm parameter " + p + " must be [C]");
      break;
    }
    case OpKind::Scale: {
      require(n.param_refs.size() == 2, ErrCode::Schema,
              who + ": scale takes [gamma, beta]");
      for (const auto& p : n.param_refs)
        require(dims_eq(blob(params, p, who), {in_c}), ErrCode::ShapeMismatch,
                who + ": scale parameter " + p + " must be [C]");
      break;
    }
    case OpKind::BiasAdd: {
      require(n.param_refs.size() == 1, ErrCode::Schema, who + ": bias_add takes [bias]");
      require(dims_eq(blob(params, n.param_refs[0], who), {in_c}), ErrCode::ShapeMismatch,
              who + ": bias must be [C]");
      break;
    }
    case OpKind::FullyConnected: {
      require(n.param_refs.size() >= 1 && n.param_refs.size() <= 2, ErrCode::Schema,
              who + ": fully_connected takes [weights] or [weights, bias]");
      const auto& w = blob(params, n.param_refs[0], who);
      int64_t in_elems = g.tensor_shape(n.inputs[0]).elems();
      require(w.elems() == *n.attrs.out_channels * in_elems, ErrCode::ShapeMismatch,
              who + ": fully_connected weight element count mismatch");
      if (n.param_refs.size() == 2)
        require(blob(params, n.param_refs[1], who).elems() == *n.attrs.out_channels,
                ErrCode::ShapeMismatch, who + ": bias shape mismatch");
      break;
    }
    default:
      require(n.param_refs.empty(), ErrCode::Schema,
              who + ": " + kind_name(n.kind) + " takes no parameters");
  }
}

}  // namespace

Model import_model(const std::string& manifest_json, ParamTable params) {
  json j;
  try {
    j = json::parse(manifest_json);
  } catch (const json::exception& e) {
    fail(ErrCode::Schema, std::string("manifest is not valid JSON: ") + e.what());
  }
  require(j.is_object() && j.contains("nodes") && j.contains("inputs"), ErrCode::Schema,
          "manifest needs nodes and inputs");

  Model m;
  m.graph.name = j.value("name", "model");

  std::map<std::string, NodeId> by_name;
  NodeId next_id = 0;
  auto add_node = [&](const std::string& name) -> XNode& {
    require(!by_name.count(name), ErrCode::Schema, "duplicate node id '" + name + "'");
    NodeId id = next_id++;
    by_name[name] = id;
    XNode& n = m.graph.nodes[id];
    n.id = id;
    n.name = name;
    return n;
  };

  require(j.at("inputs").is_array() && !j.at("inputs").empty(), ErrCode::Schema,
          "manifest needs at least one graph input");
  for (const json& ji : j.at("inputs")) {
    require(ji.is_object() && ji.contains("id") && ji.contains("shape"), ErrCode::Schema,
            "graph input needs id and shape");
    std::string name = ji.at("id").get<std::string>();
    XNode& n = add_node(name);
    n.kind = OpKind::Input;
    n.output_shape = parse_shape(ji.at("shape"), name);
    if (ji.contains("radix")) {
      int r = ji.at("radix").get<int>();
      require(r >= 0 && r <= 7, ErrCode::Schema, name + ": radix must be in 0..7");
      n.attrs.out_radix = r;
    }
  }

  // First pass: create nodes so forward references resolve.
  struct Pending {
    NodeId id;
    json decl;
  };
  std::vector<Pending> pending;
  for (const json& jn : j.at("nodes")) {
    require(jn.is_object() && jn.contains("id") && jn.contains("kind"), ErrCode::Schema,
            "node needs id and kind");
    std::string name = jn.at("id").get<std::string>();
    XNode& n = add_node(name);
    auto kind = kind_from_name(jn.at("kind").get<std::string>());
    require(kind.has_value(), ErrCode::Schema,
            name + ": unknown kind '" + jn.at("kind").get<std::string>() + "'");
    require(*kind != OpKind::Input && *kind != OpKind::Output, ErrCode::Schema,
            name + ": '" + kind_name(*kind) + "' nodes are implicit");
    n.kind = *kind;
    n.host_executed = (n.kind == OpKind::FullyConnected);
    pending.push_back({n.id, jn});
  }

  for (const Pending& p : pending) {
    XNode& n = m.graph.nodes.at(p.id);
    n.attrs = parse_attrs(p.decl.value("attrs", json()), n.name);
    check_attrs(n.kind, n.attrs, n.name);
    require(p.decl.contains("inputs") && p.decl.at("inputs").is_array(), ErrCode::Schema,
            n.name + ": nodes need an inputs array");
    for (const json& in : p.decl.at("inputs")) {
      std::string ref = in.get<std::string>();
      auto it = by_name.find(ref);
      require(it != by_name.end(), ErrCode::Schema,
              n.name + ": unknown input '" + ref + "'");
      n.inputs.push_back(it->second);
    }
    if (p.decl.contains("params"))
      for (const json& pr : p.decl.at("params"))
        n.param_refs.push_back(pr.get<std::string>());
  }

  // Shape inference in dependency order, then declared-shape verification.
  std::map<NodeId, json> declared;
  for (const Pending& p : pending)
    if (p.decl.contains("shape")) declared[p.id] = p.decl.at("shape");
  for (NodeId id : topo_order(m.graph)) {
    XNode& n = m.graph.nodes.at(id);
    if (n.kind == OpKind::Input) continue;
    n.output_shape = infer_shape(n.kind, n.attrs, m.graph.input_shapes(id), n.name);
    if (auto it = declared.find(id); it != declared.end()) {
      TensorShape want = parse_shape(it->second, n.name);
      require(want == n.output_shape, ErrCode::ShapeMismatch,
              n.name + ": declared " + want.str() + ", computed " + n.output_shape.str());
    }
  }

  // Output sentinels for terminal tensors.
  std::vector<NodeId> terminals;
  for (const auto& [id, n] : m.graph.nodes)
    if (m.graph.consumers(id).empty() && n.kind != OpKind::Output) terminals.push_back(id);
  for (NodeId t : terminals) {
    XNode& n = add_node(m.graph.nodes.at(t).name + ":out");
    n.kind = OpKind::Output;
    n.inputs = {t};
    n.output_shape = m.graph.nodes.at(t).output_shape;
  }

  m.params = std::move(params);
  for (const auto& [id, n] : m.graph.nodes) check_param_shapes(n, m.graph, m.params);
  m.graph.validate();
  return m;
}

Model import_model_file(const std::string& manifest_path, const std::string& params_dir) {
  std::ifstream in(manifest_path);
  require(in.good(), ErrCode::Io, "cannot open " + manifest_path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  ParamTable params;
  if (!params_dir.empty()) params = load_param_store(params_dir);
  return import_model(text, std::move(params));
}

}  // namespace xgc
