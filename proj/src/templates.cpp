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
#include "xgc/templates.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include <json.hpp>

namespace xgc {

using nlohmann::json;

bool VertexPred::matches(const XNode& n) const {
  if (n.host_executed) return false;
  if (std::find(kinds.begin(), kinds.end(), n.kind) == kinds.end()) return false;
  if (kernel_h && n.attrs.kh() != *kernel_h) return false;
  if (kernel_w && n.attrs.kw() != *kernel_w) return false;
  if (stride_h && n.attrs.sh() != *stride_h) return false;
  if (stride_w && n.attrs.sw() != *stride_w) return false;
  return true;
}

void FusionTemplate::validate() const {
  require(!vertices.empty(), ErrCode::Invalid, "template " + id + " has no vertices");
  for (const auto& e : edges)
    require(e.from >= 0 && e.to >= 0 && e.from < static_cast<int>(vertices.size()) &&
                e.to < static_cast<int>(vertices.size()) && e.from != e.to,
            ErrCode::Invalid, "template " + id + " has a bad edge");
  if (shape == TemplateShape::Horizontal) {
    require(edges.empty(), ErrCode::Invalid,
            "template " + id + ": horizontal templates carry no edges");
    require(vertices.size() >= 2, ErrCode::Invalid,
            "template " + id + ": horizontal templates need >= 2 vertices");
  } else {
    // Connected and acyclic over the undirected edge set.
    require(edges.size() + 1 == vertices.size(), ErrCode::Invalid,
            "template " + id + " must be a tree-shaped chain");
    std::set<int> seen{0};
    bool grew = true;
    while (grew) {
      grew = false;
      for (const auto& e : edges) {
        if (seen.count(e.from) && !seen.count(e.to)) seen.insert(e.to), grew = true;
        if (seen.count(e.to) && !seen.count(e.from)) seen.insert(e.from), grew = true;
      }
    }
    require(seen.size() == vertices.size(), ErrCode::Invalid,
            "template " + id + " is not connected");
  }
}

namespace {

const std::vector<OpKind> kConvKinds = {OpKind::Conv, OpKind::DepthwiseConv,
                                        OpKind::DilatedConv};
const std::vector<OpKind> kInjectiveKinds = {OpKind::Conv, OpKind::Deconv,
                                             OpKind::DepthwiseConv, OpKind::DilatedConv,
                                             OpKind::Pool};

FusionTemplate chain2(const std::string& id, VertexPred a, VertexPred b,
                      TemplateShape shape = TemplateShape::Chain) {
  FusionTemplate t;
  t.id = id;
  t.shape = shape;
  t.vertices = {std::move(a), std::move(b)};
  t.edges = {{0, 1}};
  return t;
}

}  // namespace

std::vector<FusionTemplate> builtin_templates() {
  std::vector<FusionTemplate> out;
  VertexPred conv{kConvKinds};
  VertexPred pool{{OpKind::Pool}};
  VertexPred add{{OpKind::EltwiseAdd}};
  VertexPred inj{kInjectiveKinds};

  out.push_back(chain2("conv_pool", conv, pool));
  out.push_back(chain2("conv_conv", conv, conv));
  out.push_back(chain2("conv_eltwise", conv, add, TemplateShape::ChainWithEltwise));
  out.push_back(chain2("injective2", inj, inj));
  {
    FusionTemplate t;
    t.id = "injective3";
    t.vertices = {inj, inj, inj};
    t.edges = {{0, 1}, {1, 2}};
    out.push_back(t);
  }
  for (int k = 2; k <= 4; ++k) {
    FusionTemplate t;
    t.id = "horizontal_conv" + std::to_string(k);
    t.shape = TemplateShape::Horizontal;
    t.vertices.assign(k, conv);
    out.push_back(t);
  }
  for (auto& t : out) t.validate();
  return out;
}

std::vector<FusionTemplate> load_templates(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrCode::Io, "cannot open template file " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    fail(ErrCode::Schema, std::string("bad template file: ") + e.what());
  }
  require(j.is_array(), ErrCode::Schema, "template file must be a JSON array");

  std::vector<FusionTemplate> out;
  for (const json& jt : j) {
    FusionTemplate t;
    t.id = jt.at("id").get<std::string>();
    std::string cls = jt.value("class", "kernel");
    if (cls == "kernel")
      t.cls = FusionClass::Kernel;
    else if (cls == "intrinsic")
      t.cls = FusionClass::Intrinsic;
    else if (cls == "pointwise")
      t.cls = FusionClass::Pointwise;
    else
      fail(ErrCode::Schema, "template " + t.id + ": unknown class " + cls);
    std::string shape = jt.value("shape", "chain");
    if (shape == "chain")
      t.shape = TemplateShape::Chain;
    else if (shape == "horizontal")
      t.shape = TemplateShape::Horizontal;
    else if (shape == "chain_eltwise")
      t.shape = TemplateShape::ChainWithEltwise;
    else
      fail(ErrCode::Schema, "template " + t.id + ": unknown shape " + shape);
    for (const json& jv : jt.at("vertices")) {
      VertexPred p;
      for (const json& jk : jv.at("kinds")) {
        auto k = kind_from_name(jk.get<std::string>());
        require(k.has_value(), ErrCode::Schema,
                "template " + t.id + ": unknown kind " + jk.get<std::string>());
        p.kinds.push_back(*k);
      }
      if (jv.contains("kernel_h")) p.kernel_h = jv.at("kernel_h").get<int64_t>();
      if (jv.contains("kernel_w")) p.kernel_w = jv.at("kernel_w").get<int64_t>();
      if (jv.contains("stride_h")) p.stride_h = jv.at("stride_h").get<int64_t>();
      if (jv.contains("stride_w")) p.stride_w = jv.at("stride_w").get<int64_t>();
      t.vertices.push_back(std::move(p));
    }
    if (jt.contains("edges"))
      for (const json& je : jt.at("edges"))
        t.edges.push_back({je.at(0).get<int>(), je.at(1).get<int>()});
    t.validate();
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace xgc
