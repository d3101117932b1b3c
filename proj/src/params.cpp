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
#include "xgc/params.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>

#include <json.hpp>

namespace xgc {

namespace fs = std::filesystem;
using nlohmann::json;

ParamTable load_param_store(const std::string& dir) {
  fs::path root(dir);
  fs::path index = root / "index.json";
  std::ifstream in(index);
  require(in.good(), ErrCode::Io, "cannot open " + index.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    fail(ErrCode::Schema, "bad blob index: " + std::string(e.what()));
  }
  require(j.is_object(), ErrCode::Schema, "blob index must be a JSON object");

  ParamTable table;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const json& e = it.value();
    require(e.is_object() && e.contains("file") && e.contains("shape"), ErrCode::Schema,
            "blob entry " + it.key() + " needs file and shape");
    FloatTensor t;
    for (const json& d : e.at("shape")) {
      require(d.is_number_integer() && d.get<int64_t>() >= 1, ErrCode::Schema,
              "blob " + it.key() + " has a bad shape entry");
      t.dims.push_back(d.get<int64_t>());
    }
    fs::path file = root / e.at("file").get<std::string>();
    std::ifstream bin(file, std::ios::binary);
    require(bin.good(), ErrCode::DanglingRef, "missing blob file " + file.string());
    bin.seekg(0, std::ios::end);
    int64_t bytes = bin.tellg();
    bin.seekg(0);
    require(bytes == t.elems() * 4, ErrCode::Schema,
            "blob " + it.key() + ": file size " + std::to_string(bytes) +
                " does not match shape (" + std::to_string(t.elems() * 4) + " bytes)");
    t.data.resize(t.elems());
    bin.read(reinterpret_cast<char*>(t.data.data()), bytes);
    require(bin.good(), ErrCode::Io, "short read on " + file.string());
    table.emplace(it.key(), std::move(t));
  }
  return table;
}

void write_param_store(const std::string& dir, const ParamTable& params) {
  fs::create_directories(dir);
  json index = json::object();
  int seq = 0;
  for (const auto& [name, t] : params) {
    std::string file = "p" + std::to_string(seq++) + ".bin";
    index[name] = {{"file", file}, {"shape", t.dims}};
    std::ofstream bin(fs::path(dir) / file, std::ios::binary);
    require(bin.good(), ErrCode::Io, "cannot write blob " + file);
    bin.write(reinterpret_cast<const char*>(t.data.data()),
              static_cast<std::streamsize>(t.data.size() * 4));
  }
  std::ofstream out(fs::path(dir) / "index.json");
  out << index.dump(2) << "\n";
}

}  // namespace xgc
