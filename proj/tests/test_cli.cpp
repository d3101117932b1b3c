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
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include <doctest.h>
#include <json.hpp>

#include "support/testutil.hpp"
#include "xgc/compile.hpp"

using namespace xgc;
namespace fs = std::filesystem;

#ifndef XGC_BIN
#define XGC_BIN "xgc"
#endif

namespace {

int run(const std::string& cmd, std::string* capture = nullptr) {
  std::string full = cmd;
  if (capture) {
    full += " > /tmp/xgc_cli_out.txt 2>&1";
  } else {
    full += " > /dev/null 2>&1";
  }
  int rc = std::system(full.c_str());
  if (capture) {
    std::ifstream in("/tmp/xgc_cli_out.txt");
    capture->assign(std::istreambuf_iterator<char>(in), {});
  }
  return WEXITSTATUS(rc);
}

}  // namespace

TEST_CASE("cli: compile, simulate, verify and report round trip") {
  fs::path root = fs::temp_directory_path() / "xgc_cli_test";
  fs::remove_all(root);
  fs::create_directories(root);

  // Write a model to disk the way a frontend would.
  test::ModelBuilder b("resnetish", 77);
  auto in = b.input("data", 14, 14, 16, 5);
  auto c0 = b.conv("head", in, 16, 3, 1, 1, true);
  auto a1 = b.conv("arm", c0, 16, 3, 1, 1, false);
  b.eltwise("join", {a1, c0}, true);
  b.write(root.string());

  std::string bin = XGC_BIN;
  std::string model = (root / "model.json").string();
  std::string params = (root / "params").string();

  for (const std::string mode : {"none", "optimal"}) {
    std::string out = (root / ("out_" + mode)).string();
    int rc = run(bin + " compile --model " + model + " --params " + params +
                 " --hw zu2 --strategy " + mode + " --out " + out +
                 " --emit asm,bin,strategy,trace");
    REQUIRE(rc == 0);
    CHECK(fs::exists(fs::path(out) / "program.asm"));
    CHECK(fs::exists(fs::path(out) / "program.bin"));
    CHECK(fs::exists(fs::path(out) / "strategy.json"));
    CHECK(fs::exists(fs::path(out) / "plan.json"));
    CHECK(fs::exists(fs::path(out) / "summary.json"));
    CHECK(fs::exists(fs::path(out) / "trace.txt"));
  }

  // Deterministic artifacts: recompiling bit-matches.
  {
    std::string out2 = (root / "out_again").string();
    REQUIRE(run(bin + " compile --model " + model + " --params " + params +
                " --hw zu2 --strategy optimal --out " + out2) == 0);
    std::ifstream a(root / "out_optimal" / "program.bin", std::ios::binary);
    std::ifstream c(fs::path(out2) / "program.bin", std::ios::binary);
    std::string ba((std::istreambuf_iterator<char>(a)), {});
    std::string bc((std::istreambuf_iterator<char>(c)), {});
    CHECK(ba == bc);
  }

  // Simulation runs on both the binary and text forms.
  std::string sim_out;
  REQUIRE(run(bin + " simulate " + (root / "out_optimal" / "program.bin").string() +
              " --hw zu2", &sim_out) == 0);
  auto j = nlohmann::json::parse(sim_out);
  int64_t cycles_bin = j.at("total_cycles").get<int64_t>();
  CHECK(cycles_bin > 0);
  std::string sim_out2;
  REQUIRE(run(bin + " simulate " + (root / "out_optimal" / "program.asm").string() +
              " --hw zu2", &sim_out2) == 0);
  CHECK(nlohmann::json::parse(sim_out2).at("total_cycles").get<int64_t>() == cycles_bin);

  // Baseline simulates to strictly more cycles than optimal on this graph.
  std::string sim_base;
  REQUIRE(run(bin + " simulate " + (root / "out_none" / "program.bin").string() +
              " --hw zu2", &sim_base) == 0);
  CHECK(nlohmann::json::parse(sim_base).at("total_cycles").get<int64_t>() > cycles_bin);

  // Bit-exact verification between the two schedules.
  std::string verify_out;
  int rc = run(bin + " verify --model " + model + " --params " + params +
               " --hw zu2 --a " + (root / "out_none").string() + " --b " +
               (root / "out_optimal").string(), &verify_out);
  CHECK(rc == 0);
  CHECK(verify_out.find("PASS") != std::string::npos);

  // Report prints the chosen groups.
  std::string report_out;
  REQUIRE(run(bin + " report " + (root / "out_optimal" / "strategy.json").string(),
              &report_out) == 0);
  CHECK(report_out.find("optimal") != std::string::npos);

  std::string report_base;
  REQUIRE(run(bin + " report " + (root / "out_none" / "strategy.json").string(),
              &report_base) == 0);
  CHECK(report_base.find("no fusion applied") != std::string::npos);

  fs::remove_all(root);
}
