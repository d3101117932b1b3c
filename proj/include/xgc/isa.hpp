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

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "xgc/common.hpp"

namespace xgc {

// The four instruction classes; MISC covers eltwise-add, reorganization and
// the stream framing markers. docs/isa.md documents both serializations.
enum class InstrKind : uint8_t { Load = 1, Save = 2, Conv = 3, Pool = 4, Misc = 5 };
enum class MiscOp : uint8_t { Start = 0, End = 1, Eltwise = 2, Reorg = 3 };
enum class Space : uint8_t { Ddr = 0, BufIn = 1, BufWt = 2, BufOut = 3 };

const char* space_name(Space s);

// Three-level strided byte-access pattern:
//   for i < n0, j < n1: touch [base + i*s0 + j*s1, +run)
struct Pattern {
  uint32_t base = 0;
  uint32_t n0 = 1;
  uint32_t s0 = 0;
  uint32_t n1 = 1;
  uint32_t s1 = 0;
  uint32_t run = 0;

  int64_t bytes() const { return int64_t(n0) * n1 * run; }
  int64_t span_end() const {  // one past the last touched byte (0 if empty)
    if (run == 0 || n0 == 0 || n1 == 0) return base;
    return base + int64_t(n0 - 1) * s0 + int64_t(n1 - 1) * s1 + run;
  }
  bool operator==(const Pattern&) const = default;
};

struct Region {
  Space space = Space::Ddr;
  Pattern pat;
  bool operator==(const Region&) const = default;
};

struct ConvArgs {
  uint16_t in_w = 0, in_h = 0, in_c = 0;
  uint16_t out_w = 0, out_h = 0, out_c = 0;
  uint8_t k_w = 1, k_h = 1, s_w = 1, s_h = 1, dilation = 1;
  uint8_t mode = 0;  // 0 conv, 1 depthwise, 2 deconv
  int16_t pad_top = 0, pad_left = 0, pad_bottom = 0, pad_right = 0;
  uint8_t relu = 0;        // nonlinear bit, applied at requantization
  uint8_t accumulate = 0;  // continue the tile's partial sums
  uint8_t requant = 0;     // final channel pass: saturate to int8
  uint8_t has_bias = 0;
  int8_t bias_shift = 0;  // aligns bias radix to the accumulator radix
  int8_t out_shift = 0;   // accumulator radix minus output radix
  bool operator==(const ConvArgs&) const = default;
};

struct PoolArgs {
  uint16_t in_w = 0, in_h = 0;
  uint16_t out_w = 0, out_h = 0;
  uint16_t channels = 0;
  uint8_t k_w = 1, k_h = 1, s_w = 1, s_h = 1;
  int16_t pad_top = 0, pad_left = 0, pad_bottom = 0, pad_right = 0;
  uint8_t avg = 0;  // the one pooling-type bit: 0 max, 1 avg
  int8_t out_shift = 0;
  bool operator==(const PoolArgs&) const = default;
};

struct EltwiseArgs {
  uint32_t elems = 0;
  uint8_t arity = 1;  // 1 = unary (standalone relu), up to 4 arms
  uint8_t relu = 0;
  int8_t in_shift[4] = {0, 0, 0, 0};  // left shifts onto the common radix
  int8_t out_shift = 0;
  bool operator==(const EltwiseArgs&) const = default;
};

struct ReorgArgs {
  uint16_t in_w = 0, in_h = 0, in_c = 0;
  uint8_t stride = 1;
  bool operator==(const ReorgArgs&) const = default;
};

using InstrArgs =
    std::variant<std::monostate, ConvArgs, PoolArgs, EltwiseArgs, ReorgArgs>;

struct Instruction {
  uint32_t seq = 0;
  InstrKind kind = InstrKind::Misc;
  MiscOp misc = MiscOp::Start;
  std::vector<Region> reads;    // operand order is fixed per kind (docs/isa.md)
  std::optional<Region> write;
  InstrArgs args;
  std::vector<uint32_t> deps;  // earlier seq indices this instruction waits on

  bool operator==(const Instruction&) const = default;
};

using Stream = std::vector<Instruction>;

// Renumbers seq fields to positions and wraps the body in MISC start/end
// markers; end waits on the last instruction of each engine.
Stream finalize_stream(Stream body);

// Text assembly, one instruction per line, canonical field order.
std::string emit_text(const Stream& s);
Stream parse_text(const std::string& text);

// Binary form: per-instruction TLV records (opcode byte, payload-length byte,
// little-endian payload). decode(encode(s)) == s exactly.
std::vector<uint8_t> encode_binary(const Stream& s);
Stream decode_binary(const std::vector<uint8_t>& bytes);

}  // namespace xgc
