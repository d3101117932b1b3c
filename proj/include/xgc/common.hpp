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
#include <cstdlib>
#include <iostream>
#include <stdexcept>
#include <string>

namespace xgc {

using NodeId = int32_t;
using TensorId = int32_t;  // a node's output tensor shares the node's id

enum class ErrCode {
  Schema,
  ShapeMismatch,
  DanglingRef,
  Cycle,
  UnsupportedTransform,
  UnsupportedOp,
  BufferOverflow,
  PlanMiss,
  Deadlock,
  OutOfBounds,
  Encoding,
  Io,
  Invalid,
};

inline const char* err_name(ErrCode c) {
  switch (c) {
    case ErrCode::Schema: return "SchemaError";
    case ErrCode::ShapeMismatch: return "ShapeMismatch";
    case ErrCode::DanglingRef: return "DanglingRef";
    case ErrCode::Cycle: return "CycleError";
    case ErrCode::UnsupportedTransform: return "UnsupportedTransform";
    case ErrCode::UnsupportedOp: return "UnsupportedOp";
    case ErrCode::BufferOverflow: return "BufferOverflow";
    case ErrCode::PlanMiss: return "PlanMiss";
    case ErrCode::Deadlock: return "DeadlockError";
    case ErrCode::OutOfBounds: return "OutOfBounds";
    case ErrCode::Encoding: return "EncodingError";
    case ErrCode::Io: return "IoError";
    case ErrCode::Invalid: return "InvalidArgument";
  }
  return "UnknownError";
}

class CompileError : public std::runtime_error {
 public:
  CompileError(ErrCode code, const std::string& msg)
      : std::runtime_error(std::string(err_name(code)) + ": " + msg), code_(code) {}
  ErrCode code() const { return code_; }

 private:
  ErrCode code_;
};

[[noreturn]] inline void fail(ErrCode code, const std::string& msg) {
  throw CompileError(code, msg);
}

inline void require(bool cond, ErrCode code, const std::string& msg) {
  if (!cond) fail(code, msg);
}

// Verbosity from XGC_LOG (0 = quiet, 1 = info, 2 = debug).
inline int log_level() {
  static int lvl = [] {
    const char* v = std::getenv("XGC_LOG");
    return v ? std::atoi(v) : 0;
  }();
  return lvl;
}

#define XGC_LOG_INFO(msg)                                   \
  do {                                                      \
    if (::xgc::log_level() >= 1) std::cerr << "[xgc] " << msg << "\n"; \
  } while (0)
#define XGC_LOG_DEBUG(msg)                                  \
  do {                                                      \
    if (::xgc::log_level() >= 2) std::cerr << "[xgc:dbg] " << msg << "\n"; \
  } while (0)

inline int64_t ceil_div(int64_t a, int64_t b) { return (a + b - 1) / b; }

// Round-half-away-from-zero division, den > 0.
inline int64_t round_div_away(int64_t num, int64_t den) {
  int64_t q = num / den;
  int64_t r = num % den;
  if (r < 0) r = -r;
  if (2 * r >= den) q += (num < 0 ? -1 : 1);
  return q;
}

// Shift right by `sh` with round-half-away-from-zero; negative `sh` shifts left.
inline int64_t round_shift(int64_t v, int sh) {
  if (sh <= 0) return v << (-sh);
  return round_div_away(v, int64_t{1} << sh);
}

inline int8_t sat8(int64_t v) {
  if (v > 127) return 127;
  if (v < -128) return -128;
  return static_cast<int8_t>(v);
}

inline int64_t sat32(int64_t v, bool* overflowed = nullptr) {
  if (v > INT32_MAX) {
    if (overflowed) *overflowed = true;
    return INT32_MAX;
  }
  if (v < INT32_MIN) {
    if (overflowed) *overflowed = true;
    return INT32_MIN;
  }
  return v;
}

}  // namespace xgc
