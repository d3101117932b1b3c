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
#include <string>
#include <vector>

#include "xgc/tensor.hpp"

namespace xgc {

enum class OpKind {
  Input,
  Conv,
  Deconv,
  DepthwiseConv,
  DilatedConv,
  Pool,
  EltwiseAdd,
  ReLU,
  BatchNorm,
  Scale,
  Concat,
  Flatten,
  Reorg,
  Upsample,
  FullyConnected,
  Output,
  // Fine-grained importer kinds; normalization absorbs them into Conv, so a
  // normalized graph never contains these.
  Pad,
  BiasAdd,
};

enum class PoolType { Max, Avg };
enum class Nonlinear { None, Relu };

const char* kind_name(OpKind k);
std::optional<OpKind> kind_from_name(const std::string& name);

inline bool is_conv_family(OpKind k) {
  return k == OpKind::Conv || k == OpKind::Deconv || k == OpKind::DepthwiseConv ||
         k == OpKind::DilatedConv;
}

// Kinds the hardware executes; FullyConnected runs on the host.
inline bool is_device_compute(OpKind k) {
  switch (k) {
    case OpKind::Conv:
    case OpKind::Deconv:
    case OpKind::DepthwiseConv:
    case OpKind::DilatedConv:
    case OpKind::Pool:
    case OpKind::EltwiseAdd:
    case OpKind::ReLU:
    case OpKind::Reorg:
    case OpKind::Upsample:
      return true;
    default:
      return false;
  }
}

struct OpAttrs {
  std::optional<int64_t> kernel_h, kernel_w;
  std::optional<int64_t> stride_h, stride_w;
  std::optional<int64_t> pad_top, pad_bottom, pad_left, pad_right;
  std::optional<int64_t> out_channels;
  std::optional<int64_t> dilation;
  Nonlinear nonlinear = Nonlinear::None;
  std::optional<PoolType> pool_type;
  std::optional<int64_t> arity;     // eltwise input count
  std::optional<double> eps;        // batch-norm epsilon
  std::optional<int> out_radix;     // binary point of the op's output tensor

  int64_t kh() const { return kernel_h.value_or(1); }
  int64_t kw() const { return kernel_w.value_or(1); }
  int64_t sh() const { return stride_h.value_or(1); }
  int64_t sw() const { return stride_w.value_or(1); }
  int64_t pt() const { return pad_top.value_or(0); }
  int64_t pb() const { return pad_bottom.value_or(0); }
  int64_t pl() const { return pad_left.value_or(0); }
  int64_t pr() const { return pad_right.value_or(0); }
  int64_t dil() const { return dilation.value_or(1); }
};

// Output shape of a single operation from its input shapes, or a
// ShapeMismatch / SchemaError when inputs do not fit the kind's contract.
TensorShape infer_shape(OpKind kind, const OpAttrs& attrs,
                        const std::vector<TensorShape>& inputs,
                        const std::string& who);

// Validates that the attrs carried by a node make sense for its kind.
void check_attrs(OpKind kind, const OpAttrs& attrs, const std::string& who);

}  // namespace xgc
