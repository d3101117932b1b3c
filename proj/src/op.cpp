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
#include "xgc/op.hpp"

#include <array>
#include <utility>

namespace xgc {

namespace {

constexpr std::array<std::pair<OpKind, const char*>, 18> kKindNames = {{
    {OpKind::Input, "input"},
    {OpKind::Conv, "conv"},
    {OpKind::Deconv, "deconv"},
    {OpKind::DepthwiseConv, "depthwise_conv"},
    {OpKind::DilatedConv, "dilated_conv"},
    {OpKind::Pool, "pool"},
    {OpKind::EltwiseAdd, "eltwise_add"},
    {OpKind::ReLU, "relu"},
    {OpKind::BatchNorm, "batch_norm"},
    {OpKind::Scale, "scale"},
    {OpKind::Concat, "concat"},
    {OpKind::Flatten, "flatten"},
    {OpKind::Reorg, "reorg"},
    {OpKind::Upsample, "upsample"},
    {OpKind::FullyConnected, "fully_connected"},
    {OpKind::Output, "output"},
    {OpKind::Pad, "pad"},
    {OpKind::BiasAdd, "bias_add"},
}};

}  // namespace

const char* kind_name(OpKind k) {
  for (const auto& [kind, name] : kKindNames)
    if (kind == k) return name;
  return "?";
}

std::optional<OpKind> kind_from_name(const std::string& name) {
  for (const auto& [kind, n] : kKindNames)
    if (name == n) return kind;
  return std::nullopt;
}

namespace {

int64_t conv_out_extent(int64_t in, int64_t k, int64_t s, int64_t pad, int64_t dil,
                        const std::string& who) {
  int64_t eff_k = (k - 1) * dil + 1;
  int64_t num = in + pad - eff_k;
  require(num >= 0, ErrCode::ShapeMismatch,
          who + ": kernel " + std::to_string(eff_k) + " exceeds padded input " +
              std::to_string(in + pad));
  return num / s + 1;
}

int64_t deconv_out_extent(int64_t in, int64_t k, int64_t s, int64_t pad) {
  return (in - 1) * s + k - pad;
}

}  // namespace

void check_attrs(OpKind kind, const OpAttrs& a, const std::string& who) {
  auto positive = [&](const std::optional<int64_t>& v, const char* what) {
    if (v) require(*v >= 1, ErrCode::Schema, who + ": " + what + " must be >= 1");
  };
  auto nonneg = [&](const std::optional<int64_t>& v, const char* what) {
    if (v) require(*v >= 0, ErrCode::Schema, who + ": " + what + " must be >= 0");
  };
  positive(a.kernel_h, "kernel_h");
  positive(a.kernel_w, "kernel_w");
  positive(a.stride_h, "stride_h");
  positive(a.stride_w, "stride_w");
  positive(a.out_channels, "out_channels");
  positive(a.dilation, "dilation");
  positive(a.arity, "arity");
  nonneg(a.pad_top, "pad_top");
  nonneg(a.pad_bottom, "pad_bottom");
  nonneg(a.pad_left, "pad_left");
  nonneg(a.pad_right, "pad_right");
  switch (kind) {
    case OpKind::Conv:
    case OpKind::Deconv:
    case OpKind::DilatedConv:
      require(a.kernel_h && a.kernel_w && a.out_channels, ErrCode::Schema,
              who + ": conv requires kernel_h, kernel_w, out_channels");
      break;
    case OpKind::DepthwiseConv:
      require(a.kernel_h && a.kernel_w, ErrCode::Schema,
              who + ": depthwise conv requires kernel_h, kernel_w");
      break;
    case OpKind::Pool:
      require(a.kernel_h && a.kernel_w && a.pool_type, ErrCode::Schema,
              who + ": pool requires kernel_h, kernel_w, pool_type");
      break;
    case OpKind::FullyConnected:
      require(a.out_channels.has_value(), ErrCode::Schema,
              who + ": fully_connected requires out_channels");
      break;
    case OpKind::Upsample:
    case OpKind::Reorg:
      require(a.stride_h.has_value() || a.stride_w.has_value(), ErrCode::Schema,
              who + ": " + kind_name(kind) + " requires stride");
      break;
    default:
      break;
  }
  if (kind == OpKind::DilatedConv)
    require(a.dil() >= 1, ErrCode::Schema, who + ": dilation must be >= 1");
}

TensorShape infer_shape(OpKind kind, const OpAttrs& a,
                        const std::vector<TensorShape>& in,
                        const std::string& who) {
  auto need_inputs = [&](size_t n) {
    require(in.size() == n, ErrCode::ShapeMismatch,
            who + ": expected " + std::to_string(n) + " input(s), got " +
                std::to_string(in.size()));
  };
  switch (kind) {
    case OpKind::Input:
      fail(ErrCode::Invalid, who + ": input nodes have declared shapes only");
    case OpKind::Conv:
    case OpKind::DilatedConv: {
      need_inputs(1);
      TensorShape o;
      o.h = conv_out_extent(in[0].h, a.kh(), a.sh(), a.pt() + a.pb(), a.dil(), who);
      o.w = conv_out_extent(in[0].w, a.kw(), a.sw(), a.pl() + a.pr(), a.dil(), who);
      o.c = *a.out_channels;
      return o;
    }
    case OpKind::DepthwiseConv: {
      need_inputs(1);
      if (a.out_channels)
        require(*a.out_channels == in[0].c, ErrCode::ShapeMismatch,
                who + ": depthwise out_channels must equal input channels");
      TensorShape o;
      o.h = conv_out_extent(in[0].h, a.kh(), a.sh(), a.pt() + a.pb(), a.dil(), who);
      o.w = conv_out_extent(in[0].w, a.kw(), a.sw(), a.pl() + a.pr(), a.dil(), who);
      o.c = in[0].c;
      return o;
    }
    case OpKind::Deconv: {
      need_inputs(1);
      TensorShape o;
      o.h = deconv_out_extent(in[0].h, a.kh(), a.sh(), a.pt() + a.pb());
      o.w = deconv_out_extent(in[0].w, a.kw(), a.sw(), a.pl() + a.pr());
      o.c = *a.out_channels;
      require(o.h >= 1 && o.w >= 1, ErrCode::ShapeMismatch, who + ": deconv output empty");
      return o;
    }
    case OpKind::Pool: {
      need_inputs(1);
      TensorShape o;
      o.h = conv_out_extent(in[0].h, a.kh(), a.sh(), a.pt() + a.pb(), 1, who);
      o.w = conv_out_extent(in[0].w, a.kw(), a.sw(), a.pl() + a.pr(), 1, who);
      o.c = in[0].c;
      return o;
    }
    case OpKind::EltwiseAdd: {
      require(in.size() >= 2, ErrCode::ShapeMismatch, who + ": eltwise needs >= 2 inputs");
      for (size_t i = 1; i < in.size(); ++i)
        require(in[i] == in[0], ErrCode::ShapeMismatch,
                who + ": eltwise input shapes differ: " + in[0].str() + " vs " + in[i].str());
      return in[0];
    }
    case OpKind::ReLU:
    case OpKind::BatchNorm:
    case OpKind::Scale:
    case OpKind::BiasAdd:
      need_inputs(1);
      return in[0];
    case OpKind::Pad: {
      need_inputs(1);
      TensorShape o = in[0];
      o.h += a.pt() + a.pb();
      o.w += a.pl() + a.pr();
      return o;
    }
    case OpKind::Concat: {
      require(in.size() >= 2, ErrCode::ShapeMismatch, who + ": concat needs >= 2 inputs");
      TensorShape o = in[0];
      for (size_t i = 1; i < in.size(); ++i) {
        require(in[i].h == o.h && in[i].w == o.w, ErrCode::ShapeMismatch,
                who + ": concat spatial dims differ");
        o.c += in[i].c;
      }
      return o;
    }
    case OpKind::Flatten: {
      need_inputs(1);
      TensorShape o;
      o.c = in[0].elems();
      return o;
    }
    case OpKind::Reorg: {
      need_inputs(1);
      int64_t s = a.sh();
      require(in[0].h % s == 0 && in[0].w % s == 0, ErrCode::ShapeMismatch,
              who + ": reorg input not divisible by stride");
      TensorShape o;
      o.h = in[0].h / s;
      o.w = in[0].w / s;
      o.c = in[0].c * s * s;
      return o;
    }
    case OpKind::Upsample: {
      need_inputs(1);
      TensorShape o = in[0];
      o.h *= a.sh();
      o.w *= a.sw();
      return o;
    }
    case OpKind::FullyConnected: {
      need_inputs(1);
      TensorShape o;
      o.c = *a.out_channels;
      return o;
    }
    case OpKind::Output:
      need_inputs(1);
      return in[0];
  }
  fail(ErrCode::Invalid, who + ": unknown kind");
}

}  // namespace xgc
