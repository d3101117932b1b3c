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

#include "xgc/import.hpp"

namespace xgc {

struct NormalizeReport {
  // BatchNorm/Scale vertices that could not be folded and were left in place.
  std::vector<std::string> unfoldable;
  // Concat vertices kept as data-movement ops instead of save annotations.
  std::vector<std::string> kept_concats;
};

// Folds BatchNorm and Scale into the adjacent convolution's weights and bias:
//   w' = w * g / sqrt(var + eps),  b' = (b - mean) * g / sqrt(var + eps) + beta
// Graph output values are unchanged in exact arithmetic.
Model fold_bn_scale(const Model& m, NormalizeReport* rep = nullptr);

// Absorbs point-wise neighbours into convolutions: ReLU becomes the producer's
// nonlinear bit (also on eltwise-add), standalone pads fold into conv padding,
// bias_add folds into the conv bias.
Model fuse_pointwise(const Model& m);

// Removes dimension transforms: flatten vertices disappear outright (NHWC
// keeps the bytes in place), concat vertices become strided-save annotations
// on their producers, reorg stays behind as a MISC-executed vertex.
Model prune_dim_transforms(const Model& m, NormalizeReport* rep = nullptr);

// The full pipeline: fold_bn_scale, fuse_pointwise, prune_dim_transforms.
Model normalize(const Model& m, NormalizeReport* rep = nullptr);

}  // namespace xgc
