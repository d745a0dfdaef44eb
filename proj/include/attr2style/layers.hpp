// Copyright 2026 The attr2style Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "attr2style/common.hpp"

// Convolutional building blocks with explicit forward/backward passes.
// Feature maps are planar: one row per channel, H*W columns.
namespace attr2style {

struct FeatureMap {
  Mat data;  // C x (H*W)
  int h = 0;
  int w = 0;

  int channels() const { return static_cast<int>(data.rows()); }
};

struct ConvGeom {
  int kernel = 3;
  int stride = 1;
  int pad = 0;

  int out(int in) const { return (in + 2 * pad - kernel) / stride + 1; }
  bool pointwise() const { return kernel == 1 && stride == 1 && pad == 0; }
};

/// (C*k*k) x (Ho*Wo) patch matrix; row order matches a (Cout, Cin, k, k)
/// weight tensor flattened row-major.
Mat im2col(const FeatureMap& x, ConvGeom g);
FeatureMap col2im(const Mat& cols, int channels, int h, int w, ConvGeom g);

/// y = W * im2col(x) (+ bias). `cols_out`, when given, receives the patch
/// matrix for the backward pass.
FeatureMap conv_forward(const FeatureMap& x, ConstMatMap weight, const double* bias, ConvGeom g, Mat* cols_out);

/// Accumulates dW (and db when non-null) and returns dx when `need_dx`.
FeatureMap conv_backward(const FeatureMap& dy, const Mat& cols, ConstMatMap weight, ConvGeom g, int in_h, int in_w,
                         MatMap* d_weight, double* d_bias, bool need_dx);

/// Inference-form batch norm: y = gamma * (x - mean) / sqrt(var + eps) + beta,
/// running statistics never updated.
inline constexpr double kBatchNormEps = 1e-5;
void batchnorm_forward(Mat& x, ConstVecMap gamma, ConstVecMap beta, ConstVecMap mean, ConstVecMap var);
/// `pre` is the BN input. Returns dx; accumulates dgamma/dbeta when non-null.
Mat batchnorm_backward(const Mat& dy, const Mat& pre, ConstVecMap gamma, ConstVecMap mean, ConstVecMap var,
                       double* d_gamma, double* d_beta);

inline void relu_inplace(Mat& x) { x = x.cwiseMax(0.0); }
/// dy masked by (out > 0).
inline Mat relu_backward(const Mat& dy, const Mat& out) { return (out.array() > 0.0).select(dy, 0.0); }

FeatureMap maxpool_forward(const FeatureMap& x, ConvGeom g);

/// Average pooling onto a fixed out_h x out_w grid (bins as in PyTorch's
/// adaptive pooling; upsampling replicates cells).
FeatureMap adaptive_avgpool_forward(const FeatureMap& x, int out_h, int out_w);
FeatureMap adaptive_avgpool_backward(const FeatureMap& dy, int in_h, int in_w);

}  // namespace attr2style
