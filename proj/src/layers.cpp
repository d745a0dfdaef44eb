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

#include "attr2style/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace attr2style {

Mat im2col(const FeatureMap& x, ConvGeom g) {
  const int c_in = x.channels();
  const int ho = g.out(x.h), wo = g.out(x.w);
  const int k = g.kernel;
  Mat cols(static_cast<Eigen::Index>(c_in) * k * k, static_cast<Eigen::Index>(ho) * wo);
  for (int c = 0; c < c_in; ++c) {
    const double* src = x.data.row(c).data();
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        double* dst = cols.row((static_cast<Eigen::Index>(c) * k + ky) * k + kx).data();
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * g.stride - g.pad + ky;
          double* row = dst + static_cast<ptrdiff_t>(oy) * wo;
          if (iy < 0 || iy >= x.h) {
            std::fill(row, row + wo, 0.0);
            continue;
          }
          const double* srow = src + static_cast<ptrdiff_t>(iy) * x.w;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * g.stride - g.pad + kx;
            row[ox] = (ix >= 0 && ix < x.w) ? srow[ix] : 0.0;
          }
        }
      }
    }
  }
  return cols;
}

FeatureMap col2im(const Mat& cols, int channels, int h, int w, ConvGeom g) {
  const int ho = g.out(h), wo = g.out(w);
  const int k = g.kernel;
  FeatureMap x{Mat::Zero(channels, static_cast<Eigen::Index>(h) * w), h, w};
  for (int c = 0; c < channels; ++c) {
    double* dst = x.data.row(c).data();
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const double* src = cols.row((static_cast<Eigen::Index>(c) * k + ky) * k + kx).data();
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * g.stride - g.pad + ky;
          if (iy < 0 || iy >= h) continue;
          double* drow = dst + static_cast<ptrdiff_t>(iy) * w;
          const double* srow = src + static_cast<ptrdiff_t>(oy) * wo;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * g.stride - g.pad + kx;
            if (ix >= 0 && ix < w) drow[ix] += srow[ox];
          }
        }
      }
    }
  }
  return x;
}

FeatureMap conv_forward(const FeatureMap& x, ConstMatMap weight, const double* bias, ConvGeom g, Mat* cols_out) {
  FeatureMap y{Mat(), g.out(x.h), g.out(x.w)};
  if (g.pointwise()) {
    y.data.noalias() = weight * x.data;
    if (cols_out) *cols_out = x.data;
  } else {
    Mat cols = im2col(x, g);
    y.data.noalias() = weight * cols;
    if (cols_out) *cols_out = std::move(cols);
  }
  if (bias) {
    for (Eigen::Index r = 0; r < y.data.rows(); ++r) y.data.row(r).array() += bias[r];
  }
  return y;
}

FeatureMap conv_backward(const FeatureMap& dy, const Mat& cols, ConstMatMap weight, ConvGeom g, int in_h, int in_w,
                         MatMap* d_weight, double* d_bias, bool need_dx) {
  if (d_weight) d_weight->noalias() += dy.data * cols.transpose();
  if (d_bias) {
    for (Eigen::Index r = 0; r < dy.data.rows(); ++r) d_bias[r] += dy.data.row(r).sum();
  }
  if (!need_dx) return {};
  Mat dcols = weight.transpose() * dy.data;
  if (g.pointwise()) return FeatureMap{std::move(dcols), in_h, in_w};
  return col2im(dcols, static_cast<int>(weight.cols()) / (g.kernel * g.kernel), in_h, in_w, g);
}

void batchnorm_forward(Mat& x, ConstVecMap gamma, ConstVecMap beta, ConstVecMap mean, ConstVecMap var) {
  for (Eigen::Index c = 0; c < x.rows(); ++c) {
    const double scale = gamma[c] / std::sqrt(var[c] + kBatchNormEps);
    x.row(c).array() = (x.row(c).array() - mean[c]) * scale + beta[c];
  }
}

Mat batchnorm_backward(const Mat& dy, const Mat& pre, ConstVecMap gamma, ConstVecMap mean, ConstVecMap var,
                       double* d_gamma, double* d_beta) {
  Mat dx(dy.rows(), dy.cols());
  for (Eigen::Index c = 0; c < dy.rows(); ++c) {
    const double inv_std = 1.0 / std::sqrt(var[c] + kBatchNormEps);
    if (d_gamma) d_gamma[c] += (dy.row(c).array() * (pre.row(c).array() - mean[c]) * inv_std).sum();
    if (d_beta) d_beta[c] += dy.row(c).sum();
    dx.row(c) = dy.row(c) * (gamma[c] * inv_std);
  }
  return dx;
}

FeatureMap maxpool_forward(const FeatureMap& x, ConvGeom g) {
  const int ho = g.out(x.h), wo = g.out(x.w);
  FeatureMap y{Mat(x.channels(), static_cast<Eigen::Index>(ho) * wo), ho, wo};
  for (int c = 0; c < x.channels(); ++c) {
    for (int oy = 0; oy < ho; ++oy) {
      for (int ox = 0; ox < wo; ++ox) {
        double best = -std::numeric_limits<double>::infinity();
        for (int ky = 0; ky < g.kernel; ++ky) {
          const int iy = oy * g.stride - g.pad + ky;
          if (iy < 0 || iy >= x.h) continue;
          for (int kx = 0; kx < g.kernel; ++kx) {
            const int ix = ox * g.stride - g.pad + kx;
            if (ix >= 0 && ix < x.w) best = std::max(best, x.data(c, iy * x.w + ix));
          }
        }
        y.data(c, oy * wo + ox) = best;
      }
    }
  }
  return y;
}

namespace {
int bin_start(int i, int in, int out) { return (i * in) / out; }
int bin_end(int i, int in, int out) { return ((i + 1) * in + out - 1) / out; }
}  // namespace

FeatureMap adaptive_avgpool_forward(const FeatureMap& x, int out_h, int out_w) {
  FeatureMap y{Mat::Zero(x.channels(), static_cast<Eigen::Index>(out_h) * out_w), out_h, out_w};
  for (int oy = 0; oy < out_h; ++oy) {
    const int y0 = bin_start(oy, x.h, out_h), y1 = bin_end(oy, x.h, out_h);
    for (int ox = 0; ox < out_w; ++ox) {
      const int x0 = bin_start(ox, x.w, out_w), x1 = bin_end(ox, x.w, out_w);
      const double inv = 1.0 / ((y1 - y0) * (x1 - x0));
      auto dst = y.data.col(oy * out_w + ox);
      for (int iy = y0; iy < y1; ++iy)
        for (int ix = x0; ix < x1; ++ix) dst += x.data.col(iy * x.w + ix);
      dst *= inv;
    }
  }
  return y;
}

FeatureMap adaptive_avgpool_backward(const FeatureMap& dy, int in_h, int in_w) {
  FeatureMap dx{Mat::Zero(dy.channels(), static_cast<Eigen::Index>(in_h) * in_w), in_h, in_w};
  for (int oy = 0; oy < dy.h; ++oy) {
    const int y0 = bin_start(oy, in_h, dy.h), y1 = bin_end(oy, in_h, dy.h);
    for (int ox = 0; ox < dy.w; ++ox) {
      const int x0 = bin_start(ox, in_w, dy.w), x1 = bin_end(ox, in_w, dy.w);
      const double inv = 1.0 / ((y1 - y0) * (x1 - x0));
      for (int iy = y0; iy < y1; ++iy)
        for (int ix = x0; ix < x1; ++ix) dx.data.col(iy * in_w + ix) += dy.data.col(oy * dy.w + ox) * inv;
    }
  }
  return dx;
}

}  // namespace attr2style
