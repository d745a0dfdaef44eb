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

#include <string>
#include <vector>

namespace attr2style {

/// H x W x 3 real image, channel-interleaved (HWC).
struct PixelGrid {
  int height = 0;
  int width = 0;
  std::vector<double> data;

  PixelGrid() = default;
  PixelGrid(int h, int w, double fill = 0.0)
      : height(h), width(w), data(static_cast<size_t>(h) * w * 3, fill) {}

  double& at(int y, int x, int c) { return data[(static_cast<size_t>(y) * width + x) * 3 + c]; }
  double at(int y, int x, int c) const { return data[(static_cast<size_t>(y) * width + x) * 3 + c]; }
};

/// Reads a PNG as RGB in [0, 1]. Throws Error("cannot decode image: ...").
PixelGrid read_png(const std::string& path);
/// Writes an RGB image with values clamped to [0, 1].
void write_png(const std::string& path, const PixelGrid& img);

/// Bilinear resampling with half-pixel centers.
PixelGrid resize_bilinear(const PixelGrid& img, int out_h, int out_w);
PixelGrid center_crop(const PixelGrid& img, int out_h, int out_w);

}  // namespace attr2style
