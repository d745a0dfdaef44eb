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
#include "attr2style/image.hpp"
#include "attr2style/layers.hpp"
#include "attr2style/params.hpp"

#include <memory>
#include <set>
#include <string>
#include <vector>

namespace attr2style {

enum class EncoderMode { full, toy };

std::string_view encoder_mode_name(EncoderMode m);
EncoderMode parse_encoder_mode(std::string_view s);

struct EncoderConfig {
  EncoderMode mode = EncoderMode::toy;
  /// Residual stages (2..4) that receive updates in full mode.
  std::set<int> finetune_blocks;
  /// Named-parameter archive with encoder.backbone.* arrays; full mode only.
  std::string pretrained_weights;
};

/// L x D annotation vectors, one row per spatial location (row-major over
/// the grid).
struct AnnotationGrid {
  Mat features;
  int grid_h = 0;
  int grid_w = 0;

  int locations() const { return static_cast<int>(features.rows()); }
  int dim() const { return static_cast<int>(features.cols()); }
};

/// Image -> annotation grid.
///
/// toy:  four conv+ReLU blocks (3->16->32->64->128). Blocks 1-3 are 3x3
///       stride-2 valid convolutions (64 -> 31 -> 15 -> 7), block 4 is a
///       3x3 stride-1 same convolution, giving a 7x7x128 grid.
/// full: ResNet-101 trunk (torchvision layout, names under
///       encoder.backbone.*) without global pooling, adaptive average
///       pooling to 14x14, then a per-channel affine adaptation head
///       (encoder.head.*). Batch-norm runs on its stored statistics.
class Encoder {
 public:
  /// Activations recorded by forward() for backward().
  struct Tape {
    struct UnitCache {
      Mat cols;
      Mat pre_bn;
      Mat out;
      int in_h = 0, in_w = 0;
      int out_h = 0, out_w = 0;
      bool recorded = false;
    };
    std::vector<UnitCache> units;
    std::vector<Mat> block_out;
    /// Lowest stage whose activations are kept (full mode; toy records
    /// everything when <= 4). 5 keeps only the pooled trunk output.
    int record_from = 1;
    int trunk_h = 0, trunk_w = 0;
    Mat pooled;
  };

  /// Declares all encoder.* entries in `store`.
  Encoder(EncoderMode mode, ParamStore& store);
  ~Encoder();
  Encoder(Encoder&&) noexcept;
  Encoder& operator=(Encoder&&) noexcept;

  EncoderMode mode() const { return mode_; }
  int input_side() const { return mode_ == EncoderMode::toy ? 64 : 224; }
  int grid_h() const { return mode_ == EncoderMode::toy ? 7 : 14; }
  int grid_w() const { return grid_h(); }
  int dim() const { return mode_ == EncoderMode::toy ? 128 : 2048; }

  /// He-normal convolutions, identity batch norm with the last norm of each
  /// residual branch zeroed, identity head.
  void init_random(ParamStore& store, Rng& rng) const;
  /// Copies encoder.backbone.* (and encoder.head.* when present) from an
  /// archive; throws Error naming missing or mis-shaped arrays.
  void load_pretrained(ParamStore& store, const std::string& path) const;

  AnnotationGrid encode(const ParamStore& params, const PixelGrid& pixels) const;
  /// Forward pass that records what backward() needs.
  AnnotationGrid forward(const ParamStore& params, const PixelGrid& pixels, Tape& tape) const;
  /// Accumulates gradients for entries with trainable[i] set. Stops
  /// descending once no trainable parameter lies below.
  void backward(const ParamStore& params, const Tape& tape, const Mat& d_features, ParamStore& grads,
                const std::vector<bool>& trainable) const;

  /// Trainability flags over the whole store (non-encoder entries true).
  /// Toy mode: every encoder parameter. Full mode: the head plus the named
  /// stages; stem, stage 1 and all running statistics stay frozen.
  std::vector<bool> trainable_mask(const ParamStore& store, const std::set<int>& blocks) const;

  /// Stage (1..4) owning a parameter, 0 for stem/head/non-stage entries.
  static int block_of(const std::string& name);

 private:
  struct Unit;
  struct Bottleneck;

  FeatureMap run_unit(const ParamStore& p, const Unit& u, const FeatureMap& x, Tape* tape, int slot) const;
  FeatureMap unit_backward(const ParamStore& p, const Unit& u, const Tape& tape, int slot, const FeatureMap& dy,
                           ParamStore& grads, const std::vector<bool>& trainable, bool need_dx) const;

  EncoderMode mode_;
  std::vector<Unit> units_;
  std::vector<Bottleneck> blocks_;
  int head_scale_ = -1;
  int head_shift_ = -1;
};

/// Pixel grid (HWC) -> planar 3 x (H*W) feature map.
FeatureMap to_feature_map(const PixelGrid& pixels);

}  // namespace attr2style
