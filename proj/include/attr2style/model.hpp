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

#include "attr2style/decoder.hpp"
#include "attr2style/encoder.hpp"
#include "attr2style/params.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <string>

namespace attr2style {

struct ModelConfig {
  EncoderMode encoder_mode = EncoderMode::toy;
  /// 0 selects the mode default (toy 64/128/64, full 256/512/512).
  int embed = 0;
  int hidden = 0;
  int attention = 0;
  bool gate = false;
  double dropout = 0.5;
  double doubly_stochastic = 0.0;
  /// Full mode: archive with encoder.backbone.* arrays; empty keeps the
  /// random initialization.
  std::string pretrained_weights;

  bool operator==(const ModelConfig&) const = default;
};

nlohmann::json model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const nlohmann::json& j);

DecoderDims resolve_dims(const ModelConfig& cfg, int vocab_size);

/// Encoder and decoder sharing one parameter store.
class CaptionModel {
 public:
  CaptionModel(const ModelConfig& cfg, int vocab_size);

  const ModelConfig& config() const { return config_; }
  int vocab_size() const { return decoder_.dims().vocab; }
  ParamStore& params() { return store_; }
  const ParamStore& params() const { return store_; }
  const Encoder& encoder() const { return encoder_; }
  const AttnDecoder& decoder() const { return decoder_; }
  int input_side() const { return encoder_.input_side(); }

  /// Encoder and decoder from independent child streams of `seed`.
  void init_random(uint64_t seed);
  /// Random initialization, then config().pretrained_weights when set.
  void init_generic(uint64_t seed);
  void init_encoder(uint64_t seed);
  void init_decoder(uint64_t seed);

  AnnotationGrid encode(const PixelGrid& pixels) const { return encoder_.encode(store_, pixels); }

 private:
  ModelConfig config_;
  ParamStore store_;
  Encoder encoder_;
  AttnDecoder decoder_;
};

}  // namespace attr2style
