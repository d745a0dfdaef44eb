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


#include "attr2style/model.hpp"

#include <nlohmann/json.hpp>

namespace attr2style {

nlohmann::json model_config_to_json(const ModelConfig& cfg) {
  return {{"encoder_mode", std::string(encoder_mode_name(cfg.encoder_mode))},
          {"embed", cfg.embed},
          {"hidden", cfg.hidden},
          {"attention", cfg.attention},
          {"gate", cfg.gate},
          {"dropout", cfg.dropout},
          {"doubly_stochastic", cfg.doubly_stochastic},
          {"pretrained_weights", cfg.pretrained_weights}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.encoder_mode = parse_encoder_mode(j.at("encoder_mode").get<std::string>());
  c.embed = j.value("embed", 0);
  c.hidden = j.value("hidden", 0);
  c.attention = j.value("attention", 0);
  c.gate = j.value("gate", false);
  c.dropout = j.value("dropout", 0.5);
  c.doubly_stochastic = j.value("doubly_stochastic", 0.0);
  c.pretrained_weights = j.value("pretrained_weights", std::string());
  return c;
}

DecoderDims resolve_dims(const ModelConfig& cfg, int vocab_size) {
  const bool toy = cfg.encoder_mode == EncoderMode::toy;
  DecoderDims d;
  d.vocab = vocab_size;
  d.embed = cfg.embed > 0 ? cfg.embed : (toy ? 64 : 256);
  d.hidden = cfg.hidden > 0 ? cfg.hidden : (toy ? 128 : 512);
  d.attention = cfg.attention > 0 ? cfg.attention : (toy ? 64 : 512);
  d.feature = toy ? 128 : 2048;
  return d;
}

CaptionModel::CaptionModel(const ModelConfig& cfg, int vocab_size)
    : config_(cfg),
      encoder_(cfg.encoder_mode, store_),
      decoder_(resolve_dims(cfg, vocab_size), DecoderOptions{cfg.gate, cfg.dropout, cfg.doubly_stochastic}, store_) {}

void CaptionModel::init_random(uint64_t seed) {
  init_encoder(seed);
  init_decoder(seed);
}

void CaptionModel::init_generic(uint64_t seed) {
  init_random(seed);
  if (!config_.pretrained_weights.empty()) encoder_.load_pretrained(store_, config_.pretrained_weights);
}

void CaptionModel::init_encoder(uint64_t seed) {
  Rng rng(derive_seed(seed, 0xe1));
  encoder_.init_random(store_, rng);
}

void CaptionModel::init_decoder(uint64_t seed) {
  Rng rng(derive_seed(seed, 0xd1));
  decoder_.init_random(store_, rng);
}

}  // namespace attr2style
