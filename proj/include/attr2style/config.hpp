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

#include "attr2style/inference.hpp"
#include "attr2style/metrics.hpp"
#include "attr2style/model.hpp"
#include "attr2style/synthgen.hpp"
#include "attr2style/trainer.hpp"

#include <nlohmann/json.hpp>

#include <set>
#include <string>
#include <vector>

// Run configuration: a JSON document layered over built-in defaults.
namespace attr2style {

/// Full default tree; every accepted key appears here.
nlohmann::json default_config();

/// Defaults <- file <- `key=value` overrides. An empty file means all
/// defaults. Throws UsageError for unknown keys, type mismatches and
/// malformed overrides.
nlohmann::json parse_config(const std::string& path, const std::vector<std::string>& overrides);
nlohmann::json parse_config_text(const std::string& text, const std::vector<std::string>& overrides);

/// Applies one dotted `a.b.c=value` override; the value is read with the
/// type of the default at that key.
void apply_override(nlohmann::json& tree, std::string_view assignment);

struct RunConfig {
  uint64_t seed = 42;
  std::string corpus_dir;  // empty: <out>/corpus
  std::string source_manifest, target_manifest, test_manifest, vocab_path, norm_stats;
  int max_len = 20;
  int min_freq = 1;
  SynthConfig synth;
  ModelConfig model;
  std::set<int> phase_a_blocks;
  std::set<int> phase_b_blocks{2, 3, 4};
  TrainConfig source, target, baseline;
  DecodeConfig decode;
  StyleLexicon lexicon;
};

/// Typed view of a validated tree. Relative paths stay relative.
RunConfig resolve_config(const nlohmann::json& tree);

}  // namespace attr2style
