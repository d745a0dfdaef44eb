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

#include "attr2style/config.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <string>
#include <vector>

// File-artifact pipeline behind the command-line tool. Every command reads
// its inputs from and writes its outputs under one output root:
//   corpus/       synthetic images, manifests, norm_stats.json, vocab.txt
//   checkpoints/  phase_a.npz, phase_b.npz, baseline.npz
//   reports/      history_*.csv, eval_*.json/txt, captions_*.jsonl, compare.*
//   figures/      attention maps and confusion matrices
namespace attr2style {

inline const std::vector<std::string> kCommands = {"synth",         "build-vocab", "train-source",
                                                   "finetune-target", "train-baseline", "caption",
                                                   "evaluate",      "compare",     "attention-maps"};

struct CommandOptions {
  std::string checkpoint;  // caption / evaluate / attention-maps; default phase_b
  std::string manifest;    // caption / evaluate / attention-maps; default test manifest
  int limit = 4;           // attention-maps: number of images
};

class Workspace {
 public:
  Workspace(std::string out_dir, nlohmann::json tree);

  const RunConfig& config() const { return cfg_; }
  const nlohmann::json& tree() const { return tree_; }

  std::string corpus_dir() const;
  std::string source_manifest() const;
  std::string target_manifest() const;
  std::string test_manifest() const;
  std::string vocab_path() const;
  std::string norm_stats_path() const;
  std::string checkpoint(std::string_view name) const;  // checkpoints/<name>.npz
  std::string report(std::string_view file) const;
  std::string figure(std::string_view file) const;

  /// Throws Error("missing input artifact ...") when `path` does not exist.
  static void require(const std::string& path, std::string_view what);
  std::vector<CaptionRecord> records(const std::string& manifest, std::string_view what) const;
  Vocab vocab() const;
  DataSpec data_spec(const std::string& manifest) const;

  void write_resolved_config() const;

 private:
  std::string out_;
  nlohmann::json tree_;
  RunConfig cfg_;
};

void cmd_synth(const Workspace& ws);
void cmd_build_vocab(const Workspace& ws);
Checkpoint cmd_train_source(const Workspace& ws);
Checkpoint cmd_finetune_target(const Workspace& ws);
Checkpoint cmd_train_baseline(const Workspace& ws);
void cmd_caption(const Workspace& ws, const CommandOptions& opts);
EvalReport cmd_evaluate(const Workspace& ws, const CommandOptions& opts);
/// Evaluates phase_b and baseline; returns the compare.json document.
nlohmann::json cmd_compare(const Workspace& ws);
void cmd_attention_maps(const Workspace& ws, const CommandOptions& opts);

/// Parses the config, runs one command and maps failures to exit codes:
/// 0 success, 1 usage error, 2 runtime error.
int run_command(const std::string& command, const std::string& config_path, const std::string& out_dir,
                const std::vector<std::string>& overrides, const CommandOptions& opts = {});

}  // namespace attr2style
