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

#include "attr2style/corpus.hpp"
#include "attr2style/model.hpp"
#include "attr2style/vocab.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace attr2style {

enum class Phase { A, B, baseline };
std::string_view phase_name(Phase p);
Phase parse_phase(std::string_view s);

enum class DecoderInit { fresh, warm };
std::string_view decoder_init_name(DecoderInit d);
DecoderInit parse_decoder_init(std::string_view s);

struct TrainConfig {
  int epochs = 30;
  int batch_size = 16;
  double lr_decoder = 4e-4;
  double lr_encoder = 1e-4;
  uint64_t seed = 42;
  double clip_norm = 5.0;
  DecoderInit decoder_init = DecoderInit::fresh;  // phase B only
  std::optional<int> early_stop_patience;
  double val_fraction = 0.1;
  /// Full-mode residual stages to fine-tune; ignored by the toy encoder,
  /// which always trains end to end.
  std::set<int> encoder_blocks;
  /// Worker threads for a batch (0 = hardware concurrency). Results do not
  /// depend on this value.
  int threads = 0;
};

nlohmann::json train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);

/// How manifest records become model inputs.
struct DataSpec {
  std::string root;  // image paths resolve against this directory
  NormStats norm;
  int max_len = 20;  // caption ids including START and END
};

struct Example {
  std::string image_path;
  PixelGrid image;  // preprocessed
  EncodedCaption caption;
  std::optional<Style> style;
};

std::vector<Example> make_examples(const std::vector<CaptionRecord>& records, const Vocab& vocab, const DataSpec& spec,
                                   int side);

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;  // NaN without a validation split
  double seconds = 0.0;
};

struct Checkpoint {
  ModelConfig model;
  int vocab_size = 0;
  ParamStore params;
  Phase phase = Phase::A;
  int epoch = 0;
  int best_epoch = 0;
  std::string vocab_digest;
  nlohmann::json config;  // TrainConfig snapshot
  double train_loss = 0.0;
  double val_loss = 0.0;
  std::string parent_digest;
  std::vector<EpochStats> history;
};

/// Hash over parameter names, shapes and values.
std::string checkpoint_digest(const Checkpoint& ckpt);
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
/// Throws Error("corrupt checkpoint ...") for unreadable archives.
Checkpoint load_checkpoint(const std::string& path);
/// Also throws Error("vocab digest mismatch ...").
Checkpoint load_checkpoint(const std::string& path, const Vocab& vocab);

/// Rebuilds the model a checkpoint describes and loads its parameters.
CaptionModel instantiate(const Checkpoint& ckpt);

/// Copies every `prefix` entry of `from` into `to`. Throws Error listing each
/// name that is missing on either side or differs in shape.
void copy_parameters(const ParamStore& from, ParamStore& to, std::string_view prefix);

/// Gradient steps on a caller-owned model.
class Trainer {
 public:
  Trainer(CaptionModel& model, const TrainConfig& cfg);

  /// One Adam update on `batch`; returns the batch objective (mean token
  /// cross-entropy plus any attention penalty) before the update. Dropout
  /// masks derive from `step_seed`.
  double step(std::span<const Example* const> batch, uint64_t step_seed);
  /// Evaluation-mode mean token cross-entropy.
  double mean_loss(std::span<const Example> examples) const;

  const std::vector<bool>& trainable() const { return trainable_; }
  int steps_taken() const { return t_; }
  double last_grad_norm() const { return last_grad_norm_; }

 private:
  CaptionModel& model_;
  TrainConfig cfg_;
  std::vector<bool> trainable_;
  bool encoder_grads_ = false;
  int record_from_ = 99;
  ParamStore m_, v_;
  int t_ = 0;
  double last_grad_norm_ = 0.0;
};

struct TrainOutcome {
  std::vector<EpochStats> history;
  int best_epoch = 0;
};

/// Epoch loop with seeded shuffling, validation and best-epoch selection.
/// On return the model holds the selected parameters.
TrainOutcome fit(CaptionModel& model, const TrainConfig& cfg, const std::vector<Example>& train,
                 const std::vector<Example>& val);

Checkpoint train_phase_a(const ModelConfig& model, const TrainConfig& cfg, const std::vector<CaptionRecord>& records,
                         const Vocab& vocab, const DataSpec& data);

/// Phase-B starting point: encoder copied from `phase_a`, decoder fresh or
/// warm per cfg.decoder_init.
CaptionModel init_phase_b(const Checkpoint& phase_a, const ModelConfig& model, const TrainConfig& cfg);
Checkpoint finetune_phase_b(const Checkpoint& phase_a, const ModelConfig& model, const TrainConfig& cfg,
                            const std::vector<CaptionRecord>& records, const Vocab& vocab, const DataSpec& data);

/// Same architecture as phase B, no transfer.
CaptionModel init_baseline(const ModelConfig& model, const TrainConfig& cfg, int vocab_size);
Checkpoint train_baseline(const ModelConfig& model, const TrainConfig& cfg, const std::vector<CaptionRecord>& records,
                          const Vocab& vocab, const DataSpec& data);

void write_history_csv(const std::string& path, const std::vector<EpochStats>& history);

}  // namespace attr2style
