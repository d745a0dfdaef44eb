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
#include "attr2style/inference.hpp"
#include "attr2style/trainer.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace attr2style {

/// Style -> keywords, searched in this order when positions tie.
struct StyleLexicon {
  std::vector<std::pair<Style, std::vector<std::string>>> entries;

  static StyleLexicon defaults();
  /// Nonempty lowercase keyword lists, disjoint across styles; throws Error.
  void validate() const;
  nlohmann::json to_json() const;
  static StyleLexicon from_json(const nlohmann::json& j);
};

/// Style whose keyword appears first among the caption tokens; none when
/// no keyword occurs.
Style extract_style(std::string_view caption, const StyleLexicon& lexicon);

/// Square count matrix, rows = truth, cols = prediction.
using ConfusionMatrix = std::vector<std::vector<int64_t>>;

/// 6 x 6 in kAllStyles order. Throws Error on a length mismatch.
ConfusionMatrix confusion(std::span<const Style> preds, std::span<const Style> truths);

struct ClassScore {
  std::optional<double> precision;  // empty when nothing was predicted as this class
  std::optional<double> recall;     // empty when the class has no support
  int64_t support = 0;
};

std::vector<ClassScore> precision_recall(const ConfusionMatrix& m);

struct Accuracy {
  double micro = 0.0;        // trace / total
  double paper_macro = 0.0;  // mean one-vs-rest (TP+TN)/(TP+TN+FP+FN)
};

/// Throws Error for an empty or all-zero matrix.
Accuracy accuracy(const ConfusionMatrix& m);

struct BleuOptions {
  int max_n = 4;
  /// Add one to every pooled n-gram count and total.
  bool smoothing = false;
};

struct BleuResult {
  double score = 0.0;
  std::vector<double> precisions;  // p_1 .. p_max_n
  double brevity_penalty = 0.0;
  int64_t candidate_length = 0;
  int64_t reference_length = 0;
};

/// Corpus BLEU, one reference per candidate. Throws Error for an empty
/// corpus or a length mismatch.
BleuResult bleu(const std::vector<std::vector<std::string>>& candidates,
                const std::vector<std::vector<std::string>>& references, const BleuOptions& opts = {});

struct EvalItem {
  std::string image;
  std::string caption;
  std::string reference;
  double log_prob = 0.0;
  Style truth = Style::none;
  Style predicted = Style::none;
};

struct EvalReport {
  ConfusionMatrix confusion;
  std::vector<ClassScore> per_style;
  Accuracy accuracy;
  BleuResult bleu;
  int64_t n_test = 0;
  std::vector<EvalItem> items;
};

/// Scores already generated captions. Throws Error naming the first record
/// without a style.
EvalReport score_captions(const std::vector<CaptionRecord>& test, const std::vector<std::string>& captions,
                          const StyleLexicon& lexicon, const std::vector<double>& log_probs = {});

/// Captions every test record and scores the result.
EvalReport evaluate(const CaptionModel& model, const Vocab& vocab, const std::vector<CaptionRecord>& test,
                    const DataSpec& data, const StyleLexicon& lexicon, const DecodeConfig& decode);

/// Keys: bleu, bleu_detail, accuracy_micro, accuracy_paper_macro, per_style,
/// confusion, n_test. Undefined scores are null.
nlohmann::json report_to_json(const EvalReport& r);
/// Look / precision / recall / support table followed by the aggregates.
std::string report_table(const EvalReport& r);

/// Heat rendering of a confusion matrix, rows normalized by support.
PixelGrid render_confusion(const ConfusionMatrix& m, int cell = 24);

}  // namespace attr2style
