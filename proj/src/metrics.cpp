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


#include "attr2style/metrics.hpp"

#include "attr2style/vocab.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <map>
#include <set>

namespace attr2style {

StyleLexicon StyleLexicon::defaults() {
  StyleLexicon l;
  for (Style s : kAllStyles) {
    if (s == Style::none) continue;
    l.entries.push_back({s, {std::string(style_name(s))}});
  }
  return l;
}

void StyleLexicon::validate() const {
  std::set<std::string> seen;
  for (const auto& [style, words] : entries) {
    if (style == Style::none) throw Error("lexicon: 'none' cannot have keywords");
    if (words.empty()) throw Error(fmt::format("lexicon: style {} has no keywords", style_name(style)));
    for (const auto& w : words) {
      if (w.empty()) throw Error("lexicon: empty keyword");
      for (char c : w)
        if (std::tolower(static_cast<unsigned char>(c)) != c)
          throw Error(fmt::format("lexicon: keyword '{}' is not lowercase", w));
      if (!seen.insert(w).second) throw Error(fmt::format("lexicon: keyword '{}' listed twice", w));
    }
  }
}

nlohmann::json StyleLexicon::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [style, words] : entries) j[std::string(style_name(style))] = words;
  return j;
}

StyleLexicon StyleLexicon::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error("lexicon must map style names to keyword lists");
  StyleLexicon l;
  // Keep the fixed style order rather than the object's key order.
  std::map<int, std::vector<std::string>> by_style;
  for (const auto& [name, words] : j.items()) {
    if (!words.is_array()) throw Error(fmt::format("lexicon entry '{}' must be a list of strings", name));
    by_style[style_index(parse_style(name))] = words.get<std::vector<std::string>>();
  }
  for (const auto& [idx, words] : by_style) l.entries.push_back({kAllStyles[static_cast<size_t>(idx)], words});
  l.validate();
  return l;
}

Style extract_style(std::string_view caption, const StyleLexicon& lexicon) {
  const auto tokens = tokenize(caption);
  Style best = Style::none;
  size_t best_pos = std::numeric_limits<size_t>::max();
  for (const auto& [style, words] : lexicon.entries) {
    for (const auto& w : words) {
      const auto kw = tokenize(w);
      if (kw.empty() || kw.size() > tokens.size()) continue;
      for (size_t i = 0; i + kw.size() <= tokens.size() && i < best_pos; ++i) {
        if (std::equal(kw.begin(), kw.end(), tokens.begin() + static_cast<std::ptrdiff_t>(i))) {
          best_pos = i;
          best = style;
          break;
        }
      }
    }
  }
  return best;
}

ConfusionMatrix confusion(std::span<const Style> preds, std::span<const Style> truths) {
  if (preds.size() != truths.size())
    throw Error(fmt::format("confusion: {} predictions for {} truths", preds.size(), truths.size()));
  ConfusionMatrix m(kNumStyles, std::vector<int64_t>(kNumStyles, 0));
  for (size_t i = 0; i < preds.size(); ++i)
    ++m[static_cast<size_t>(style_index(truths[i]))][static_cast<size_t>(style_index(preds[i]))];
  return m;
}

namespace {

void check_square(const ConfusionMatrix& m) {
  for (const auto& row : m)
    if (row.size() != m.size()) throw Error("confusion matrix must be square");
}

}  // namespace

std::vector<ClassScore> precision_recall(const ConfusionMatrix& m) {
  check_square(m);
  const size_t n = m.size();
  std::vector<ClassScore> out(n);
  for (size_t k = 0; k < n; ++k) {
    int64_t row = 0, col = 0;
    for (size_t j = 0; j < n; ++j) {
      row += m[k][j];
      col += m[j][k];
    }
    out[k].support = row;
    if (col > 0) out[k].precision = static_cast<double>(m[k][k]) / static_cast<double>(col);
    if (row > 0) out[k].recall = static_cast<double>(m[k][k]) / static_cast<double>(row);
  }
  return out;
}

Accuracy accuracy(const ConfusionMatrix& m) {
  check_square(m);
  const size_t n = m.size();
  int64_t total = 0, trace = 0;
  for (size_t i = 0; i < n; ++i) {
    trace += m[i][i];
    for (size_t j = 0; j < n; ++j) total += m[i][j];
  }
  if (n == 0 || total == 0) throw Error("accuracy of an empty confusion matrix");
  Accuracy a;
  a.micro = static_cast<double>(trace) / static_cast<double>(total);
  double sum = 0.0;
  for (size_t k = 0; k < n; ++k) {
    int64_t row = 0, col = 0;
    for (size_t j = 0; j < n; ++j) {
      row += m[k][j];
      col += m[j][k];
    }
    const int64_t tp = m[k][k];
    const int64_t fp = col - tp, fn = row - tp;
    const int64_t tn = total - tp - fp - fn;
    sum += static_cast<double>(tp + tn) / static_cast<double>(total);
  }
  a.paper_macro = sum / static_cast<double>(n);
  return a;
}

BleuResult bleu(const std::vector<std::vector<std::string>>& candidates,
                const std::vector<std::vector<std::string>>& references, const BleuOptions& opts) {
  if (candidates.empty()) throw Error("bleu: empty corpus");
  if (candidates.size() != references.size())
    throw Error(fmt::format("bleu: {} candidates for {} references", candidates.size(), references.size()));
  if (opts.max_n < 1) throw Error("bleu: max_n must be >= 1");
  const size_t nmax = static_cast<size_t>(opts.max_n);
  std::vector<int64_t> matched(nmax, 0), total(nmax, 0);
  BleuResult r;
  for (size_t i = 0; i < candidates.size(); ++i) {
    const auto& c = candidates[i];
    const auto& ref = references[i];
    r.candidate_length += static_cast<int64_t>(c.size());
    r.reference_length += static_cast<int64_t>(ref.size());
    for (size_t n = 1; n <= nmax; ++n) {
      std::map<std::vector<std::string>, int64_t> ref_counts, cand_counts;
      for (size_t k = 0; k + n <= ref.size(); ++k) ++ref_counts[{ref.begin() + static_cast<std::ptrdiff_t>(k),
                                                                ref.begin() + static_cast<std::ptrdiff_t>(k + n)}];
      for (size_t k = 0; k + n <= c.size(); ++k) ++cand_counts[{c.begin() + static_cast<std::ptrdiff_t>(k),
                                                               c.begin() + static_cast<std::ptrdiff_t>(k + n)}];
      for (const auto& [gram, cnt] : cand_counts) {
        auto it = ref_counts.find(gram);
        matched[n - 1] += std::min(cnt, it == ref_counts.end() ? int64_t{0} : it->second);
        total[n - 1] += cnt;
      }
    }
  }
  const double extra = opts.smoothing ? 1.0 : 0.0;
  double log_sum = 0.0;
  bool zero = false;
  for (size_t n = 0; n < nmax; ++n) {
    const double denom = static_cast<double>(total[n]) + extra;
    const double p = denom > 0 ? (static_cast<double>(matched[n]) + extra) / denom : 0.0;
    r.precisions.push_back(p);
    if (p <= 0.0) zero = true;
    else log_sum += std::log(p);
  }
  if (r.candidate_length == 0) {
    r.brevity_penalty = 0.0;
  } else {
    r.brevity_penalty =
        std::exp(std::min(0.0, 1.0 - static_cast<double>(r.reference_length) / static_cast<double>(r.candidate_length)));
  }
  r.score = zero ? 0.0 : r.brevity_penalty * std::exp(log_sum / static_cast<double>(nmax));
  return r;
}

EvalReport score_captions(const std::vector<CaptionRecord>& test, const std::vector<std::string>& captions,
                          const StyleLexicon& lexicon, const std::vector<double>& log_probs) {
  if (test.size() != captions.size())
    throw Error(fmt::format("{} captions for {} test records", captions.size(), test.size()));
  if (test.empty()) throw Error("empty test set");
  EvalReport r;
  std::vector<Style> preds, truths;
  std::vector<std::vector<std::string>> cand, refs;
  for (size_t i = 0; i < test.size(); ++i) {
    if (!test[i].style) throw Error(fmt::format("test record {} ({}) has no style", i, test[i].image));
    EvalItem it;
    it.image = test[i].image;
    it.caption = captions[i];
    it.reference = test[i].caption;
    it.log_prob = i < log_probs.size() ? log_probs[i] : 0.0;
    it.truth = *test[i].style;
    it.predicted = extract_style(captions[i], lexicon);
    preds.push_back(it.predicted);
    truths.push_back(it.truth);
    cand.push_back(tokenize(captions[i]));
    refs.push_back(tokenize(test[i].caption));
    r.items.push_back(std::move(it));
  }
  r.confusion = confusion(preds, truths);
  r.per_style = precision_recall(r.confusion);
  r.accuracy = accuracy(r.confusion);
  r.bleu = bleu(cand, refs);
  r.n_test = static_cast<int64_t>(test.size());
  return r;
}

EvalReport evaluate(const CaptionModel& model, const Vocab& vocab, const std::vector<CaptionRecord>& test,
                    const DataSpec& data, const StyleLexicon& lexicon, const DecodeConfig& decode) {
  for (size_t i = 0; i < test.size(); ++i)
    if (!test[i].style) throw Error(fmt::format("test record {} ({}) has no style", i, test[i].image));
  std::vector<std::string> captions;
  std::vector<double> log_probs;
  for (const auto& rec : test) {
    const auto path = (std::filesystem::path(data.root) / rec.image).string();
    const PixelGrid img = preprocess_image(path, model.input_side(), data.norm);
    const CaptionResult res = caption_image(model, vocab, img, decode);
    std::string text;
    for (const auto& t : res.tokens) text += (text.empty() ? "" : " ") + t;
    captions.push_back(std::move(text));
    log_probs.push_back(res.log_prob);
  }
  return score_captions(test, captions, lexicon, log_probs);
}

namespace {

nlohmann::json opt_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

std::string opt_text(const std::optional<double>& v) { return v ? fmt::format("{:.3f}", *v) : "n/a"; }

}  // namespace

nlohmann::json report_to_json(const EvalReport& r) {
  nlohmann::json per = nlohmann::json::object();
  for (size_t k = 0; k < r.per_style.size() && k < kAllStyles.size(); ++k) {
    per[std::string(style_name(kAllStyles[k]))] = {{"precision", opt_json(r.per_style[k].precision)},
                                                   {"recall", opt_json(r.per_style[k].recall)},
                                                   {"support", r.per_style[k].support}};
  }
  nlohmann::json detail = {{"precisions", r.bleu.precisions},
                           {"brevity_penalty", r.bleu.brevity_penalty},
                           {"candidate_length", r.bleu.candidate_length},
                           {"reference_length", r.bleu.reference_length}};
  return {{"bleu", r.bleu.score},
          {"bleu_detail", detail},
          {"accuracy_micro", r.accuracy.micro},
          {"accuracy_paper_macro", r.accuracy.paper_macro},
          {"per_style", per},
          {"confusion", r.confusion},
          {"style_order", {"party", "cocktail", "feminine", "summer", "winter", "none"}},
          {"n_test", r.n_test}};
}

std::string report_table(const EvalReport& r) {
  std::string out = fmt::format("{:<10} {:>9} {:>9} {:>8}\n", "Look", "Precision", "Recall", "Support");
  for (size_t k = 0; k < r.per_style.size() && k < kAllStyles.size(); ++k) {
    out += fmt::format("{:<10} {:>9} {:>9} {:>8}\n", style_name(kAllStyles[k]), opt_text(r.per_style[k].precision),
                       opt_text(r.per_style[k].recall), r.per_style[k].support);
  }
  out += fmt::format("\naccuracy (micro)        {:.4f}\n", r.accuracy.micro);
  out += fmt::format("accuracy (one-vs-rest)  {:.4f}\n", r.accuracy.paper_macro);
  out += fmt::format("BLEU-4                  {:.4f}  (p1..p4", r.bleu.score);
  for (double p : r.bleu.precisions) out += fmt::format(" {:.3f}", p);
  out += fmt::format(", BP {:.3f})\n", r.bleu.brevity_penalty);
  out += fmt::format("test images             {}\n", r.n_test);
  return out;
}

PixelGrid render_confusion(const ConfusionMatrix& m, int cell) {
  check_square(m);
  const int n = static_cast<int>(m.size());
  PixelGrid img(n * cell, n * cell, 1.0);
  for (int i = 0; i < n; ++i) {
    int64_t row = 0;
    for (int j = 0; j < n; ++j) row += m[static_cast<size_t>(i)][static_cast<size_t>(j)];
    for (int j = 0; j < n; ++j) {
      const double v = row > 0 ? static_cast<double>(m[static_cast<size_t>(i)][static_cast<size_t>(j)]) / row : 0.0;
      // White (0) to dark blue (1).
      const double rgb[3] = {1.0 - 0.9 * v, 1.0 - 0.7 * v, 1.0 - 0.3 * v};
      for (int y = 1; y < cell - 1; ++y)
        for (int x = 1; x < cell - 1; ++x)
          for (int c = 0; c < 3; ++c) img.at(i * cell + y, j * cell + x, c) = rgb[c];
    }
  }
  return img;
}

}  // namespace attr2style
