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

#include "attr2style/image.hpp"
#include "attr2style/model.hpp"
#include "attr2style/vocab.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

namespace attr2style {

struct DecodeConfig {
  int beam = 3;
  int max_len = 20;  // including START
  bool length_norm = false;
};

struct CaptionResult {
  std::vector<int> ids;             // generated ids without START/END
  std::vector<std::string> tokens;  // words for `ids`
  double log_prob = 0.0;
  std::vector<Vec> alphas;          // one per step, END step included
  bool complete = false;            // ended with END
};

/// Log-softmax with PAD, START and UNK removed from the support.
Vec decoding_log_probs(const Vec& logits);

namespace search {

template <class State>
struct Hypothesis {
  std::vector<int> ids;
  double log_prob = 0.0;
  std::vector<Vec> alphas;
  State state;
  bool complete = false;
};

/// Step function signature: (const State&, int prev_id) -> std::tuple-like
/// {Vec logits, Vec alpha, State next}.
template <class State>
struct StepOut {
  Vec logits;
  Vec alpha;
  State next;
};

template <class State, class StepFn>
Hypothesis<State> greedy(State init, StepFn&& step, int max_len) {
  Hypothesis<State> h{{}, 0.0, {}, std::move(init), false};
  int prev = Vocab::kStart;
  for (int t = 1; t < max_len; ++t) {
    StepOut<State> o = step(h.state, prev);
    const Vec lp = decoding_log_probs(o.logits);
    Eigen::Index best = 0;
    for (Eigen::Index w = 1; w < lp.size(); ++w)
      if (lp[w] > lp[best]) best = w;
    h.log_prob += lp[best];
    h.alphas.push_back(std::move(o.alpha));
    h.state = std::move(o.next);
    if (best == Vocab::kEnd) {
      h.complete = true;
      break;
    }
    h.ids.push_back(static_cast<int>(best));
    prev = static_cast<int>(best);
  }
  return h;
}

inline double hypothesis_score(double log_prob, size_t steps, bool length_norm) {
  return length_norm && steps > 0 ? log_prob / static_cast<double>(steps) : log_prob;
}

/// Keeps the k best expansions per step; END expansions retire to the
/// completed pool. Stops once no live hypothesis can beat the best completed
/// one (only when scores are unnormalized) or at max_len.
template <class State, class StepFn>
Hypothesis<State> beam(State init, StepFn&& step, int k, int max_len, bool length_norm) {
  if (k < 1) throw Error("beam size must be >= 1");
  std::vector<Hypothesis<State>> live;
  live.push_back({{}, 0.0, {}, std::move(init), false});
  std::vector<Hypothesis<State>> done;

  struct Cand {
    double score;
    int hyp;
    int word;
  };
  for (int t = 1; t < max_len && !live.empty(); ++t) {
    std::vector<Vec> lps;
    std::vector<StepOut<State>> outs;
    std::vector<Cand> cands;
    for (size_t i = 0; i < live.size(); ++i) {
      const int prev = live[i].ids.empty() ? Vocab::kStart : live[i].ids.back();
      outs.push_back(step(live[i].state, prev));
      lps.push_back(decoding_log_probs(outs.back().logits));
      const Vec& lp = lps.back();
      for (Eigen::Index w = 0; w < lp.size(); ++w)
        if (std::isfinite(lp[w])) cands.push_back({live[i].log_prob + lp[w], static_cast<int>(i), static_cast<int>(w)});
    }
    const size_t keep = std::min(cands.size(), static_cast<size_t>(k));
    std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(keep), cands.end(),
                      [](const Cand& a, const Cand& b) {
                        if (a.score != b.score) return a.score > b.score;
                        if (a.hyp != b.hyp) return a.hyp < b.hyp;
                        return a.word < b.word;
                      });
    std::vector<Hypothesis<State>> next;
    for (size_t c = 0; c < keep; ++c) {
      const Cand& cd = cands[c];
      const auto& parent = live[static_cast<size_t>(cd.hyp)];
      Hypothesis<State> h{parent.ids, cd.score, parent.alphas, outs[static_cast<size_t>(cd.hyp)].next, false};
      h.alphas.push_back(outs[static_cast<size_t>(cd.hyp)].alpha);
      if (cd.word == Vocab::kEnd) {
        h.complete = true;
        done.push_back(std::move(h));
      } else {
        h.ids.push_back(cd.word);
        next.push_back(std::move(h));
      }
    }
    live = std::move(next);
    if (!length_norm && !done.empty() && !live.empty()) {
      double best_done = -std::numeric_limits<double>::infinity();
      for (const auto& d : done) best_done = std::max(best_done, d.log_prob);
      double best_live = -std::numeric_limits<double>::infinity();
      for (const auto& l : live) best_live = std::max(best_live, l.log_prob);
      if (best_done >= best_live) break;
    }
  }
  const auto& pool = done.empty() ? live : done;
  if (pool.empty()) throw Error("beam search produced no hypothesis");
  size_t best = 0;
  for (size_t i = 1; i < pool.size(); ++i) {
    if (hypothesis_score(pool[i].log_prob, pool[i].alphas.size(), length_norm) >
        hypothesis_score(pool[best].log_prob, pool[best].alphas.size(), length_norm))
      best = i;
  }
  return pool[best];
}

}  // namespace search

/// `image` is a preprocessed model input.
CaptionResult greedy_caption(const CaptionModel& model, const Vocab& vocab, const PixelGrid& image, int max_len);
CaptionResult beam_search(const CaptionModel& model, const Vocab& vocab, const PixelGrid& image, int k, int max_len,
                          bool length_norm = false);
/// Greedy when cfg.beam == 1, beam search otherwise.
CaptionResult caption_image(const CaptionModel& model, const Vocab& vocab, const PixelGrid& image,
                            const DecodeConfig& cfg);

/// alpha on a grid_h x grid_w lattice -> bilinear heat at out_h x out_w,
/// scaled so its maximum is 1.
std::vector<double> attention_heat(const Vec& alpha, int grid_h, int grid_w, int out_h, int out_w);
/// 0.6 * jet(heat) + 0.4 * image.
PixelGrid blend_heat(const PixelGrid& image, const std::vector<double>& heat);

/// Writes one overlay PNG per generated word plus composite.png (the
/// overlays side by side, each labelled with its word). `image` is RGB in
/// [0, 1]. Returns the written paths.
std::vector<std::string> attention_overlay(const PixelGrid& image, const CaptionResult& result, int grid_h, int grid_w,
                                           const std::string& out_dir);

}  // namespace attr2style
