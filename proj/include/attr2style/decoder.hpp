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
#include "attr2style/encoder.hpp"
#include "attr2style/params.hpp"

#include <span>
#include <vector>

// Soft-attention LSTM caption decoder.
//
// Per step t, with annotation rows a_i and previous hidden state h:
//   e_i   = v . tanh(W1 a_i + W2 h + b)
//   alpha = softmax(e)
//   z     = sum_i alpha_i a_i          (optionally scaled by sigmoid(g . h))
//   (h', c') = LSTM([embed(prev word) ; z], (h, c))
//   logits = W_out dropout(h') + b_out
namespace attr2style {

struct AttentionParams {
  Mat w1;  // d1 x D
  Mat w2;  // d1 x H
  Vec b;   // d1
  Vec v;   // d1
};

/// v . tanh(W1 a_i + W2 h + b) for every annotation row. Throws Error on
/// dimension mismatch.
Vec attention_scores(const AttentionParams& p, const AnnotationGrid& grid, const Vec& h_prev);
/// Softmax with the maximum subtracted before exponentiation.
Vec attention_weights(const Vec& scores);
/// sum_i alpha_i a_i.
Vec context_vector(const Vec& alpha, const AnnotationGrid& grid);

struct DecoderDims {
  int vocab = 0;
  int embed = 64;
  int hidden = 128;
  int attention = 64;
  int feature = 128;
};

struct DecoderOptions {
  bool gate = false;
  double dropout = 0.5;
  /// Weight of sum_i (1 - sum_t alpha_ti)^2; 0 disables it.
  double doubly_stochastic = 0.0;
};

struct DecoderState {
  Vec h;
  Vec c;
  int t = 0;
};

struct StepOutput {
  DecoderState state;
  Vec logits;
  Vec alpha;
};

struct TeacherForcedOutput {
  Mat logits;  // T x |V|, rows >= steps are zero
  Mat alphas;  // T x L, rows >= steps are zero
  int steps = 0;
};

/// Per-image attention precomputation (W1 a_i for all i).
struct DecoderContext {
  const AnnotationGrid* grid = nullptr;
  Mat projected;  // L x d1
};

class AttnDecoder {
 public:
  /// Declares decoder.* entries in `store`.
  AttnDecoder(const DecoderDims& dims, const DecoderOptions& options, ParamStore& store);

  const DecoderDims& dims() const { return dims_; }
  const DecoderOptions& options() const { return options_; }
  DecoderOptions& options() { return options_; }

  /// Uniform(-0.1, 0.1) weights, zero biases, forget-gate bias 1.
  void init_random(ParamStore& store, Rng& rng) const;
  AttentionParams attention_params(const ParamStore& p) const;

  DecoderContext prepare(const ParamStore& p, const AnnotationGrid& grid) const;
  /// h0 = tanh(P_h mean_i a_i), c0 = tanh(P_c mean_i a_i).
  DecoderState init_state(const ParamStore& p, const AnnotationGrid& grid) const;
  /// One evaluation-mode step. Throws Error for an out-of-range word id.
  StepOutput step(const ParamStore& p, const DecoderContext& ctx, const DecoderState& state, int prev_word) const;
  StepOutput decode_step(const ParamStore& p, const DecoderState& state, int prev_word, const AnnotationGrid& grid) const;

  /// Step t consumes ids[t]; runs max(1, min(length - 1, T)) steps.
  TeacherForcedOutput forward_teacher_forced(const ParamStore& p, const AnnotationGrid& grid, std::span<const int> ids,
                                             int length) const;

  struct LossStats {
    double ce_sum = 0.0;  // summed token cross-entropy (natural log)
    int tokens = 0;
    double reg = 0.0;     // doubly-stochastic penalty before weighting
  };

  /// Teacher-forced loss for one caption. When `grads` is given, accumulates
  /// d(ce_scale * ce_sum + reg_scale * lambda * reg) into entries flagged in
  /// `trainable` and, when `d_features` is non-null, into d_features (L x D).
  /// `dropout_rng` enables train-mode dropout.
  LossStats loss(const ParamStore& p, const AnnotationGrid& grid, std::span<const int> ids, int length,
                 Rng* dropout_rng = nullptr, ParamStore* grads = nullptr, const std::vector<bool>* trainable = nullptr,
                 Mat* d_features = nullptr, double ce_scale = 1.0, double reg_scale = 1.0) const;

 private:
  struct Cache;
  StepOutput step_impl(const ParamStore& p, const DecoderContext& ctx, const DecoderState& state, int prev_word,
                       Cache* cache, Rng* dropout_rng) const;

  DecoderDims dims_;
  DecoderOptions options_;
  int embedding_, att_w1_, att_w2_, att_b_, att_v_;
  int lstm_w_ih_, lstm_w_hh_, lstm_b_;
  int out_w_, out_b_;
  int init_h_, init_c_;
  int gate_w_;
};

}  // namespace attr2style
