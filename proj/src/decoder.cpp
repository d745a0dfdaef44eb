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

#include "attr2style/decoder.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <optional>

namespace attr2style {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Vec sigmoid(const Vec& x) { return x.unaryExpr([](double v) { return sigmoid(v); }); }

// Shared by the standalone op and the decoder so both produce identical bits.
Vec scores_from_projection(const Mat& projected, const Eigen::Ref<const Mat>& w2, const Eigen::Ref<const Vec>& b,
                           const Eigen::Ref<const Vec>& v, const Vec& h_prev, Mat* hidden_out) {
  Vec q = w2 * h_prev + b;
  Mat m = (projected.rowwise() + q.transpose()).array().tanh().matrix();
  Vec e = m * v;
  if (hidden_out) *hidden_out = std::move(m);
  return e;
}

// log p(i) for every logit.
Vec log_softmax(const Vec& logits) {
  const double mx = logits.maxCoeff();
  const double lse = mx + std::log((logits.array() - mx).exp().sum());
  return logits.array() - lse;
}

}  // namespace

Vec attention_scores(const AttentionParams& p, const AnnotationGrid& grid, const Vec& h_prev) {
  const auto d1 = p.w1.rows();
  if (p.w1.cols() != grid.features.cols() || p.w2.rows() != d1 || p.w2.cols() != h_prev.size() || p.b.size() != d1 ||
      p.v.size() != d1) {
    throw Error(fmt::format("attention dimension mismatch: W1 {}x{}, W2 {}x{}, b {}, v {}, D {}, H {}", p.w1.rows(),
                            p.w1.cols(), p.w2.rows(), p.w2.cols(), p.b.size(), p.v.size(), grid.features.cols(),
                            h_prev.size()));
  }
  Mat projected = grid.features * p.w1.transpose();
  return scores_from_projection(projected, p.w2, p.b, p.v, h_prev, nullptr);
}

Vec attention_weights(const Vec& scores) {
  Vec w = (scores.array() - scores.maxCoeff()).exp();
  return w / w.sum();
}

Vec context_vector(const Vec& alpha, const AnnotationGrid& grid) {
  if (alpha.size() != grid.features.rows()) {
    throw Error(fmt::format("context_vector: {} weights for {} locations", alpha.size(), grid.features.rows()));
  }
  return grid.features.transpose() * alpha;
}

struct AttnDecoder::Cache {
  int prev = 0;
  Vec h_prev, c_prev;
  Mat hidden;  // tanh layer of the attention MLP, L x d1
  Vec alpha;
  Vec z_raw;
  double beta = 1.0;
  Vec x;
  Vec gi, gf, gg, go;
  Vec tanh_c;
  Vec h_drop;
  Vec mask;  // empty when dropout is off
};

AttnDecoder::AttnDecoder(const DecoderDims& dims, const DecoderOptions& options, ParamStore& store)
    : dims_(dims), options_(options) {
  if (dims.vocab < 4 || dims.embed <= 0 || dims.hidden <= 0 || dims.attention <= 0 || dims.feature <= 0) {
    throw Error(fmt::format("invalid decoder dims: V={} E={} H={} d1={} D={}", dims.vocab, dims.embed, dims.hidden,
                            dims.attention, dims.feature));
  }
  const int64_t v = dims.vocab, e = dims.embed, h = dims.hidden, a = dims.attention, d = dims.feature;
  embedding_ = store.add("decoder.embedding", {v, e});
  att_w1_ = store.add("decoder.att_W1", {a, d});
  att_w2_ = store.add("decoder.att_W2", {a, h});
  att_b_ = store.add("decoder.att_b", {a});
  att_v_ = store.add("decoder.att_v", {a});
  lstm_w_ih_ = store.add("decoder.lstm_W_ih", {4 * h, e + d});
  lstm_w_hh_ = store.add("decoder.lstm_W_hh", {4 * h, h});
  lstm_b_ = store.add("decoder.lstm_b", {4 * h});
  out_w_ = store.add("decoder.out_W", {v, h});
  out_b_ = store.add("decoder.out_b", {v});
  init_h_ = store.add("decoder.init_h_W", {h, d});
  init_c_ = store.add("decoder.init_c_W", {h, d});
  gate_w_ = store.add("decoder.gate_W", {1, h});
}

void AttnDecoder::init_random(ParamStore& store, Rng& rng) const {
  for (int idx : {embedding_, att_w1_, att_w2_, att_v_, lstm_w_ih_, lstm_w_hh_, out_w_, init_h_, init_c_, gate_w_}) {
    for (double& x : store.entry(idx).data) x = rng.uniform(-0.1, 0.1);
  }
  for (int idx : {att_b_, lstm_b_, out_b_}) std::fill(store.entry(idx).data.begin(), store.entry(idx).data.end(), 0.0);
  auto b = store.vec(lstm_b_);
  b.segment(dims_.hidden, dims_.hidden).setOnes();
}

AttentionParams AttnDecoder::attention_params(const ParamStore& p) const {
  return {p.mat(att_w1_), p.mat(att_w2_), p.vec(att_b_), p.vec(att_v_)};
}

DecoderContext AttnDecoder::prepare(const ParamStore& p, const AnnotationGrid& grid) const {
  if (grid.dim() != dims_.feature || grid.locations() == 0) {
    throw Error(fmt::format("annotation grid {}x{} does not match decoder feature size {}", grid.locations(), grid.dim(),
                            dims_.feature));
  }
  return {&grid, grid.features * p.mat(att_w1_).transpose()};
}

DecoderState AttnDecoder::init_state(const ParamStore& p, const AnnotationGrid& grid) const {
  if (grid.dim() != dims_.feature || grid.locations() == 0) {
    throw Error(fmt::format("annotation grid {}x{} does not match decoder feature size {}", grid.locations(), grid.dim(),
                            dims_.feature));
  }
  Vec mean = grid.features.colwise().mean().transpose();
  DecoderState s;
  s.h = (p.mat(init_h_) * mean).array().tanh();
  s.c = (p.mat(init_c_) * mean).array().tanh();
  s.t = 0;
  return s;
}

StepOutput AttnDecoder::step_impl(const ParamStore& p, const DecoderContext& ctx, const DecoderState& state,
                                  int prev_word, Cache* cache, Rng* dropout_rng) const {
  if (prev_word < 0 || prev_word >= dims_.vocab) {
    throw Error(fmt::format("invalid word id {} (vocabulary size {})", prev_word, dims_.vocab));
  }
  const int hn = dims_.hidden;
  const Mat& feats = ctx.grid->features;

  Mat hidden;
  Vec e = scores_from_projection(ctx.projected, p.mat(att_w2_), p.vec(att_b_), p.vec(att_v_), state.h,
                                 cache ? &hidden : nullptr);
  Vec alpha = attention_weights(e);
  Vec z_raw = feats.transpose() * alpha;
  double beta = 1.0;
  if (options_.gate) beta = sigmoid(p.mat(gate_w_).row(0).dot(state.h));

  Vec x(dims_.embed + dims_.feature);
  x.head(dims_.embed) = p.mat(embedding_).row(prev_word).transpose();
  x.tail(dims_.feature) = options_.gate ? Vec(beta * z_raw) : z_raw;

  Vec a = p.mat(lstm_w_ih_) * x + p.mat(lstm_w_hh_) * state.h + p.vec(lstm_b_);
  Vec gi = sigmoid(a.segment(0, hn));
  Vec gf = sigmoid(a.segment(hn, hn));
  Vec gg = a.segment(2 * hn, hn).array().tanh();
  Vec go = sigmoid(a.segment(3 * hn, hn));

  StepOutput out;
  out.state.c = gf.cwiseProduct(state.c) + gi.cwiseProduct(gg);
  Vec tanh_c = out.state.c.array().tanh();
  out.state.h = go.cwiseProduct(tanh_c);
  out.state.t = state.t + 1;

  Vec mask;
  Vec h_drop = out.state.h;
  if (dropout_rng && options_.dropout > 0.0) {
    const double keep = 1.0 - options_.dropout;
    mask.resize(hn);
    for (int j = 0; j < hn; ++j) mask[j] = dropout_rng->uniform() < options_.dropout ? 0.0 : 1.0 / keep;
    h_drop = h_drop.cwiseProduct(mask);
  }
  out.logits = p.mat(out_w_) * h_drop + p.vec(out_b_);
  out.alpha = alpha;

  if (cache) {
    cache->prev = prev_word;
    cache->h_prev = state.h;
    cache->c_prev = state.c;
    cache->hidden = std::move(hidden);
    cache->alpha = std::move(alpha);
    cache->z_raw = std::move(z_raw);
    cache->beta = beta;
    cache->x = std::move(x);
    cache->gi = std::move(gi);
    cache->gf = std::move(gf);
    cache->gg = std::move(gg);
    cache->go = std::move(go);
    cache->tanh_c = std::move(tanh_c);
    cache->h_drop = std::move(h_drop);
    cache->mask = std::move(mask);
  }
  return out;
}

StepOutput AttnDecoder::step(const ParamStore& p, const DecoderContext& ctx, const DecoderState& state,
                             int prev_word) const {
  return step_impl(p, ctx, state, prev_word, nullptr, nullptr);
}

StepOutput AttnDecoder::decode_step(const ParamStore& p, const DecoderState& state, int prev_word,
                                    const AnnotationGrid& grid) const {
  return step(p, prepare(p, grid), state, prev_word);
}

TeacherForcedOutput AttnDecoder::forward_teacher_forced(const ParamStore& p, const AnnotationGrid& grid,
                                                        std::span<const int> ids, int length) const {
  const int t_max = static_cast<int>(ids.size());
  if (t_max == 0) throw Error("forward_teacher_forced: empty target");
  TeacherForcedOutput out;
  out.steps = std::clamp(length - 1, 1, t_max);
  out.logits = Mat::Zero(t_max, dims_.vocab);
  out.alphas = Mat::Zero(t_max, grid.locations());
  DecoderContext ctx = prepare(p, grid);
  DecoderState state = init_state(p, grid);
  for (int t = 0; t < out.steps; ++t) {
    StepOutput s = step(p, ctx, state, ids[static_cast<size_t>(t)]);
    out.logits.row(t) = s.logits.transpose();
    out.alphas.row(t) = s.alpha.transpose();
    state = std::move(s.state);
  }
  return out;
}

AttnDecoder::LossStats AttnDecoder::loss(const ParamStore& p, const AnnotationGrid& grid, std::span<const int> ids,
                                         int length, Rng* dropout_rng, ParamStore* grads,
                                         const std::vector<bool>* trainable, Mat* d_features, double ce_scale,
                                         double reg_scale) const {
  LossStats stats;
  length = std::min(length, static_cast<int>(ids.size()));
  const int steps = length - 1;
  if (steps <= 0) return stats;

  DecoderContext ctx = prepare(p, grid);
  const DecoderState init = init_state(p, grid);
  const bool backward = grads != nullptr || d_features != nullptr;
  std::vector<Cache> caches(backward ? static_cast<size_t>(steps) : 0);
  std::vector<Vec> dlogits(backward ? static_cast<size_t>(steps) : 0);
  Vec attn_sum = Vec::Zero(grid.locations());

  DecoderState state = init;
  for (int t = 0; t < steps; ++t) {
    StepOutput s = step_impl(p, ctx, state, ids[static_cast<size_t>(t)], backward ? &caches[static_cast<size_t>(t)] : nullptr,
                             dropout_rng);
    attn_sum += s.alpha;
    const int target = ids[static_cast<size_t>(t) + 1];
    if (target < 0 || target >= dims_.vocab) throw Error(fmt::format("invalid word id {}", target));
    if (target != 0) {
      Vec logp = log_softmax(s.logits);
      stats.ce_sum -= logp[target];
      stats.tokens += 1;
      if (backward) {
        Vec d = logp.array().exp() * ce_scale;
        d[target] -= ce_scale;
        dlogits[static_cast<size_t>(t)] = std::move(d);
      }
    } else if (backward) {
      dlogits[static_cast<size_t>(t)] = Vec::Zero(dims_.vocab);
    }
    state = std::move(s.state);
  }
  stats.reg = (1.0 - attn_sum.array()).square().sum();
  if (!backward) return stats;

  auto active = [&](int idx) {
    return grads != nullptr && grads->allocated(idx) && (trainable == nullptr || (*trainable)[static_cast<size_t>(idx)]);
  };
  std::optional<MatMap> g_out_w, g_w_ih, g_w_hh, g_att_w2, g_gate, g_emb;
  std::optional<VecMap> g_out_b, g_lstm_b, g_att_b, g_att_v;
  if (active(out_w_)) g_out_w.emplace(grads->mat(out_w_));
  if (active(out_b_)) g_out_b.emplace(grads->vec(out_b_));
  if (active(lstm_w_ih_)) g_w_ih.emplace(grads->mat(lstm_w_ih_));
  if (active(lstm_w_hh_)) g_w_hh.emplace(grads->mat(lstm_w_hh_));
  if (active(lstm_b_)) g_lstm_b.emplace(grads->vec(lstm_b_));
  if (active(att_w2_)) g_att_w2.emplace(grads->mat(att_w2_));
  if (active(att_b_)) g_att_b.emplace(grads->vec(att_b_));
  if (active(att_v_)) g_att_v.emplace(grads->vec(att_v_));
  if (active(gate_w_) && options_.gate) g_gate.emplace(grads->mat(gate_w_));
  if (active(embedding_)) g_emb.emplace(grads->mat(embedding_));

  const int hn = dims_.hidden;
  const int en = dims_.embed;
  const Mat& feats = grid.features;
  const ConstMatMap w_out = p.mat(out_w_);
  const ConstMatMap w_ih = p.mat(lstm_w_ih_);
  const ConstMatMap w_hh = p.mat(lstm_w_hh_);
  const ConstMatMap w2 = p.mat(att_w2_);
  const ConstVecMap v = p.vec(att_v_);
  const Vec g_row = p.mat(gate_w_).row(0).transpose();

  // d(reg)/d(alpha_ti) is the same for every step.
  Vec d_alpha_reg;
  const double lambda = options_.doubly_stochastic * reg_scale;
  if (lambda != 0.0) d_alpha_reg = -2.0 * lambda * (1.0 - attn_sum.array());

  Vec dh_next = Vec::Zero(hn);
  Vec dc_next = Vec::Zero(hn);
  Mat d_proj = Mat::Zero(grid.locations(), dims_.attention);
  Mat d_feat = Mat::Zero(grid.locations(), dims_.feature);
  Vec da(4 * hn);

  for (int t = steps - 1; t >= 0; --t) {
    const Cache& c = caches[static_cast<size_t>(t)];
    const Vec& dl = dlogits[static_cast<size_t>(t)];
    if (g_out_w) g_out_w->noalias() += dl * c.h_drop.transpose();
    if (g_out_b) *g_out_b += dl;
    Vec dh = w_out.transpose() * dl;
    if (c.mask.size() > 0) dh = dh.cwiseProduct(c.mask);
    dh += dh_next;

    Vec d_o = dh.cwiseProduct(c.tanh_c);
    Vec dc = dc_next + (dh.cwiseProduct(c.go).array() * (1.0 - c.tanh_c.array().square())).matrix();
    da.segment(0, hn) = (dc.cwiseProduct(c.gg).array() * c.gi.array() * (1.0 - c.gi.array())).matrix();
    da.segment(hn, hn) = (dc.cwiseProduct(c.c_prev).array() * c.gf.array() * (1.0 - c.gf.array())).matrix();
    da.segment(2 * hn, hn) = (dc.cwiseProduct(c.gi).array() * (1.0 - c.gg.array().square())).matrix();
    da.segment(3 * hn, hn) = (d_o.array() * c.go.array() * (1.0 - c.go.array())).matrix();
    dc_next = dc.cwiseProduct(c.gf);

    if (g_w_ih) g_w_ih->noalias() += da * c.x.transpose();
    if (g_w_hh) g_w_hh->noalias() += da * c.h_prev.transpose();
    if (g_lstm_b) *g_lstm_b += da;
    Vec dx = w_ih.transpose() * da;
    Vec dh_prev = w_hh.transpose() * da;
    if (g_emb) g_emb->row(c.prev) += dx.head(en).transpose();

    Vec dz = dx.tail(dims_.feature);
    Vec dz_raw = dz;
    if (options_.gate) {
      dz_raw = c.beta * dz;
      const double ds = dz.dot(c.z_raw) * c.beta * (1.0 - c.beta);
      if (g_gate) g_gate->row(0) += ds * c.h_prev.transpose();
      dh_prev += ds * g_row;
    }

    Vec d_alpha = feats * dz_raw;
    if (lambda != 0.0) d_alpha += d_alpha_reg;
    d_feat.noalias() += c.alpha * dz_raw.transpose();
    const Vec de = c.alpha.cwiseProduct((d_alpha.array() - c.alpha.dot(d_alpha)).matrix());
    if (g_att_v) g_att_v->noalias() += c.hidden.transpose() * de;
    Mat d_pre = ((de * v.transpose()).array() * (1.0 - c.hidden.array().square())).matrix();
    Vec dq = d_pre.colwise().sum().transpose();
    if (g_att_w2) g_att_w2->noalias() += dq * c.h_prev.transpose();
    if (g_att_b) *g_att_b += dq;
    dh_prev.noalias() += w2.transpose() * dq;
    d_proj += d_pre;

    dh_next = std::move(dh_prev);
  }

  if (active(att_w1_)) grads->mat(att_w1_).noalias() += d_proj.transpose() * feats;
  d_feat.noalias() += d_proj * p.mat(att_w1_);

  // Initial state: h0 = tanh(P_h m), c0 = tanh(P_c m), m = mean of rows.
  const Vec mean = feats.colwise().mean().transpose();
  const Vec dpre_h = (dh_next.array() * (1.0 - init.h.array().square())).matrix();
  const Vec dpre_c = (dc_next.array() * (1.0 - init.c.array().square())).matrix();
  if (active(init_h_)) grads->mat(init_h_).noalias() += dpre_h * mean.transpose();
  if (active(init_c_)) grads->mat(init_c_).noalias() += dpre_c * mean.transpose();
  if (d_features) {
    const Vec dm = p.mat(init_h_).transpose() * dpre_h + p.mat(init_c_).transpose() * dpre_c;
    d_feat.rowwise() += (dm / static_cast<double>(grid.locations())).transpose();
    if (d_features->rows() != d_feat.rows() || d_features->cols() != d_feat.cols()) {
      *d_features = Mat::Zero(d_feat.rows(), d_feat.cols());
    }
    *d_features += d_feat;
  }
  return stats;
}

}  // namespace attr2style
