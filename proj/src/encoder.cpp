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

#include "attr2style/encoder.hpp"

#include "attr2style/archive.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <optional>

namespace attr2style {

struct Encoder::Unit {
  int weight = -1;
  int bias = -1;
  int gamma = -1, beta = -1, mean = -1, var = -1;
  ConvGeom geom;
  bool relu = true;
  int block = 0;
};

struct Encoder::Bottleneck {
  int conv1 = -1, conv2 = -1, conv3 = -1, down = -1;  // unit ids
  int block = 0;
};

std::string_view encoder_mode_name(EncoderMode m) { return m == EncoderMode::toy ? "toy" : "full"; }

EncoderMode parse_encoder_mode(std::string_view s) {
  if (s == "toy") return EncoderMode::toy;
  if (s == "full") return EncoderMode::full;
  throw Error("unknown encoder mode '" + std::string(s) + "' (allowed: toy, full)");
}

FeatureMap to_feature_map(const PixelGrid& pixels) {
  FeatureMap x{Mat(3, static_cast<Eigen::Index>(pixels.height) * pixels.width), pixels.height, pixels.width};
  for (int i = 0; i < pixels.height * pixels.width; ++i)
    for (int c = 0; c < 3; ++c) x.data(c, i) = pixels.data[static_cast<size_t>(i) * 3 + c];
  return x;
}

Encoder::~Encoder() = default;
Encoder::Encoder(Encoder&&) noexcept = default;
Encoder& Encoder::operator=(Encoder&&) noexcept = default;

Encoder::Encoder(EncoderMode mode, ParamStore& store) : mode_(mode) {
  auto conv = [&](const std::string& name, int cin, int cout, ConvGeom g, bool bias, int block) {
    Unit u;
    u.weight = store.add(name + ".weight", {cout, cin, g.kernel, g.kernel});
    if (bias) u.bias = store.add(name + ".bias", {cout});
    u.geom = g;
    u.block = block;
    units_.push_back(u);
    return static_cast<int>(units_.size()) - 1;
  };
  auto bn = [&](int unit, const std::string& name) {
    Unit& u = units_[static_cast<size_t>(unit)];
    const auto c = store.entry(u.weight).shape[0];
    u.gamma = store.add(name + ".weight", {c});
    u.beta = store.add(name + ".bias", {c});
    u.mean = store.add(name + ".running_mean", {c}, true);
    u.var = store.add(name + ".running_var", {c}, true);
  };

  if (mode == EncoderMode::toy) {
    const int ch[] = {3, 16, 32, 64, 128};
    for (int b = 0; b < 4; ++b) {
      ConvGeom g = b < 3 ? ConvGeom{3, 2, 0} : ConvGeom{3, 1, 1};
      conv("encoder.block" + std::to_string(b + 1), ch[b], ch[b + 1], g, true, b + 1);
    }
    return;
  }

  const std::string root = "encoder.backbone.";
  const int stem = conv(root + "conv1", 3, 64, {7, 2, 3}, false, 0);
  bn(stem, root + "bn1");
  const int depth[] = {3, 4, 23, 3};
  const int width[] = {64, 128, 256, 512};
  int in_ch = 64;
  for (int s = 0; s < 4; ++s) {
    const int w = width[s], out_ch = w * 4;
    for (int i = 0; i < depth[s]; ++i) {
      const std::string pre = root + "layer" + std::to_string(s + 1) + "." + std::to_string(i) + ".";
      const int stride = (i == 0 && s > 0) ? 2 : 1;
      Bottleneck b;
      b.block = s + 1;
      b.conv1 = conv(pre + "conv1", in_ch, w, {1, 1, 0}, false, s + 1);
      bn(b.conv1, pre + "bn1");
      b.conv2 = conv(pre + "conv2", w, w, {3, stride, 1}, false, s + 1);
      bn(b.conv2, pre + "bn2");
      b.conv3 = conv(pre + "conv3", w, out_ch, {1, 1, 0}, false, s + 1);
      bn(b.conv3, pre + "bn3");
      units_[static_cast<size_t>(b.conv3)].relu = false;
      if (i == 0) {
        b.down = conv(pre + "downsample.0", in_ch, out_ch, {1, stride, 0}, false, s + 1);
        bn(b.down, pre + "downsample.1");
        units_[static_cast<size_t>(b.down)].relu = false;
      }
      blocks_.push_back(b);
      in_ch = out_ch;
    }
  }
  head_scale_ = store.add("encoder.head.scale", {2048});
  head_shift_ = store.add("encoder.head.shift", {2048});
}

void Encoder::init_random(ParamStore& store, Rng& rng) const {
  for (const Unit& u : units_) {
    auto w = store.vec(u.weight);
    const auto& shape = store.entry(u.weight).shape;
    const double std = std::sqrt(2.0 / static_cast<double>(shape[1] * shape[2] * shape[3]));
    for (Eigen::Index i = 0; i < w.size(); ++i) w[i] = std * rng.normal();
    if (u.bias >= 0) store.vec(u.bias).setZero();
    if (u.gamma >= 0) {
      store.vec(u.gamma).setOnes();
      store.vec(u.beta).setZero();
      store.vec(u.mean).setZero();
      store.vec(u.var).setOnes();
    }
  }
  // Zeroed last norm per residual branch: every block starts as identity.
  for (const Bottleneck& b : blocks_) store.vec(units_[static_cast<size_t>(b.conv3)].gamma).setZero();
  if (head_scale_ >= 0) {
    store.vec(head_scale_).setOnes();
    store.vec(head_shift_).setZero();
  }
}

void Encoder::load_pretrained(ParamStore& store, const std::string& path) const {
  if (path.empty()) throw Error("full encoder mode requires model.encoder.pretrained_weights");
  if (!std::filesystem::exists(path)) throw Error("pretrained weights file not found: " + path);
  Archive ar = read_archive(path);
  std::map<std::string, const NamedArray*> by_name;
  for (const auto& a : ar.arrays) by_name[a.name] = &a;
  std::vector<std::string> problems;
  for (int i = 0; i < store.size(); ++i) {
    const auto& e = store.entry(i);
    if (e.name.rfind("encoder.", 0) != 0) continue;
    auto it = by_name.find(e.name);
    const bool is_head = e.name.rfind("encoder.head.", 0) == 0;
    if (it == by_name.end()) {
      if (!is_head) problems.push_back(e.name + " (missing)");
      continue;
    }
    if (it->second->shape != e.shape) {
      problems.push_back(e.name + " (shape " + shape_str(it->second->shape) + ", expected " + shape_str(e.shape) + ")");
      continue;
    }
    store.entry(i).data = it->second->data;
  }
  if (!problems.empty()) {
    std::string msg = "pretrained weights " + path + " do not match the encoder:";
    for (size_t i = 0; i < problems.size() && i < 10; ++i) msg += "\n  " + problems[i];
    if (problems.size() > 10) msg += "\n  ... and " + std::to_string(problems.size() - 10) + " more";
    throw Error(msg);
  }
}

FeatureMap Encoder::run_unit(const ParamStore& p, const Unit& u, const FeatureMap& x, Tape* tape, int slot) const {
  Mat* cols = nullptr;
  Tape::UnitCache* cache = nullptr;
  if (tape) {
    cache = &tape->units[static_cast<size_t>(slot)];
    cache->recorded = true;
    cache->in_h = x.h;
    cache->in_w = x.w;
    cols = &cache->cols;
  }
  FeatureMap y = conv_forward(x, p.mat(u.weight), u.bias >= 0 ? p.entry(u.bias).data.data() : nullptr, u.geom, cols);
  if (u.gamma >= 0) {
    if (cache) cache->pre_bn = y.data;
    batchnorm_forward(y.data, p.vec(u.gamma), p.vec(u.beta), p.vec(u.mean), p.vec(u.var));
  }
  if (u.relu) relu_inplace(y.data);
  if (cache) {
    cache->out = y.data;
    cache->out_h = y.h;
    cache->out_w = y.w;
  }
  return y;
}

FeatureMap Encoder::unit_backward(const ParamStore& p, const Unit& u, const Tape& tape, int slot, const FeatureMap& dy_in,
                                  ParamStore& grads, const std::vector<bool>& trainable, bool need_dx) const {
  const auto& cache = tape.units[static_cast<size_t>(slot)];
  Mat dy = u.relu ? relu_backward(dy_in.data, cache.out) : dy_in.data;
  if (u.gamma >= 0) {
    const bool train_bn = trainable[static_cast<size_t>(u.gamma)];
    dy = batchnorm_backward(dy, cache.pre_bn, p.vec(u.gamma), p.vec(u.mean), p.vec(u.var),
                            train_bn ? grads.entry(u.gamma).data.data() : nullptr,
                            train_bn ? grads.entry(u.beta).data.data() : nullptr);
  }
  const bool train_w = trainable[static_cast<size_t>(u.weight)];
  std::optional<MatMap> dw;
  if (train_w) dw.emplace(grads.mat(u.weight));
  double* db = (u.bias >= 0 && trainable[static_cast<size_t>(u.bias)]) ? grads.entry(u.bias).data.data() : nullptr;
  return conv_backward(FeatureMap{std::move(dy), cache.out_h, cache.out_w}, cache.cols, p.mat(u.weight), u.geom,
                       cache.in_h, cache.in_w, dw ? &*dw : nullptr, db, need_dx);
}

AnnotationGrid Encoder::encode(const ParamStore& params, const PixelGrid& pixels) const {
  Tape tape;
  tape.record_from = 99;
  return forward(params, pixels, tape);
}

AnnotationGrid Encoder::forward(const ParamStore& params, const PixelGrid& pixels, Tape& tape) const {
  const int side = input_side();
  if (pixels.height != side || pixels.width != side)
    throw Error("encoder (" + std::string(encoder_mode_name(mode_)) + " mode) expects a " + std::to_string(side) + "x" +
                std::to_string(side) + " input, got " + std::to_string(pixels.height) + "x" +
                std::to_string(pixels.width));
  tape.units.assign(units_.size(), {});
  FeatureMap x = to_feature_map(pixels);

  if (mode_ == EncoderMode::toy) {
    const bool record = tape.record_from <= 4;
    for (size_t i = 0; i < units_.size(); ++i)
      x = run_unit(params, units_[i], x, record ? &tape : nullptr, static_cast<int>(i));
    return AnnotationGrid{x.data.transpose(), x.h, x.w};
  }

  x = run_unit(params, units_[0], x, nullptr, 0);
  x = maxpool_forward(x, {3, 2, 1});
  tape.block_out.assign(blocks_.size(), {});
  for (size_t bi = 0; bi < blocks_.size(); ++bi) {
    const Bottleneck& b = blocks_[bi];
    Tape* t = b.block >= tape.record_from ? &tape : nullptr;
    FeatureMap o = run_unit(params, units_[static_cast<size_t>(b.conv1)], x, t, b.conv1);
    o = run_unit(params, units_[static_cast<size_t>(b.conv2)], o, t, b.conv2);
    o = run_unit(params, units_[static_cast<size_t>(b.conv3)], o, t, b.conv3);
    if (b.down >= 0) {
      o.data += run_unit(params, units_[static_cast<size_t>(b.down)], x, t, b.down).data;
    } else {
      o.data += x.data;
    }
    relu_inplace(o.data);
    if (t) tape.block_out[bi] = o.data;
    x = std::move(o);
  }
  tape.trunk_h = x.h;
  tape.trunk_w = x.w;
  FeatureMap pooled = adaptive_avgpool_forward(x, grid_h(), grid_w());
  if (tape.record_from <= 5) tape.pooled = pooled.data;
  const auto scale = params.vec(head_scale_);
  const auto shift = params.vec(head_shift_);
  for (Eigen::Index c = 0; c < pooled.data.rows(); ++c)
    pooled.data.row(c).array() = pooled.data.row(c).array() * scale[c] + shift[c];
  return AnnotationGrid{pooled.data.transpose(), pooled.h, pooled.w};
}

void Encoder::backward(const ParamStore& params, const Tape& tape, const Mat& d_features, ParamStore& grads,
                       const std::vector<bool>& trainable) const {
  FeatureMap dy{d_features.transpose(), grid_h(), grid_w()};

  if (mode_ == EncoderMode::toy) {
    for (size_t i = units_.size(); i-- > 0;) {
      if (!tape.units[i].recorded) throw Error("encoder backward: forward pass was not recorded");
      dy = unit_backward(params, units_[i], tape, static_cast<int>(i), dy, grads, trainable, i > 0);
    }
    return;
  }

  const auto hs = static_cast<size_t>(head_scale_);
  if (trainable[hs]) {
    auto ds = grads.vec(head_scale_);
    auto dsh = grads.vec(head_shift_);
    for (Eigen::Index c = 0; c < dy.data.rows(); ++c) {
      ds[c] += (dy.data.row(c).array() * tape.pooled.row(c).array()).sum();
      dsh[c] += dy.data.row(c).sum();
    }
  }
  int lowest = 99;
  for (const Bottleneck& b : blocks_)
    if (trainable[static_cast<size_t>(units_[static_cast<size_t>(b.conv1)].weight)]) lowest = std::min(lowest, b.block);
  if (lowest == 99) return;
  if (lowest < tape.record_from) throw Error("encoder backward: stage " + std::to_string(lowest) + " was not recorded");

  const auto scale = params.vec(head_scale_);
  for (Eigen::Index c = 0; c < dy.data.rows(); ++c) dy.data.row(c) *= scale[c];
  dy = adaptive_avgpool_backward(dy, tape.trunk_h, tape.trunk_w);

  for (size_t bi = blocks_.size(); bi-- > 0;) {
    const Bottleneck& b = blocks_[bi];
    if (b.block < lowest) break;
    const bool need_dx = bi > 0 && blocks_[bi - 1].block >= lowest;
    Mat d = relu_backward(dy.data, tape.block_out[bi]);
    const auto& c3 = tape.units[static_cast<size_t>(b.conv3)];
    FeatureMap d_branch{d, c3.out_h, c3.out_w};
    FeatureMap dx;
    if (b.down >= 0) {
      dx = unit_backward(params, units_[static_cast<size_t>(b.down)], tape, b.down, d_branch, grads, trainable, need_dx);
    } else if (need_dx) {
      dx = d_branch;
    }
    FeatureMap g = unit_backward(params, units_[static_cast<size_t>(b.conv3)], tape, b.conv3, d_branch, grads, trainable, true);
    g = unit_backward(params, units_[static_cast<size_t>(b.conv2)], tape, b.conv2, g, grads, trainable, true);
    g = unit_backward(params, units_[static_cast<size_t>(b.conv1)], tape, b.conv1, g, grads, trainable, need_dx);
    if (!need_dx) break;
    dx.data += g.data;
    dy = std::move(dx);
  }
}

int Encoder::block_of(const std::string& name) {
  for (const char* key : {"layer", "encoder.block"}) {
    const auto pos = name.find(key);
    if (pos == std::string::npos) continue;
    const size_t d = pos + std::char_traits<char>::length(key);
    if (d < name.size() && std::isdigit(static_cast<unsigned char>(name[d]))) return name[d] - '0';
  }
  return 0;
}

std::vector<bool> Encoder::trainable_mask(const ParamStore& store, const std::set<int>& blocks) const {
  for (int b : blocks)
    if (b < 2 || b > 4) throw Error("fine-tune block " + std::to_string(b) + " outside {2, 3, 4}");
  std::vector<bool> mask(static_cast<size_t>(store.size()), true);
  for (int i = 0; i < store.size(); ++i) {
    const auto& e = store.entry(i);
    if (e.buffer) {
      mask[static_cast<size_t>(i)] = false;
      continue;
    }
    if (e.name.rfind("encoder.", 0) != 0 || mode_ == EncoderMode::toy) continue;
    if (e.name.rfind("encoder.head.", 0) == 0) continue;
    mask[static_cast<size_t>(i)] = blocks.count(block_of(e.name)) > 0;
  }
  return mask;
}

}  // namespace attr2style
