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


#include "attr2style/archive.hpp"
#include "attr2style/common.hpp"
#include "attr2style/encoder.hpp"
#include "attr2style/model.hpp"
#include "attr2style/trainer.hpp"

#include <doctest.h>

#include <filesystem>

#include "../support/gradcheck.hpp"

using namespace attr2style;
namespace fs = std::filesystem;

namespace {

PixelGrid random_image(int side, uint64_t seed) {
  Rng rng(seed);
  PixelGrid img(side, side);
  for (double& v : img.data) v = rng.uniform(-2.0, 2.0);
  return img;
}

int count_true(const std::vector<bool>& v) {
  int n = 0;
  for (bool b : v) n += b;
  return n;
}

}  // namespace

TEST_CASE("toy mode: zero input gives a finite 49 x 128 grid") {
  ParamStore store;
  Encoder enc(EncoderMode::toy, store);
  Rng rng(1);
  enc.init_random(store, rng);
  auto g = enc.encode(store, PixelGrid(64, 64, 0.0));
  CHECK(g.locations() == 49);
  CHECK(g.dim() == 128);
  CHECK(g.grid_h == 7);
  CHECK(g.grid_w == 7);
  CHECK(g.features.allFinite());
}

TEST_CASE("toy mode is deterministic and content-independent in shape") {
  ParamStore store;
  Encoder enc(EncoderMode::toy, store);
  Rng rng(2);
  enc.init_random(store, rng);
  auto img = random_image(64, 3);
  auto a = enc.encode(store, img);
  auto b = enc.encode(store, img);
  CHECK(a.features == b.features);
  auto c = enc.encode(store, random_image(64, 4));
  CHECK(c.features.rows() == a.features.rows());
  CHECK(c.features.cols() == a.features.cols());
  CHECK(c.features != a.features);
}

TEST_CASE("wrong input side names the expected side") {
  ParamStore store;
  Encoder enc(EncoderMode::toy, store);
  Rng rng(2);
  enc.init_random(store, rng);
  CHECK_THROWS_WITH_AS(enc.encode(store, PixelGrid(32, 32)), doctest::Contains("64"), Error);
}

TEST_CASE("toy encoder gradients match central differences") {
  ParamStore store;
  Encoder enc(EncoderMode::toy, store);
  Rng rng(7);
  enc.init_random(store, rng);
  // Small random biases so every bias gradient path is exercised.
  for (int i = 0; i < store.size(); ++i)
    if (store.entry(i).shape.size() == 1)
      for (double& v : store.entry(i).data) v = rng.uniform(-0.05, 0.05);
  const auto img = random_image(64, 8);

  Rng wr(9);
  Mat weights(49, 128);
  for (Eigen::Index r = 0; r < weights.rows(); ++r)
    for (Eigen::Index c = 0; c < weights.cols(); ++c) weights(r, c) = wr.uniform(-1.0, 1.0);
  auto objective = [&] { return (enc.encode(store, img).features.array() * weights.array()).sum(); };

  Encoder::Tape tape;
  enc.forward(store, img, tape);
  const auto mask = enc.trainable_mask(store, {});
  ParamStore grads = store.zeros_like(&mask);
  enc.backward(store, tape, weights, grads, mask);

  const double h = 1e-5;
  Rng pick(10);
  int checked = 0;
  double worst = 0.0;
  for (int i = 0; i < store.size(); ++i) {
    if (!mask[static_cast<size_t>(i)]) continue;
    auto& data = store.entry(i).data;
    for (int k = 0; k < 6; ++k) {
      const size_t j = pick.below(data.size());
      const double saved = data[j];
      data[j] = saved + h;
      const double up = objective();
      data[j] = saved - h;
      const double down = objective();
      data[j] = saved;
      const double numeric = (up - down) / (2 * h);
      worst = std::max(worst, testing::rel_error(grads.entry(i).data[j], numeric));
      ++checked;
    }
  }
  CHECK(checked >= 48);
  CHECK(worst < 1e-4);
}

TEST_CASE("block_of parses stage names") {
  CHECK(Encoder::block_of("encoder.backbone.layer2.0.conv1.weight") == 2);
  CHECK(Encoder::block_of("encoder.backbone.layer4.2.bn3.running_var") == 4);
  CHECK(Encoder::block_of("encoder.backbone.conv1.weight") == 0);
  CHECK(Encoder::block_of("encoder.head.scale") == 0);
  CHECK(Encoder::block_of("decoder.att_v") == 0);
}

TEST_CASE("full mode trainability masks") {
  ParamStore layout(false);
  Encoder enc(EncoderMode::full, layout);

  auto none = enc.trainable_mask(layout, {});
  for (int i = 0; i < layout.size(); ++i) {
    const auto& n = layout.name(i);
    if (n.rfind("encoder.", 0) != 0) continue;
    CHECK_MESSAGE(none[static_cast<size_t>(i)] == (n.rfind("encoder.head.", 0) == 0), n);
  }

  auto four = enc.trainable_mask(layout, {4});
  auto all = enc.trainable_mask(layout, {2, 3, 4});
  CHECK(count_true(all) > count_true(four));
  CHECK(count_true(four) > count_true(none));
  for (int i = 0; i < layout.size(); ++i) {
    const auto& n = layout.name(i);
    const int b = Encoder::block_of(n);
    if (b == 1 || n.find("backbone.conv1") != std::string::npos || n.find("backbone.bn1") != std::string::npos)
      CHECK_FALSE(all[static_cast<size_t>(i)]);
    if (layout.entry(i).buffer) CHECK_FALSE(all[static_cast<size_t>(i)]);
  }
  CHECK_THROWS_AS(enc.trainable_mask(layout, {1}), Error);
  CHECK_THROWS_AS(enc.trainable_mask(layout, {5}), Error);
}

TEST_CASE("toy mode trains every encoder parameter") {
  ParamStore layout(false);
  Encoder enc(EncoderMode::toy, layout);
  auto m = enc.trainable_mask(layout, {});
  CHECK(count_true(m) == layout.size());
}

TEST_CASE("full mode requires its weights file") {
  ModelConfig cfg;
  cfg.encoder_mode = EncoderMode::full;
  cfg.pretrained_weights = (fs::temp_directory_path() / "a2s_no_such_weights.npz").string();
  CaptionModel model(cfg, 8);
  CHECK_THROWS_WITH_AS(model.init_generic(1), doctest::Contains("not found"), Error);
}

TEST_CASE("full mode: pretrained archive, 196 x 2048 grid, frozen stage stays fixed") {
  const auto dir = fs::temp_directory_path() / "a2s_full_encoder";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const auto weights = (dir / "resnet101.npz").string();
  {
    ParamStore store;
    Encoder enc(EncoderMode::full, store);
    Rng rng(31);
    enc.init_random(store, rng);
    Archive ar;
    for (int i = 0; i < store.size(); ++i) {
      const auto& e = store.entry(i);
      if (e.name.rfind("encoder.backbone.", 0) == 0) ar.arrays.push_back({e.name, e.shape, e.data, DType::f32});
    }
    write_archive(weights, ar);
  }

  ModelConfig cfg;
  cfg.encoder_mode = EncoderMode::full;
  cfg.embed = 8;
  cfg.hidden = 8;
  cfg.attention = 8;
  cfg.pretrained_weights = weights;
  CaptionModel model(cfg, 6);
  model.init_generic(5);

  const auto img = random_image(224, 12);
  auto grid = model.encode(img);
  CHECK(grid.locations() == 196);
  CHECK(grid.dim() == 2048);
  CHECK(grid.features.allFinite());
  CHECK_THROWS_AS(model.encode(random_image(64, 1)), Error);

  TrainConfig tc;
  tc.encoder_blocks = {4};
  tc.lr_encoder = 1e-2;
  tc.threads = 1;
  Trainer trainer(model, tc);
  Example ex;
  ex.image = img;
  ex.caption.ids = {1, 4, 5, 2};
  ex.caption.length = 4;
  const Example* batch[] = {&ex};

  std::vector<std::pair<int, std::vector<double>>> stage2, stage4;
  const auto& p = model.params();
  for (int i = 0; i < p.size(); ++i) {
    if (Encoder::block_of(p.name(i)) == 2) stage2.emplace_back(i, p.entry(i).data);
    if (Encoder::block_of(p.name(i)) == 4 && trainer.trainable()[static_cast<size_t>(i)])
      stage4.emplace_back(i, p.entry(i).data);
  }
  for (int s = 0; s < 10; ++s) trainer.step(batch, static_cast<uint64_t>(s));

  double max_delta2 = 0.0;
  for (const auto& [i, before] : stage2)
    for (size_t j = 0; j < before.size(); ++j) max_delta2 = std::max(max_delta2, std::abs(p.entry(i).data[j] - before[j]));
  CHECK(max_delta2 == 0.0);
  bool moved4 = false;
  for (const auto& [i, before] : stage4) moved4 = moved4 || p.entry(i).data != before;
  CHECK(moved4);
  fs::remove_all(dir);
}
