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


#include "attr2style/common.hpp"
#include "attr2style/image.hpp"
#include "attr2style/inference.hpp"
#include "attr2style/model.hpp"
#include "attr2style/vocab.hpp"

#include <doctest.h>

#include <filesystem>
#include <limits>
#include <map>

using namespace attr2style;
namespace fs = std::filesystem;

namespace {

// Synthetic step function over a fixed table of next-word distributions,
// keyed by the prefix generated so far. Words: 2 = END, 4 = a, 5 = b.
using Prefix = std::vector<int>;

struct Lattice {
  std::map<Prefix, std::map<int, double>> table;

  Vec logits(const Prefix& p) const {
    Vec l = Vec::Constant(6, 0.0);
    const auto it = table.find(p);
    REQUIRE(it != table.end());
    for (int w : {2, 4, 5}) {
      const auto f = it->second.find(w);
      l(w) = f == it->second.end() ? -std::numeric_limits<double>::infinity() : std::log(f->second);
    }
    return l;
  }

  auto step_fn() const {
    return [this](const Prefix& p, int prev) {
      Prefix q = p;
      if (prev != Vocab::kStart) q.push_back(prev);
      search::StepOut<Prefix> o{logits(q), Vec::Constant(1, 1.0), q};
      return o;
    };
  }
};

// Exhaustive search for the most probable END-terminated sequence within
// `steps` decoding steps.
void best_sequence(const Lattice& lat, const Prefix& p, double lp, int steps, double& best, Prefix& arg) {
  if (steps == 0) return;
  const Vec l = decoding_log_probs(lat.logits(p));
  for (int w : {2, 4, 5}) {
    if (!std::isfinite(l(w))) continue;
    if (w == 2) {
      if (lp + l(w) > best) {
        best = lp + l(w);
        arg = p;
      }
      continue;
    }
    Prefix q = p;
    q.push_back(w);
    best_sequence(lat, q, lp + l(w), steps - 1, best, arg);
  }
}

Lattice greedy_trap() {
  // Greedy takes "a" (0.6) and then faces a flat distribution; "b" (0.4)
  // leads to an almost certain ending.
  Lattice lat;
  lat.table[{}] = {{4, 0.6}, {5, 0.4}};
  lat.table[{4}] = {{2, 0.34}, {4, 0.33}, {5, 0.33}};
  lat.table[{5}] = {{2, 0.05}, {5, 0.95}};
  lat.table[{4, 4}] = {{2, 1.0}};
  lat.table[{4, 5}] = {{2, 1.0}};
  lat.table[{5, 5}] = {{2, 1.0}};
  return lat;
}

struct Fixture {
  Vocab vocab = Vocab::build({tokenize("red floral print maxi dress with knee length"),
                              tokenize("this dress is a perfect pick for a party look")},
                             1);
  CaptionModel model{ModelConfig{}, static_cast<int>(vocab.size())};

  explicit Fixture(uint64_t seed) { model.init_random(seed); }

  PixelGrid image(uint64_t seed) const {
    Rng rng(seed);
    PixelGrid img(64, 64);
    for (double& v : img.data) v = rng.uniform(-2.0, 2.0);
    return img;
  }
};

void check_simplex(const CaptionResult& r) {
  for (const auto& a : r.alphas) {
    CHECK(a.minCoeff() >= 0.0);
    CHECK(std::abs(a.sum() - 1.0) < 1e-6);
  }
}

}  // namespace

TEST_CASE("decoding_log_probs bans specials") {
  Vec l = Vec::Zero(6);
  auto lp = decoding_log_probs(l);
  CHECK(std::isinf(lp(Vocab::kPad)));
  CHECK(std::isinf(lp(Vocab::kStart)));
  CHECK(std::isinf(lp(Vocab::kUnk)));
  CHECK(lp(Vocab::kEnd) == doctest::Approx(std::log(1.0 / 3.0)));
  CHECK(lp(5) == doctest::Approx(std::log(1.0 / 3.0)));
}

TEST_CASE("beam k=2 beats greedy on a crafted lattice") {
  const auto lat = greedy_trap();
  double best = -1e300;
  Prefix arg;
  best_sequence(lat, {}, 0.0, 3, best, arg);
  CHECK(arg == Prefix{5, 5});

  auto g = search::greedy(Prefix{}, lat.step_fn(), 4);
  CHECK(g.ids == Prefix{4});
  CHECK(g.log_prob < best - 0.1);

  auto b = search::beam(Prefix{}, lat.step_fn(), 2, 4, false);
  CHECK(b.complete);
  CHECK(b.ids == arg);
  CHECK(b.log_prob == doctest::Approx(best).epsilon(1e-12));

  auto b1 = search::beam(Prefix{}, lat.step_fn(), 1, 4, false);
  CHECK(b1.ids == g.ids);
  CHECK(b1.log_prob == g.log_prob);
}

TEST_CASE("beam falls back to the best live hypothesis") {
  Lattice lat;
  lat.table[{}] = {{4, 0.9}, {5, 0.1}};
  lat.table[{4}] = {{4, 0.8}, {5, 0.2}};
  lat.table[{5}] = {{4, 0.5}, {5, 0.5}};
  auto b = search::beam(Prefix{}, lat.step_fn(), 2, 3, false);
  CHECK_FALSE(b.complete);
  CHECK(b.ids == Prefix{4, 4});
  CHECK_THROWS_AS(search::beam(Prefix{}, lat.step_fn(), 0, 3, false), Error);
}

TEST_CASE("greedy breaks ties by lowest id") {
  Lattice lat;
  lat.table[{}] = {{4, 0.5}, {5, 0.5}};
  lat.table[{4}] = {{2, 1.0}};
  auto g = search::greedy(Prefix{}, lat.step_fn(), 5);
  CHECK(g.ids == Prefix{4});
}

TEST_CASE("max_len bounds the caption") {
  Fixture f(1);
  for (uint64_t s = 0; s < 5; ++s) {
    auto g = greedy_caption(f.model, f.vocab, f.image(s), 2);
    CHECK(g.ids.size() <= 1);
    CHECK(g.alphas.size() == 1);
    auto b = beam_search(f.model, f.vocab, f.image(s), 3, 2);
    CHECK(b.ids.size() <= 1);
  }
  CHECK_THROWS_AS(greedy_caption(f.model, f.vocab, f.image(0), 1), Error);
}

TEST_CASE("decoding is deterministic and alphas are on the simplex") {
  Fixture f(2);
  const auto img = f.image(3);
  auto a = greedy_caption(f.model, f.vocab, img, 20);
  auto b = greedy_caption(f.model, f.vocab, img, 20);
  CHECK(a.ids == b.ids);
  CHECK(a.log_prob == b.log_prob);
  check_simplex(a);
  CHECK(a.alphas.size() == a.ids.size() + (a.complete ? 1 : 0));
  CHECK(a.tokens == f.vocab.decode(a.ids));
  auto c = beam_search(f.model, f.vocab, img, 3, 20);
  auto d = beam_search(f.model, f.vocab, img, 3, 20);
  CHECK(c.ids == d.ids);
  CHECK(c.log_prob == d.log_prob);
  check_simplex(c);
}

TEST_CASE("beam k=1 equals greedy and wider beams do no worse") {
  for (uint64_t seed : {4u, 5u}) {
    Fixture f(seed);
    for (uint64_t s = 0; s < 6; ++s) {
      const auto img = f.image(100 + s);
      auto g = greedy_caption(f.model, f.vocab, img, 12);
      auto b1 = beam_search(f.model, f.vocab, img, 1, 12);
      CHECK(b1.ids == g.ids);
      CHECK(b1.log_prob == g.log_prob);
      auto b5 = beam_search(f.model, f.vocab, img, 5, 12);
      if (g.complete && b5.complete) CHECK(b5.log_prob >= g.log_prob - 1e-9);
      DecodeConfig one{1, 12, false};
      CHECK(caption_image(f.model, f.vocab, img, one).ids == g.ids);
    }
  }
}

TEST_CASE("attention heat") {
  auto flat = attention_heat(Vec::Constant(49, 1.0 / 49), 7, 7, 64, 64);
  REQUIRE(flat.size() == 64u * 64u);
  const auto [lo, hi] = std::minmax_element(flat.begin(), flat.end());
  CHECK(*hi - *lo < 1e-6);

  Vec corner = Vec::Zero(49);
  corner(0) = 1.0;
  auto heat = attention_heat(corner, 7, 7, 64, 64);
  const auto peak = static_cast<size_t>(std::max_element(heat.begin(), heat.end()) - heat.begin());
  CHECK(peak / 64 < 32);
  CHECK(peak % 64 < 32);
  CHECK(*std::max_element(heat.begin(), heat.end()) == doctest::Approx(1.0));

  PixelGrid img(64, 64, 0.5);
  auto blended = blend_heat(img, heat);
  CHECK(blended.height == 64);
  for (double v : blended.data) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("attention overlay writes one file per word plus a composite") {
  Fixture f(6);
  auto res = greedy_caption(f.model, f.vocab, f.image(9), 6);
  const auto dir = fs::temp_directory_path() / "a2s_overlay";
  fs::remove_all(dir);
  PixelGrid raw(64, 64, 0.3);
  auto paths = attention_overlay(raw, res, 7, 7, dir.string());
  CHECK(paths.size() == res.alphas.size() + 1);
  int files = 0;
  for (const auto& e : fs::directory_iterator(dir)) files += e.path().extension() == ".png";
  CHECK(files == static_cast<int>(res.alphas.size()) + 1);
  CHECK(fs::exists(dir / "composite.png"));
  auto back = read_png(paths.front());
  CHECK(back.height == 64);
  fs::remove_all(dir);
}
