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
#include "attr2style/corpus.hpp"
#include "attr2style/image.hpp"

#include <doctest.h>

#include <filesystem>
#include <map>

using namespace attr2style;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("a2s_corpus_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::vector<CaptionRecord> numbered(int n) {
  std::vector<CaptionRecord> r;
  for (int i = 0; i < n; ++i) r.push_back({"img" + std::to_string(i) + ".png", "caption", Domain::source, {}, {}});
  return r;
}

}  // namespace

TEST_CASE("load_manifest reads records in order") {
  auto dir = scratch("ok");
  write_file((dir / "m.jsonl").string(),
             "{\"image\":\"a.png\",\"caption\":\"one\",\"domain\":\"source\"}\n"
             "\n"
             "{\"image\":\"b.png\",\"caption\":\"two\",\"domain\":\"target\",\"style\":\"party\",\"split\":\"test\"}\n"
             "{\"image\":\"c.png\",\"caption\":\"three\",\"domain\":\"target\",\"style\":\"none\"}\n");
  auto recs = load_manifest((dir / "m.jsonl").string());
  REQUIRE(recs.size() == 3);
  CHECK(recs[0].image == "a.png");
  CHECK(recs[0].caption == "one");
  CHECK_FALSE(recs[0].style.has_value());
  CHECK(recs[1].style == Style::party);
  CHECK(recs[1].split == Split::test);
  CHECK(recs[2].domain == Domain::target);

  write_manifest((dir / "copy.jsonl").string(), recs);
  CHECK(load_manifest((dir / "copy.jsonl").string()) == recs);
}

TEST_CASE("load_manifest errors") {
  auto dir = scratch("bad");
  write_file((dir / "missing.jsonl").string(),
             "{\"image\":\"a.png\",\"caption\":\"x\",\"domain\":\"source\"}\n"
             "{\"image\":\"b.png\",\"domain\":\"source\"}\n");
  CHECK_THROWS_WITH_AS(load_manifest((dir / "missing.jsonl").string()),
                       doctest::Contains("manifest line 2: missing field caption"), Error);

  write_file((dir / "style.jsonl").string(),
             "{\"image\":\"a.png\",\"caption\":\"x\",\"domain\":\"target\",\"style\":\"brunch\"}\n");
  try {
    load_manifest((dir / "style.jsonl").string());
    FAIL("expected an error");
  } catch (const Error& e) {
    const std::string msg = e.what();
    for (const char* s : {"party", "cocktail", "feminine", "summer", "winter", "none"})
      CHECK(msg.find(s) != std::string::npos);
  }

  write_file((dir / "json.jsonl").string(), "{\"image\":\"a.png\",\n");
  CHECK_THROWS_WITH_AS(load_manifest((dir / "json.jsonl").string()), doctest::Contains("manifest line 1"), Error);
}

TEST_CASE("preprocessing normalizes mid-gray to zero") {
  PixelGrid gray(64, 64, 0.5);
  NormStats half{{0.5, 0.5, 0.5}, {0.5, 0.5, 0.5}};
  auto out = preprocess_pixels(gray, 64, half);
  for (double v : out.data) CHECK(std::abs(v) < 1e-6);
}

TEST_CASE("preprocess_image shape and white constants") {
  auto dir = scratch("img");
  PixelGrid wide(100, 200, 1.0);
  write_png((dir / "wide.png").string(), wide);
  NormStats stats;  // ImageNet defaults
  auto out = preprocess_image((dir / "wide.png").string(), 64, stats);
  CHECK(out.height == 64);
  CHECK(out.width == 64);
  CHECK(out.data.size() == 64u * 64u * 3u);
  for (int c = 0; c < 3; ++c) {
    const double expect = (1.0 - stats.mean[static_cast<size_t>(c)]) / stats.std[static_cast<size_t>(c)];
    CHECK(out.at(10, 20, c) == doctest::Approx(expect).epsilon(1e-12));
    CHECK(out.at(63, 0, c) == doctest::Approx(expect).epsilon(1e-12));
  }

  write_file((dir / "junk.png").string(), "not a png");
  CHECK_THROWS_WITH_AS(preprocess_image((dir / "junk.png").string(), 64, stats),
                       doctest::Contains("cannot decode image"), Error);
}

TEST_CASE("preprocessing an already square image only normalizes") {
  Rng rng(1);
  PixelGrid img(64, 64);
  for (double& v : img.data) v = rng.uniform();
  NormStats identity{{0, 0, 0}, {1, 1, 1}};
  auto out = preprocess_pixels(img, 64, identity);
  CHECK(out.data == img.data);
}

TEST_CASE("split_records counts and determinism") {
  auto a = split_records(numbered(10), 7, 0.8, 0.1);
  std::map<Split, int> counts;
  for (const auto& r : a) counts[*r.split]++;
  CHECK(counts[Split::train] == 8);
  CHECK(counts[Split::val] == 1);
  CHECK(counts[Split::test] == 1);

  auto b = split_records(numbered(10), 7, 0.8, 0.1);
  CHECK(a == b);
  auto c = split_records(numbered(10), 8, 0.8, 0.1);
  CHECK(a != c);

  auto half = split_records(numbered(10), 7, 0.5, 0.5);
  int test = 0;
  for (const auto& r : half) test += r.split == Split::test;
  CHECK(test == 0);
}

TEST_CASE("split proportions stay within one record") {
  for (int n : {7, 13, 101}) {
    auto s = split_records(numbered(n), 3, 0.7, 0.2);
    int tr = 0, va = 0;
    for (const auto& r : s) {
      tr += r.split == Split::train;
      va += r.split == Split::val;
    }
    CHECK(std::abs(tr - 0.7 * n) <= 1.0);
    CHECK(std::abs(va - 0.2 * n) <= 1.0);
  }
}
