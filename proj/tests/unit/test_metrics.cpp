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
#include "attr2style/metrics.hpp"
#include "attr2style/vocab.hpp"

#include <doctest.h>

#include <cmath>

#include "../support/bleu_oracle.hpp"

using namespace attr2style;
using Sentences = std::vector<std::vector<std::string>>;

namespace {

ConfusionMatrix crafted_six() {
  return {{3, 1, 0, 0, 0, 0}, {0, 2, 0, 0, 0, 1}, {1, 0, 2, 0, 0, 0},
          {0, 0, 0, 3, 1, 0}, {0, 0, 0, 0, 2, 1}, {0, 1, 0, 0, 0, 2}};
}

}  // namespace

TEST_CASE("extract_style") {
  const auto lex = StyleLexicon::defaults();
  CHECK(extract_style("perfect pick for a party look", lex) == Style::party);
  CHECK(extract_style("a red solid dress", lex) == Style::none);
  CHECK(extract_style("cocktail or party wear", lex) == Style::cocktail);
  CHECK(extract_style("party or cocktail wear", lex) == Style::party);
  CHECK(extract_style("", lex) == Style::none);
  CHECK(extract_style("Summer, at last!", lex) == Style::summer);
  CHECK(extract_style("partying all night", lex) == Style::none);
}

TEST_CASE("lexicon ties go to lexicon order and validation") {
  StyleLexicon lex;
  lex.entries = {{Style::winter, {"cosy"}}, {Style::party, {"fun", "cosy2"}}};
  CHECK(extract_style("fun and cosy", lex) == Style::party);
  CHECK_NOTHROW(lex.validate());
  lex.entries.push_back({Style::summer, {"fun"}});
  CHECK_THROWS_AS(lex.validate(), Error);
  StyleLexicon upper;
  upper.entries = {{Style::party, {"Party"}}};
  CHECK_THROWS_AS(upper.validate(), Error);
  StyleLexicon empty;
  empty.entries = {{Style::party, {}}};
  CHECK_THROWS_AS(empty.validate(), Error);

  auto back = StyleLexicon::from_json(StyleLexicon::defaults().to_json());
  CHECK(back.entries == StyleLexicon::defaults().entries);
}

TEST_CASE("confusion") {
  std::vector<Style> ten;
  for (int i = 0; i < 10; ++i) ten.push_back(kAllStyles[static_cast<size_t>(i % kNumStyles)]);
  auto diag = confusion(ten, ten);
  int64_t trace = 0, off = 0;
  for (int r = 0; r < kNumStyles; ++r)
    for (int c = 0; c < kNumStyles; ++c) (r == c ? trace : off) += diag[static_cast<size_t>(r)][static_cast<size_t>(c)];
  CHECK(trace == 10);
  CHECK(off == 0);

  const std::vector<Style> p1{Style::none}, t1{Style::party};
  auto one = confusion(p1, t1);
  for (int r = 0; r < kNumStyles; ++r)
    for (int c = 0; c < kNumStyles; ++c)
      CHECK(one[static_cast<size_t>(r)][static_cast<size_t>(c)] == ((r == 0 && c == 5) ? 1 : 0));

  const std::vector<Style> two{Style::none, Style::party};
  CHECK_THROWS_AS(confusion(two, t1), Error);
}

TEST_CASE("confusion of a crafted 12-item set") {
  using S = Style;
  const std::vector<S> truth{S::party, S::party, S::party, S::cocktail, S::cocktail, S::feminine,
                             S::summer, S::summer, S::winter, S::none, S::none, S::none};
  const std::vector<S> pred{S::party, S::none, S::cocktail, S::cocktail, S::party, S::feminine,
                            S::summer, S::feminine, S::none, S::none, S::none, S::winter};
  const ConfusionMatrix expected{{1, 1, 0, 0, 0, 1}, {1, 1, 0, 0, 0, 0}, {0, 0, 1, 0, 0, 0},
                                 {0, 0, 1, 1, 0, 0}, {0, 0, 0, 0, 0, 1}, {0, 0, 0, 0, 1, 2}};
  auto m = confusion(pred, truth);
  CHECK(m == expected);
  int64_t total = 0;
  for (const auto& row : m)
    for (auto v : row) total += v;
  CHECK(total == 12);
}

TEST_CASE("precision and recall") {
  auto pr = precision_recall({{8, 2}, {3, 7}});
  REQUIRE(pr.size() == 2);
  CHECK(*pr[0].precision == doctest::Approx(8.0 / 11.0).epsilon(1e-15));
  CHECK(*pr[1].precision == doctest::Approx(7.0 / 9.0).epsilon(1e-15));
  CHECK(*pr[0].recall == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(*pr[1].recall == doctest::Approx(0.7).epsilon(1e-15));
  CHECK(pr[0].support == 10);

  auto never = precision_recall({{0, 4}, {0, 5}});
  CHECK_FALSE(never[0].precision.has_value());
  CHECK(*never[0].recall == 0.0);

  auto nosupport = precision_recall({{0, 0}, {1, 5}});
  CHECK_FALSE(nosupport[0].recall.has_value());
  CHECK(*nosupport[0].precision == 0.0);

  auto perfect = precision_recall({{2, 0, 0}, {0, 3, 0}, {0, 0, 1}});
  for (const auto& s : perfect) {
    CHECK(*s.precision == 1.0);
    CHECK(*s.recall == 1.0);
  }
}

TEST_CASE("crafted six-class matrix") {
  const auto m = crafted_six();
  auto pr = precision_recall(m);
  const double precision[] = {3.0 / 4, 2.0 / 4, 1.0, 1.0, 2.0 / 3, 2.0 / 4};
  const double recall[] = {3.0 / 4, 2.0 / 3, 2.0 / 3, 3.0 / 4, 2.0 / 3, 2.0 / 3};
  const int64_t support[] = {4, 3, 3, 4, 3, 3};
  for (size_t s = 0; s < 6; ++s) {
    CHECK(*pr[s].precision == precision[s]);
    CHECK(*pr[s].recall == recall[s]);
    CHECK(pr[s].support == support[s]);
  }
  auto acc = accuracy(m);
  CHECK(acc.micro == doctest::Approx(14.0 / 20.0).epsilon(1e-15));
  // One-vs-rest: 18, 17, 19, 19, 18, 17 correct out of 20.
  CHECK(acc.paper_macro == doctest::Approx(108.0 / 120.0).epsilon(1e-15));
}

TEST_CASE("accuracy edge cases") {
  auto perfect = accuracy({{5, 0}, {0, 5}});
  CHECK(perfect.micro == 1.0);
  CHECK(perfect.paper_macro == 1.0);
  auto wrong = accuracy({{0, 1}, {1, 0}});
  CHECK(wrong.micro == 0.0);
  CHECK(wrong.paper_macro == 0.0);
  CHECK_THROWS_AS(accuracy({}), Error);
  CHECK_THROWS_AS(accuracy({{0, 0}, {0, 0}}), Error);
}

TEST_CASE("bleu on the cat example") {
  const Sentences c{tokenize("the cat sat on the mat")};
  const Sentences r{tokenize("the cat is on the mat")};
  auto b = bleu(c, r);
  REQUIRE(b.precisions.size() == 4);
  CHECK(b.precisions[0] == doctest::Approx(5.0 / 6.0).epsilon(1e-15));
  CHECK(b.precisions[1] == doctest::Approx(3.0 / 5.0).epsilon(1e-15));
  CHECK(b.precisions[2] == doctest::Approx(1.0 / 4.0).epsilon(1e-15));
  CHECK(b.precisions[3] == 0.0);
  CHECK(b.brevity_penalty == 1.0);
  CHECK(std::abs(b.score - testing::oracle_bleu(c, r, 4, false).score) < 1e-9);
  CHECK(b.score == 0.0);

  auto b3 = bleu(c, r, {3, false});
  CHECK(std::abs(b3.score - 0.5) < 1e-12);
  CHECK(std::abs(b3.score - testing::oracle_bleu(c, r, 3, false).score) < 1e-9);

  auto s = bleu(c, r, {4, true});
  const double smoothed = std::pow((6.0 / 7.0) * (4.0 / 6.0) * (2.0 / 5.0) * (1.0 / 4.0), 0.25);
  CHECK(std::abs(s.score - smoothed) < 1e-12);
  CHECK(std::abs(s.score - testing::oracle_bleu(c, r, 4, true).score) < 1e-9);
}

TEST_CASE("bleu matches the brute-force oracle on random pairs") {
  Rng rng(2024);
  const std::vector<std::string> words{"a", "b", "c", "d", "e"};
  auto sentence = [&] {
    std::vector<std::string> s;
    const int n = 2 + static_cast<int>(rng.below(11));
    for (int i = 0; i < n; ++i) s.push_back(words[rng.below(words.size())]);
    return s;
  };
  int nonzero = 0;
  for (int trial = 0; trial < 40; ++trial) {
    Sentences c, r;
    const int items = 1 + static_cast<int>(rng.below(4));
    for (int i = 0; i < items; ++i) {
      c.push_back(sentence());
      r.push_back(sentence());
    }
    for (bool smooth : {false, true}) {
      const double got = bleu(c, r, {4, smooth}).score;
      CHECK(std::abs(got - testing::oracle_bleu(c, r, 4, smooth).score) < 1e-9);
      nonzero += got > 0;
    }
  }
  CHECK(nonzero > 40);
}

TEST_CASE("bleu extremes and errors") {
  const Sentences x{tokenize("red floral print maxi dress"), tokenize("this dress is a perfect pick")};
  CHECK(bleu(x, x).score == doctest::Approx(1.0).epsilon(1e-15));
  const Sentences y{tokenize("blue solid"), tokenize("zzz qqq www")};
  CHECK(bleu(y, x).score == 0.0);

  const Sentences shorter{tokenize("red floral print maxi")};
  const Sentences longer{tokenize("red floral print maxi dress")};
  CHECK(bleu(shorter, longer).brevity_penalty == doctest::Approx(std::exp(1.0 - 5.0 / 4.0)).epsilon(1e-15));
  CHECK(bleu(longer, shorter).brevity_penalty == 1.0);

  CHECK_THROWS_AS(bleu({}, {}), Error);
  CHECK_THROWS_AS(bleu(x, Sentences{y[0]}), Error);
}

TEST_CASE("score_captions conserves counts") {
  std::vector<CaptionRecord> test;
  std::vector<std::string> caps;
  const char* guesses[] = {"party", "summer", "winter"};
  for (int i = 0; i < 18; ++i) {
    CaptionRecord r;
    r.image = "img" + std::to_string(i) + ".png";
    r.domain = Domain::target;
    r.style = kAllStyles[static_cast<size_t>(i % kNumStyles)];
    r.caption = "this dress is a perfect pick for a " + std::string(style_name(*r.style)) + " look";
    test.push_back(r);
    caps.push_back(std::string("a ") + guesses[i % 3] + " look");
  }
  auto rep = score_captions(test, caps, StyleLexicon::defaults());
  CHECK(rep.n_test == 18);
  int64_t total = 0, trace = 0;
  for (size_t r = 0; r < 6; ++r) {
    int64_t row = 0;
    for (size_t c = 0; c < 6; ++c) {
      row += rep.confusion[r][c];
      trace += r == c ? rep.confusion[r][c] : 0;
    }
    CHECK(row == rep.per_style[r].support);
    CHECK(row == 3);
    total += row;
  }
  CHECK(total == 18);
  CHECK(rep.accuracy.micro == doctest::Approx(static_cast<double>(trace) / 18));
  CHECK(rep.bleu.score >= 0.0);
  CHECK(rep.bleu.score <= 1.0);

  auto j = report_to_json(rep);
  for (const char* key : {"bleu", "accuracy_micro", "accuracy_paper_macro", "per_style", "confusion", "n_test"})
    CHECK(j.contains(key));
  CHECK(j["per_style"]["cocktail"]["precision"].is_null());
  CHECK(j["per_style"]["party"]["support"] == 3);
  CHECK(j["confusion"].size() == 6);
  CHECK(!report_table(rep).empty());

  test[4].style.reset();
  CHECK_THROWS_WITH_AS(score_captions(test, caps, StyleLexicon::defaults()), doctest::Contains("4"), Error);
}

TEST_CASE("confusion rendering has one cell per entry") {
  auto img = render_confusion(crafted_six(), 10);
  CHECK(img.height >= 60);
  CHECK(img.width >= 60);
}
