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
#include "attr2style/inference.hpp"
#include "attr2style/metrics.hpp"
#include "attr2style/synthgen.hpp"
#include "attr2style/trainer.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <set>

using namespace attr2style;
namespace fs = std::filesystem;

namespace {

struct Corpus {
  fs::path dir;
  CorpusManifests manifests;
  std::vector<CaptionRecord> source, target, test;
  Vocab vocab;
  DataSpec data;
};

const Corpus& corpus() {
  static const Corpus c = [] {
    Corpus k;
    k.dir = fs::temp_directory_path() / "a2s_trainer_corpus";
    fs::remove_all(k.dir);
    SynthConfig cfg;
    cfg.n_source = 8;
    cfg.n_target = 8;
    cfg.n_test = 6;
    cfg.seed = 3;
    k.manifests = generate_corpus(cfg, k.dir.string());
    k.source = load_manifest(k.manifests.source);
    k.target = load_manifest(k.manifests.target);
    k.test = load_manifest(k.manifests.test);
    std::vector<std::vector<std::string>> caps;
    for (const auto* set : {&k.source, &k.target, &k.test})
      for (const auto& r : *set) caps.push_back(tokenize(r.caption));
    k.vocab = Vocab::build(caps, 1);
    k.data.root = k.dir.string();
    k.data.norm = load_norm_stats((k.dir / "norm_stats.json").string());
    return k;
  }();
  return c;
}

TrainConfig quick(int epochs) {
  TrainConfig t;
  t.epochs = epochs;
  t.batch_size = 4;
  t.seed = 11;
  return t;
}

bool same_history(const std::vector<EpochStats>& a, const std::vector<EpochStats>& b) {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i) {
    if (a[i].epoch != b[i].epoch || a[i].train_loss != b[i].train_loss) return false;
    if (!(a[i].val_loss == b[i].val_loss || (std::isnan(a[i].val_loss) && std::isnan(b[i].val_loss)))) return false;
  }
  return true;
}

bool stores_equal(const ParamStore& a, const ParamStore& b, std::string_view prefix) {
  for (int i = 0; i < a.size(); ++i) {
    if (a.name(i).rfind(prefix, 0) != 0) continue;
    const auto j = b.find(a.name(i));
    if (!j || a.entry(i).data != b.entry(*j).data) return false;
  }
  return true;
}

std::string temp_file(const std::string& name) { return (fs::temp_directory_path() / ("a2s_trainer_" + name)).string(); }

std::vector<Example> examples(const std::vector<CaptionRecord>& recs) {
  return make_examples(recs, corpus().vocab, corpus().data, 64);
}

}  // namespace

TEST_CASE("phase A: history per epoch, finite and reproducible") {
  const auto& c = corpus();
  auto a = train_phase_a(ModelConfig{}, quick(2), c.source, c.vocab, c.data);
  REQUIRE(a.history.size() == 2);
  for (const auto& e : a.history) {
    CHECK(std::isfinite(e.train_loss));
    CHECK(std::isfinite(e.val_loss));
  }
  CHECK(a.phase == Phase::A);
  CHECK(a.vocab_digest == c.vocab.digest());
  auto b = train_phase_a(ModelConfig{}, quick(2), c.source, c.vocab, c.data);
  CHECK(same_history(a.history, b.history));
  CHECK(checkpoint_digest(a) == checkpoint_digest(b));

  auto threaded = quick(2);
  threaded.threads = 3;
  auto t = train_phase_a(ModelConfig{}, threaded, c.source, c.vocab, c.data);
  CHECK(same_history(a.history, t.history));
}

TEST_CASE("phase guards") {
  const auto& c = corpus();
  CHECK_THROWS_AS(train_phase_a(ModelConfig{}, quick(1), c.target, c.vocab, c.data), Error);
  CHECK_THROWS_AS(train_phase_a(ModelConfig{}, quick(1), {}, c.vocab, c.data), Error);
  CHECK_THROWS_AS(train_baseline(ModelConfig{}, quick(1), c.source, c.vocab, c.data), Error);
  auto bad = quick(0);
  CHECK_THROWS_AS(train_phase_a(ModelConfig{}, bad, c.source, c.vocab, c.data), Error);
}

TEST_CASE("phase B initialization") {
  const auto& c = corpus();
  auto a = train_phase_a(ModelConfig{}, quick(1), c.source, c.vocab, c.data);

  auto fresh_cfg = quick(1);
  auto fresh = init_phase_b(a, ModelConfig{}, fresh_cfg);
  CHECK(stores_equal(a.params, fresh.params(), "encoder."));
  for (int i = 0; i < a.params.size(); ++i)
    if (a.params.name(i).rfind("decoder.", 0) == 0 && a.params.name(i) != "decoder.gate_W")
      CHECK_MESSAGE(a.params.entry(i).data != fresh.params().entry(*fresh.params().find(a.params.name(i))).data,
                    a.params.name(i));

  auto warm_cfg = quick(1);
  warm_cfg.decoder_init = DecoderInit::warm;
  auto warm = init_phase_b(a, ModelConfig{}, warm_cfg);
  CHECK(stores_equal(a.params, warm.params(), ""));

  auto b = finetune_phase_b(a, ModelConfig{}, quick(1), c.target, c.vocab, c.data);
  CHECK(b.phase == Phase::B);
  CHECK(b.parent_digest == checkpoint_digest(a));
  CHECK_THROWS_AS(init_phase_b(b, ModelConfig{}, quick(1)), Error);

  ModelConfig full;
  full.encoder_mode = EncoderMode::full;
  try {
    init_phase_b(a, full, quick(1));
    FAIL("expected an architecture mismatch");
  } catch (const Error& e) {
    const std::string msg = e.what();
    CHECK(msg.find("architecture mismatch") != std::string::npos);
    CHECK(msg.find("encoder.") != std::string::npos);
  }

  auto other = Vocab::build({{"x"}}, 1);
  CHECK_THROWS_WITH_AS(finetune_phase_b(a, ModelConfig{}, quick(1), c.target, other, c.data),
                       doctest::Contains("vocab digest mismatch"), Error);
}

TEST_CASE("baseline: same parameter names, 30-epoch default") {
  const auto& c = corpus();
  auto a = train_phase_a(ModelConfig{}, quick(1), c.source, c.vocab, c.data);
  auto b = finetune_phase_b(a, ModelConfig{}, quick(1), c.target, c.vocab, c.data);
  auto base = train_baseline(ModelConfig{}, quick(1), c.target, c.vocab, c.data);
  CHECK(base.phase == Phase::baseline);
  std::vector<std::string> nb, nbase;
  for (int i = 0; i < b.params.size(); ++i) nb.push_back(b.params.name(i));
  for (int i = 0; i < base.params.size(); ++i) nbase.push_back(base.params.name(i));
  CHECK(nb == nbase);
  auto again = train_baseline(ModelConfig{}, quick(1), c.target, c.vocab, c.data);
  CHECK(same_history(base.history, again.history));

  CHECK(TrainConfig{}.epochs == 30);
  CHECK(train_config_from_json(nlohmann::json::object()).epochs == 30);
}

TEST_CASE("checkpoint save and load") {
  const auto& c = corpus();
  auto a = train_phase_a(ModelConfig{}, quick(1), c.source, c.vocab, c.data);
  const auto path = temp_file("ckpt.npz");
  save_checkpoint(a, path);
  auto back = load_checkpoint(path, c.vocab);
  REQUIRE(back.params.size() == a.params.size());
  for (int i = 0; i < a.params.size(); ++i) {
    CHECK(back.params.name(i) == a.params.name(i));
    CHECK(back.params.entry(i).shape == a.params.entry(i).shape);
    CHECK(back.params.entry(i).data == a.params.entry(i).data);
  }
  CHECK(back.phase == a.phase);
  CHECK(back.epoch == a.epoch);
  CHECK(back.best_epoch == a.best_epoch);
  CHECK(back.vocab_digest == a.vocab_digest);
  CHECK(back.config == a.config);
  CHECK(back.model == a.model);
  CHECK(back.train_loss == a.train_loss);
  CHECK(back.val_loss == a.val_loss);
  CHECK(same_history(back.history, a.history));
  CHECK(checkpoint_digest(back) == checkpoint_digest(a));

  auto m = instantiate(back);
  CHECK(stores_equal(a.params, m.params(), ""));

  const std::string bytes = read_file(path);
  write_file(path, bytes.substr(0, bytes.size() - 1000));
  CHECK_THROWS_WITH_AS(load_checkpoint(path), doctest::Contains("corrupt checkpoint"), Error);
  save_checkpoint(a, path);
  auto other = Vocab::build({{"zebra"}}, 1);
  CHECK_THROWS_WITH_AS(load_checkpoint(path, other), doctest::Contains("vocab digest mismatch"), Error);
  fs::remove(path);
  CHECK_THROWS_WITH_AS(load_checkpoint(path), doctest::Contains("not found"), Error);
}

TEST_CASE("copy_parameters reports mismatches") {
  ParamStore a, b;
  a.add("encoder.x", {2});
  a.add("encoder.y", {3});
  b.add("encoder.x", {4});
  b.add("encoder.z", {3});
  try {
    copy_parameters(a, b, "encoder.");
    FAIL("expected an error");
  } catch (const Error& e) {
    const std::string msg = e.what();
    for (const char* n : {"encoder.x", "encoder.y", "encoder.z"}) CHECK(msg.find(n) != std::string::npos);
  }
}

TEST_CASE("a non-finite loss aborts with diagnostics") {
  const auto& c = corpus();
  CaptionModel m(ModelConfig{}, c.vocab.size());
  m.init_random(1);
  auto& p = m.params();
  p.entry(p.index("decoder.out_b")).data[5] = std::nan("");
  auto ex = examples({c.source[0]});
  const Example* batch[] = {&ex[0]};
  Trainer tr(m, quick(1));
  CHECK_THROWS_WITH_AS(tr.step(batch, 0), doctest::Contains("non-finite loss"), Error);
}

TEST_CASE("overfitting one batch: loss, monotone windows, exact recall") {
  const auto& c = corpus();
  ModelConfig mc;
  mc.dropout = 0.0;
  CaptionModel m(mc, c.vocab.size());
  m.init_random(5);
  auto ex = examples({c.target[0], c.target[1], c.target[2], c.target[3]});
  std::vector<const Example*> batch;
  for (const auto& e : ex) batch.push_back(&e);
  Trainer tr(m, quick(1));
  std::vector<double> losses;
  for (int s = 0; s < 500; ++s) losses.push_back(tr.step(batch, static_cast<uint64_t>(s)));
  CHECK(tr.mean_loss(ex) < 0.1);

  int violations = 0;
  for (size_t s = 100; s + 50 < losses.size(); ++s)
    if (losses[s + 50] > losses[s]) ++violations;
  CHECK(violations == 0);

  for (const auto& e : ex) {
    auto res = greedy_caption(m, c.vocab, e.image, 20);
    CHECK(res.complete);
    CHECK(res.ids == std::vector<int>(e.caption.ids.begin() + 1, e.caption.ids.begin() + e.caption.length - 1));
  }
}

TEST_CASE("evaluate on a memorized test set") {
  const auto& c = corpus();
  std::vector<CaptionRecord> five(c.test.begin(), c.test.begin() + 5);
  ModelConfig mc;
  mc.dropout = 0.0;
  CaptionModel m(mc, c.vocab.size());
  m.init_random(8);
  auto ex = examples(five);
  std::vector<const Example*> batch;
  for (const auto& e : ex) batch.push_back(&e);
  Trainer tr(m, quick(1));
  for (int s = 0; s < 400; ++s) tr.step(batch, static_cast<uint64_t>(s));

  auto rep = evaluate(m, c.vocab, five, c.data, StyleLexicon::defaults(), DecodeConfig{});
  CHECK(rep.n_test == 5);
  CHECK(rep.accuracy.micro == 1.0);
  CHECK(rep.bleu.score == doctest::Approx(1.0).epsilon(1e-12));
  for (size_t s = 0; s < 6; ++s) {
    int64_t row = 0;
    for (auto v : rep.confusion[s]) row += v;
    CHECK(row == rep.per_style[s].support);
  }

  auto broken = five;
  broken[2].style.reset();
  CHECK_THROWS_WITH_AS(evaluate(m, c.vocab, broken, c.data, StyleLexicon::defaults(), DecodeConfig{}),
                       doctest::Contains("2"), Error);
}

TEST_CASE("history csv") {
  const auto path = temp_file("history.csv");
  write_history_csv(path, {{1, 0.5, 0.25, 1.5}, {2, 0.4, 0.2, 1.25}});
  const auto text = read_file(path);
  CHECK(text.rfind("epoch,train_loss,val_loss,seconds\n", 0) == 0);
  CHECK(text.find("\n2,0.4") != std::string::npos);
  fs::remove(path);
}
