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


#include "attr2style/pipeline.hpp"

#include "attr2style/image.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <filesystem>

namespace attr2style {

namespace fs = std::filesystem;
using json = nlohmann::json;

Workspace::Workspace(std::string out_dir, json tree)
    : out_(std::move(out_dir)), tree_(std::move(tree)), cfg_(resolve_config(tree_)) {}

std::string Workspace::corpus_dir() const {
  return cfg_.corpus_dir.empty() ? (fs::path(out_) / "corpus").string() : cfg_.corpus_dir;
}

namespace {
std::string or_default(const std::string& v, const std::string& dir, const char* file) {
  return v.empty() ? (fs::path(dir) / file).string() : v;
}
}  // namespace

std::string Workspace::source_manifest() const { return or_default(cfg_.source_manifest, corpus_dir(), "source.jsonl"); }
std::string Workspace::target_manifest() const { return or_default(cfg_.target_manifest, corpus_dir(), "target.jsonl"); }
std::string Workspace::test_manifest() const { return or_default(cfg_.test_manifest, corpus_dir(), "test.jsonl"); }
std::string Workspace::vocab_path() const { return or_default(cfg_.vocab_path, corpus_dir(), "vocab.txt"); }
std::string Workspace::norm_stats_path() const { return or_default(cfg_.norm_stats, corpus_dir(), "norm_stats.json"); }

std::string Workspace::checkpoint(std::string_view name) const {
  return (fs::path(out_) / "checkpoints" / (std::string(name) + ".npz")).string();
}
std::string Workspace::report(std::string_view file) const { return (fs::path(out_) / "reports" / file).string(); }
std::string Workspace::figure(std::string_view file) const { return (fs::path(out_) / "figures" / file).string(); }

void Workspace::require(const std::string& path, std::string_view what) {
  if (!fs::exists(path)) throw Error(fmt::format("missing input artifact: {} ({})", what, path));
}

std::vector<CaptionRecord> Workspace::records(const std::string& manifest, std::string_view what) const {
  require(manifest, what);
  return load_manifest(manifest);
}

Vocab Workspace::vocab() const {
  require(vocab_path(), "vocabulary (run build-vocab)");
  return Vocab::load(vocab_path());
}

DataSpec Workspace::data_spec(const std::string& manifest) const {
  DataSpec d;
  d.root = manifest_root(manifest);
  d.max_len = cfg_.max_len;
  const std::string ns = norm_stats_path();
  if (fs::exists(ns)) {
    d.norm = load_norm_stats(ns);
  } else if (!cfg_.norm_stats.empty()) {
    require(ns, "normalization statistics");
  } else {
    spdlog::warn("no {}; using ImageNet normalization", ns);
  }
  return d;
}

void Workspace::write_resolved_config() const {
  write_file((fs::path(out_) / "resolved_config.json").string(), tree_.dump(2) + "\n");
}

void cmd_synth(const Workspace& ws) {
  const auto m = generate_corpus(ws.config().synth, ws.corpus_dir());
  spdlog::info("corpus written to {} ({}, {}, {})", ws.corpus_dir(), m.source, m.target, m.test);
}

void cmd_build_vocab(const Workspace& ws) {
  std::vector<std::vector<std::string>> captions;
  for (const auto& path : {ws.source_manifest(), ws.target_manifest()}) {
    for (const auto& r : ws.records(path, "training manifest (run synth)")) captions.push_back(tokenize(r.caption));
  }
  const Vocab v = Vocab::build(captions, ws.config().min_freq);
  v.save(ws.vocab_path());
  spdlog::info("vocabulary of {} tokens written to {}", v.size(), ws.vocab_path());
}

namespace {

Checkpoint finish_training(const Workspace& ws, Checkpoint c, std::string_view name) {
  save_checkpoint(c, ws.checkpoint(name));
  write_history_csv(ws.report(fmt::format("history_{}.csv", name)), c.history);
  spdlog::info("checkpoint {} (best epoch {}, val loss {:.4f})", ws.checkpoint(name), c.best_epoch, c.val_loss);
  return c;
}

// A bare name such as "baseline" refers to <out>/checkpoints/<name>.npz.
std::string default_ckpt(const Workspace& ws, const CommandOptions& opts) {
  if (opts.checkpoint.empty()) return ws.checkpoint("phase_b");
  const fs::path p(opts.checkpoint);
  if (!fs::exists(p) && !p.has_parent_path() && !p.has_extension()) return ws.checkpoint(opts.checkpoint);
  return opts.checkpoint;
}

std::string default_manifest(const Workspace& ws, const CommandOptions& opts) {
  return opts.manifest.empty() ? ws.test_manifest() : opts.manifest;
}

CaptionModel load_model(const std::string& path, const Vocab& vocab) {
  Workspace::require(path, "checkpoint");
  return instantiate(load_checkpoint(path, vocab));
}

std::string join(const std::vector<std::string>& words) {
  std::string s;
  for (const auto& w : words) s += (s.empty() ? "" : " ") + w;
  return s;
}

std::string file_stem(const std::string& path) { return fs::path(path).stem().string(); }

void write_captions(const std::string& path, const EvalReport& r, const StyleLexicon& lexicon) {
  std::string out;
  for (const auto& it : r.items) {
    json j = {{"image", it.image},
              {"caption", it.caption},
              {"log_prob", it.log_prob},
              {"style", std::string(style_name(extract_style(it.caption, lexicon)))}};
    out += j.dump() + "\n";
  }
  write_file(path, out);
}

EvalReport evaluate_checkpoint(const Workspace& ws, const std::string& ckpt, const std::string& manifest,
                               const Vocab& vocab) {
  const auto test = ws.records(manifest, "test manifest");
  const CaptionModel model = load_model(ckpt, vocab);
  return evaluate(model, vocab, test, ws.data_spec(manifest), ws.config().lexicon, ws.config().decode);
}

void save_report(const Workspace& ws, const EvalReport& r, const std::string& tag) {
  write_file(ws.report("eval_" + tag + ".json"), report_to_json(r).dump(2) + "\n");
  write_file(ws.report("eval_" + tag + ".txt"), report_table(r));
  write_captions(ws.report("captions_" + tag + ".jsonl"), r, ws.config().lexicon);
}

}  // namespace

Checkpoint cmd_train_source(const Workspace& ws) {
  const auto& cfg = ws.config();
  const auto records = ws.records(ws.source_manifest(), "source manifest (run synth)");
  return finish_training(
      ws, train_phase_a(cfg.model, cfg.source, records, ws.vocab(), ws.data_spec(ws.source_manifest())), "phase_a");
}

Checkpoint cmd_finetune_target(const Workspace& ws) {
  const auto& cfg = ws.config();
  const Vocab vocab = ws.vocab();
  Workspace::require(ws.checkpoint("phase_a"), "phase A checkpoint (run train-source)");
  const Checkpoint a = load_checkpoint(ws.checkpoint("phase_a"), vocab);
  const auto records = ws.records(ws.target_manifest(), "target manifest (run synth)");
  return finish_training(
      ws, finetune_phase_b(a, cfg.model, cfg.target, records, vocab, ws.data_spec(ws.target_manifest())), "phase_b");
}

Checkpoint cmd_train_baseline(const Workspace& ws) {
  const auto& cfg = ws.config();
  const auto records = ws.records(ws.target_manifest(), "target manifest (run synth)");
  return finish_training(
      ws, train_baseline(cfg.model, cfg.baseline, records, ws.vocab(), ws.data_spec(ws.target_manifest())),
      "baseline");
}

void cmd_caption(const Workspace& ws, const CommandOptions& opts) {
  const Vocab vocab = ws.vocab();
  const std::string manifest = default_manifest(ws, opts);
  const std::string ckpt = default_ckpt(ws, opts);
  const auto records = ws.records(manifest, "manifest");
  const CaptionModel model = load_model(ckpt, vocab);
  const DataSpec data = ws.data_spec(manifest);
  std::string out;
  for (const auto& r : records) {
    const auto img = preprocess_image((fs::path(data.root) / r.image).string(), model.input_side(), data.norm);
    const auto res = caption_image(model, vocab, img, ws.config().decode);
    const std::string text = join(res.tokens);
    json j = {{"image", r.image},
              {"caption", text},
              {"log_prob", res.log_prob},
              {"style", std::string(style_name(extract_style(text, ws.config().lexicon)))}};
    out += j.dump() + "\n";
  }
  const auto path = ws.report("captions_" + file_stem(ckpt) + ".jsonl");
  write_file(path, out);
  spdlog::info("{} captions written to {}", records.size(), path);
}

EvalReport cmd_evaluate(const Workspace& ws, const CommandOptions& opts) {
  const Vocab vocab = ws.vocab();
  const std::string ckpt = default_ckpt(ws, opts);
  EvalReport r = evaluate_checkpoint(ws, ckpt, default_manifest(ws, opts), vocab);
  save_report(ws, r, file_stem(ckpt));
  spdlog::info("accuracy_micro {:.4f}, BLEU {:.4f}", r.accuracy.micro, r.bleu.score);
  return r;
}

json cmd_compare(const Workspace& ws) {
  const Vocab vocab = ws.vocab();
  const std::string manifest = ws.test_manifest();
  Workspace::require(ws.checkpoint("phase_b"), "phase B checkpoint (run finetune-target)");
  Workspace::require(ws.checkpoint("baseline"), "baseline checkpoint (run train-baseline)");
  const EvalReport ours = evaluate_checkpoint(ws, ws.checkpoint("phase_b"), manifest, vocab);
  const EvalReport base = evaluate_checkpoint(ws, ws.checkpoint("baseline"), manifest, vocab);
  save_report(ws, ours, "phase_b");
  save_report(ws, base, "baseline");
  write_png(ws.figure("confusion_phase_b.png"), render_confusion(ours.confusion));
  write_png(ws.figure("confusion_baseline.png"), render_confusion(base.confusion));

  json doc = {{"transfer", report_to_json(ours)},
              {"baseline", report_to_json(base)},
              {"accuracy_micro",
               {{"transfer", ours.accuracy.micro},
                {"baseline", base.accuracy.micro},
                {"difference", ours.accuracy.micro - base.accuracy.micro}}},
              {"accuracy_paper_macro",
               {{"transfer", ours.accuracy.paper_macro},
                {"baseline", base.accuracy.paper_macro},
                {"difference", ours.accuracy.paper_macro - base.accuracy.paper_macro}}},
              {"bleu", {{"transfer", ours.bleu.score}, {"baseline", base.bleu.score}}}};
  write_file(ws.report("compare.json"), doc.dump(2) + "\n");

  std::string txt = fmt::format("{:<10} {:>19} {:>19}\n", "", "transfer", "baseline");
  txt += fmt::format("{:<10} {:>9} {:>9} {:>9} {:>9}\n", "Look", "P", "R", "P", "R");
  auto cell = [](const std::optional<double>& v) { return v ? fmt::format("{:.3f}", *v) : std::string("n/a"); };
  for (size_t k = 0; k < kAllStyles.size(); ++k) {
    txt += fmt::format("{:<10} {:>9} {:>9} {:>9} {:>9}\n", style_name(kAllStyles[k]), cell(ours.per_style[k].precision),
                       cell(ours.per_style[k].recall), cell(base.per_style[k].precision),
                       cell(base.per_style[k].recall));
  }
  txt += fmt::format("\n{:<22} {:>9} {:>9} {:>11}\n", "", "transfer", "baseline", "difference");
  txt += fmt::format("{:<22} {:>9.4f} {:>9.4f} {:>+11.4f}\n", "accuracy (micro)", ours.accuracy.micro,
                     base.accuracy.micro, ours.accuracy.micro - base.accuracy.micro);
  txt += fmt::format("{:<22} {:>9.4f} {:>9.4f} {:>+11.4f}\n", "accuracy (one-vs-rest)", ours.accuracy.paper_macro,
                     base.accuracy.paper_macro, ours.accuracy.paper_macro - base.accuracy.paper_macro);
  txt += fmt::format("{:<22} {:>9.4f} {:>9.4f} {:>+11.4f}\n", "BLEU-4", ours.bleu.score, base.bleu.score,
                     ours.bleu.score - base.bleu.score);
  write_file(ws.report("compare.txt"), txt);
  spdlog::info("accuracy_micro transfer {:.4f} baseline {:.4f}", ours.accuracy.micro, base.accuracy.micro);
  return doc;
}

void cmd_attention_maps(const Workspace& ws, const CommandOptions& opts) {
  const Vocab vocab = ws.vocab();
  const std::string manifest = default_manifest(ws, opts);
  const std::string ckpt = default_ckpt(ws, opts);
  const auto records = ws.records(manifest, "manifest");
  const CaptionModel model = load_model(ckpt, vocab);
  const DataSpec data = ws.data_spec(manifest);
  const NormStats identity{{0, 0, 0}, {1, 1, 1}};
  const size_t n = std::min(records.size(), static_cast<size_t>(std::max(opts.limit, 0)));
  for (size_t i = 0; i < n; ++i) {
    const auto path = (fs::path(data.root) / records[i].image).string();
    const PixelGrid raw = read_png(path);
    const auto input = preprocess_pixels(raw, model.input_side(), data.norm);
    const auto shown = preprocess_pixels(raw, model.input_side(), identity);
    const auto res = caption_image(model, vocab, input, ws.config().decode);
    const auto dir = ws.figure(fmt::format("attention/{}_{}", file_stem(ckpt), file_stem(records[i].image)));
    attention_overlay(shown, res, model.encoder().grid_h(), model.encoder().grid_w(), dir);
    spdlog::info("{}: \"{}\" -> {}", records[i].image, join(res.tokens), dir);
  }
}

int run_command(const std::string& command, const std::string& config_path, const std::string& out_dir,
                const std::vector<std::string>& overrides, const CommandOptions& opts) {
  try {
    if (std::find(kCommands.begin(), kCommands.end(), command) == kCommands.end())
      throw UsageError(fmt::format("unknown command '{}'", command));
    json tree = config_path.empty() ? parse_config_text("", overrides) : parse_config(config_path, overrides);
    Workspace ws(out_dir, std::move(tree));
    ws.write_resolved_config();
    if (command == "synth") cmd_synth(ws);
    else if (command == "build-vocab") cmd_build_vocab(ws);
    else if (command == "train-source") cmd_train_source(ws);
    else if (command == "finetune-target") cmd_finetune_target(ws);
    else if (command == "train-baseline") cmd_train_baseline(ws);
    else if (command == "caption") cmd_caption(ws, opts);
    else if (command == "evaluate") cmd_evaluate(ws, opts);
    else if (command == "compare") cmd_compare(ws);
    else if (command == "attention-maps") cmd_attention_maps(ws, opts);
    return 0;
  } catch (const UsageError& e) {
    spdlog::error("{}", e.what());
    return 1;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 2;
  }
}

}  // namespace attr2style
