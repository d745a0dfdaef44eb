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


#include "attr2style/trainer.hpp"

#include "attr2style/archive.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <thread>

namespace attr2style {

namespace {

constexpr int kChunks = 4;
constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

bool is_encoder(const std::string& name) { return name.rfind("encoder.", 0) == 0; }

double json_number(const nlohmann::json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

nlohmann::json number_json(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

}  // namespace

std::string_view phase_name(Phase p) {
  switch (p) {
    case Phase::A: return "A";
    case Phase::B: return "B";
    case Phase::baseline: return "baseline";
  }
  return "?";
}

Phase parse_phase(std::string_view s) {
  if (s == "A") return Phase::A;
  if (s == "B") return Phase::B;
  if (s == "baseline") return Phase::baseline;
  throw Error("unknown phase '" + std::string(s) + "'");
}

std::string_view decoder_init_name(DecoderInit d) { return d == DecoderInit::fresh ? "fresh" : "warm"; }

DecoderInit parse_decoder_init(std::string_view s) {
  if (s == "fresh") return DecoderInit::fresh;
  if (s == "warm") return DecoderInit::warm;
  throw Error("unknown decoder_init '" + std::string(s) + "' (expected fresh or warm)");
}

nlohmann::json train_config_to_json(const TrainConfig& c) {
  nlohmann::json j = {{"epochs", c.epochs},
                      {"batch_size", c.batch_size},
                      {"lr_decoder", c.lr_decoder},
                      {"lr_encoder", c.lr_encoder},
                      {"seed", c.seed},
                      {"clip_norm", c.clip_norm},
                      {"decoder_init", std::string(decoder_init_name(c.decoder_init))},
                      {"early_stop_patience", nullptr},
                      {"val_fraction", c.val_fraction},
                      {"encoder_blocks", c.encoder_blocks}};
  if (c.early_stop_patience) j["early_stop_patience"] = *c.early_stop_patience;
  return j;
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.lr_decoder = j.value("lr_decoder", c.lr_decoder);
  c.lr_encoder = j.value("lr_encoder", c.lr_encoder);
  c.seed = j.value("seed", c.seed);
  c.clip_norm = j.value("clip_norm", c.clip_norm);
  if (j.contains("decoder_init")) c.decoder_init = parse_decoder_init(j["decoder_init"].get<std::string>());
  if (j.contains("early_stop_patience") && !j["early_stop_patience"].is_null())
    c.early_stop_patience = j["early_stop_patience"].get<int>();
  c.val_fraction = j.value("val_fraction", c.val_fraction);
  if (j.contains("encoder_blocks")) c.encoder_blocks = j["encoder_blocks"].get<std::set<int>>();
  return c;
}

std::vector<Example> make_examples(const std::vector<CaptionRecord>& records, const Vocab& vocab, const DataSpec& spec,
                                   int side) {
  std::vector<Example> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    Example ex;
    ex.image_path = (std::filesystem::path(spec.root) / r.image).string();
    ex.image = preprocess_image(ex.image_path, side, spec.norm);
    const auto tokens = tokenize(r.caption);
    ex.caption = vocab.encode(tokens, spec.max_len);
    ex.style = r.style;
    out.push_back(std::move(ex));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoints

std::string checkpoint_digest(const Checkpoint& ckpt) {
  uint64_t h = fnv1a64("attr2style-checkpoint");
  for (int i = 0; i < ckpt.params.size(); ++i) {
    const auto& e = ckpt.params.entry(i);
    h = fnv1a64(e.name, h);
    h = fnv1a64(shape_str(e.shape), h);
    h = fnv1a64(std::string_view(reinterpret_cast<const char*>(e.data.data()), e.data.size() * sizeof(double)), h);
  }
  return hex64(h);
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  Archive ar;
  for (int i = 0; i < ckpt.params.size(); ++i) {
    const auto& e = ckpt.params.entry(i);
    ar.arrays.push_back({e.name, e.shape, e.data, DType::f64});
  }
  nlohmann::json hist = nlohmann::json::array();
  for (const auto& h : ckpt.history)
    hist.push_back({{"epoch", h.epoch},
                    {"train_loss", number_json(h.train_loss)},
                    {"val_loss", number_json(h.val_loss)},
                    {"seconds", h.seconds}});
  nlohmann::json meta = {{"format", "attr2style-checkpoint/1"},
                         {"phase", std::string(phase_name(ckpt.phase))},
                         {"epoch", ckpt.epoch},
                         {"best_epoch", ckpt.best_epoch},
                         {"vocab_digest", ckpt.vocab_digest},
                         {"vocab_size", ckpt.vocab_size},
                         {"model", model_config_to_json(ckpt.model)},
                         {"config", ckpt.config},
                         {"train_loss", number_json(ckpt.train_loss)},
                         {"val_loss", number_json(ckpt.val_loss)},
                         {"parent_digest", ckpt.parent_digest},
                         {"history", hist}};
  ar.blobs["meta.json"] = meta.dump(2);
  write_archive(path, ar);
}

Checkpoint load_checkpoint(const std::string& path) {
  if (!std::filesystem::exists(path)) throw Error("checkpoint not found: " + path);
  Archive ar;
  nlohmann::json meta;
  try {
    ar = read_archive(path);
    auto it = ar.blobs.find("meta.json");
    if (it == ar.blobs.end()) throw Error("meta.json missing");
    meta = nlohmann::json::parse(it->second);
  } catch (const std::exception& e) {
    throw Error("corrupt checkpoint " + path + ": " + e.what());
  }

  Checkpoint c;
  try {
    c.model = model_config_from_json(meta.at("model"));
    c.vocab_size = meta.at("vocab_size").get<int>();
    c.phase = parse_phase(meta.at("phase").get<std::string>());
    c.epoch = meta.at("epoch").get<int>();
    c.best_epoch = meta.value("best_epoch", c.epoch);
    c.vocab_digest = meta.at("vocab_digest").get<std::string>();
    c.config = meta.value("config", nlohmann::json::object());
    c.train_loss = json_number(meta.at("train_loss"));
    c.val_loss = json_number(meta.at("val_loss"));
    c.parent_digest = meta.value("parent_digest", std::string());
    for (const auto& h : meta.value("history", nlohmann::json::array()))
      c.history.push_back({h.at("epoch").get<int>(), json_number(h.at("train_loss")), json_number(h.at("val_loss")),
                           h.at("seconds").get<double>()});
  } catch (const nlohmann::json::exception& e) {
    throw Error("corrupt checkpoint " + path + ": bad meta.json: " + e.what());
  }

  // Layout only; arrays come from the archive.
  ParamStore layout(false);
  {
    Encoder enc(c.model.encoder_mode, layout);
    AttnDecoder dec(resolve_dims(c.model, c.vocab_size), {}, layout);
  }
  std::map<std::string, NamedArray*> by_name;
  for (auto& a : ar.arrays) by_name[a.name] = &a;
  std::vector<std::string> problems;
  for (int i = 0; i < layout.size(); ++i) {
    const auto& e = layout.entry(i);
    int idx = c.params.add(e.name, e.shape, e.buffer);
    auto it = by_name.find(e.name);
    if (it == by_name.end()) {
      problems.push_back(e.name + " (missing)");
      continue;
    }
    if (it->second->shape != e.shape) {
      problems.push_back(e.name + " (shape " + shape_str(it->second->shape) + ", expected " + shape_str(e.shape) + ")");
      continue;
    }
    c.params.entry(idx).data = std::move(it->second->data);
    by_name.erase(it);
  }
  for (const auto& [name, _] : by_name) problems.push_back(name + " (unexpected)");
  if (!problems.empty()) {
    std::string msg = "checkpoint " + path + " does not match its declared architecture:";
    for (const auto& p : problems) msg += " " + p;
    throw Error(msg);
  }
  return c;
}

Checkpoint load_checkpoint(const std::string& path, const Vocab& vocab) {
  Checkpoint c = load_checkpoint(path);
  if (c.vocab_digest != vocab.digest())
    throw Error("vocab digest mismatch: checkpoint " + path + " was trained with " + c.vocab_digest +
                ", vocabulary is " + vocab.digest());
  return c;
}

void copy_parameters(const ParamStore& from, ParamStore& to, std::string_view prefix) {
  std::vector<std::string> problems;
  for (int i = 0; i < to.size(); ++i) {
    const auto& e = to.entry(i);
    if (e.name.rfind(prefix, 0) != 0) continue;
    auto j = from.find(e.name);
    if (!j) {
      problems.push_back(e.name + " (missing)");
    } else if (from.entry(*j).shape != e.shape) {
      problems.push_back(e.name + " (shape " + shape_str(from.entry(*j).shape) + ", expected " + shape_str(e.shape) +
                         ")");
    }
  }
  for (int i = 0; i < from.size(); ++i) {
    const auto& e = from.entry(i);
    if (e.name.rfind(prefix, 0) == 0 && !to.find(e.name)) problems.push_back(e.name + " (unexpected)");
  }
  if (!problems.empty()) {
    std::string msg = "architecture mismatch:";
    for (size_t k = 0; k < problems.size() && k < 12; ++k) msg += " " + problems[k];
    if (problems.size() > 12) msg += " ... and " + std::to_string(problems.size() - 12) + " more";
    throw Error(msg);
  }
  for (int i = 0; i < to.size(); ++i) {
    auto& e = to.entry(i);
    if (e.name.rfind(prefix, 0) == 0) e.data = from.entry(*from.find(e.name)).data;
  }
}

CaptionModel instantiate(const Checkpoint& ckpt) {
  CaptionModel m(ckpt.model, ckpt.vocab_size);
  copy_parameters(ckpt.params, m.params(), "");
  return m;
}

void write_history_csv(const std::string& path, const std::vector<EpochStats>& history) {
  std::string out = "epoch,train_loss,val_loss,seconds\n";
  for (const auto& h : history) {
    out += fmt::format("{},{:.17g},{},{:.3f}\n", h.epoch, h.train_loss,
                       std::isfinite(h.val_loss) ? fmt::format("{:.17g}", h.val_loss) : std::string(), h.seconds);
  }
  write_file(path, out);
}

// ---------------------------------------------------------------------------
// Optimization

Trainer::Trainer(CaptionModel& model, const TrainConfig& cfg) : model_(model), cfg_(cfg) {
  if (cfg.epochs < 1) throw Error("train.epochs must be >= 1");
  if (cfg.batch_size < 1) throw Error("train.batch_size must be >= 1");
  if (!(cfg.lr_decoder > 0) || !(cfg.lr_encoder > 0)) throw Error("learning rates must be > 0");
  const ParamStore& p = model.params();
  trainable_ = model.encoder().trainable_mask(p, cfg.encoder_blocks);
  for (int i = 0; i < p.size(); ++i) {
    if (!trainable_[static_cast<size_t>(i)] || !is_encoder(p.name(i))) continue;
    encoder_grads_ = true;
    const int b = Encoder::block_of(p.name(i));
    record_from_ = std::min(record_from_, b > 0 ? b : 5);
  }
  if (model.encoder().mode() == EncoderMode::toy && encoder_grads_) record_from_ = 1;
  m_ = p.zeros_like(&trainable_);
  v_ = p.zeros_like(&trainable_);
}

double Trainer::step(std::span<const Example* const> batch, uint64_t step_seed) {
  if (batch.empty()) throw Error("empty batch");
  const ParamStore& p = model_.params();
  const int n = static_cast<int>(batch.size());
  int tokens = 0;
  for (const Example* ex : batch) tokens += std::max(ex->caption.length - 1, 0);
  if (tokens == 0) throw Error("batch has no target tokens");
  const double ce_scale = 1.0 / tokens;
  const double reg_scale = 1.0 / n;

  struct ChunkResult {
    ParamStore grads;
    double ce = 0.0;
    double reg = 0.0;
  };
  std::vector<ChunkResult> chunks(kChunks);
  auto run_chunk = [&](int c) {
    ChunkResult& r = chunks[static_cast<size_t>(c)];
    r.grads = p.zeros_like(&trainable_);
    const int lo = c * n / kChunks, hi = (c + 1) * n / kChunks;
    for (int k = lo; k < hi; ++k) {
      const Example& ex = *batch[static_cast<size_t>(k)];
      Encoder::Tape tape;
      tape.record_from = encoder_grads_ ? record_from_ : 99;
      AnnotationGrid grid = model_.encoder().forward(p, ex.image, tape);
      Rng drop(derive_seed(step_seed, static_cast<uint64_t>(k)));
      Mat d_feat;
      auto s = model_.decoder().loss(p, grid, ex.caption.ids, ex.caption.length, &drop, &r.grads, &trainable_,
                                     encoder_grads_ ? &d_feat : nullptr, ce_scale, reg_scale);
      r.ce += s.ce_sum;
      r.reg += s.reg;
      if (encoder_grads_) model_.encoder().backward(p, tape, d_feat, r.grads, trainable_);
    }
  };

  int threads = cfg_.threads > 0 ? cfg_.threads : static_cast<int>(std::thread::hardware_concurrency());
  threads = std::clamp(threads, 1, kChunks);
  if (threads == 1) {
    for (int c = 0; c < kChunks; ++c) run_chunk(c);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(static_cast<size_t>(threads));
    for (int w = 0; w < threads; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (int c = w; c < kChunks; c += threads) run_chunk(c);
        } catch (...) {
          errors[static_cast<size_t>(w)] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  // Fixed-order reduction keeps results independent of the thread count.
  ParamStore& g = chunks[0].grads;
  double ce = chunks[0].ce, reg = chunks[0].reg;
  for (int c = 1; c < kChunks; ++c) {
    for (int i = 0; i < g.size(); ++i) {
      if (!g.allocated(i)) continue;
      auto& dst = g.entry(i).data;
      const auto& src = chunks[static_cast<size_t>(c)].grads.entry(i).data;
      for (size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
    }
    ce += chunks[static_cast<size_t>(c)].ce;
    reg += chunks[static_cast<size_t>(c)].reg;
  }

  const double objective = ce / tokens + model_.decoder().options().doubly_stochastic * reg / n;
  double sq = 0.0;
  for (int i = 0; i < g.size(); ++i) {
    if (!trainable_[static_cast<size_t>(i)]) continue;
    for (double x : g.entry(i).data) sq += x * x;
  }
  last_grad_norm_ = std::sqrt(sq);
  if (!std::isfinite(objective) || !std::isfinite(last_grad_norm_)) {
    std::string items;
    for (size_t k = 0; k < batch.size() && k < 4; ++k) items += " " + batch[k]->image_path;
    throw Error(fmt::format("non-finite loss at step {}: loss {} grad norm {}; first items:{}", t_ + 1, objective,
                            last_grad_norm_, items));
  }
  const double clip = (cfg_.clip_norm > 0 && last_grad_norm_ > cfg_.clip_norm) ? cfg_.clip_norm / last_grad_norm_ : 1.0;

  ++t_;
  const double bc1 = 1.0 - std::pow(kAdamBeta1, t_);
  const double bc2 = 1.0 - std::pow(kAdamBeta2, t_);
  ParamStore& params = model_.params();
  for (int i = 0; i < params.size(); ++i) {
    if (!trainable_[static_cast<size_t>(i)]) continue;
    const double lr = is_encoder(params.name(i)) ? cfg_.lr_encoder : cfg_.lr_decoder;
    auto& w = params.entry(i).data;
    auto& m = m_.entry(i).data;
    auto& v = v_.entry(i).data;
    const auto& gr = g.entry(i).data;
    for (size_t k = 0; k < w.size(); ++k) {
      const double gk = gr[k] * clip;
      m[k] = kAdamBeta1 * m[k] + (1 - kAdamBeta1) * gk;
      v[k] = kAdamBeta2 * v[k] + (1 - kAdamBeta2) * gk * gk;
      w[k] -= lr * (m[k] / bc1) / (std::sqrt(v[k] / bc2) + kAdamEps);
    }
  }
  return objective;
}

double Trainer::mean_loss(std::span<const Example> examples) const {
  double ce = 0.0;
  int tokens = 0;
  for (const Example& ex : examples) {
    auto grid = model_.encode(ex.image);
    auto s = model_.decoder().loss(model_.params(), grid, ex.caption.ids, ex.caption.length);
    ce += s.ce_sum;
    tokens += s.tokens;
  }
  return tokens > 0 ? ce / tokens : std::numeric_limits<double>::quiet_NaN();
}

TrainOutcome fit(CaptionModel& model, const TrainConfig& cfg, const std::vector<Example>& train,
                 const std::vector<Example>& val) {
  if (train.empty()) throw Error("empty training corpus");
  Trainer trainer(model, cfg);
  TrainOutcome out;
  std::vector<size_t> order(train.size());
  std::iota(order.begin(), order.end(), size_t{0});

  double best = std::numeric_limits<double>::infinity();
  ParamStore best_params;
  int since_best = 0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::iota(order.begin(), order.end(), size_t{0});
    Rng shuffle(derive_seed(cfg.seed, 0x5000 + static_cast<uint64_t>(epoch)));
    for (size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);

    double weighted = 0.0;
    int tokens = 0;
    std::vector<const Example*> batch;
    for (size_t start = 0, b = 0; start < order.size(); start += static_cast<size_t>(cfg.batch_size), ++b) {
      batch.clear();
      int batch_tokens = 0;
      for (size_t k = start; k < std::min(order.size(), start + static_cast<size_t>(cfg.batch_size)); ++k) {
        batch.push_back(&train[order[k]]);
        batch_tokens += std::max(train[order[k]].caption.length - 1, 0);
      }
      const uint64_t step_seed = derive_seed(cfg.seed, (static_cast<uint64_t>(epoch) << 32) | b);
      weighted += trainer.step(batch, step_seed) * batch_tokens;
      tokens += batch_tokens;
    }
    EpochStats st;
    st.epoch = epoch;
    st.train_loss = weighted / std::max(tokens, 1);
    st.val_loss = val.empty() ? std::numeric_limits<double>::quiet_NaN() : trainer.mean_loss(val);
    st.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.history.push_back(st);
    spdlog::info("epoch {}/{}: train {:.4f} val {:.4f} ({:.1f}s)", epoch, cfg.epochs, st.train_loss, st.val_loss,
                 st.seconds);

    const double score = val.empty() ? -epoch : st.val_loss;
    if (score < best) {
      best = score;
      out.best_epoch = epoch;
      best_params = model.params();
      since_best = 0;
    } else if (cfg.early_stop_patience && ++since_best >= *cfg.early_stop_patience) {
      spdlog::info("early stop after epoch {} (best {})", epoch, out.best_epoch);
      break;
    }
  }
  if (out.best_epoch != static_cast<int>(out.history.size())) model.params() = std::move(best_params);
  return out;
}

namespace {

void require_domain(const std::vector<CaptionRecord>& records, Domain d, std::string_view phase) {
  if (records.empty()) throw Error(std::string(phase) + ": empty corpus");
  for (size_t i = 0; i < records.size(); ++i) {
    if (records[i].domain != d)
      throw Error(fmt::format("{}: record {} has domain {}, expected {}", phase, i, domain_name(records[i].domain),
                              domain_name(d)));
  }
}

Checkpoint run_phase(CaptionModel& model, Phase phase, const TrainConfig& cfg, const std::vector<CaptionRecord>& records,
                     const Vocab& vocab, const DataSpec& data) {
  auto split = split_records(records, cfg.seed, 1.0 - cfg.val_fraction, cfg.val_fraction, false);
  std::vector<CaptionRecord> tr, va;
  for (auto& r : split) (r.split == Split::val ? va : tr).push_back(r);
  if (tr.empty()) {
    tr = std::move(va);
    va.clear();
  }
  spdlog::info("phase {}: {} train / {} val records", phase_name(phase), tr.size(), va.size());
  const auto train = make_examples(tr, vocab, data, model.input_side());
  const auto val = make_examples(va, vocab, data, model.input_side());
  TrainOutcome o = fit(model, cfg, train, val);

  Checkpoint c;
  c.model = model.config();
  c.vocab_size = model.vocab_size();
  c.params = model.params();
  c.phase = phase;
  c.epoch = static_cast<int>(o.history.size());
  c.best_epoch = o.best_epoch;
  c.vocab_digest = vocab.digest();
  c.config = train_config_to_json(cfg);
  c.history = o.history;
  const auto& best = o.history[static_cast<size_t>(o.best_epoch - 1)];
  c.train_loss = best.train_loss;
  c.val_loss = best.val_loss;
  return c;
}

}  // namespace

Checkpoint train_phase_a(const ModelConfig& model, const TrainConfig& cfg, const std::vector<CaptionRecord>& records,
                         const Vocab& vocab, const DataSpec& data) {
  require_domain(records, Domain::source, "train_phase_a");
  CaptionModel m(model, vocab.size());
  m.init_generic(cfg.seed);
  return run_phase(m, Phase::A, cfg, records, vocab, data);
}

CaptionModel init_phase_b(const Checkpoint& phase_a, const ModelConfig& model, const TrainConfig& cfg) {
  if (phase_a.phase != Phase::A)
    throw Error("finetune_phase_b needs a phase A checkpoint, got phase " + std::string(phase_name(phase_a.phase)));
  CaptionModel m(model, phase_a.vocab_size);
  m.init_decoder(derive_seed(cfg.seed, 0xb));
  copy_parameters(phase_a.params, m.params(), "encoder.");
  if (cfg.decoder_init == DecoderInit::warm) copy_parameters(phase_a.params, m.params(), "decoder.");
  return m;
}

Checkpoint finetune_phase_b(const Checkpoint& phase_a, const ModelConfig& model, const TrainConfig& cfg,
                            const std::vector<CaptionRecord>& records, const Vocab& vocab, const DataSpec& data) {
  require_domain(records, Domain::target, "finetune_phase_b");
  if (phase_a.vocab_digest != vocab.digest())
    throw Error("vocab digest mismatch: phase A used " + phase_a.vocab_digest + ", vocabulary is " + vocab.digest());
  CaptionModel m = init_phase_b(phase_a, model, cfg);
  Checkpoint c = run_phase(m, Phase::B, cfg, records, vocab, data);
  c.parent_digest = checkpoint_digest(phase_a);
  return c;
}

CaptionModel init_baseline(const ModelConfig& model, const TrainConfig& cfg, int vocab_size) {
  CaptionModel m(model, vocab_size);
  m.init_generic(cfg.seed);
  m.init_decoder(derive_seed(cfg.seed, 0xb));
  return m;
}

Checkpoint train_baseline(const ModelConfig& model, const TrainConfig& cfg, const std::vector<CaptionRecord>& records,
                          const Vocab& vocab, const DataSpec& data) {
  require_domain(records, Domain::target, "train_baseline");
  CaptionModel m = init_baseline(model, cfg, vocab.size());
  return run_phase(m, Phase::baseline, cfg, records, vocab, data);
}

}  // namespace attr2style
