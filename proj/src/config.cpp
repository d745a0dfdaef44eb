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


#include "attr2style/config.hpp"

#include "attr2style/common.hpp"

#include <fmt/format.h>

namespace attr2style {

using json = nlohmann::json;

json default_config() {
  json synth = synth_config_to_json(SynthConfig{});
  synth["seed"] = nullptr;  // follows the top-level seed
  json train = {{"epochs", 30},
                {"batch_size", 16},
                {"lr_decoder", 4e-4},
                {"lr_encoder", 1e-4},
                {"clip_norm", 5.0},
                {"val_fraction", 0.1},
                {"early_stop_patience", nullptr},
                {"decoder_init", "fresh"},
                {"threads", 0},
                {"source", json::object()},
                {"target", json::object()},
                {"baseline", json::object()}};
  return {{"seed", 42},
          {"data",
           {{"corpus_dir", ""},
            {"source_manifest", ""},
            {"target_manifest", ""},
            {"test_manifest", ""},
            {"vocab", ""},
            {"norm_stats", ""},
            {"max_len", 20},
            {"min_freq", 1}}},
          {"synth", synth},
          {"model",
           {{"encoder",
             {{"mode", "toy"},
              {"phase_a_blocks", json::array()},
              {"phase_b_blocks", {2, 3, 4}},
              {"pretrained_weights", ""}}},
            {"embed", 0},
            {"hidden", 0},
            {"attention", 0},
            {"gate", false},
            {"dropout", 0.5},
            {"doubly_stochastic", 0.0}}},
          {"train", train},
          {"decode", {{"beam", 3}, {"max_len", 20}, {"length_norm", false}}},
          {"eval", {{"lexicon", StyleLexicon::defaults().to_json()}}}};
}

namespace {

// Subtrees accepted as a whole (only their JSON type is checked here).
bool is_opaque(const std::string& path) {
  return path == "synth.correlation" || path == "synth.templates" || path == "eval.lexicon";
}

bool is_phase_block(const std::string& path) {
  return path == "train.source" || path == "train.target" || path == "train.baseline";
}

// Keys with a null default that also take an integer.
bool nullable_int(const std::string& path) { return path == "synth.seed" || path.ends_with("early_stop_patience"); }

std::string type_name(const json& v) {
  if (v.is_boolean()) return "boolean";
  if (v.is_number_integer()) return "integer";
  if (v.is_number()) return "number";
  if (v.is_string()) return "string";
  if (v.is_array()) return "array";
  if (v.is_object()) return "object";
  return "null";
}

std::string expected_name(const json& def, const std::string& path) {
  return nullable_int(path) ? "integer or null" : type_name(def);
}

bool type_ok(const json& def, const json& v, const std::string& path) {
  if (nullable_int(path)) return v.is_null() || v.is_number_integer();
  if (def.is_boolean()) return v.is_boolean();
  if (def.is_number_integer()) return v.is_number_integer();
  if (def.is_number()) return v.is_number();
  if (def.is_string()) return v.is_string();
  if (def.is_array()) return v.is_array();
  if (def.is_object()) return v.is_object();
  return v.is_null();
}

json phase_defaults(const json& defaults) {
  json c = defaults.at("train");
  c.erase("source");
  c.erase("target");
  c.erase("baseline");
  return c;
}

// Schema node for a dotted path, or nullptr when the key is unknown.
const json* schema_for(const json& defaults, const json& phase, const std::vector<std::string>& parts) {
  const json* node = &defaults;
  std::string path;
  for (size_t i = 0; i < parts.size(); ++i) {
    path += (i ? "." : "") + parts[i];
    if (!node->is_object() || !node->contains(parts[i])) return nullptr;
    node = &(*node)[parts[i]];
    if (i + 1 < parts.size()) {
      if (is_opaque(path)) return nullptr;
      if (is_phase_block(path)) node = &phase;
    }
  }
  return node;
}

void merge_checked(json& base, const json& layer, const json& schema, const json& phase, const std::string& prefix) {
  if (!layer.is_object())
    throw UsageError(fmt::format("config section '{}' expects object, got {}", prefix.empty() ? "<root>" : prefix,
                                 type_name(layer)));
  for (const auto& [key, value] : layer.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (!schema.contains(key)) throw UsageError(fmt::format("unknown config key '{}'", path));
    const json& def = schema[key];
    if (is_phase_block(path)) {
      merge_checked(base[key], value, phase, phase, path);
    } else if (def.is_object() && !is_opaque(path)) {
      merge_checked(base[key], value, def, phase, path);
    } else {
      if (!type_ok(def, value, path))
        throw UsageError(
            fmt::format("config key '{}' expects {}, got {}", path, expected_name(def, path), type_name(value)));
      base[key] = value;
    }
  }
}

std::vector<std::string> split_dots(std::string_view key) {
  std::vector<std::string> parts;
  size_t start = 0;
  while (true) {
    const size_t dot = key.find('.', start);
    parts.emplace_back(key.substr(start, dot == std::string_view::npos ? std::string_view::npos : dot - start));
    if (parts.back().empty()) throw UsageError(fmt::format("malformed config key '{}'", key));
    if (dot == std::string_view::npos) break;
    start = dot + 1;
  }
  return parts;
}

json parse_value(const json& def, const std::string& path, const std::string& text) {
  auto fail = [&]() -> json {
    throw UsageError(fmt::format("config key '{}' expects {}, got '{}'", path, expected_name(def, path), text));
  };
  if (def.is_string() && !nullable_int(path)) return text;
  json v;
  try {
    v = json::parse(text);
  } catch (const json::parse_error&) {
    return fail();
  }
  if (!type_ok(def, v, path)) return fail();
  return v;
}

}  // namespace

void apply_override(json& tree, std::string_view assignment) {
  const size_t eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0)
    throw UsageError(fmt::format("override '{}' is not of the form key=value", assignment));
  const std::string key(assignment.substr(0, eq));
  const std::string text(assignment.substr(eq + 1));
  const auto parts = split_dots(key);
  const json defaults = default_config();
  const json phase = phase_defaults(defaults);
  const json* def = schema_for(defaults, phase, parts);
  if (!def) throw UsageError(fmt::format("unknown config key '{}'", key));
  json value;
  if (def->is_object() && !is_opaque(key)) {
    // Whole sections take a JSON object and are merged key by key.
    try {
      value = json::parse(text);
    } catch (const json::parse_error&) {
      throw UsageError(fmt::format("config key '{}' expects object, got '{}'", key, text));
    }
  } else {
    value = parse_value(*def, key, text);
  }
  json wrapped = value;
  for (auto it = parts.rbegin(); it != parts.rend(); ++it) wrapped = json{{*it, wrapped}};
  merge_checked(tree, wrapped, defaults, phase, "");
}

json parse_config_text(const std::string& text, const std::vector<std::string>& overrides) {
  json tree = default_config();
  const json defaults = tree;
  bool blank = true;
  for (char c : text)
    if (!std::isspace(static_cast<unsigned char>(c))) blank = false;
  if (!blank) {
    json file;
    try {
      file = json::parse(text);
    } catch (const json::parse_error& e) {
      throw UsageError(fmt::format("config is not valid JSON: {}", e.what()));
    }
    merge_checked(tree, file, defaults, phase_defaults(defaults), "");
  }
  for (const auto& o : overrides) apply_override(tree, o);
  return tree;
}

json parse_config(const std::string& path, const std::vector<std::string>& overrides) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const Error&) {
    throw UsageError("cannot read config file " + path);
  }
  return parse_config_text(text, overrides);
}

namespace {

TrainConfig train_from(const json& common, const json& phase_over, uint64_t seed, const std::set<int>& blocks) {
  json t = common;
  for (const auto& [k, v] : phase_over.items()) t[k] = v;
  TrainConfig c;
  c.epochs = t.at("epochs").get<int>();
  c.batch_size = t.at("batch_size").get<int>();
  c.lr_decoder = t.at("lr_decoder").get<double>();
  c.lr_encoder = t.at("lr_encoder").get<double>();
  c.clip_norm = t.at("clip_norm").get<double>();
  c.val_fraction = t.at("val_fraction").get<double>();
  if (!t.at("early_stop_patience").is_null()) c.early_stop_patience = t.at("early_stop_patience").get<int>();
  try {
    c.decoder_init = parse_decoder_init(t.at("decoder_init").get<std::string>());
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  c.threads = t.at("threads").get<int>();
  c.seed = seed;
  c.encoder_blocks = blocks;
  if (c.epochs < 1) throw UsageError("train.epochs must be >= 1");
  if (c.batch_size < 1) throw UsageError("train.batch_size must be >= 1");
  if (!(c.lr_decoder > 0) || !(c.lr_encoder > 0)) throw UsageError("learning rates must be > 0");
  if (c.val_fraction < 0 || c.val_fraction >= 1) throw UsageError("train.val_fraction must be in [0, 1)");
  return c;
}

std::set<int> block_set(const json& arr, const std::string& key) {
  std::set<int> s;
  for (const auto& v : arr) {
    if (!v.is_number_integer()) throw UsageError(fmt::format("{} must list integers", key));
    const int b = v.get<int>();
    if (b < 2 || b > 4) throw UsageError(fmt::format("{}: block {} outside {{2, 3, 4}}", key, b));
    s.insert(b);
  }
  return s;
}

}  // namespace

RunConfig resolve_config(const json& tree) {
  RunConfig r;
  r.seed = tree.at("seed").get<uint64_t>();
  const json& d = tree.at("data");
  r.corpus_dir = d.at("corpus_dir").get<std::string>();
  r.source_manifest = d.at("source_manifest").get<std::string>();
  r.target_manifest = d.at("target_manifest").get<std::string>();
  r.test_manifest = d.at("test_manifest").get<std::string>();
  r.vocab_path = d.at("vocab").get<std::string>();
  r.norm_stats = d.at("norm_stats").get<std::string>();
  r.max_len = d.at("max_len").get<int>();
  r.min_freq = d.at("min_freq").get<int>();
  if (r.max_len < 2) throw UsageError("data.max_len must be >= 2");
  if (r.min_freq < 1) throw UsageError("data.min_freq must be >= 1");

  json synth = tree.at("synth");
  if (synth.at("seed").is_null()) synth["seed"] = r.seed;
  try {
    r.synth = synth_config_from_json(synth);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }

  const json& m = tree.at("model");
  try {
    r.model.encoder_mode = parse_encoder_mode(m.at("encoder").at("mode").get<std::string>());
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  r.model.pretrained_weights = m.at("encoder").at("pretrained_weights").get<std::string>();
  r.phase_a_blocks = block_set(m.at("encoder").at("phase_a_blocks"), "model.encoder.phase_a_blocks");
  r.phase_b_blocks = block_set(m.at("encoder").at("phase_b_blocks"), "model.encoder.phase_b_blocks");
  r.model.embed = m.at("embed").get<int>();
  r.model.hidden = m.at("hidden").get<int>();
  r.model.attention = m.at("attention").get<int>();
  r.model.gate = m.at("gate").get<bool>();
  r.model.dropout = m.at("dropout").get<double>();
  r.model.doubly_stochastic = m.at("doubly_stochastic").get<double>();
  if (r.model.dropout < 0 || r.model.dropout >= 1) throw UsageError("model.dropout must be in [0, 1)");
  if (r.model.embed < 0 || r.model.hidden < 0 || r.model.attention < 0)
    throw UsageError("model dims must be >= 0 (0 = mode default)");

  const json& t = tree.at("train");
  json common = t;
  common.erase("source");
  common.erase("target");
  common.erase("baseline");
  r.source = train_from(common, t.at("source"), r.seed, r.phase_a_blocks);
  r.target = train_from(common, t.at("target"), r.seed, r.phase_b_blocks);
  r.baseline = train_from(common, t.at("baseline"), r.seed, r.phase_b_blocks);

  const json& dec = tree.at("decode");
  r.decode.beam = dec.at("beam").get<int>();
  r.decode.max_len = dec.at("max_len").get<int>();
  r.decode.length_norm = dec.at("length_norm").get<bool>();
  if (r.decode.beam < 1) throw UsageError("decode.beam must be >= 1");
  if (r.decode.max_len < 2) throw UsageError("decode.max_len must be >= 2");

  try {
    r.lexicon = StyleLexicon::from_json(tree.at("eval").at("lexicon"));
  } catch (const UsageError&) {
    throw;
  } catch (const std::exception& e) {
    throw UsageError(std::string("eval.lexicon: ") + e.what());
  }
  return r;
}

}  // namespace attr2style
