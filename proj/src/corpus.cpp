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

#include "attr2style/corpus.hpp"

#include "attr2style/common.hpp"

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

namespace attr2style {

using nlohmann::json;

namespace {
constexpr std::array<std::string_view, kNumStyles> kStyleNames = {"party", "cocktail", "feminine",
                                                                  "summer", "winter",   "none"};

std::string allowed_styles() {
  std::string s;
  for (auto n : kStyleNames) {
    if (!s.empty()) s += ", ";
    s += n;
  }
  return s;
}
}  // namespace

std::string_view style_name(Style s) { return kStyleNames[static_cast<size_t>(s)]; }

Style parse_style(std::string_view name) {
  for (size_t i = 0; i < kStyleNames.size(); ++i)
    if (kStyleNames[i] == name) return static_cast<Style>(i);
  throw Error("unknown style '" + std::string(name) + "' (allowed: " + allowed_styles() + ")");
}

std::string_view domain_name(Domain d) { return d == Domain::source ? "source" : "target"; }

std::string_view split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

std::vector<CaptionRecord> load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open manifest " + path);
  std::vector<CaptionRecord> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); })) continue;
    const std::string where = "manifest line " + std::to_string(lineno) + ": ";
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw Error(where + "malformed JSON (" + e.what() + ")");
    }
    if (!j.is_object()) throw Error(where + "malformed JSON (expected an object)");
    auto required_string = [&](const char* key) -> std::string {
      if (!j.contains(key)) throw Error(where + "missing field " + key);
      if (!j[key].is_string()) throw Error(where + "field " + key + " must be a string");
      return j[key].get<std::string>();
    };
    CaptionRecord rec;
    rec.image = required_string("image");
    rec.caption = required_string("caption");
    const std::string domain = required_string("domain");
    if (domain == "source") rec.domain = Domain::source;
    else if (domain == "target") rec.domain = Domain::target;
    else throw Error(where + "unknown domain '" + domain + "' (allowed: source, target)");
    if (j.contains("style") && !j["style"].is_null()) {
      if (!j["style"].is_string()) throw Error(where + "field style must be a string");
      try {
        rec.style = parse_style(j["style"].get<std::string>());
      } catch (const Error& e) {
        throw Error(where + e.what());
      }
    }
    if (j.contains("split") && !j["split"].is_null()) {
      const std::string s = j["split"].is_string() ? j["split"].get<std::string>() : "";
      if (s == "train") rec.split = Split::train;
      else if (s == "val") rec.split = Split::val;
      else if (s == "test") rec.split = Split::test;
      else throw Error(where + "unknown split '" + s + "' (allowed: train, val, test)");
    }
    out.push_back(std::move(rec));
  }
  return out;
}

std::string manifest_line(const CaptionRecord& rec) {
  // Fixed key order keeps manifests byte-stable.
  json j = json::object();
  j["image"] = rec.image;
  j["caption"] = rec.caption;
  j["domain"] = domain_name(rec.domain);
  if (rec.style) j["style"] = style_name(*rec.style);
  if (rec.split) j["split"] = split_name(*rec.split);
  return j.dump();
}

void write_manifest(const std::string& path, const std::vector<CaptionRecord>& records) {
  std::string text;
  for (const auto& r : records) {
    text += manifest_line(r);
    text += '\n';
  }
  write_file(path, text);
}

std::string manifest_root(const std::string& manifest_path) {
  return std::filesystem::path(manifest_path).parent_path().string();
}

PixelGrid preprocess_pixels(const PixelGrid& rgb, int side, const NormStats& stats) {
  if (rgb.height <= 0 || rgb.width <= 0) throw Error("cannot decode image: empty pixel grid");
  int h = side, w = side;
  if (rgb.height < rgb.width) {
    w = static_cast<int>(std::lround(static_cast<double>(rgb.width) * side / rgb.height));
  } else {
    h = static_cast<int>(std::lround(static_cast<double>(rgb.height) * side / rgb.width));
  }
  PixelGrid out = center_crop(resize_bilinear(rgb, h, w), side, side);
  for (int y = 0; y < side; ++y)
    for (int x = 0; x < side; ++x)
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = (out.at(y, x, c) - stats.mean[c]) / stats.std[c];
  return out;
}

PixelGrid preprocess_image(const std::string& path, int side, const NormStats& stats) {
  return preprocess_pixels(read_png(path), side, stats);
}

PixelGrid flip_horizontal(const PixelGrid& img) {
  PixelGrid out(img.height, img.width);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = img.at(y, img.width - 1 - x, c);
  return out;
}

std::vector<CaptionRecord> split_records(std::vector<CaptionRecord> records, uint64_t seed, double train_fraction,
                                         double val_fraction, bool warn_empty_test) {
  if (!(train_fraction > 0) || !(val_fraction > 0) || train_fraction + val_fraction > 1.0 + 1e-12)
    throw std::invalid_argument("split_records: fractions must be positive and sum to at most 1");
  const size_t n = records.size();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  Rng rng(seed);
  for (size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

  const auto n_train = std::min<size_t>(n, static_cast<size_t>(std::llround(n * train_fraction)));
  const auto n_val = std::min<size_t>(n - n_train, static_cast<size_t>(std::llround(n * val_fraction)));
  for (size_t r = 0; r < n; ++r) {
    Split s = r < n_train ? Split::train : (r < n_train + n_val ? Split::val : Split::test);
    records[order[r]].split = s;
  }
  if (warn_empty_test && n > 0 && n_train + n_val == n)
    spdlog::warn("split_records: fractions ({}, {}) leave 0 of {} records for test", train_fraction, val_fraction, n);
  return records;
}

}  // namespace attr2style
