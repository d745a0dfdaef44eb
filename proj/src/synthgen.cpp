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

#include "attr2style/synthgen.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>

namespace attr2style {

using nlohmann::json;

namespace {

constexpr std::array<std::string_view, kNumPrints> kPrintNames = {"floral", "embellished", "solid", "striped",
                                                                  "geometric"};
constexpr std::array<std::string_view, kNumShapes> kShapeNames = {"a-line", "shift", "bodycon", "maxi", "peplum"};
constexpr std::array<std::string_view, kNumColors> kColorNames = {"red",   "blue",   "green", "black",
                                                                  "white", "yellow", "pink",  "purple"};
constexpr std::array<std::string_view, kNumLengths> kLengthNames = {"mini", "knee", "maxi"};

using Rgb = std::array<double, 3>;

constexpr std::array<Rgb, kNumColors> kColorRgb = {{
    {0.80, 0.10, 0.12},  // red
    {0.12, 0.25, 0.75},  // blue
    {0.10, 0.55, 0.20},  // green
    {0.08, 0.08, 0.08},  // black
    {0.96, 0.96, 0.94},  // white
    {0.95, 0.82, 0.15},  // yellow
    {0.95, 0.55, 0.70},  // pink
    {0.50, 0.20, 0.60},  // purple
}};
constexpr Rgb kBackground = {0.70, 0.68, 0.64};

double luminance(const Rgb& c) { return 0.299 * c[0] + 0.587 * c[1] + 0.114 * c[2]; }

Rgb scale_rgb(const Rgb& c, double s) { return {c[0] * s, c[1] * s, c[2] * s}; }

// Row `dominant` of a family gets `p`, the remaining mass is spread evenly.
template <size_t N>
std::array<double, N> dominant_row(std::initializer_list<std::pair<int, double>> fixed) {
  std::array<double, N> row{};
  double used = 0.0;
  std::array<bool, N> set{};
  for (auto [i, p] : fixed) {
    row[static_cast<size_t>(i)] = p;
    set[static_cast<size_t>(i)] = true;
    used += p;
  }
  const auto free = static_cast<double>(N - fixed.size());
  for (size_t i = 0; i < N; ++i)
    if (!set[i]) row[i] = (1.0 - used) / free;
  return row;
}

template <size_t N>
std::array<double, N> uniform_row() {
  std::array<double, N> row{};
  row.fill(1.0 / N);
  return row;
}

template <size_t N>
void check_row(const std::array<double, N>& row, const char* family, Style s) {
  double sum = 0.0;
  for (double p : row) {
    if (!(p >= 0.0)) throw Error(std::string("correlation matrix: negative entry in ") + family + " row " +
                                 std::string(style_name(s)));
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw Error(std::string("correlation matrix: ") + family + " row " + std::string(style_name(s)) +
                " sums to " + std::to_string(sum));
}

std::string replace_all(std::string s, std::string_view key, std::string_view value) {
  for (size_t pos = s.find(key); pos != std::string::npos; pos = s.find(key, pos + value.size()))
    s.replace(pos, key.size(), value);
  return s;
}

// Silhouette profile: symmetric polygon given as (y, half-width) knots in
// unit coordinates.
struct Knot {
  double y, hw;
};

std::vector<Knot> silhouette_profile(Shape shape, Length length) {
  const double shoulder = 0.04, bust = 0.14, waist = 0.34;
  const double hem = length == Length::mini ? 0.66 : (length == Length::knee ? 0.80 : 0.97);
  auto skirt = [&](double t) { return waist + t * (hem - waist); };
  std::vector<Knot> k = {{shoulder, 0.22}, {bust, 0.27}};
  switch (shape) {
    case Shape::a_line:
      k.insert(k.end(), {{waist, 0.20}, {hem, 0.48}});
      break;
    case Shape::shift:
      k.insert(k.end(), {{waist, 0.26}, {hem, 0.29}});
      break;
    case Shape::bodycon:
      k.insert(k.end(), {{waist, 0.17}, {skirt(0.3), 0.24}, {hem, 0.17}});
      break;
    case Shape::maxi:
      // empire line, then a long straight flow
      k = {{shoulder, 0.20}, {0.22, 0.20}, {0.24, 0.27}, {hem, 0.40}};
      break;
    case Shape::peplum:
      k.insert(k.end(), {{waist, 0.17}, {skirt(0.10), 0.36}, {skirt(0.13), 0.21}, {hem, 0.21}});
      break;
  }
  return k;
}

double profile_half_width(const std::vector<Knot>& k, double y) {
  if (y < k.front().y || y > k.back().y) return -1.0;
  for (size_t i = 1; i < k.size(); ++i) {
    if (y <= k[i].y) {
      const double t = (y - k[i - 1].y) / std::max(k[i].y - k[i - 1].y, 1e-12);
      return k[i - 1].hw + t * (k[i].hw - k[i - 1].hw);
    }
  }
  return k.back().hw;
}

void paint(PixelGrid& img, int y, int x, const Rgb& c) {
  for (int ch = 0; ch < 3; ++ch) img.at(y, x, ch) = c[static_cast<size_t>(ch)];
}

std::string index_name(size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%06zu", i);
  return buf;
}

template <size_t N>
json rows_to_json(const std::array<std::array<double, N>, kNumStyles>& rows) {
  json j = json::object();
  for (Style s : kAllStyles) j[std::string(style_name(s))] = rows[static_cast<size_t>(style_index(s))];
  return j;
}

template <size_t N>
void rows_from_json(const json& j, std::array<std::array<double, N>, kNumStyles>& rows, const char* family) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    const Style s = parse_style(it.key());
    const auto v = it.value().get<std::vector<double>>();
    if (v.size() != N) throw Error(std::string("correlation.") + family + "." + it.key() + ": expected " +
                                   std::to_string(N) + " entries");
    std::copy(v.begin(), v.end(), rows[static_cast<size_t>(style_index(s))].begin());
  }
}

}  // namespace

std::string_view print_name(Print p) { return kPrintNames[static_cast<size_t>(p)]; }
std::string_view shape_name(Shape s) { return kShapeNames[static_cast<size_t>(s)]; }
std::string_view color_name(Color c) { return kColorNames[static_cast<size_t>(c)]; }
std::string_view length_name(Length l) { return kLengthNames[static_cast<size_t>(l)]; }

CorrelationMatrix CorrelationMatrix::defaults() {
  using P = Print;
  auto i = [](auto e) { return static_cast<int>(e); };
  CorrelationMatrix m;
  m.print[style_index(Style::party)] = dominant_row<kNumPrints>({{i(P::embellished), 0.60}, {i(P::floral), 0.25}});
  m.print[style_index(Style::cocktail)] = dominant_row<kNumPrints>({{i(P::solid), 0.50}, {i(P::embellished), 0.30}});
  m.print[style_index(Style::feminine)] = dominant_row<kNumPrints>({{i(P::floral), 0.60}});
  m.print[style_index(Style::summer)] = dominant_row<kNumPrints>({{i(P::striped), 0.45}, {i(P::floral), 0.30}});
  m.print[style_index(Style::winter)] = dominant_row<kNumPrints>({{i(P::solid), 0.55}, {i(P::geometric), 0.25}});
  m.print[style_index(Style::none)] = uniform_row<kNumPrints>();

  m.shape[style_index(Style::party)] = dominant_row<kNumShapes>({{i(Shape::bodycon), 0.4}});
  m.shape[style_index(Style::cocktail)] = dominant_row<kNumShapes>({{i(Shape::peplum), 0.4}});
  m.shape[style_index(Style::feminine)] = dominant_row<kNumShapes>({{i(Shape::a_line), 0.4}});
  m.shape[style_index(Style::summer)] = dominant_row<kNumShapes>({{i(Shape::maxi), 0.4}});
  m.shape[style_index(Style::winter)] = dominant_row<kNumShapes>({{i(Shape::shift), 0.4}});
  m.shape[style_index(Style::none)] = uniform_row<kNumShapes>();

  for (auto& row : m.color) row = uniform_row<kNumColors>();
  for (auto& row : m.length) row = uniform_row<kNumLengths>();
  return m;
}

CorrelationMatrix CorrelationMatrix::uniform() {
  CorrelationMatrix m;
  for (auto& row : m.print) row = uniform_row<kNumPrints>();
  for (auto& row : m.shape) row = uniform_row<kNumShapes>();
  for (auto& row : m.color) row = uniform_row<kNumColors>();
  for (auto& row : m.length) row = uniform_row<kNumLengths>();
  return m;
}

void CorrelationMatrix::validate() const {
  for (Style s : kAllStyles) {
    const auto r = static_cast<size_t>(style_index(s));
    check_row(print[r], "print", s);
    check_row(shape[r], "shape", s);
    check_row(color[r], "color", s);
    check_row(length[r], "length", s);
  }
}

CaptionTemplates::CaptionTemplates() {
  for (Style s : kAllStyles) style[s] = {"this dress is a perfect pick for a {style} look"};
  style[Style::none] = {"this dress is for everyday wear"};
}

json synth_config_to_json(const SynthConfig& cfg) {
  json tpl_style = json::object();
  for (const auto& [s, list] : cfg.templates.style) tpl_style[std::string(style_name(s))] = list;
  return json{
      {"n_source", cfg.n_source},
      {"n_target", cfg.n_target},
      {"n_test", cfg.n_test},
      {"seed", cfg.seed},
      {"image_side", cfg.image_side},
      {"balanced_test", cfg.balanced_test},
      {"correlation",
       {{"print", rows_to_json(cfg.correlation.print)},
        {"shape", rows_to_json(cfg.correlation.shape)},
        {"color", rows_to_json(cfg.correlation.color)},
        {"length", rows_to_json(cfg.correlation.length)}}},
      {"templates", {{"attribute", cfg.templates.attribute}, {"style", tpl_style}}},
  };
}

SynthConfig synth_config_from_json(const json& j) {
  SynthConfig cfg;
  if (j.contains("n_source")) cfg.n_source = j["n_source"].get<int>();
  if (j.contains("n_target")) cfg.n_target = j["n_target"].get<int>();
  if (j.contains("n_test")) cfg.n_test = j["n_test"].get<int>();
  if (j.contains("seed")) cfg.seed = j["seed"].get<uint64_t>();
  if (j.contains("image_side")) cfg.image_side = j["image_side"].get<int>();
  if (j.contains("balanced_test")) cfg.balanced_test = j["balanced_test"].get<bool>();
  if (j.contains("correlation")) {
    const auto& c = j["correlation"];
    if (c.contains("print")) rows_from_json(c["print"], cfg.correlation.print, "print");
    if (c.contains("shape")) rows_from_json(c["shape"], cfg.correlation.shape, "shape");
    if (c.contains("color")) rows_from_json(c["color"], cfg.correlation.color, "color");
    if (c.contains("length")) rows_from_json(c["length"], cfg.correlation.length, "length");
  }
  if (j.contains("templates")) {
    const auto& t = j["templates"];
    if (t.contains("attribute")) cfg.templates.attribute = t["attribute"].get<std::vector<std::string>>();
    if (t.contains("style"))
      for (auto it = t["style"].begin(); it != t["style"].end(); ++it)
        cfg.templates.style[parse_style(it.key())] = it.value().get<std::vector<std::string>>();
  }
  if (cfg.n_source < 0 || cfg.n_target < 0 || cfg.n_test < 0) throw Error("synth: counts must be >= 0");
  if (cfg.image_side < 32) throw Error("synth: image_side must be >= 32");
  if (cfg.templates.attribute.empty()) throw Error("synth: attribute template list is empty");
  for (const auto& [s, list] : cfg.templates.style)
    if (list.empty()) throw Error("synth: style template list for " + std::string(style_name(s)) + " is empty");
  cfg.correlation.validate();
  return cfg;
}

AttributeTuple sample_attributes(const CorrelationMatrix& m, Style style, Rng& rng) {
  const auto r = static_cast<size_t>(style_index(style));
  AttributeTuple a;
  a.print = static_cast<Print>(rng.categorical(m.print[r]));
  a.shape = static_cast<Shape>(rng.categorical(m.shape[r]));
  a.color = static_cast<Color>(rng.categorical(m.color[r]));
  a.length = static_cast<Length>(rng.categorical(m.length[r]));
  return a;
}

SampledItem sample_item(const SynthConfig& cfg, Rng& rng) {
  SampledItem item;
  item.style = kAllStyles[rng.below(kNumStyles)];
  item.attrs = sample_attributes(cfg.correlation, item.style, rng);
  return item;
}

RenderedGarment render_garment(const AttributeTuple& attrs, int side, Rng& rng) {
  if (side < 32) throw std::invalid_argument("render_image: side must be >= 32");
  const double s = side;
  const double cx = 0.5 + rng.uniform(-0.03, 0.03);
  const double cy = rng.uniform(-0.015, 0.015);
  const double scale = rng.uniform(0.95, 1.05);
  const auto profile = silhouette_profile(attrs.shape, attrs.length);

  RenderedGarment out{PixelGrid(side, side), std::vector<uint8_t>(static_cast<size_t>(side) * side, 0)};
  PixelGrid& img = out.pixels;
  const Rgb base = kColorRgb[static_cast<size_t>(attrs.color)];
  const bool light = luminance(base) > 0.6;

  for (int y = 0; y < side; ++y) {
    const double v = ((y + 0.5) / s - cy - 0.5) / scale + 0.5;
    const double hw = profile_half_width(profile, v);
    for (int x = 0; x < side; ++x) {
      const double u = ((x + 0.5) / s - cx) / scale;
      const bool inside = hw >= 0.0 && std::abs(u) <= hw;
      out.mask[static_cast<size_t>(y) * side + x] = inside ? 1 : 0;
      paint(img, y, x, inside ? base : kBackground);
    }
  }
  auto in_mask = [&](int y, int x) {
    return y >= 0 && x >= 0 && y < side && x < side && out.mask[static_cast<size_t>(y) * side + x] != 0;
  };

  switch (attrs.print) {
    case Print::solid:
      break;
    case Print::striped: {
      const double period = std::max(4.0, s * 0.125);
      const double phase = rng.uniform(0.0, period);
      const Rgb band = light ? scale_rgb(base, 0.45) : Rgb{0.92, 0.92, 0.92};
      for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x)
          if (in_mask(y, x) && std::fmod(x + y + phase, period) < period * 0.5) paint(img, y, x, band);
      break;
    }
    case Print::geometric: {
      const int tile = std::max(6, static_cast<int>(std::lround(s * 0.15)));
      const int ox = static_cast<int>(rng.below(static_cast<uint64_t>(tile)));
      const int oy = static_cast<int>(rng.below(static_cast<uint64_t>(tile)));
      const Rgb tri = light ? Rgb{0.15, 0.15, 0.35} : Rgb{0.95, 0.85, 0.30};
      for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x) {
          if (!in_mask(y, x)) continue;
          const int tx = (x + ox) / tile, ty = (y + oy) / tile;
          const int lx = (x + ox) % tile, ly = (y + oy) % tile;
          const bool flip = ((tx + ty) & 1) != 0;
          if (flip ? (lx + ly < tile - 1) : (lx < ly)) paint(img, y, x, tri);
        }
      break;
    }
    case Print::floral: {
      const double r = std::max(1.2, s * 0.03);
      const Rgb petal = light ? Rgb{0.60, 0.10, 0.35} : Rgb{1.0, 0.92, 0.60};
      const Rgb center = {0.95, 0.45, 0.05};
      const int count = std::max(6, side * side / 150);
      for (int n = 0; n < count; ++n) {
        const double fx = rng.uniform(0.0, s), fy = rng.uniform(0.0, s);
        if (!in_mask(static_cast<int>(fy), static_cast<int>(fx))) continue;
        for (int p = 0; p < 5; ++p) {
          const double ang = p * 2.0 * 3.14159265358979323846 / 5.0;
          const double px = fx + 1.3 * r * std::cos(ang), py = fy + 1.3 * r * std::sin(ang);
          for (int y = static_cast<int>(py - r) - 1; y <= static_cast<int>(py + r) + 1; ++y)
            for (int x = static_cast<int>(px - r) - 1; x <= static_cast<int>(px + r) + 1; ++x)
              if (in_mask(y, x) && (x + 0.5 - px) * (x + 0.5 - px) + (y + 0.5 - py) * (y + 0.5 - py) <= r * r)
                paint(img, y, x, petal);
        }
        const int ix = static_cast<int>(fx), iy = static_cast<int>(fy);
        if (in_mask(iy, ix)) paint(img, iy, ix, center);
      }
      break;
    }
    case Print::embellished: {
      const Rgb sparkle = light ? Rgb{0.05, 0.05, 0.25} : Rgb{1.0, 1.0, 1.0};
      const Rgb gold = {1.0, 0.80, 0.10};
      for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x)
          if (in_mask(y, x) && rng.uniform() < 0.14) paint(img, y, x, rng.uniform() < 0.5 ? sparkle : gold);
      break;
    }
  }

  // Mild sensor noise so that no two renders are pixel-identical.
  for (double& v : img.data) v = std::clamp(v + 0.02 * rng.normal(), 0.0, 1.0);
  return out;
}

PixelGrid render_image(const AttributeTuple& attrs, int side, Rng& rng) {
  return render_garment(attrs, side, rng).pixels;
}

std::pair<std::string, std::string> make_captions(Style style, const AttributeTuple& attrs,
                                                  const CaptionTemplates& templates, size_t index) {
  const auto& atpl = templates.attribute.at(index % templates.attribute.size());
  std::string attr = atpl;
  attr = replace_all(attr, "{color}", color_name(attrs.color));
  attr = replace_all(attr, "{print}", print_name(attrs.print));
  attr = replace_all(attr, "{shape}", shape_name(attrs.shape));
  attr = replace_all(attr, "{length}", length_name(attrs.length));

  const auto it = templates.style.find(style);
  if (it == templates.style.end() || it->second.empty())
    throw Error("no caption template for style " + std::string(style_name(style)));
  std::string sty = replace_all(it->second[index % it->second.size()], "{style}", style_name(style));
  return {attr, sty};
}

NormStats compute_norm_stats(const std::vector<PixelGrid>& images) {
  NormStats st;
  std::array<double, 3> sum{}, sq{};
  double n = 0;
  for (const auto& img : images) {
    for (size_t i = 0; i < img.data.size(); ++i) {
      sum[i % 3] += img.data[i];
      sq[i % 3] += img.data[i] * img.data[i];
    }
    n += static_cast<double>(img.height) * img.width;
  }
  if (n == 0) return st;
  for (size_t c = 0; c < 3; ++c) {
    st.mean[c] = sum[c] / n;
    st.std[c] = std::sqrt(std::max(sq[c] / n - st.mean[c] * st.mean[c], 1e-12));
  }
  return st;
}

NormStats load_norm_stats(const std::string& path) {
  const json j = json::parse(read_file(path));
  NormStats st;
  st.mean = j.at("mean").get<std::array<double, 3>>();
  st.std = j.at("std").get<std::array<double, 3>>();
  return st;
}

CorpusManifests generate_corpus(const SynthConfig& cfg, const std::string& out_dir) {
  cfg.correlation.validate();
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw Error("cannot create " + out_dir + ": " + ec.message());

  enum : uint64_t { kSourceStream = 1, kTargetStream = 2, kTestStream = 3 };
  std::vector<PixelGrid> stats_images;

  auto make_split = [&](const char* name, int count, uint64_t stream, bool source) {
    std::vector<CaptionRecord> recs;
    recs.reserve(static_cast<size_t>(count));
    for (int i = 0; i < count; ++i) {
      Rng rng(derive_seed(cfg.seed, (stream << 32) | static_cast<uint64_t>(i)));
      SampledItem item;
      if (stream == kTestStream && cfg.balanced_test) {
        item.style = kAllStyles[static_cast<size_t>(i % kNumStyles)];
        item.attrs = sample_attributes(cfg.correlation, item.style, rng);
      } else {
        item = sample_item(cfg, rng);
      }
      PixelGrid img = render_image(item.attrs, cfg.image_side, rng);
      const std::string rel = std::string("images/") + name + "/" + index_name(static_cast<size_t>(i)) + ".png";
      write_png((fs::path(out_dir) / rel).string(), img);
      if (stream != kTestStream) stats_images.push_back(std::move(img));

      auto [attr_caption, style_caption] = make_captions(item.style, item.attrs, cfg.templates, static_cast<size_t>(i));
      CaptionRecord rec;
      rec.image = rel;
      if (source) {
        rec.caption = attr_caption;
        rec.domain = Domain::source;
      } else {
        rec.caption = style_caption;
        rec.domain = Domain::target;
        rec.style = item.style;
      }
      if (stream == kTestStream) rec.split = Split::test;
      recs.push_back(std::move(rec));
    }
    const std::string path = (fs::path(out_dir) / (std::string(name) + ".jsonl")).string();
    write_manifest(path, recs);
    return path;
  };

  CorpusManifests m;
  m.source = make_split("source", cfg.n_source, kSourceStream, true);
  m.target = make_split("target", cfg.n_target, kTargetStream, false);
  m.test = make_split("test", cfg.n_test, kTestStream, false);

  const NormStats st = compute_norm_stats(stats_images);
  write_file((fs::path(out_dir) / "norm_stats.json").string(), json{{"mean", st.mean}, {"std", st.std}}.dump(2) + "\n");
  write_file((fs::path(out_dir) / "synth_config.json").string(), synth_config_to_json(cfg).dump(2) + "\n");
  return m;
}

}  // namespace attr2style
