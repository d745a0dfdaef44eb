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

#pragma once

#include "attr2style/common.hpp"
#include "attr2style/corpus.hpp"
#include "attr2style/image.hpp"

#include <nlohmann/json_fwd.hpp>

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

// Procedural garment corpus whose low-level attributes (print, shape, color,
// length) are drawn from style-conditional distributions.
namespace attr2style {

enum class Print { floral, embellished, solid, striped, geometric };
enum class Shape { a_line, shift, bodycon, maxi, peplum };
enum class Color { red, blue, green, black, white, yellow, pink, purple };
enum class Length { mini, knee, maxi };

inline constexpr int kNumPrints = 5;
inline constexpr int kNumShapes = 5;
inline constexpr int kNumColors = 8;
inline constexpr int kNumLengths = 3;

std::string_view print_name(Print p);
std::string_view shape_name(Shape s);
std::string_view color_name(Color c);
std::string_view length_name(Length l);

struct AttributeTuple {
  Print print = Print::solid;
  Shape shape = Shape::shift;
  Color color = Color::red;
  Length length = Length::knee;

  bool operator==(const AttributeTuple&) const = default;
};

/// P(attribute value | style) for each attribute family. Rows are indexed by
/// style_index().
struct CorrelationMatrix {
  std::array<std::array<double, kNumPrints>, kNumStyles> print{};
  std::array<std::array<double, kNumShapes>, kNumStyles> shape{};
  std::array<std::array<double, kNumColors>, kNumStyles> color{};
  std::array<std::array<double, kNumLengths>, kNumStyles> length{};

  /// Party dresses mostly embellished (floral minor), feminine mostly
  /// floral, cocktail solid/embellished, summer striped/floral, winter
  /// solid/geometric, none uniform. Shape carries a weaker 0.4 signal;
  /// color and length are style-independent.
  static CorrelationMatrix defaults();
  static CorrelationMatrix uniform();
  /// Throws Error unless every row is nonnegative and sums to 1 within 1e-9.
  void validate() const;
};

struct CaptionTemplates {
  std::vector<std::string> attribute{"{color} {print} print {shape} dress with {length} length"};
  /// Per-style paraphrase lists, cycled by item index.
  std::map<Style, std::vector<std::string>> style;

  CaptionTemplates();
};

struct SynthConfig {
  int n_source = 2000;
  int n_target = 200;
  int n_test = 200;
  uint64_t seed = 42;
  int image_side = 64;
  bool balanced_test = true;
  CorrelationMatrix correlation = CorrelationMatrix::defaults();
  CaptionTemplates templates;
};

nlohmann::json synth_config_to_json(const SynthConfig& cfg);
/// Missing keys keep their defaults.
SynthConfig synth_config_from_json(const nlohmann::json& j);

struct SampledItem {
  Style style = Style::none;
  AttributeTuple attrs;
};

/// Style uniform over the six styles, then each attribute family independently
/// from P(. | style).
SampledItem sample_item(const SynthConfig& cfg, Rng& rng);
/// Attributes for a fixed style.
AttributeTuple sample_attributes(const CorrelationMatrix& m, Style style, Rng& rng);

struct RenderedGarment {
  PixelGrid pixels;            // RGB in [0, 1]
  std::vector<uint8_t> mask;   // silhouette, row-major side x side
};

/// Deterministic in (attrs, side, rng state). side >= 32.
RenderedGarment render_garment(const AttributeTuple& attrs, int side, Rng& rng);
PixelGrid render_image(const AttributeTuple& attrs, int side, Rng& rng);

/// (attribute caption, style caption); `index` selects the paraphrase.
std::pair<std::string, std::string> make_captions(Style style, const AttributeTuple& attrs,
                                                  const CaptionTemplates& templates, size_t index = 0);

struct CorpusManifests {
  std::string source;
  std::string target;
  std::string test;
};

/// Writes images/{source,target,test}/NNNNNN.png, the three manifests,
/// synth_config.json and norm_stats.json under `out_dir`.
CorpusManifests generate_corpus(const SynthConfig& cfg, const std::string& out_dir);

/// Per-channel mean/std of raw [0, 1] pixels over a set of images.
NormStats compute_norm_stats(const std::vector<PixelGrid>& images);
NormStats load_norm_stats(const std::string& path);

}  // namespace attr2style
