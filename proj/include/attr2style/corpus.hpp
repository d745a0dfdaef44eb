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

#include "attr2style/image.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace attr2style {

enum class Style { party, cocktail, feminine, summer, winter, none };
inline constexpr int kNumStyles = 6;
inline constexpr std::array<Style, kNumStyles> kAllStyles = {Style::party,  Style::cocktail, Style::feminine,
                                                             Style::summer, Style::winter,   Style::none};

std::string_view style_name(Style s);
/// Throws Error listing the six allowed names.
Style parse_style(std::string_view name);
inline int style_index(Style s) { return static_cast<int>(s); }

enum class Domain { source, target };
enum class Split { train, val, test };

std::string_view domain_name(Domain d);
std::string_view split_name(Split s);

struct CaptionRecord {
  std::string image;  // relative to the manifest directory
  std::string caption;
  Domain domain = Domain::source;
  std::optional<Style> style;
  std::optional<Split> split;

  bool operator==(const CaptionRecord&) const = default;
};

/// JSON-Lines manifest, one record per nonempty line.
std::vector<CaptionRecord> load_manifest(const std::string& path);
void write_manifest(const std::string& path, const std::vector<CaptionRecord>& records);
std::string manifest_line(const CaptionRecord& rec);

/// Directory that relative image paths in `manifest_path` resolve against.
std::string manifest_root(const std::string& manifest_path);

struct NormStats {
  std::array<double, 3> mean{0.485, 0.456, 0.406};
  std::array<double, 3> std{0.229, 0.224, 0.225};
};

/// Shorter side to `side`, center crop to side x side, then per-channel
/// (v - mean) / std. Input values are expected in [0, 1].
PixelGrid preprocess_pixels(const PixelGrid& rgb, int side, const NormStats& stats);
PixelGrid preprocess_image(const std::string& path, int side, const NormStats& stats);
PixelGrid flip_horizontal(const PixelGrid& img);

/// Seeded shuffle, first round(n*train) records -> train, next round(n*val)
/// -> val, remainder -> test. Logs a warning when the test share is empty
/// and `warn_empty_test` is set.
std::vector<CaptionRecord> split_records(std::vector<CaptionRecord> records, uint64_t seed, double train_fraction,
                                         double val_fraction, bool warn_empty_test = true);

}  // namespace attr2style
