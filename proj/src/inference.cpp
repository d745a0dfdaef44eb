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


#include "attr2style/inference.hpp"

#include <array>
#include <cctype>
#include <filesystem>

#include <fmt/format.h>

namespace attr2style {

Vec decoding_log_probs(const Vec& logits) {
  Vec masked = logits;
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  for (int id : {Vocab::kPad, Vocab::kStart, Vocab::kUnk})
    if (id < masked.size()) masked[id] = kNegInf;
  const double mx = masked.maxCoeff();
  const double lse = mx + std::log((masked.array() - mx).exp().sum());
  return masked.array() - lse;
}

namespace {

struct ModelStepper {
  const CaptionModel& model;
  const DecoderContext& ctx;
  search::StepOut<DecoderState> operator()(const DecoderState& s, int prev) const {
    StepOutput o = model.decoder().step(model.params(), ctx, s, prev);
    return {std::move(o.logits), std::move(o.alpha), std::move(o.state)};
  }
};

CaptionResult to_result(const search::Hypothesis<DecoderState>& h, const Vocab& vocab) {
  CaptionResult r;
  r.ids = h.ids;
  for (int id : h.ids) r.tokens.push_back(vocab.token(id));
  r.log_prob = h.log_prob;
  r.alphas = h.alphas;
  r.complete = h.complete;
  return r;
}

}  // namespace

CaptionResult greedy_caption(const CaptionModel& model, const Vocab& vocab, const PixelGrid& image, int max_len) {
  if (max_len < 2) throw Error("max_len must be >= 2");
  const AnnotationGrid grid = model.encode(image);
  const DecoderContext ctx = model.decoder().prepare(model.params(), grid);
  return to_result(search::greedy(model.decoder().init_state(model.params(), grid), ModelStepper{model, ctx}, max_len),
                   vocab);
}

CaptionResult beam_search(const CaptionModel& model, const Vocab& vocab, const PixelGrid& image, int k, int max_len,
                          bool length_norm) {
  if (max_len < 2) throw Error("max_len must be >= 2");
  const AnnotationGrid grid = model.encode(image);
  const DecoderContext ctx = model.decoder().prepare(model.params(), grid);
  return to_result(search::beam(model.decoder().init_state(model.params(), grid), ModelStepper{model, ctx}, k,
                                max_len, length_norm),
                   vocab);
}

CaptionResult caption_image(const CaptionModel& model, const Vocab& vocab, const PixelGrid& image,
                            const DecodeConfig& cfg) {
  if (cfg.beam <= 1) return greedy_caption(model, vocab, image, cfg.max_len);
  return beam_search(model, vocab, image, cfg.beam, cfg.max_len, cfg.length_norm);
}

// ---------------------------------------------------------------------------
// Attention figures

std::vector<double> attention_heat(const Vec& alpha, int grid_h, int grid_w, int out_h, int out_w) {
  if (alpha.size() != static_cast<Eigen::Index>(grid_h) * grid_w)
    throw Error(fmt::format("attention row has {} entries, grid is {}x{}", alpha.size(), grid_h, grid_w));
  PixelGrid cells(grid_h, grid_w);
  for (int y = 0; y < grid_h; ++y)
    for (int x = 0; x < grid_w; ++x)
      for (int c = 0; c < 3; ++c) cells.at(y, x, c) = alpha[y * grid_w + x];
  const PixelGrid up = resize_bilinear(cells, out_h, out_w);
  std::vector<double> heat(static_cast<size_t>(out_h) * out_w);
  double mx = 0.0;
  for (size_t i = 0; i < heat.size(); ++i) {
    heat[i] = up.data[i * 3];
    mx = std::max(mx, heat[i]);
  }
  if (mx > 0)
    for (double& h : heat) h /= mx;
  return heat;
}

namespace {

std::array<double, 3> jet(double v) {
  v = std::clamp(v, 0.0, 1.0);
  auto ramp = [](double x) { return std::clamp(1.5 - std::abs(x), 0.0, 1.0); };
  return {ramp(4 * v - 3), ramp(4 * v - 2), ramp(4 * v - 1)};
}

// 5x7 glyphs, one string per row, '#' = ink.
struct Glyph {
  char ch;
  std::array<const char*, 7> rows;
};

constexpr Glyph kFont[] = {
    {'a', {".....", ".....", ".###.", "....#", ".####", "#...#", ".####"}},
    {'b', {"#....", "#....", "####.", "#...#", "#...#", "#...#", "####."}},
    {'c', {".....", ".....", ".###.", "#....", "#....", "#...#", ".###."}},
    {'d', {"....#", "....#", ".####", "#...#", "#...#", "#...#", ".####"}},
    {'e', {".....", ".....", ".###.", "#...#", "#####", "#....", ".###."}},
    {'f', {"..##.", ".#..#", ".#...", "###..", ".#...", ".#...", ".#..."}},
    {'g', {".....", ".####", "#...#", "#...#", ".####", "....#", ".###."}},
    {'h', {"#....", "#....", "#.##.", "##..#", "#...#", "#...#", "#...#"}},
    {'i', {"..#..", ".....", ".##..", "..#..", "..#..", "..#..", ".###."}},
    {'j', {"...#.", ".....", "..##.", "...#.", "...#.", "#..#.", ".##.."}},
    {'k', {"#....", "#....", "#..#.", "#.#..", "##...", "#.#..", "#..#."}},
    {'l', {".##..", "..#..", "..#..", "..#..", "..#..", "..#..", ".###."}},
    {'m', {".....", ".....", "##.#.", "#.#.#", "#.#.#", "#...#", "#...#"}},
    {'n', {".....", ".....", "#.##.", "##..#", "#...#", "#...#", "#...#"}},
    {'o', {".....", ".....", ".###.", "#...#", "#...#", "#...#", ".###."}},
    {'p', {".....", ".....", "####.", "#...#", "####.", "#....", "#...."}},
    {'q', {".....", ".....", ".####", "#...#", ".####", "....#", "....#"}},
    {'r', {".....", ".....", "#.##.", "##..#", "#....", "#....", "#...."}},
    {'s', {".....", ".....", ".####", "#....", ".###.", "....#", "####."}},
    {'t', {".#...", ".#...", "###..", ".#...", ".#...", ".#..#", "..##."}},
    {'u', {".....", ".....", "#...#", "#...#", "#...#", "#..##", ".##.#"}},
    {'v', {".....", ".....", "#...#", "#...#", "#...#", ".#.#.", "..#.."}},
    {'w', {".....", ".....", "#...#", "#...#", "#.#.#", "#.#.#", ".#.#."}},
    {'x', {".....", ".....", "#...#", ".#.#.", "..#..", ".#.#.", "#...#"}},
    {'y', {".....", ".....", "#...#", "#...#", ".####", "....#", ".###."}},
    {'z', {".....", ".....", "#####", "...#.", "..#..", ".#...", "#####"}},
    {'0', {".###.", "#...#", "#..##", "#.#.#", "##..#", "#...#", ".###."}},
    {'1', {"..#..", ".##..", "..#..", "..#..", "..#..", "..#..", ".###."}},
    {'2', {".###.", "#...#", "....#", "...#.", "..#..", ".#...", "#####"}},
    {'3', {"#####", "...#.", "..#..", "...#.", "....#", "#...#", ".###."}},
    {'4', {"...#.", "..##.", ".#.#.", "#..#.", "#####", "...#.", "...#."}},
    {'5', {"#####", "#....", "####.", "....#", "....#", "#...#", ".###."}},
    {'6', {"..##.", ".#...", "#....", "####.", "#...#", "#...#", ".###."}},
    {'7', {"#####", "....#", "...#.", "..#..", ".#...", ".#...", ".#..."}},
    {'8', {".###.", "#...#", "#...#", ".###.", "#...#", "#...#", ".###."}},
    {'9', {".###.", "#...#", "#...#", ".####", "....#", "...#.", ".##.."}},
    {'-', {".....", ".....", ".....", "#####", ".....", ".....", "....."}},
};

const Glyph* find_glyph(char c) {
  c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  for (const auto& g : kFont)
    if (g.ch == c) return &g;
  return nullptr;
}

void draw_text(PixelGrid& img, const std::string& text, int x0, int y0, int scale) {
  int x = x0;
  for (char ch : text) {
    const Glyph* g = find_glyph(ch);
    if (g) {
      for (int r = 0; r < 7; ++r)
        for (int c = 0; c < 5; ++c) {
          if (g->rows[static_cast<size_t>(r)][c] != '#') continue;
          for (int dy = 0; dy < scale; ++dy)
            for (int dx = 0; dx < scale; ++dx) {
              const int py = y0 + r * scale + dy, px = x + c * scale + dx;
              if (py >= 0 && py < img.height && px >= 0 && px < img.width)
                for (int k = 0; k < 3; ++k) img.at(py, px, k) = 1.0;
            }
        }
    }
    x += 6 * scale;
  }
}

std::string file_safe(const std::string& word) {
  std::string s;
  for (char c : word) s += std::isalnum(static_cast<unsigned char>(c)) ? c : '_';
  return s.empty() ? "_" : s;
}

}  // namespace

PixelGrid blend_heat(const PixelGrid& image, const std::vector<double>& heat) {
  if (heat.size() != static_cast<size_t>(image.height) * image.width)
    throw Error("heat map does not match the image size");
  PixelGrid out(image.height, image.width);
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x) {
      const auto col = jet(heat[static_cast<size_t>(y) * image.width + x]);
      for (int c = 0; c < 3; ++c)
        out.at(y, x, c) = 0.6 * col[static_cast<size_t>(c)] + 0.4 * image.at(y, x, c);
    }
  return out;
}

std::vector<std::string> attention_overlay(const PixelGrid& image, const CaptionResult& result, int grid_h, int grid_w,
                                           const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  std::vector<std::string> written;
  std::vector<PixelGrid> panels;
  const size_t words = result.tokens.size();
  if (result.alphas.size() < words) throw Error("caption has fewer attention rows than words");
  for (size_t i = 0; i < words; ++i) {
    PixelGrid panel = blend_heat(image, attention_heat(result.alphas[i], grid_h, grid_w, image.height, image.width));
    const auto path =
        (std::filesystem::path(out_dir) / fmt::format("word_{:02d}_{}.png", i, file_safe(result.tokens[i]))).string();
    write_png(path, panel);
    written.push_back(path);
    panels.push_back(std::move(panel));
  }

  const int scale = std::max(1, image.width / 64);
  const int label_h = 9 * scale;
  const int gap = 2 * scale;
  const int cols = std::max<int>(1, static_cast<int>(panels.size()));
  PixelGrid strip(image.height + label_h, cols * image.width + (cols - 1) * gap, 0.0);
  for (size_t i = 0; i < panels.size(); ++i) {
    const int x0 = static_cast<int>(i) * (image.width + gap);
    for (int y = 0; y < image.height; ++y)
      for (int x = 0; x < image.width; ++x)
        for (int c = 0; c < 3; ++c) strip.at(y, x0 + x, c) = panels[i].at(y, x, c);
    // Shrink the label to fit the panel width.
    int s = scale;
    while (s > 1 && static_cast<int>(result.tokens[i].size()) * 6 * s > image.width) --s;
    draw_text(strip, result.tokens[i], x0 + 1, image.height + scale, s);
  }
  const auto comp = (std::filesystem::path(out_dir) / "composite.png").string();
  write_png(comp, strip);
  written.push_back(comp);
  return written;
}

}  // namespace attr2style
