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

#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace attr2style {

/// Lowercases, turns every non-alphanumeric byte into a separator and splits.
std::vector<std::string> tokenize(std::string_view text);

struct EncodedCaption {
  std::vector<int> ids;  // padded to max_len
  int length = 0;        // START..END inclusive, before padding
};

/// Token <-> id bijection. Ids 0..3 are reserved for PAD, START, END, UNK.
class Vocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kStart = 1;
  static constexpr int kEnd = 2;
  static constexpr int kUnk = 3;
  static constexpr int kNumSpecials = 4;

  Vocab();

  /// Specials first, then every token seen at least `min_freq` times in
  /// lexicographic order.
  static Vocab build(const std::vector<std::vector<std::string>>& captions, int min_freq);

  int size() const { return static_cast<int>(id_to_token_.size()); }
  int min_freq() const { return min_freq_; }
  bool contains(std::string_view token) const;
  /// Id of `token`, or kUnk.
  int id(std::string_view token) const;
  /// Throws Error("invalid token id") for ids outside the vocabulary.
  const std::string& token(int id) const;
  static bool is_special(int id) { return id >= 0 && id < kNumSpecials; }

  /// [START] + ids + [END], truncated to max_len (END kept) and right-padded.
  EncodedCaption encode(std::span<const std::string> caption, int max_len) const;
  /// Drops START/PAD, stops at the first END.
  std::vector<std::string> decode(std::span<const int> ids) const;

  /// Text form: `#minfreq=<n>` header, then one token per line in id order.
  std::string serialize() const;
  static Vocab parse(std::string_view text);
  void save(const std::string& path) const;
  static Vocab load(const std::string& path);
  /// Hex digest of serialize().
  std::string digest() const;

 private:
  std::unordered_map<std::string, int> token_to_id_;
  std::vector<std::string> id_to_token_;
  int min_freq_ = 1;
};

}  // namespace attr2style
