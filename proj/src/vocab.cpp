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

#include "attr2style/vocab.hpp"

#include "attr2style/common.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <sstream>

namespace attr2style {

namespace {
const char* const kSpecialNames[Vocab::kNumSpecials] = {"<pad>", "<start>", "<end>", "<unk>"};
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char c : text) {
    if (std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

Vocab::Vocab() {
  for (int i = 0; i < kNumSpecials; ++i) {
    id_to_token_.emplace_back(kSpecialNames[i]);
    token_to_id_.emplace(kSpecialNames[i], i);
  }
}

Vocab Vocab::build(const std::vector<std::vector<std::string>>& captions, int min_freq) {
  if (min_freq < 1) throw std::invalid_argument("build_vocab: min_freq must be >= 1");
  std::map<std::string, int> freq;  // ordered: gives the lexicographic id order
  for (const auto& cap : captions)
    for (const auto& tok : cap) ++freq[tok];
  Vocab v;
  v.min_freq_ = min_freq;
  for (const auto& [tok, n] : freq) {
    if (n < min_freq || v.token_to_id_.count(tok)) continue;
    v.token_to_id_.emplace(tok, v.size());
    v.id_to_token_.push_back(tok);
  }
  return v;
}

bool Vocab::contains(std::string_view token) const {
  return token_to_id_.find(std::string(token)) != token_to_id_.end();
}

int Vocab::id(std::string_view token) const {
  auto it = token_to_id_.find(std::string(token));
  return it == token_to_id_.end() ? kUnk : it->second;
}

const std::string& Vocab::token(int id) const {
  if (id < 0 || id >= size()) throw Error("invalid token id " + std::to_string(id));
  return id_to_token_[static_cast<size_t>(id)];
}

EncodedCaption Vocab::encode(std::span<const std::string> caption, int max_len) const {
  if (max_len < 2) throw std::invalid_argument("encode: max_len must be >= 2");
  EncodedCaption out;
  out.ids.reserve(static_cast<size_t>(max_len));
  out.ids.push_back(kStart);
  const size_t room = static_cast<size_t>(max_len - 2);
  for (size_t i = 0; i < caption.size() && i < room; ++i) out.ids.push_back(id(caption[i]));
  out.ids.push_back(kEnd);
  out.length = static_cast<int>(out.ids.size());
  out.ids.resize(static_cast<size_t>(max_len), kPad);
  return out;
}

std::vector<std::string> Vocab::decode(std::span<const int> ids) const {
  std::vector<std::string> out;
  for (int i : ids) {
    const std::string& tok = token(i);
    if (i == kEnd) break;
    if (i == kStart || i == kPad) continue;
    out.push_back(tok);
  }
  return out;
}

std::string Vocab::serialize() const {
  std::string s = "#minfreq=" + std::to_string(min_freq_) + "\n";
  for (const auto& t : id_to_token_) {
    s += t;
    s += '\n';
  }
  return s;
}

Vocab Vocab::parse(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line) || line.rfind("#minfreq=", 0) != 0) throw Error("vocab: missing #minfreq header");
  Vocab v;
  try {
    v.min_freq_ = std::stoi(line.substr(9));
  } catch (const std::exception&) {
    throw Error("vocab: bad #minfreq header '" + line + "'");
  }
  int id = 0;
  while (std::getline(in, line)) {
    if (id < kNumSpecials) {
      if (line != kSpecialNames[id]) throw Error("vocab: expected special token " + std::string(kSpecialNames[id]) + " at id " + std::to_string(id));
    } else {
      if (line.empty() || v.token_to_id_.count(line)) throw Error("vocab: empty or duplicate token at id " + std::to_string(id));
      v.token_to_id_.emplace(line, id);
      v.id_to_token_.push_back(line);
    }
    ++id;
  }
  if (id < kNumSpecials) throw Error("vocab: truncated special tokens");
  return v;
}

void Vocab::save(const std::string& path) const { write_file(path, serialize()); }

Vocab Vocab::load(const std::string& path) { return parse(read_file(path)); }

std::string Vocab::digest() const { return hex64(fnv1a64(serialize())); }

}  // namespace attr2style
