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

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace attr2style {

using TensorShape = std::vector<int64_t>;

int64_t shape_numel(const TensorShape& s);
std::string shape_str(const TensorShape& s);

/// One named array. Matrices view it as shape[0] x (product of the rest).
struct ParamEntry {
  std::string name;
  TensorShape shape;
  std::vector<double> data;
  bool buffer = false;  // running statistics etc.; never receives gradients
};

/// Ordered collection of named arrays. Index handles returned by add() stay
/// valid for the lifetime of the store and of every store derived from it
/// with zeros_like().
class ParamStore {
 public:
  ParamStore() = default;
  /// A store built with allocate=false only records names and shapes.
  explicit ParamStore(bool allocate) : allocate_(allocate) {}

  int add(std::string name, TensorShape shape, bool buffer = false);

  int size() const { return static_cast<int>(entries_.size()); }
  const ParamEntry& entry(int i) const { return entries_[static_cast<size_t>(i)]; }
  ParamEntry& entry(int i) { return entries_[static_cast<size_t>(i)]; }
  const std::string& name(int i) const { return entry(i).name; }
  std::optional<int> find(const std::string& name) const;
  int index(const std::string& name) const;  // throws Error when absent

  MatMap mat(int i);
  ConstMatMap mat(int i) const;
  VecMap vec(int i);
  ConstVecMap vec(int i) const;

  /// Same names and shapes, zero-filled. Entries with active[i] == false are
  /// left unallocated.
  ParamStore zeros_like(const std::vector<bool>* active = nullptr) const;
  bool allocated(int i) const { return !entry(i).data.empty() || shape_numel(entry(i).shape) == 0; }
  void set_zero();
  int64_t numel() const;

 private:
  std::vector<ParamEntry> entries_;
  std::unordered_map<std::string, int> by_name_;
  bool allocate_ = true;
};

}  // namespace attr2style
