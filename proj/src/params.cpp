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

#include "attr2style/params.hpp"

#include <algorithm>

namespace attr2style {

int64_t shape_numel(const TensorShape& s) {
  int64_t n = 1;
  for (auto d : s) n *= d;
  return n;
}

std::string shape_str(const TensorShape& s) {
  std::string out = "(";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(s[i]);
  }
  return out + ")";
}

int ParamStore::add(std::string name, TensorShape shape, bool buffer) {
  if (by_name_.count(name)) throw Error("duplicate parameter name " + name);
  const int id = size();
  by_name_.emplace(name, id);
  ParamEntry e{std::move(name), std::move(shape), {}, buffer};
  if (allocate_) e.data.assign(static_cast<size_t>(shape_numel(e.shape)), 0.0);
  entries_.push_back(std::move(e));
  return id;
}

std::optional<int> ParamStore::find(const std::string& name) const {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) return std::nullopt;
  return it->second;
}

int ParamStore::index(const std::string& name) const {
  auto i = find(name);
  if (!i) throw Error("unknown parameter " + name);
  return *i;
}

namespace {
std::pair<int64_t, int64_t> mat_dims(const TensorShape& s) {
  if (s.empty()) return {1, 1};
  const int64_t rows = s[0];
  return {rows, rows == 0 ? 0 : shape_numel(s) / rows};
}
}  // namespace

MatMap ParamStore::mat(int i) {
  auto& e = entry(i);
  auto [r, c] = mat_dims(e.shape);
  return MatMap(e.data.data(), r, c);
}

ConstMatMap ParamStore::mat(int i) const {
  const auto& e = entry(i);
  auto [r, c] = mat_dims(e.shape);
  return ConstMatMap(e.data.data(), r, c);
}

VecMap ParamStore::vec(int i) {
  auto& e = entry(i);
  return VecMap(e.data.data(), static_cast<Eigen::Index>(e.data.size()));
}

ConstVecMap ParamStore::vec(int i) const {
  const auto& e = entry(i);
  return ConstVecMap(e.data.data(), static_cast<Eigen::Index>(e.data.size()));
}

ParamStore ParamStore::zeros_like(const std::vector<bool>* active) const {
  ParamStore out;
  out.by_name_ = by_name_;
  out.entries_.reserve(entries_.size());
  for (size_t i = 0; i < entries_.size(); ++i) {
    ParamEntry e{entries_[i].name, entries_[i].shape, {}, entries_[i].buffer};
    if (!active || (*active)[i]) e.data.assign(entries_[i].data.size(), 0.0);
    out.entries_.push_back(std::move(e));
  }
  return out;
}

void ParamStore::set_zero() {
  for (auto& e : entries_) std::fill(e.data.begin(), e.data.end(), 0.0);
}

int64_t ParamStore::numel() const {
  int64_t n = 0;
  for (const auto& e : entries_) n += shape_numel(e.shape);
  return n;
}

}  // namespace attr2style
