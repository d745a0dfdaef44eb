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

#include "attr2style/params.hpp"

#include <map>
#include <string>
#include <vector>

// Named-array archive stored as an uncompressed zip of .npy members (the
// layout numpy.load understands as .npz), plus arbitrary byte members such
// as meta.json.
namespace attr2style {

enum class DType { f64, f32 };

struct NamedArray {
  std::string name;
  TensorShape shape;
  std::vector<double> data;
  DType dtype = DType::f64;  // on-disk element type
};

struct Archive {
  std::vector<NamedArray> arrays;
  std::map<std::string, std::string> blobs;
};

void write_archive(const std::string& path, const Archive& archive);
/// Throws Error("corrupt archive ...") on any structural or CRC problem.
Archive read_archive(const std::string& path);

/// Encodes one array as a .npy byte string and back.
std::string encode_npy(const NamedArray& array);
NamedArray decode_npy(std::string_view bytes, std::string name);

}  // namespace attr2style
