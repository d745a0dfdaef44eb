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

#include "attr2style/archive.hpp"

#include <zlib.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>

namespace attr2style {

namespace {

constexpr uint32_t kLocalSig = 0x04034b50;
constexpr uint32_t kCentralSig = 0x02014b50;
constexpr uint32_t kEndSig = 0x06054b50;
constexpr uint16_t kDosDate = 0x0021;  // 1980-01-01, fixed so archives are byte-stable

void put16(std::string& s, uint16_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>(v >> 8));
}
void put32(std::string& s, uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
uint16_t get16(std::string_view s, size_t off) {
  return static_cast<uint16_t>(static_cast<unsigned char>(s[off]) | (static_cast<unsigned char>(s[off + 1]) << 8));
}
uint32_t get32(std::string_view s, size_t off) {
  uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(s[off + static_cast<size_t>(i)]);
  return v;
}

[[noreturn]] void corrupt(const std::string& why) { throw Error("corrupt archive: " + why); }

uint32_t crc_of(std::string_view bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  size_t off = 0;
  while (off < bytes.size()) {
    const auto chunk = static_cast<uInt>(std::min<size_t>(bytes.size() - off, std::numeric_limits<uInt>::max()));
    crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data() + off), chunk);
    off += chunk;
  }
  return static_cast<uint32_t>(crc);
}

struct CentralEntry {
  std::string name;
  uint32_t crc, size, offset;
};

}  // namespace

std::string encode_npy(const NamedArray& a) {
  if (static_cast<int64_t>(a.data.size()) != shape_numel(a.shape))
    throw Error("array " + a.name + ": data size does not match shape " + shape_str(a.shape));
  std::string dict = std::string("{'descr': '") + (a.dtype == DType::f64 ? "<f8" : "<f4") +
                     "', 'fortran_order': False, 'shape': (";
  for (size_t i = 0; i < a.shape.size(); ++i) {
    dict += std::to_string(a.shape[i]);
    dict += (a.shape.size() == 1 || i + 1 < a.shape.size()) ? "," : "";
    if (i + 1 < a.shape.size()) dict += " ";
  }
  dict += "), }";
  const size_t preamble = 10;
  size_t total = preamble + dict.size() + 1;
  dict.append((64 - total % 64) % 64, ' ');
  dict += '\n';

  std::string out = "\x93NUMPY";
  out.push_back(1);
  out.push_back(0);
  put16(out, static_cast<uint16_t>(dict.size()));
  out += dict;
  if (a.dtype == DType::f64) {
    out.append(reinterpret_cast<const char*>(a.data.data()), a.data.size() * sizeof(double));
  } else {
    std::vector<float> f(a.data.begin(), a.data.end());
    out.append(reinterpret_cast<const char*>(f.data()), f.size() * sizeof(float));
  }
  return out;
}

NamedArray decode_npy(std::string_view bytes, std::string name) {
  if (bytes.size() < 10 || bytes.substr(0, 6) != "\x93NUMPY") corrupt(name + ": bad npy magic");
  const int major = static_cast<unsigned char>(bytes[6]);
  size_t header_len, header_off;
  if (major == 1) {
    header_len = get16(bytes, 8);
    header_off = 10;
  } else if (major == 2 || major == 3) {
    if (bytes.size() < 12) corrupt(name + ": short npy header");
    header_len = get32(bytes, 8);
    header_off = 12;
  } else {
    corrupt(name + ": unsupported npy version");
  }
  if (header_off + header_len > bytes.size()) corrupt(name + ": truncated npy header");
  const std::string_view header = bytes.substr(header_off, header_len);

  NamedArray a;
  a.name = std::move(name);
  auto find_value = [&](std::string_view key) {
    const auto pos = header.find(key);
    if (pos == std::string_view::npos) corrupt(a.name + ": npy header lacks " + std::string(key));
    return pos + key.size();
  };
  size_t p = find_value("'descr':");
  const auto q1 = header.find('\'', p);
  const auto q2 = header.find('\'', q1 + 1);
  const std::string_view descr = header.substr(q1 + 1, q2 - q1 - 1);
  if (descr == "<f8") a.dtype = DType::f64;
  else if (descr == "<f4") a.dtype = DType::f32;
  else corrupt(a.name + ": unsupported dtype " + std::string(descr));
  p = find_value("'fortran_order':");
  if (header.substr(header.find_first_not_of(' ', p), 4) == "True") corrupt(a.name + ": fortran order unsupported");
  p = find_value("'shape':");
  const auto open = header.find('(', p), close = header.find(')', p);
  if (open == std::string_view::npos || close == std::string_view::npos) corrupt(a.name + ": bad shape");
  std::string dims(header.substr(open + 1, close - open - 1));
  size_t i = 0;
  while (i < dims.size()) {
    while (i < dims.size() && (dims[i] == ' ' || dims[i] == ',')) ++i;
    if (i >= dims.size()) break;
    size_t used = 0;
    a.shape.push_back(std::stoll(dims.substr(i), &used));
    i += used;
  }
  const auto n = static_cast<size_t>(shape_numel(a.shape));
  const size_t elem = a.dtype == DType::f64 ? 8 : 4;
  const size_t data_off = header_off + header_len;
  if (bytes.size() - data_off != n * elem) corrupt(a.name + ": payload size mismatch");
  a.data.resize(n);
  if (a.dtype == DType::f64) {
    std::memcpy(a.data.data(), bytes.data() + data_off, n * elem);
  } else {
    std::vector<float> f(n);
    std::memcpy(f.data(), bytes.data() + data_off, n * elem);
    std::copy(f.begin(), f.end(), a.data.begin());
  }
  return a;
}

void write_archive(const std::string& path, const Archive& archive) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path);

  std::vector<CentralEntry> central;
  uint64_t offset = 0;
  auto add_member = [&](const std::string& member, const std::string& bytes) {
    if (offset + bytes.size() > std::numeric_limits<uint32_t>::max()) throw Error("archive too large: " + path);
    CentralEntry e{member, crc_of(bytes), static_cast<uint32_t>(bytes.size()), static_cast<uint32_t>(offset)};
    std::string hdr;
    put32(hdr, kLocalSig);
    put16(hdr, 20);
    put16(hdr, 0);
    put16(hdr, 0);  // stored
    put16(hdr, 0);
    put16(hdr, kDosDate);
    put32(hdr, e.crc);
    put32(hdr, e.size);
    put32(hdr, e.size);
    put16(hdr, static_cast<uint16_t>(member.size()));
    put16(hdr, 0);
    hdr += member;
    out.write(hdr.data(), static_cast<std::streamsize>(hdr.size()));
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    offset += hdr.size() + bytes.size();
    central.push_back(std::move(e));
  };
  for (const auto& a : archive.arrays) add_member(a.name + ".npy", encode_npy(a));
  for (const auto& [name, bytes] : archive.blobs) add_member(name, bytes);

  std::string cd;
  for (const auto& e : central) {
    put32(cd, kCentralSig);
    put16(cd, 20);
    put16(cd, 20);
    put16(cd, 0);
    put16(cd, 0);
    put16(cd, 0);
    put16(cd, kDosDate);
    put32(cd, e.crc);
    put32(cd, e.size);
    put32(cd, e.size);
    put16(cd, static_cast<uint16_t>(e.name.size()));
    put16(cd, 0);
    put16(cd, 0);
    put16(cd, 0);
    put16(cd, 0);
    put32(cd, 0);
    put32(cd, e.offset);
    cd += e.name;
  }
  std::string end;
  put32(end, kEndSig);
  put16(end, 0);
  put16(end, 0);
  put16(end, static_cast<uint16_t>(central.size()));
  put16(end, static_cast<uint16_t>(central.size()));
  put32(end, static_cast<uint32_t>(cd.size()));
  put32(end, static_cast<uint32_t>(offset));
  put16(end, 0);
  out.write(cd.data(), static_cast<std::streamsize>(cd.size()));
  out.write(end.data(), static_cast<std::streamsize>(end.size()));
  if (!out) throw Error("write failed: " + path);
}

Archive read_archive(const std::string& path) {
  const std::string bytes = read_file(path);
  const std::string_view s(bytes);
  if (s.size() < 22) corrupt(path + " is too short");
  size_t eocd = std::string_view::npos;
  for (size_t i = s.size() - 22 + 1; i-- > 0 && s.size() - i <= 22 + 65535;) {
    if (get32(s, i) == kEndSig) {
      eocd = i;
      break;
    }
  }
  if (eocd == std::string_view::npos) corrupt(path + ": end of central directory not found");
  const uint16_t count = get16(s, eocd + 10);
  const uint32_t cd_size = get32(s, eocd + 12);
  const uint32_t cd_off = get32(s, eocd + 16);
  if (static_cast<uint64_t>(cd_off) + cd_size > eocd) corrupt(path + ": central directory out of range");

  Archive archive;
  size_t p = cd_off;
  for (uint16_t n = 0; n < count; ++n) {
    if (p + 46 > eocd || get32(s, p) != kCentralSig) corrupt(path + ": bad central directory entry");
    const uint16_t method = get16(s, p + 10);
    const uint32_t crc = get32(s, p + 16);
    const uint32_t csize = get32(s, p + 20);
    const uint32_t usize = get32(s, p + 24);
    const uint16_t name_len = get16(s, p + 28);
    const uint16_t extra_len = get16(s, p + 30);
    const uint16_t comment_len = get16(s, p + 32);
    const uint32_t local = get32(s, p + 42);
    if (p + 46 + name_len > eocd) corrupt(path + ": bad central directory entry");
    std::string name(s.substr(p + 46, name_len));
    p += 46u + name_len + extra_len + comment_len;
    if (method != 0 || csize != usize) corrupt(path + ": member " + name + " is compressed (unsupported)");
    if (static_cast<uint64_t>(local) + 30 > s.size() || get32(s, local) != kLocalSig)
      corrupt(path + ": bad local header for " + name);
    const size_t data = local + 30u + get16(s, local + 26) + get16(s, local + 28);
    if (data + static_cast<uint64_t>(usize) > s.size()) corrupt(path + ": member " + name + " truncated");
    const std::string_view payload = s.substr(data, usize);
    if (crc_of(payload) != crc) corrupt(path + ": CRC mismatch in " + name);
    if (name.size() > 4 && name.compare(name.size() - 4, 4, ".npy") == 0) {
      archive.arrays.push_back(decode_npy(payload, name.substr(0, name.size() - 4)));
    } else {
      archive.blobs.emplace(std::move(name), std::string(payload));
    }
  }
  return archive;
}

}  // namespace attr2style
