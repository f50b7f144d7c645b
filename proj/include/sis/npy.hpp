// Copyright (c) 2026 The sis Authors. All rights reserved.
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

// NPY v1.0 subset: little-endian float32/float64, C order.
//
// Layout: "\x93NUMPY" | major=1 | minor=0 | uint16 LE header length |
// ASCII dict padded with spaces and terminated by '\n' so that the
// preamble plus header is a multiple of 64 bytes | raw payload.

#pragma once

#include <bit>
#include <cctype>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>

#include "sis/error.hpp"
#include "sis/io.hpp"
#include "sis/tensor.hpp"

namespace sis {

namespace npy_detail {

inline constexpr std::string_view kMagic = "\x93NUMPY";
inline constexpr std::size_t kPreamble = 10;  // magic(6) + version(2) + header length(2)
inline constexpr std::size_t kAlign = 64;

inline std::uint64_t load_le(const std::uint8_t* p, std::size_t n) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < n; ++i) v |= std::uint64_t{p[i]} << (8 * i);
  return v;
}

inline void skip_ws(std::string_view s, std::size_t& pos) {
  while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
}

// Returns the raw text of the value associated with 'key' in a Python dict
// literal; the value ends at the next top-level ',' or '}'.
inline std::string_view dict_value(std::string_view header, std::string_view key) {
  for (char quote : {'\'', '"'}) {
    std::string needle;
    needle += quote;
    needle += key;
    needle += quote;
    const auto at = header.find(needle);
    if (at == std::string_view::npos) continue;
    std::size_t pos = at + needle.size();
    skip_ws(header, pos);
    if (pos >= header.size() || header[pos] != ':') throw FormatError("npy header: missing ':' after key");
    ++pos;
    skip_ws(header, pos);
    const std::size_t start = pos;
    int depth = 0;
    while (pos < header.size()) {
      const char c = header[pos];
      if (c == '(') ++depth;
      if (c == ')') --depth;
      if (depth == 0 && (c == ',' || c == '}')) break;
      ++pos;
    }
    if (pos >= header.size()) throw FormatError("npy header: unterminated value");
    auto value = header.substr(start, pos - start);
    while (!value.empty() && std::isspace(static_cast<unsigned char>(value.back()))) value.remove_suffix(1);
    return value;
  }
  throw FormatError("npy header: missing key '" + std::string(key) + "'");
}

inline Shape parse_shape(std::string_view text) {
  if (text.size() < 2 || text.front() != '(' || text.back() != ')') {
    throw FormatError("npy header: shape is not a tuple");
  }
  Shape shape;
  std::size_t pos = 1;
  const std::size_t end = text.size() - 1;
  while (true) {
    skip_ws(text, pos);
    if (pos >= end) break;
    if (!std::isdigit(static_cast<unsigned char>(text[pos]))) throw FormatError("npy header: bad shape entry");
    std::size_t v = 0;
    while (pos < end && std::isdigit(static_cast<unsigned char>(text[pos]))) {
      v = v * 10 + static_cast<std::size_t>(text[pos] - '0');
      ++pos;
    }
    shape.push_back(v);
    skip_ws(text, pos);
    if (pos < end) {
      if (text[pos] != ',') throw FormatError("npy header: expected ',' in shape");
      ++pos;
    }
  }
  return shape;
}

inline std::string shape_tuple(const Shape& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    s += std::to_string(shape[i]);
    s += (shape.size() == 1) ? "," : (i + 1 < shape.size() ? ", " : "");
  }
  return s + ")";
}

}  // namespace npy_detail

/// Parses an NPY v1.0 container holding little-endian float32 or float64 data
/// in C order. Values are widened to double; non-finite values are rejected.
inline Tensor read_npy(std::span<const std::uint8_t> bytes) {
  using namespace npy_detail;
  if (bytes.size() < kPreamble ||
      std::memcmp(bytes.data(), kMagic.data(), kMagic.size()) != 0) {
    throw FormatError("npy: bad magic string");
  }
  const auto major = bytes[6];
  const auto minor = bytes[7];
  if (major != 1 || minor != 0) {
    throw UnsupportedFormatError("npy: unsupported version " + std::to_string(major) + "." +
                                 std::to_string(minor));
  }
  const std::size_t header_len = load_le(bytes.data() + 8, 2);
  if (bytes.size() < kPreamble + header_len) throw FormatError("npy: truncated header");
  const std::string_view header(reinterpret_cast<const char*>(bytes.data() + kPreamble), header_len);
  if (header.empty() || header.back() != '\n') throw FormatError("npy: header not newline-terminated");
  if (header.find('{') == std::string_view::npos || header.find('}') == std::string_view::npos) {
    throw FormatError("npy: header is not a dict literal");
  }

  const auto descr = dict_value(header, "descr");
  std::size_t item = 0;
  if (descr == "'<f8'" || descr == "\"<f8\"") {
    item = 8;
  } else if (descr == "'<f4'" || descr == "\"<f4\"") {
    item = 4;
  } else {
    throw UnsupportedFormatError("npy: unsupported dtype " + std::string(descr));
  }

  const auto fortran = dict_value(header, "fortran_order");
  if (fortran == "True") throw UnsupportedFormatError("npy: fortran_order arrays are not supported");
  if (fortran != "False") throw FormatError("npy: bad fortran_order value");

  Shape shape = parse_shape(dict_value(header, "shape"));
  const std::size_t count = shape_product(shape);
  const std::size_t payload = bytes.size() - kPreamble - header_len;
  if (payload != count * item) {
    throw FormatError("npy: payload is " + std::to_string(payload) + " bytes, expected " +
                      std::to_string(count * item));
  }

  std::vector<double> data(count);
  const std::uint8_t* p = bytes.data() + kPreamble + header_len;
  for (std::size_t i = 0; i < count; ++i, p += item) {
    const double v = item == 8
                         ? std::bit_cast<double>(load_le(p, 8))
                         : static_cast<double>(std::bit_cast<float>(static_cast<std::uint32_t>(load_le(p, 4))));
    if (!std::isfinite(v)) throw FormatError("npy: non-finite value at index " + std::to_string(i));
    data[i] = v;
  }
  return Tensor(std::move(shape), std::move(data));
}

/// Serializes as NPY v1.0, '<f8', C order.
inline Bytes write_npy(const Tensor& t) {
  using namespace npy_detail;
  std::string header = "{'descr': '<f8', 'fortran_order': False, 'shape': " + shape_tuple(t.shape()) + ", }";
  const std::size_t unpadded = kPreamble + header.size() + 1;
  header.append((kAlign - unpadded % kAlign) % kAlign, ' ');
  header.push_back('\n');

  Bytes out;
  out.reserve(kPreamble + header.size() + 8 * t.size());
  out.insert(out.end(), kMagic.begin(), kMagic.end());
  out.push_back(1);
  out.push_back(0);
  out.push_back(static_cast<std::uint8_t>(header.size() & 0xff));
  out.push_back(static_cast<std::uint8_t>(header.size() >> 8));
  out.insert(out.end(), header.begin(), header.end());
  for (double v : t.data()) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
  }
  return out;
}

inline Tensor load_npy(const std::filesystem::path& path) { return read_npy(read_file(path)); }

inline void save_npy(const std::filesystem::path& path, const Tensor& t) {
  write_file_atomic(path, write_npy(t));
}

}  // namespace sis
