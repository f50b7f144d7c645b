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

// Binary PGM (P5) / PPM (P6) with maxval 255 or 65535. 16-bit samples are
// big-endian as required by the netpbm convention.

#pragma once

#include <cctype>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sis/error.hpp"
#include "sis/io.hpp"
#include "sis/tensor.hpp"

namespace sis {

struct ImageBuffer {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 1;  // 1 (PGM) or 3 (PPM)
  std::uint16_t maxval = 255;  // 255 or 65535
  std::vector<std::uint16_t> samples;  // row-major, channel-interleaved

  void validate() const {
    if (channels != 1 && channels != 3) throw ArgumentError("image channels must be 1 or 3");
    if (maxval != 255 && maxval != 65535) throw ArgumentError("image maxval must be 255 or 65535");
    if (samples.size() != height * width * channels) throw ArgumentError("image sample count mismatch");
    for (auto s : samples) {
      if (s > maxval) throw ArgumentError("image sample exceeds maxval");
    }
  }

  friend bool operator==(const ImageBuffer&, const ImageBuffer&) = default;
};

namespace pnm_detail {

class HeaderReader {
 public:
  explicit HeaderReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::size_t next_uint() {
    skip_ws_and_comments();
    if (pos_ >= bytes_.size() || !std::isdigit(bytes_[pos_])) throw FormatError("pnm: expected integer in header");
    std::size_t v = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      v = v * 10 + static_cast<std::size_t>(bytes_[pos_] - '0');
      if (v > (std::size_t{1} << 40)) throw FormatError("pnm: header value too large");
      ++pos_;
    }
    return v;
  }

  // Exactly one whitespace byte separates maxval from the raster.
  std::size_t raster_offset() {
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) throw FormatError("pnm: missing raster separator");
    return pos_ + 1;
  }

  void seek(std::size_t pos) { pos_ = pos; }

 private:
  void skip_ws_and_comments() {
    while (pos_ < bytes_.size()) {
      if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n' && bytes_[pos_] != '\r') ++pos_;
      } else {
        break;
      }
    }
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace pnm_detail

inline ImageBuffer read_pnm(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P') throw FormatError("pnm: bad magic");
  ImageBuffer img;
  switch (bytes[1]) {
    case '5': img.channels = 1; break;
    case '6': img.channels = 3; break;
    case '1': case '2': case '3': case '4': case '7':
      throw UnsupportedFormatError(std::string("pnm: unsupported variant P") + static_cast<char>(bytes[1]));
    default:
      throw FormatError("pnm: bad magic");
  }
  pnm_detail::HeaderReader header(bytes);
  header.seek(2);
  img.width = header.next_uint();
  img.height = header.next_uint();
  const std::size_t maxval = header.next_uint();
  if (img.width == 0 || img.height == 0) throw FormatError("pnm: zero image dimension");
  if (maxval != 255 && maxval != 65535) {
    throw UnsupportedFormatError("pnm: unsupported maxval " + std::to_string(maxval));
  }
  img.maxval = static_cast<std::uint16_t>(maxval);
  const std::size_t offset = header.raster_offset();
  const std::size_t count = img.height * img.width * img.channels;
  const std::size_t bps = maxval == 255 ? 1 : 2;
  if (bytes.size() - offset < count * bps) throw FormatError("pnm: truncated raster");

  img.samples.resize(count);
  const std::uint8_t* p = bytes.data() + offset;
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint16_t v = bps == 1 ? p[i] : static_cast<std::uint16_t>((p[2 * i] << 8) | p[2 * i + 1]);
    if (v > maxval) throw FormatError("pnm: sample exceeds maxval");
    img.samples[i] = v;
  }
  return img;
}

inline Bytes write_pnm(const ImageBuffer& img) {
  img.validate();
  const std::string header = std::string(img.channels == 1 ? "P5" : "P6") + "\n" + std::to_string(img.width) +
                             " " + std::to_string(img.height) + "\n" + std::to_string(img.maxval) + "\n";
  Bytes out(header.begin(), header.end());
  const bool wide = img.maxval > 255;
  out.reserve(out.size() + img.samples.size() * (wide ? 2 : 1));
  for (auto s : img.samples) {
    if (wide) out.push_back(static_cast<std::uint8_t>(s >> 8));
    out.push_back(static_cast<std::uint8_t>(s & 0xff));
  }
  return out;
}

inline ImageBuffer load_pnm(const std::filesystem::path& path) { return read_pnm(read_file(path)); }
inline void save_pnm(const std::filesystem::path& path, const ImageBuffer& img) {
  write_file_atomic(path, write_pnm(img));
}

/// Samples normalized to [0,1]; returns [h,w,channels].
inline Tensor image_to_tensor(const ImageBuffer& img) {
  Tensor t(Shape{img.height, img.width, img.channels});
  const double scale = 1.0 / img.maxval;
  for (std::size_t i = 0; i < img.samples.size(); ++i) t[i] = img.samples[i] * scale;
  return t;
}

/// Quantizes a [0,1] tensor ([h,w] or [h,w,c], c in {1,3}); values are clamped.
inline ImageBuffer tensor_to_image(const Tensor& t, std::uint16_t maxval = 255) {
  const auto d = spatial_dims(t);
  if (d.channels != 1 && d.channels != 3) throw ArgumentError("tensor_to_image: channels must be 1 or 3");
  ImageBuffer img{d.height, d.width, d.channels, maxval, std::vector<std::uint16_t>(t.size())};
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double v = std::clamp(t[i], 0.0, 1.0);
    img.samples[i] = static_cast<std::uint16_t>(std::lround(v * maxval));
  }
  img.validate();
  return img;
}

/// Integer label map [h,w] stored verbatim as a 16-bit PGM.
inline ImageBuffer labels_to_image(const Tensor& labels) {
  if (labels.rank() != 2) throw ArgumentError("label map must be rank 2");
  ImageBuffer img{labels.dim(0), labels.dim(1), 1, 65535, std::vector<std::uint16_t>(labels.size())};
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double v = labels[i];
    if (v < 0 || v > 65535 || v != std::floor(v)) throw ArgumentError("label values must be integers in [0,65535]");
    img.samples[i] = static_cast<std::uint16_t>(v);
  }
  return img;
}

inline Tensor image_to_labels(const ImageBuffer& img) {
  if (img.channels != 1) throw ArgumentError("label map image must be single-channel");
  Tensor t(Shape{img.height, img.width});
  for (std::size_t i = 0; i < img.samples.size(); ++i) t[i] = img.samples[i];
  return t;
}

}  // namespace sis
