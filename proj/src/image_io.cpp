/*
 * Copyright (c) The ampe authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include "ampe/image_io.hpp"

#include <png.h>

#include <cstring>
#include <fstream>
#include <iterator>

namespace ampe {
namespace {

png_uint_32 format_for(int channels) {
  if (channels == 3) return PNG_FORMAT_RGB;
  if (channels == 1) return PNG_FORMAT_GRAY;
  throw ConfigError("PNG I/O supports 1 or 3 channels, got " + std::to_string(channels));
}

Tensor<double> from_interleaved(const std::vector<std::uint8_t>& buf, int channels, Index h, Index w) {
  Tensor<double> t(channels, h, w);
  for (Index y = 0; y < h; ++y)
    for (Index x = 0; x < w; ++x)
      for (int c = 0; c < channels; ++c) t(c, y, x) = buf[(y * w + x) * channels + c] / 255.0;
  return t;
}

std::vector<std::uint8_t> to_interleaved(const Tensor<double>& t) {
  std::vector<std::uint8_t> buf(static_cast<std::size_t>(t.size()));
  for (Index y = 0; y < t.height; ++y)
    for (Index x = 0; x < t.width; ++x)
      for (Index c = 0; c < t.channels; ++c) buf[(y * t.width + x) * t.channels + c] = quantize_u8(t(c, y, x));
  return buf;
}

png_image describe(const Tensor<double>& t) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(t.width);
  image.height = static_cast<png_uint_32>(t.height);
  image.format = format_for(static_cast<int>(t.channels));
  return image;
}

}  // namespace

bool looks_like_png(std::span<const std::uint8_t> bytes) {
  static constexpr std::uint8_t kSig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  return bytes.size() >= 8 && std::memcmp(bytes.data(), kSig, 8) == 0;
}

Tensor<double> decode_png(std::span<const std::uint8_t> bytes, int channels) {
  if (!looks_like_png(bytes)) throw IoError("not a PNG stream");
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    throw IoError(std::string("PNG decode failed: ") + image.message);
  }
  image.format = format_for(channels);
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buf.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw IoError("PNG decode failed: " + msg);
  }
  return from_interleaved(buf, channels, image.height, image.width);
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Tensor<double> read_png(const std::filesystem::path& path, int channels) {
  const auto bytes = read_file_bytes(path);
  try {
    return decode_png(bytes, channels);
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

std::vector<std::uint8_t> encode_png(const Tensor<double>& t) {
  png_image image = describe(t);
  const auto pixels = to_interleaved(t);
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, pixels.data(), 0, nullptr)) {
    throw IoError(std::string("PNG encode failed: ") + image.message);
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, pixels.data(), 0, nullptr)) {
    throw IoError(std::string("PNG encode failed: ") + image.message);
  }
  out.resize(size);
  return out;
}

void write_png(const std::filesystem::path& path, const Tensor<double>& t) {
  const auto bytes = encode_png(t);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace ampe
