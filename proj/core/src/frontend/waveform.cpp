// Copyright 2026 The fsat Authors.
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

#include "fsat/frontend/waveform.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>

#include "fsat/error.hpp"

namespace fsat::frontend {
namespace {

std::uint32_t u32_at(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
         static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

std::uint16_t u16_at(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | p[1] << 8);
}

void put_u32(std::ostream& os, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

void put_u16(std::ostream& os, std::uint16_t v) {
  const unsigned char b[2] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8)};
  os.write(reinterpret_cast<const char*>(b), 2);
}

}  // namespace

void Waveform::validate() const {
  if (!(sample_rate > 0.0)) throw DomainError("waveform: sample rate must be positive");
  if (samples.empty()) throw DomainError("waveform: no samples");
}

Waveform read_wav(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open wav " + path.string());
  std::vector<unsigned char> data((std::istreambuf_iterator<char>(is)), {});
  const std::string origin = path.string();
  if (data.size() < 12 || std::memcmp(data.data(), "RIFF", 4) != 0 ||
      std::memcmp(data.data() + 8, "WAVE", 4) != 0) {
    throw FormatError(origin + ": not a RIFF/WAVE file");
  }
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const unsigned char* samples = nullptr;
  std::size_t sample_bytes = 0;
  std::size_t pos = 12;
  while (pos + 8 <= data.size()) {
    const unsigned char* chunk = data.data() + pos;
    const std::uint32_t size = u32_at(chunk + 4);
    if (pos + 8 + size > data.size()) throw FormatError(origin + ": truncated chunk");
    if (std::memcmp(chunk, "fmt ", 4) == 0 && size >= 16) {
      format = u16_at(chunk + 8);
      channels = u16_at(chunk + 10);
      rate = u32_at(chunk + 12);
      bits = u16_at(chunk + 22);
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      samples = chunk + 8;
      sample_bytes = size;
    }
    pos += 8 + size + (size & 1u);
  }
  if (!samples || rate == 0) throw FormatError(origin + ": missing fmt or data chunk");
  if (channels != 1) throw FormatError(origin + ": only mono audio is supported");
  Waveform w;
  w.sample_rate = rate;
  if (format == 1 && bits == 16) {
    w.samples.resize(sample_bytes / 2);
    for (std::size_t i = 0; i < w.samples.size(); ++i) {
      const auto v = static_cast<std::int16_t>(u16_at(samples + 2 * i));
      w.samples[i] = v / 32768.0;
    }
  } else if (format == 3 && bits == 32) {
    w.samples.resize(sample_bytes / 4);
    for (std::size_t i = 0; i < w.samples.size(); ++i) {
      const std::uint32_t bitsv = u32_at(samples + 4 * i);
      float f;
      std::memcpy(&f, &bitsv, 4);
      w.samples[i] = f;
    }
  } else {
    throw FormatError(origin + ": unsupported sample format " + std::to_string(format) + "/" +
                      std::to_string(bits) + " bit");
  }
  w.validate();
  return w;
}

void write_wav(const std::filesystem::path& path, const Waveform& wave) {
  wave.validate();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write wav " + path.string());
  const auto n = static_cast<std::uint32_t>(wave.samples.size());
  const auto rate = static_cast<std::uint32_t>(std::lround(wave.sample_rate));
  os.write("RIFF", 4);
  put_u32(os, 36 + 4 * n);
  os.write("WAVEfmt ", 8);
  put_u32(os, 16);
  put_u16(os, 3);
  put_u16(os, 1);
  put_u32(os, rate);
  put_u32(os, rate * 4);
  put_u16(os, 4);
  put_u16(os, 32);
  os.write("data", 4);
  put_u32(os, 4 * n);
  for (double s : wave.samples) {
    const auto f = static_cast<float>(s);
    std::uint32_t b;
    std::memcpy(&b, &f, 4);
    put_u32(os, b);
  }
  if (!os) throw IoError("failed writing wav " + path.string());
}

}  // namespace fsat::frontend
