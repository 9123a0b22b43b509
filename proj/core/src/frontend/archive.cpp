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

#include "fsat/frontend/archive.hpp"

#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "fsat/config_io.hpp"
#include "fsat/error.hpp"

namespace fsat::frontend {
namespace {

constexpr char kMagic[8] = {'F', 'S', 'A', 'T', 'F', 'E', 'A', 'T'};

template <typename T>
void put(std::ostream& os, T v) {
  unsigned char b[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), sizeof(T));
}

void put_str(std::ostream& os, const std::string& s) {
  put<std::uint32_t>(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

class Reader {
 public:
  Reader(std::istream& is, std::string origin) : is_(is), origin_(std::move(origin)) {}

  template <typename T>
  T get() {
    unsigned char b[sizeof(T)];
    bytes(b, sizeof(T));
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(b[i]) << (8 * i);
    return v;
  }

  std::string str() {
    const auto n = get<std::uint32_t>();
    if (n > (1u << 20)) throw FormatError(origin_ + ": implausible string length");
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }

  void bytes(void* dst, std::size_t n) {
    is_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is_.gcount()) != n) throw FormatError(origin_ + ": truncated archive");
  }

 private:
  std::istream& is_;
  std::string origin_;
};

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    out.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return out;
}

}  // namespace

void write_feature_archive(const std::filesystem::path& path,
                           std::span<const FeatureSequence> records) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write feature archive " + path.string());
  os.write(kMagic, 8);
  put<std::uint32_t>(os, kFeatureArchiveVersion);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(records.size()));
  for (const FeatureSequence& r : records) {
    if (r.frames.rank() != 2) throw ShapeError("feature archive: frames must be T x F");
    put_str(os, r.utterance_id);
    put_str(os, r.speaker_id);
    put_str(os, r.env_id);
    put<std::uint8_t>(os, r.transcript ? 1 : 0);
    if (r.transcript) put_str(os, *r.transcript);
    put<std::uint64_t>(os, r.frames.rows());
    put<std::uint64_t>(os, r.frames.cols());
    for (double v : r.frames.values()) {
      std::uint64_t bits;
      std::memcpy(&bits, &v, 8);
      put<std::uint64_t>(os, bits);
    }
  }
  if (!os) throw IoError("failed writing feature archive " + path.string());
}

std::vector<FeatureSequence> read_feature_archive(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open feature archive " + path.string());
  Reader rd(is, path.string());
  char magic[8];
  rd.bytes(magic, 8);
  if (std::memcmp(magic, kMagic, 8) != 0) throw FormatError(path.string() + ": not a feature archive");
  const auto version = rd.get<std::uint32_t>();
  if (version != kFeatureArchiveVersion) {
    throw FormatError(path.string() + ": unsupported archive version " + std::to_string(version));
  }
  const auto count = rd.get<std::uint32_t>();
  std::vector<FeatureSequence> out;
  out.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    FeatureSequence r;
    r.utterance_id = rd.str();
    r.speaker_id = rd.str();
    r.env_id = rd.str();
    if (rd.get<std::uint8_t>()) r.transcript = rd.str();
    const auto T = rd.get<std::uint64_t>();
    const auto F = rd.get<std::uint64_t>();
    if (T == 0 || F == 0 || T * F > (1ull << 28)) {
      throw FormatError(path.string() + ": implausible feature shape for " + r.utterance_id);
    }
    std::vector<double> values(T * F);
    for (double& v : values) {
      const auto bits = rd.get<std::uint64_t>();
      std::memcpy(&v, &bits, 8);
    }
    r.frames = ad::Tensor(ad::Shape{T, F}, std::move(values));
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open manifest " + path.string());
  std::vector<ManifestEntry> out;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto f = split_tabs(line);
    const std::string where = path.string() + ":" + std::to_string(lineno);
    if (f.size() != 5 && f.size() != 8) {
      throw FormatError(where + ": expected 5 or 8 tab-separated fields, got " +
                        std::to_string(f.size()));
    }
    if (f[0].empty() || f[1].empty() || f[2].empty()) {
      throw FormatError(where + ": utterance, speaker and environment ids are required");
    }
    ManifestEntry e{f[0], f[1], f[2], f[3], f[4], std::nullopt};
    if (f.size() == 8) {
      NoiseCondition c;
      c.noise_id = f[5];
      try {
        c.snr_db = parse_double_list(f[6]).at(0);
      } catch (const std::exception&) {
        throw FormatError(where + ": malformed snr_db '" + f[6] + "'");
      }
      if (f[7] != "seen" && f[7] != "unseen") {
        throw FormatError(where + ": seen_flag must be 'seen' or 'unseen'");
      }
      c.seen = f[7] == "seen";
      e.condition = c;
    }
    out.push_back(std::move(e));
  }
  return out;
}

void write_manifest(const std::filesystem::path& path, std::span<const ManifestEntry> entries) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write manifest " + path.string());
  for (const ManifestEntry& e : entries) {
    os << e.utterance_id << '\t' << e.speaker_id << '\t' << e.env_id << '\t' << e.path << '\t'
       << e.transcript;
    if (e.condition) {
      os << '\t' << e.condition->noise_id << '\t' << format_exact(e.condition->snr_db) << '\t'
         << (e.condition->seen ? "seen" : "unseen");
    }
    os << '\n';
  }
  if (!os) throw IoError("failed writing manifest " + path.string());
}

std::vector<FeatureSequence> load_features(std::span<const ManifestEntry> entries,
                                           const std::filesystem::path& manifest_dir) {
  std::map<std::string, std::map<std::string, FeatureSequence>> archives;
  std::vector<FeatureSequence> out;
  out.reserve(entries.size());
  for (const ManifestEntry& e : entries) {
    std::filesystem::path p(e.path);
    if (p.is_relative()) p = manifest_dir / p;
    auto it = archives.find(p.string());
    if (it == archives.end()) {
      std::map<std::string, FeatureSequence> byid;
      for (FeatureSequence& r : read_feature_archive(p)) byid.emplace(r.utterance_id, std::move(r));
      it = archives.emplace(p.string(), std::move(byid)).first;
    }
    auto rec = it->second.find(e.utterance_id);
    if (rec == it->second.end()) {
      throw FormatError("utterance " + e.utterance_id + " not found in " + p.string());
    }
    FeatureSequence f = rec->second;
    f.speaker_id = e.speaker_id;
    f.env_id = e.env_id;
    if (!e.transcript.empty()) f.transcript = e.transcript;
    out.push_back(std::move(f));
  }
  return out;
}

}  // namespace fsat::frontend
