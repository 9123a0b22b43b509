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

#include "fsat/autodiff/parameter_store.hpp"

#include <openssl/evp.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "fsat/error.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

namespace fsat::ad {

ParameterStore::ParameterStore(const ParameterStore& other) { *this = other; }

ParameterStore& ParameterStore::operator=(const ParameterStore& other) {
  if (this == &other) return *this;
  params_.clear();
  index_.clear();
  for (const auto& p : other.params_) {
    add(p->id, p->value, p->trainable);
  }
  return *this;
}

Parameter& ParameterStore::add(std::string id, Tensor value, bool trainable) {
  if (index_.count(id)) throw StateError("parameter store: duplicate identifier '" + id + "'");
  index_.emplace(id, params_.size());
  params_.push_back(std::make_unique<Parameter>(std::move(id), std::move(value), trainable));
  return *params_.back();
}

Parameter* ParameterStore::find(std::string_view id) {
  auto it = index_.find(id);
  return it == index_.end() ? nullptr : params_[it->second].get();
}

const Parameter* ParameterStore::find(std::string_view id) const {
  auto it = index_.find(id);
  return it == index_.end() ? nullptr : params_[it->second].get();
}

Parameter& ParameterStore::get(std::string_view id) {
  if (auto* p = find(id)) return *p;
  throw StateError("parameter store: no parameter '" + std::string(id) + "'");
}

const Parameter& ParameterStore::get(std::string_view id) const {
  if (const auto* p = find(id)) return *p;
  throw StateError("parameter store: no parameter '" + std::string(id) + "'");
}

std::vector<Parameter*> ParameterStore::all() {
  std::vector<Parameter*> out;
  out.reserve(params_.size());
  for (auto& p : params_) out.push_back(p.get());
  return out;
}

std::vector<const Parameter*> ParameterStore::all() const {
  std::vector<const Parameter*> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.get());
  return out;
}

std::size_t ParameterStore::total_values() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p->value.numel();
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& p : params_) p->zero_grad();
}

void ParameterStore::set_trainable(bool trainable) {
  for (auto& p : params_) p->trainable = trainable;
}

std::string ParameterStore::checksum() const {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr);
  for (const auto& p : params_) {
    EVP_DigestUpdate(ctx.get(), p->id.data(), p->id.size());
    for (auto d : p->value.shape()) {
      const std::uint64_t dd = d;
      EVP_DigestUpdate(ctx.get(), &dd, sizeof(dd));
    }
    EVP_DigestUpdate(ctx.get(), p->value.data(), p->value.numel() * sizeof(double));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), digest, &len);
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) {
    os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  }
  return os.str();
}

namespace {

constexpr char kMagic[8] = {'F', 'S', 'A', 'T', 'C', 'K', 'P', 'T'};

template <typename T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T take(std::istream& is, const std::filesystem::path& path) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) {
    throw FormatError("checkpoint " + path.string() + ": truncated");
  }
  return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ParameterStore& store) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write checkpoint " + path.string());
  os.write(kMagic, sizeof(kMagic));
  put(os, kCheckpointVersion);
  put(os, static_cast<std::uint32_t>(store.size()));
  for (const Parameter* p : store.all()) {
    put(os, static_cast<std::uint32_t>(p->id.size()));
    os.write(p->id.data(), static_cast<std::streamsize>(p->id.size()));
    put(os, static_cast<std::uint8_t>(p->trainable ? 1 : 0));
    put(os, static_cast<std::uint32_t>(p->value.rank()));
    for (auto d : p->value.shape()) put(os, static_cast<std::uint64_t>(d));
    os.write(reinterpret_cast<const char*>(p->value.data()),
             static_cast<std::streamsize>(p->value.numel() * sizeof(double)));
  }
  if (!os) throw IoError("failed writing checkpoint " + path.string());
}

ParameterStore load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint " + path.string());
  char magic[8];
  if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(magic)) != 0) {
    throw FormatError("checkpoint " + path.string() + ": bad magic");
  }
  const auto version = take<std::uint32_t>(is, path);
  if (version != kCheckpointVersion) {
    throw FormatError("checkpoint " + path.string() + ": unsupported version " +
                      std::to_string(version));
  }
  const auto count = take<std::uint32_t>(is, path);
  ParameterStore store;
  for (std::uint32_t k = 0; k < count; ++k) {
    const auto id_len = take<std::uint32_t>(is, path);
    if (id_len > 4096) throw FormatError("checkpoint " + path.string() + ": implausible id length");
    std::string id(id_len, '\0');
    if (!is.read(id.data(), id_len)) throw FormatError("checkpoint " + path.string() + ": truncated");
    const bool trainable = take<std::uint8_t>(is, path) != 0;
    const auto rank = take<std::uint32_t>(is, path);
    if (rank > 8) throw FormatError("checkpoint " + path.string() + ": implausible rank");
    Shape shape(rank);
    for (auto& d : shape) d = static_cast<std::size_t>(take<std::uint64_t>(is, path));
    std::vector<double> values(shape_numel(shape));
    if (!is.read(reinterpret_cast<char*>(values.data()),
                 static_cast<std::streamsize>(values.size() * sizeof(double)))) {
      throw FormatError("checkpoint " + path.string() + ": truncated values for '" + id + "'");
    }
    store.add(std::move(id), Tensor(std::move(shape), std::move(values)), trainable);
  }
  return store;
}

void load_checkpoint_into(const std::filesystem::path& path, ParameterStore& store) {
  ParameterStore loaded = load_checkpoint(path);
  for (Parameter* p : store.all()) {
    const Parameter* src = loaded.find(p->id);
    if (!src) throw FormatError("checkpoint " + path.string() + ": missing '" + p->id + "'");
    if (src->value.shape() != p->value.shape()) {
      throw FormatError("checkpoint " + path.string() + ": shape mismatch for '" + p->id + "', " +
                        shape_string(src->value.shape()) + " vs " + shape_string(p->value.shape()));
    }
    p->value = src->value;
  }
}

}  // namespace fsat::ad
