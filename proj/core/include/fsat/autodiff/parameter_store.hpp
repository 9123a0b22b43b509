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

#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "fsat/autodiff/tape.hpp"

namespace fsat::ad {

/// Owns a set of uniquely named parameters in insertion order.
class ParameterStore {
 public:
  ParameterStore() = default;
  ParameterStore(const ParameterStore& other);
  ParameterStore& operator=(const ParameterStore& other);
  ParameterStore(ParameterStore&&) noexcept = default;
  ParameterStore& operator=(ParameterStore&&) noexcept = default;

  Parameter& add(std::string id, Tensor value, bool trainable = true);
  Parameter& get(std::string_view id);
  const Parameter& get(std::string_view id) const;
  Parameter* find(std::string_view id);
  const Parameter* find(std::string_view id) const;
  bool contains(std::string_view id) const { return find(id) != nullptr; }

  std::vector<Parameter*> all();
  std::vector<const Parameter*> all() const;
  std::size_t size() const noexcept { return params_.size(); }
  std::size_t total_values() const;

  void zero_grad();
  void set_trainable(bool trainable);

  /// SHA-256 over identifiers, shapes and raw value bytes, as lowercase hex.
  std::string checksum() const;

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

/// Binary checkpoint container, little-endian:
///   "FSATCKPT" | u32 version | u32 count |
///   count x { u32 id_len | id | u8 trainable | u32 rank | u64 dims[rank] | f64 values }
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const ParameterStore& store);
ParameterStore load_checkpoint(const std::filesystem::path& path);
/// Copies values from a checkpoint into an existing store; every parameter in
/// the store must be present with an identical shape.
void load_checkpoint_into(const std::filesystem::path& path, ParameterStore& store);

}  // namespace fsat::ad
