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

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fsat/adapt/algebra.hpp"
#include "fsat/autodiff/tape.hpp"

namespace fsat::adapt {

/// Identifier prefix of every adaptation parameter.
inline constexpr const char* kAdaptPrefix = "adapt/";

enum class OwnerType { kSpeaker, kEnvironment, kJoint };
enum class Parameterization { kDeterministic, kVariational };

const char* owner_type_name(OwnerType type);
OwnerType parse_owner_type(const std::string& text);
const char* parameterization_name(Parameterization p);
Parameterization parse_parameterization(const std::string& text);

/// Identifier of the joint (speaker, environment) owner.
std::string joint_owner_id(const std::string& speaker, const std::string& environment);

/// One speaker, environment or joint transform. The mean vector is the
/// transform itself in the deterministic case; the variational case adds a
/// log-deviation vector. Zero mean is the identity for both kinds.
class FactorTransform {
 public:
  FactorTransform(OwnerType owner_type, std::string owner_id, TransformKind kind, std::size_t dim,
                  Parameterization parameterization, double initial_log_sigma = 0.0);

  OwnerType owner_type() const noexcept { return owner_type_; }
  const std::string& owner_id() const noexcept { return owner_id_; }
  TransformKind kind() const noexcept { return kind_; }
  Parameterization parameterization() const noexcept { return parameterization_; }
  bool variational() const noexcept { return log_sigma_.has_value(); }
  std::size_t dim() const noexcept { return mean_.value.numel(); }

  ad::Parameter& mean() noexcept { return mean_; }
  const ad::Parameter& mean() const noexcept { return mean_; }
  /// Throws StateError for a deterministic transform.
  ad::Parameter& log_sigma();
  const ad::Parameter& log_sigma() const;
  ad::Tensor sigma() const;

  std::vector<ad::Parameter*> parameters();
  /// Mean-only deterministic copy (posterior-mean inference).
  FactorTransform posterior_mean() const;

 private:
  OwnerType owner_type_;
  std::string owner_id_;
  TransformKind kind_;
  Parameterization parameterization_;
  ad::Parameter mean_;
  std::optional<ad::Parameter> log_sigma_;
};

struct CacheProvenance {
  std::string corpus = "unknown";
  std::size_t epochs = 0;
  double objective = 0.0;
};

/// Keyed collection of transforms sharing one dimension and insertion layer.
class TransformSet {
 public:
  using Key = std::pair<OwnerType, std::string>;

  TransformSet(std::size_t dim, std::size_t layer, Parameterization parameterization);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t layer() const noexcept { return layer_; }
  Parameterization parameterization() const noexcept { return parameterization_; }
  std::size_t size() const noexcept { return transforms_.size(); }

  /// Adds an identity-initialised transform; throws StateError if the key exists.
  FactorTransform& add(OwnerType type, const std::string& id, TransformKind kind,
                       double initial_log_sigma = 0.0);
  void insert(FactorTransform transform);
  FactorTransform* find(OwnerType type, const std::string& id);
  const FactorTransform* find(OwnerType type, const std::string& id) const;
  /// Throws StateError naming the owner when absent.
  FactorTransform& get(OwnerType type, const std::string& id);
  const FactorTransform& get(OwnerType type, const std::string& id) const;
  bool contains(OwnerType type, const std::string& id) const { return find(type, id) != nullptr; }

  std::vector<std::string> owners(OwnerType type) const;
  std::vector<FactorTransform*> all();
  std::vector<const FactorTransform*> all() const;
  std::vector<ad::Parameter*> parameters();

  /// Deterministic set whose vectors are the variational means.
  TransformSet posterior_mean() const;

  CacheProvenance provenance;

 private:
  std::size_t dim_;
  std::size_t layer_;
  Parameterization parameterization_;
  std::map<Key, FactorTransform> transforms_;
};

/// Text cache format, one record per line after the header:
///   fsat-transform-cache <version>
///   dim <D>
///   layer <l>
///   parameterization <deterministic|variational>
///   corpus <id> / epochs <n> / objective <value>
///   records <count>
///   <owner_type> <owner_id> <kind> <mu x D> [<log_sigma x D>]
/// Values are written with 17 significant digits so a load reproduces them.
inline constexpr int kTransformCacheVersion = 1;

void save_transform_cache(const std::filesystem::path& path, const TransformSet& set);
TransformSet load_transform_cache(const std::filesystem::path& path);

}  // namespace fsat::adapt
