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

#include "fsat/adapt/transforms.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "fsat/config_io.hpp"
#include "fsat/error.hpp"

namespace fsat::adapt {

const char* owner_type_name(OwnerType type) {
  switch (type) {
    case OwnerType::kSpeaker: return "speaker";
    case OwnerType::kEnvironment: return "environment";
    case OwnerType::kJoint: return "joint";
  }
  return "?";
}

OwnerType parse_owner_type(const std::string& text) {
  if (text == "speaker") return OwnerType::kSpeaker;
  if (text == "environment") return OwnerType::kEnvironment;
  if (text == "joint") return OwnerType::kJoint;
  throw FormatError("unknown owner type '" + text + "'");
}

const char* parameterization_name(Parameterization p) {
  return p == Parameterization::kDeterministic ? "deterministic" : "variational";
}

Parameterization parse_parameterization(const std::string& text) {
  if (text == "deterministic") return Parameterization::kDeterministic;
  if (text == "variational") return Parameterization::kVariational;
  throw FormatError("unknown parameterization '" + text + "'");
}

std::string joint_owner_id(const std::string& speaker, const std::string& environment) {
  return speaker + "+" + environment;
}

FactorTransform::FactorTransform(OwnerType owner_type, std::string owner_id, TransformKind kind,
                                 std::size_t dim, Parameterization parameterization,
                                 double initial_log_sigma)
    : owner_type_(owner_type),
      owner_id_(std::move(owner_id)),
      kind_(kind),
      parameterization_(parameterization),
      mean_(std::string(kAdaptPrefix) + owner_type_name(owner_type) + "/" + owner_id_ + "/mu",
            ad::Tensor(ad::Shape{dim})) {
  if (dim == 0) throw ShapeError("transform: dimension must be positive");
  if (owner_id_.empty() || owner_id_.find_first_of(" \t\n") != std::string::npos) {
    throw ConfigError("transform: owner id must be non-empty without whitespace");
  }
  if (parameterization == Parameterization::kVariational) {
    log_sigma_.emplace(std::string(kAdaptPrefix) + owner_type_name(owner_type) + "/" + owner_id_ +
                           "/log_sigma",
                       ad::Tensor(ad::Shape{dim}, initial_log_sigma));
  }
}

ad::Parameter& FactorTransform::log_sigma() {
  if (!log_sigma_) throw StateError("transform " + owner_id_ + " is deterministic");
  return *log_sigma_;
}

const ad::Parameter& FactorTransform::log_sigma() const {
  if (!log_sigma_) throw StateError("transform " + owner_id_ + " is deterministic");
  return *log_sigma_;
}

ad::Tensor FactorTransform::sigma() const {
  ad::Tensor s = log_sigma().value;
  for (double& v : s.values()) v = std::exp(v);
  return s;
}

std::vector<ad::Parameter*> FactorTransform::parameters() {
  std::vector<ad::Parameter*> out{&mean_};
  if (log_sigma_) out.push_back(&*log_sigma_);
  return out;
}

FactorTransform FactorTransform::posterior_mean() const {
  FactorTransform out(owner_type_, owner_id_, kind_, dim(), Parameterization::kDeterministic);
  out.mean_.value = mean_.value;
  out.mean_.trainable = mean_.trainable;
  return out;
}

TransformSet::TransformSet(std::size_t dim, std::size_t layer, Parameterization parameterization)
    : dim_(dim), layer_(layer), parameterization_(parameterization) {
  if (dim == 0) throw ShapeError("transform set: dimension must be positive");
}

FactorTransform& TransformSet::add(OwnerType type, const std::string& id, TransformKind kind,
                                   double initial_log_sigma) {
  insert(FactorTransform(type, id, kind, dim_, parameterization_, initial_log_sigma));
  return transforms_.at({type, id});
}

void TransformSet::insert(FactorTransform transform) {
  if (transform.dim() != dim_) {
    throw ShapeError("transform set: transform dim " + std::to_string(transform.dim()) +
                     " differs from " + std::to_string(dim_));
  }
  if (transform.parameterization() != parameterization_) {
    throw StateError("transform set: mixed parameterizations");
  }
  Key key{transform.owner_type(), transform.owner_id()};
  if (transforms_.count(key)) {
    throw StateError(std::string("transform set: duplicate ") + owner_type_name(key.first) + " " +
                     key.second);
  }
  transforms_.emplace(std::move(key), std::move(transform));
}

FactorTransform* TransformSet::find(OwnerType type, const std::string& id) {
  auto it = transforms_.find({type, id});
  return it == transforms_.end() ? nullptr : &it->second;
}

const FactorTransform* TransformSet::find(OwnerType type, const std::string& id) const {
  auto it = transforms_.find({type, id});
  return it == transforms_.end() ? nullptr : &it->second;
}

FactorTransform& TransformSet::get(OwnerType type, const std::string& id) {
  if (FactorTransform* t = find(type, id)) return *t;
  throw StateError(std::string("no ") + owner_type_name(type) + " transform for '" + id + "'");
}

const FactorTransform& TransformSet::get(OwnerType type, const std::string& id) const {
  if (const FactorTransform* t = find(type, id)) return *t;
  throw StateError(std::string("no ") + owner_type_name(type) + " transform for '" + id + "'");
}

std::vector<std::string> TransformSet::owners(OwnerType type) const {
  std::vector<std::string> out;
  for (const auto& [key, t] : transforms_) {
    if (key.first == type) out.push_back(key.second);
  }
  return out;
}

std::vector<FactorTransform*> TransformSet::all() {
  std::vector<FactorTransform*> out;
  for (auto& [key, t] : transforms_) out.push_back(&t);
  return out;
}

std::vector<const FactorTransform*> TransformSet::all() const {
  std::vector<const FactorTransform*> out;
  for (const auto& [key, t] : transforms_) out.push_back(&t);
  return out;
}

std::vector<ad::Parameter*> TransformSet::parameters() {
  std::vector<ad::Parameter*> out;
  for (auto& [key, t] : transforms_) {
    for (ad::Parameter* p : t.parameters()) out.push_back(p);
  }
  return out;
}

TransformSet TransformSet::posterior_mean() const {
  TransformSet out(dim_, layer_, Parameterization::kDeterministic);
  out.provenance = provenance;
  for (const auto& [key, t] : transforms_) out.insert(t.posterior_mean());
  return out;
}

void save_transform_cache(const std::filesystem::path& path, const TransformSet& set) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write transform cache " + path.string());
  os << "fsat-transform-cache " << kTransformCacheVersion << "\n";
  os << "dim " << set.dim() << "\n";
  os << "layer " << set.layer() << "\n";
  os << "parameterization " << parameterization_name(set.parameterization()) << "\n";
  os << "corpus " << set.provenance.corpus << "\n";
  os << "epochs " << set.provenance.epochs << "\n";
  os << "objective " << format_exact(set.provenance.objective) << "\n";
  os << "records " << set.size() << "\n";
  for (const FactorTransform* t : set.all()) {
    os << owner_type_name(t->owner_type()) << ' ' << t->owner_id() << ' ' << kind_name(t->kind());
    for (double v : t->mean().value.values()) os << ' ' << format_exact(v);
    if (t->variational()) {
      for (double v : t->log_sigma().value.values()) os << ' ' << format_exact(v);
    }
    os << '\n';
  }
  if (!os) throw IoError("failed writing transform cache " + path.string());
}

namespace {

std::string expect_field(std::istream& is, const std::string& name, const std::string& origin) {
  std::string line;
  if (!std::getline(is, line)) throw FormatError(origin + ": truncated header, missing " + name);
  std::istringstream ls(line);
  std::string key, value;
  ls >> key;
  std::getline(ls >> std::ws, value);
  if (key != name || value.empty()) {
    throw FormatError(origin + ": expected header field '" + name + "'");
  }
  return value;
}

double parse_value(const std::string& tok, const std::string& origin) {
  try {
    std::size_t used = 0;
    const double v = std::stod(tok, &used);
    if (used != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw FormatError(origin + ": malformed number '" + tok + "'");
  }
}

}  // namespace

TransformSet load_transform_cache(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open transform cache " + path.string());
  const std::string origin = path.string();
  const std::string version = expect_field(is, "fsat-transform-cache", origin);
  if (version != std::to_string(kTransformCacheVersion)) {
    throw FormatError(origin + ": unsupported cache version " + version);
  }
  std::size_t dim = 0, layer = 0, records = 0;
  try {
    dim = std::stoul(expect_field(is, "dim", origin));
    layer = std::stoul(expect_field(is, "layer", origin));
  } catch (const std::invalid_argument&) {
    throw FormatError(origin + ": malformed dim/layer");
  }
  const Parameterization par = parse_parameterization(expect_field(is, "parameterization", origin));
  TransformSet set(dim, layer, par);
  set.provenance.corpus = expect_field(is, "corpus", origin);
  try {
    set.provenance.epochs = std::stoul(expect_field(is, "epochs", origin));
    set.provenance.objective = parse_value(expect_field(is, "objective", origin), origin);
    records = std::stoul(expect_field(is, "records", origin));
  } catch (const std::invalid_argument&) {
    throw FormatError(origin + ": malformed provenance");
  }
  const std::size_t per = par == Parameterization::kVariational ? 2 * dim : dim;
  std::string line;
  std::size_t seen = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string type, id, kind;
    ls >> type >> id >> kind;
    std::vector<double> values;
    std::string tok;
    while (ls >> tok) values.push_back(parse_value(tok, origin));
    if (values.size() != per) {
      throw FormatError(origin + ": record for " + id + " has " + std::to_string(values.size()) +
                        " values, expected " + std::to_string(per));
    }
    FactorTransform t(parse_owner_type(type), id, parse_kind(kind), dim, par);
    std::copy(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(dim),
              t.mean().value.values().begin());
    if (t.variational()) {
      std::copy(values.begin() + static_cast<std::ptrdiff_t>(dim), values.end(),
                t.log_sigma().value.values().begin());
    }
    set.insert(std::move(t));
    ++seen;
  }
  if (seen != records) {
    throw FormatError(origin + ": header declares " + std::to_string(records) + " records, found " +
                      std::to_string(seen));
  }
  return set;
}

}  // namespace fsat::adapt
