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

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "fsat/autodiff/tensor.hpp"

namespace fsat::ad {

/// Named, persistent tensor with an accompanying gradient buffer.
struct Parameter {
  Parameter(std::string identifier, Tensor initial, bool is_trainable = true);

  void zero_grad() { grad.fill(0.0); }

  std::string id;
  Tensor value;
  Tensor grad;
  bool trainable = true;
};

class Tape;

/// Lightweight handle to a node recorded on a Tape. Valid while the tape lives.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;
  Tape& tape() const { return *tape_; }
  std::uint32_t index() const noexcept { return index_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::uint32_t index) : tape_(tape), index_(index) {}

  Tape* tape_ = nullptr;
  std::uint32_t index_ = 0;
};

using GradientMap = std::map<std::string, Tensor>;

enum class Mode { kEval, kTrain };

/// Dynamic reverse-mode tape. Every primitive appends one node holding its
/// output value and a closure that scatters the output adjoint into its
/// inputs. A tape is rebuilt for every forward pass and can be differentiated
/// exactly once.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::uint32_t self)>;

  explicit Tape(std::uint64_t seed = 0, Mode mode = Mode::kEval);
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf without gradient.
  Var constant(Tensor value);
  /// Free leaf that receives a gradient (used by tests and checks).
  Var variable(Tensor value);
  /// Leaf bound to a Parameter. Repeated calls return the same node.
  Var param(Parameter& parameter);

  /// Propagates d(loss)/d(node) through the tape in strict reverse order and
  /// accumulates into Parameter::grad of every trainable parameter leaf. The
  /// returned map holds this pass's gradient for every trainable parameter on
  /// the tape (zeros when the parameter does not reach the loss).
  GradientMap backward(Var loss);

  /// Gradient of a node after backward(); zeros when the node was not reached.
  Tensor grad(Var v) const;

  bool training() const noexcept { return mode_ == Mode::kTrain; }
  Mode mode() const noexcept { return mode_; }
  std::mt19937_64& rng() noexcept { return rng_; }
  bool consumed() const noexcept { return consumed_; }
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Operation names in execution order, and the order backward visited them.
  std::vector<std::string> executed_ops() const;
  const std::vector<std::uint32_t>& backward_visits() const noexcept { return visits_; }

  // --- primitive authoring interface -------------------------------------
  Var record(const char* op, Tensor value, std::initializer_list<Var> inputs,
             BackwardFn backward);
  Var record(const char* op, Tensor value, const std::vector<Var>& inputs,
             BackwardFn backward);

  const Tensor& value_of(std::uint32_t node) const { return nodes_[node].value; }
  bool requires_grad_of(std::uint32_t node) const { return nodes_[node].requires_grad; }
  const std::vector<std::uint32_t>& inputs_of(std::uint32_t node) const {
    return nodes_[node].inputs;
  }
  /// Gradient buffer of a node, allocated (zero) on first access.
  Tensor& grad_of(std::uint32_t node);
  /// Adjoint of the node currently being back-propagated.
  const Tensor& out_grad(std::uint32_t node) const { return nodes_[node].grad; }

 private:
  struct Node {
    const char* op = "";
    Tensor value;
    Tensor grad;
    bool has_grad = false;
    bool requires_grad = false;
    std::vector<std::uint32_t> inputs;
    BackwardFn backward;
    Parameter* parameter = nullptr;
  };

  Var push(Node node);

  std::deque<Node> nodes_;
  std::unordered_map<Parameter*, std::uint32_t> param_nodes_;
  std::vector<std::uint32_t> visits_;
  std::mt19937_64 rng_;
  Mode mode_;
  bool consumed_ = false;
};

}  // namespace fsat::ad
