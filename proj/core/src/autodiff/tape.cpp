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

#include "fsat/autodiff/tape.hpp"

#include "fsat/error.hpp"

namespace fsat::ad {

Parameter::Parameter(std::string identifier, Tensor initial, bool is_trainable)
    : id(std::move(identifier)),
      value(std::move(initial)),
      grad(Tensor::zeros_like(value)),
      trainable(is_trainable) {}

const Tensor& Var::value() const { return tape_->value_of(index_); }

bool Var::requires_grad() const { return tape_->requires_grad_of(index_); }

Tape::Tape(std::uint64_t seed, Mode mode) : rng_(seed), mode_(mode) {}

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Var Tape::constant(Tensor value) {
  Node node;
  node.op = "constant";
  node.value = std::move(value);
  return push(std::move(node));
}

Var Tape::variable(Tensor value) {
  Node node;
  node.op = "variable";
  node.value = std::move(value);
  node.requires_grad = true;
  return push(std::move(node));
}

Var Tape::param(Parameter& parameter) {
  if (auto it = param_nodes_.find(&parameter); it != param_nodes_.end()) {
    return Var(this, it->second);
  }
  if (parameter.grad.shape() != parameter.value.shape()) {
    parameter.grad = Tensor::zeros_like(parameter.value);
  }
  Node node;
  node.op = "parameter";
  node.value = parameter.value;
  node.requires_grad = parameter.trainable;
  node.parameter = &parameter;
  Var v = push(std::move(node));
  param_nodes_.emplace(&parameter, v.index());
  return v;
}

Var Tape::record(const char* op, Tensor value, std::initializer_list<Var> inputs,
                 BackwardFn backward) {
  return record(op, std::move(value), std::vector<Var>(inputs), std::move(backward));
}

Var Tape::record(const char* op, Tensor value, const std::vector<Var>& inputs,
                 BackwardFn backward) {
  if (consumed_) throw StateError(std::string(op) + ": tape already consumed by backward()");
  if (!value.all_finite()) {
    throw NumericError(std::string(op) + ": produced a non-finite value (shape " +
                       shape_string(value.shape()) + ")");
  }
  Node node;
  node.op = op;
  node.value = std::move(value);
  node.inputs.reserve(inputs.size());
  for (const Var& in : inputs) {
    if (in.tape_ != this) throw StateError(std::string(op) + ": input from a different tape");
    node.inputs.push_back(in.index_);
    node.requires_grad = node.requires_grad || nodes_[in.index_].requires_grad;
  }
  if (node.requires_grad) node.backward = std::move(backward);
  return push(std::move(node));
}

Tensor& Tape::grad_of(std::uint32_t index) {
  Node& node = nodes_[index];
  if (!node.has_grad) {
    node.grad = Tensor::zeros_like(node.value);
    node.has_grad = true;
  }
  return node.grad;
}

GradientMap Tape::backward(Var loss) {
  if (loss.tape_ != this) throw StateError("backward: loss belongs to a different tape");
  if (consumed_) throw StateError("backward: tape already consumed");
  const Tensor& lv = nodes_[loss.index_].value;
  if (lv.numel() != 1) {
    throw ShapeError("backward: loss must be a scalar, got shape " + shape_string(lv.shape()));
  }
  consumed_ = true;
  grad_of(loss.index_).fill(1.0);
  visits_.clear();
  for (std::int64_t i = loss.index_; i >= 0; --i) {
    Node& node = nodes_[static_cast<std::size_t>(i)];
    if (!node.has_grad || !node.backward) continue;
    visits_.push_back(static_cast<std::uint32_t>(i));
    node.backward(*this, static_cast<std::uint32_t>(i));
  }
  GradientMap result;
  for (const auto& [param, index] : param_nodes_) {
    if (!param->trainable) continue;
    Node& node = nodes_[index];
    Tensor g = node.has_grad ? node.grad : Tensor::zeros_like(node.value);
    auto pg = param->grad.values();
    auto gv = g.values();
    for (std::size_t k = 0; k < pg.size(); ++k) pg[k] += gv[k];
    result.emplace(param->id, std::move(g));
  }
  return result;
}

Tensor Tape::grad(Var v) const {
  const Node& node = nodes_[v.index_];
  return node.has_grad ? node.grad : Tensor::zeros_like(node.value);
}

std::vector<std::string> Tape::executed_ops() const {
  std::vector<std::string> ops;
  ops.reserve(nodes_.size());
  for (const auto& n : nodes_) ops.emplace_back(n.op);
  return ops;
}

}  // namespace fsat::ad
