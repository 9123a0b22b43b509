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
#include <span>
#include <vector>

#include "fsat/autodiff/tape.hpp"

// Differentiable primitives. Binary elementwise ops accept equal shapes, a
// row vector broadcast over the rows of a matrix, or a scalar right operand.

namespace fsat::ad {

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
Var add_scalar(Var a, double offset);
Var neg(Var a);

Var matmul(Var a, Var b);
Var transpose(Var a);
Var reshape(Var a, Shape shape);

Var sigmoid(Var a);
Var relu(Var a);
Var swish(Var a);
Var exp(Var a);
Var log(Var a);
Var square(Var a);

/// Row-wise softmax / log-softmax of a rank-2 tensor (rank-1 is one row).
Var softmax(Var a);
Var log_softmax(Var a);

/// Per-row normalisation with learned gain and bias of length cols.
Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5);

/// x: Cin x H x W, weight: Cout x Cin x KH x KW, bias: Cout. No padding.
Var conv2d(Var x, Var weight, Var bias, std::size_t stride_h, std::size_t stride_w);

/// Per-channel temporal convolution with "same" zero padding.
/// x: T x C, weight: K x C (K odd), bias: C.
Var depthwise_conv1d(Var x, Var weight, Var bias);

/// Inverted dropout driven by the tape RNG; identity outside training mode.
Var dropout(Var x, double rate);

/// Rows of table (V x D) selected by ids.
Var embedding(Var table, std::span<const int> ids);

Var concat_cols(const std::vector<Var>& parts);
Var concat_rows(const std::vector<Var>& parts);
Var slice_cols(Var a, std::size_t begin, std::size_t end);
Var slice_rows(Var a, std::size_t begin, std::size_t end);

Var sum(Var a);
Var mean(Var a);
/// sum(a * weights) with constant weights of the same shape.
Var weighted_sum(Var a, const Tensor& weights);

/// softmax(q k^T / sqrt(d) + mask) v. mask (Tq x Tk) may be null.
Var scaled_dot_product_attention(Var q, Var k, Var v, const Tensor* additive_mask);

}  // namespace fsat::ad
