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

#include "fsat/autodiff/ops.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <random>
#include <string>

#include "fsat/error.hpp"

namespace fsat::ad {
namespace {

enum class Broadcast { kSame, kRow, kScalar };

Broadcast broadcast_kind(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() == b.shape()) return Broadcast::kSame;
  if (b.numel() == 1 && b.rank() == 0) return Broadcast::kScalar;
  const bool b_row = b.rank() == 1 || (b.rank() == 2 && b.shape()[0] == 1);
  if (a.rank() == 2 && b_row && b.numel() == a.cols()) return Broadcast::kRow;
  throw ShapeError(std::string(op) + ": cannot broadcast " + shape_string(a.shape()) +
                   " with " + shape_string(b.shape()));
}

void require_rank2(const char* op, const Tensor& t, const char* what) {
  if (t.rank() != 2) {
    throw ShapeError(std::string(op) + ": " + what + " must be rank 2, got " +
                     shape_string(t.shape()));
  }
}

// Reduces an a-shaped adjoint into b's shape under the given broadcast.
void accumulate_broadcast(Broadcast kind, const Tensor& g, Tensor& gb, double factor) {
  auto gv = g.values();
  auto out = gb.values();
  switch (kind) {
    case Broadcast::kSame:
      for (std::size_t i = 0; i < gv.size(); ++i) out[i] += factor * gv[i];
      break;
    case Broadcast::kScalar: {
      double s = 0.0;
      for (double v : gv) s += v;
      out[0] += factor * s;
      break;
    }
    case Broadcast::kRow: {
      const std::size_t cols = out.size();
      const std::size_t rows = gv.size() / cols;
      for (std::size_t r = 0; r < rows; ++r) {
        const double* row = gv.data() + r * cols;
        for (std::size_t c = 0; c < cols; ++c) out[c] += factor * row[c];
      }
      break;
    }
  }
}

inline double b_at(Broadcast kind, const Tensor& b, std::size_t i, std::size_t cols) {
  switch (kind) {
    case Broadcast::kSame: return b[i];
    case Broadcast::kScalar: return b[0];
    case Broadcast::kRow: return b[i % cols];
  }
  return 0.0;
}

template <typename Fwd, typename Deriv>
Var unary(const char* op, Var a, Fwd fwd, Deriv deriv) {
  const Tensor& av = a.value();
  Tensor out(av.shape());
  auto o = out.values();
  auto x = av.values();
  for (std::size_t i = 0; i < x.size(); ++i) o[i] = fwd(x[i]);
  const std::uint32_t ia = a.index();
  return a.tape().record(op, std::move(out), {a}, [ia, deriv](Tape& t, std::uint32_t self) {
    const Tensor& g = t.out_grad(self);
    const Tensor& x = t.value_of(ia);
    const Tensor& y = t.value_of(self);
    Tensor& ga = t.grad_of(ia);
    for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += g[i] * deriv(x[i], y[i]);
  });
}

}  // namespace

Var add(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const Broadcast kind = broadcast_kind("add", av, bv);
  Tensor out(av.shape());
  const std::size_t cols = av.rank() ? av.cols() : 1;
  for (std::size_t i = 0; i < av.numel(); ++i) out[i] = av[i] + b_at(kind, bv, i, cols);
  const auto ia = a.index(), ib = b.index();
  return a.tape().record("add", std::move(out), {a, b}, [ia, ib, kind](Tape& t, std::uint32_t s) {
    const Tensor& g = t.out_grad(s);
    if (t.requires_grad_of(ia)) accumulate_broadcast(Broadcast::kSame, g, t.grad_of(ia), 1.0);
    if (t.requires_grad_of(ib)) accumulate_broadcast(kind, g, t.grad_of(ib), 1.0);
  });
}

Var sub(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const Broadcast kind = broadcast_kind("sub", av, bv);
  Tensor out(av.shape());
  const std::size_t cols = av.rank() ? av.cols() : 1;
  for (std::size_t i = 0; i < av.numel(); ++i) out[i] = av[i] - b_at(kind, bv, i, cols);
  const auto ia = a.index(), ib = b.index();
  return a.tape().record("sub", std::move(out), {a, b}, [ia, ib, kind](Tape& t, std::uint32_t s) {
    const Tensor& g = t.out_grad(s);
    if (t.requires_grad_of(ia)) accumulate_broadcast(Broadcast::kSame, g, t.grad_of(ia), 1.0);
    if (t.requires_grad_of(ib)) accumulate_broadcast(kind, g, t.grad_of(ib), -1.0);
  });
}

Var mul(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const Broadcast kind = broadcast_kind("mul", av, bv);
  Tensor out(av.shape());
  const std::size_t cols = av.rank() ? av.cols() : 1;
  for (std::size_t i = 0; i < av.numel(); ++i) out[i] = av[i] * b_at(kind, bv, i, cols);
  const auto ia = a.index(), ib = b.index();
  return a.tape().record("mul", std::move(out), {a, b}, [ia, ib, kind, cols](Tape& t, std::uint32_t s) {
    const Tensor& g = t.out_grad(s);
    const Tensor& av = t.value_of(ia);
    const Tensor& bv = t.value_of(ib);
    if (t.requires_grad_of(ia)) {
      Tensor& ga = t.grad_of(ia);
      for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += g[i] * b_at(kind, bv, i, cols);
    }
    if (t.requires_grad_of(ib)) {
      Tensor prod(av.shape());
      for (std::size_t i = 0; i < g.numel(); ++i) prod[i] = g[i] * av[i];
      accumulate_broadcast(kind, prod, t.grad_of(ib), 1.0);
    }
  });
}

Var scale(Var a, double factor) {
  return unary("scale", a, [factor](double x) { return factor * x; },
               [factor](double, double) { return factor; });
}

Var add_scalar(Var a, double offset) {
  return unary("add_scalar", a, [offset](double x) { return x + offset; },
               [](double, double) { return 1.0; });
}

Var neg(Var a) { return scale(a, -1.0); }

Var sigmoid(Var a) {
  return unary("sigmoid", a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
               [](double, double y) { return y * (1.0 - y); });
}

Var relu(Var a) {
  return unary("relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
               [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var swish(Var a) {
  return unary(
      "swish", a, [](double x) { return x / (1.0 + std::exp(-x)); },
      [](double x, double y) {
        const double s = 1.0 / (1.0 + std::exp(-x));
        return s + y * (1.0 - s);
      });
}

Var exp(Var a) {
  return unary("exp", a, [](double x) { return std::exp(x); },
               [](double, double y) { return y; });
}

Var log(Var a) {
  const Tensor& av = a.value();
  for (double v : av.values()) {
    if (!(v > 0.0)) throw DomainError("log: input must be positive, got " + std::to_string(v));
  }
  return unary("log", a, [](double x) { return std::log(x); },
               [](double x, double) { return 1.0 / x; });
}

Var square(Var a) {
  return unary("square", a, [](double x) { return x * x; },
               [](double x, double) { return 2.0 * x; });
}

Var matmul(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_rank2("matmul", av, "lhs");
  require_rank2("matmul", bv, "rhs");
  const std::size_t m = av.rows(), k = av.cols(), n = bv.cols();
  if (bv.rows() != k) {
    throw ShapeError("matmul: inner dimensions differ, " + shape_string(av.shape()) + " x " +
                     shape_string(bv.shape()));
  }
  Tensor out(Shape{m, n});
  const double* A = av.data();
  const double* B = bv.data();
  double* C = out.data();
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = C + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = A[i * k + p];
      const double* brow = B + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
  const auto ia = a.index(), ib = b.index();
  return a.tape().record("matmul", std::move(out), {a, b}, [ia, ib, m, k, n](Tape& t, std::uint32_t s) {
    const double* G = t.out_grad(s).data();
    const double* A = t.value_of(ia).data();
    const double* B = t.value_of(ib).data();
    if (t.requires_grad_of(ia)) {
      double* GA = t.grad_of(ia).data();
      for (std::size_t i = 0; i < m; ++i) {
        const double* grow = G + i * n;
        for (std::size_t p = 0; p < k; ++p) {
          const double* brow = B + p * n;
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
          GA[i * k + p] += acc;
        }
      }
    }
    if (t.requires_grad_of(ib)) {
      double* GB = t.grad_of(ib).data();
      for (std::size_t i = 0; i < m; ++i) {
        const double* grow = G + i * n;
        for (std::size_t p = 0; p < k; ++p) {
          const double aip = A[i * k + p];
          double* gbrow = GB + p * n;
          for (std::size_t j = 0; j < n; ++j) gbrow[j] += aip * grow[j];
        }
      }
    }
  });
}

Var transpose(Var a) {
  const Tensor& av = a.value();
  require_rank2("transpose", av, "input");
  const std::size_t r = av.rows(), c = av.cols();
  Tensor out(Shape{c, r});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = av[i * c + j];
  const auto ia = a.index();
  return a.tape().record("transpose", std::move(out), {a}, [ia, r, c](Tape& t, std::uint32_t s) {
    const Tensor& g = t.out_grad(s);
    Tensor& ga = t.grad_of(ia);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += g[j * r + i];
  });
}

Var reshape(Var a, Shape shape) {
  Tensor out = a.value().reshaped(std::move(shape));
  const auto ia = a.index();
  return a.tape().record("reshape", std::move(out), {a}, [ia](Tape& t, std::uint32_t s) {
    const Tensor& g = t.out_grad(s);
    Tensor& ga = t.grad_of(ia);
    for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += g[i];
  });
}

Var softmax(Var a) {
  const Tensor& av = a.value();
  if (av.rank() > 2 || av.rank() == 0) {
    throw ShapeError("softmax: expected rank 1 or 2, got " + shape_string(av.shape()));
  }
  const std::size_t r = av.rows(), c = av.cols();
  Tensor out(av.shape());
  for (std::size_t i = 0; i < r; ++i) {
    const double* x = av.data() + i * c;
    double* y = out.data() + i * c;
    const double mx = *std::max_element(x, x + c);
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) z += (y[j] = std::exp(x[j] - mx));
    for (std::size_t j = 0; j < c; ++j) y[j] /= z;
  }
  const auto ia = a.index();
  return a.tape().record("softmax", std::move(out), {a}, [ia, r, c](Tape& t, std::uint32_t s) {
    const Tensor& g = t.out_grad(s);
    const Tensor& y = t.value_of(s);
    Tensor& ga = t.grad_of(ia);
    for (std::size_t i = 0; i < r; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < c; ++j) dot += g[i * c + j] * y[i * c + j];
      for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += y[i * c + j] * (g[i * c + j] - dot);
    }
  });
}

Var log_softmax(Var a) {
  const Tensor& av = a.value();
  if (av.rank() > 2 || av.rank() == 0) {
    throw ShapeError("log_softmax: expected rank 1 or 2, got " + shape_string(av.shape()));
  }
  const std::size_t r = av.rows(), c = av.cols();
  Tensor out(av.shape());
  for (std::size_t i = 0; i < r; ++i) {
    const double* x = av.data() + i * c;
    double* y = out.data() + i * c;
    const double mx = *std::max_element(x, x + c);
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) z += std::exp(x[j] - mx);
    const double lse = mx + std::log(z);
    for (std::size_t j = 0; j < c; ++j) y[j] = x[j] - lse;
  }
  const auto ia = a.index();
  return a.tape().record("log_softmax", std::move(out), {a}, [ia, r, c](Tape& t, std::uint32_t s) {
    const Tensor& g = t.out_grad(s);
    const Tensor& y = t.value_of(s);
    Tensor& ga = t.grad_of(ia);
    for (std::size_t i = 0; i < r; ++i) {
      double gs = 0.0;
      for (std::size_t j = 0; j < c; ++j) gs += g[i * c + j];
      for (std::size_t j = 0; j < c; ++j)
        ga[i * c + j] += g[i * c + j] - std::exp(y[i * c + j]) * gs;
    }
  });
}

Var layer_norm(Var x, Var gain, Var bias, double eps) {
  const Tensor& xv = x.value();
  if (xv.rank() != 2 && xv.rank() != 1) {
    throw ShapeError("layer_norm: expected rank 1 or 2 input, got " + shape_string(xv.shape()));
  }
  const std::size_t r = xv.rows(), c = xv.cols();
  if (gain.value().numel() != c || bias.value().numel() != c) {
    throw ShapeError("layer_norm: input " + shape_string(xv.shape()) + " with gain " +
                     shape_string(gain.value().shape()) + " and bias " +
                     shape_string(bias.value().shape()));
  }
  const Tensor& gv = gain.value();
  const Tensor& bv = bias.value();
  Tensor out(xv.shape());
  // normalised activations and inverse std are needed by the adjoint
  auto xhat = std::make_shared<Tensor>(xv.shape());
  auto inv_std = std::make_shared<std::vector<double>>(r);
  for (std::size_t i = 0; i < r; ++i) {
    const double* xr = xv.data() + i * c;
    double mu = 0.0;
    for (std::size_t j = 0; j < c; ++j) mu += xr[j];
    mu /= static_cast<double>(c);
    double var = 0.0;
    for (std::size_t j = 0; j < c; ++j) var += (xr[j] - mu) * (xr[j] - mu);
    var /= static_cast<double>(c);
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[i] = is;
    for (std::size_t j = 0; j < c; ++j) {
      const double h = (xr[j] - mu) * is;
      (*xhat)[i * c + j] = h;
      out[i * c + j] = h * gv[j] + bv[j];
    }
  }
  const auto ix = x.index(), ig = gain.index(), ib = bias.index();
  return x.tape().record(
      "layer_norm", std::move(out), {x, gain, bias},
      [ix, ig, ib, r, c, xhat, inv_std](Tape& t, std::uint32_t s) {
        const Tensor& g = t.out_grad(s);
        const Tensor& gv = t.value_of(ig);
        if (t.requires_grad_of(ig)) {
          Tensor& gg = t.grad_of(ig);
          for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) gg[j] += g[i * c + j] * (*xhat)[i * c + j];
        }
        if (t.requires_grad_of(ib)) {
          Tensor& gb = t.grad_of(ib);
          for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) gb[j] += g[i * c + j];
        }
        if (t.requires_grad_of(ix)) {
          Tensor& gx = t.grad_of(ix);
          const double n = static_cast<double>(c);
          for (std::size_t i = 0; i < r; ++i) {
            double sum_d = 0.0, sum_dh = 0.0;
            for (std::size_t j = 0; j < c; ++j) {
              const double d = g[i * c + j] * gv[j];
              sum_d += d;
              sum_dh += d * (*xhat)[i * c + j];
            }
            const double is = (*inv_std)[i];
            for (std::size_t j = 0; j < c; ++j) {
              const double d = g[i * c + j] * gv[j];
              gx[i * c + j] += is * (d - sum_d / n - (*xhat)[i * c + j] * sum_dh / n);
            }
          }
        }
      });
}

Var conv2d(Var x, Var weight, Var bias, std::size_t stride_h, std::size_t stride_w) {
  const Tensor& xv = x.value();
  const Tensor& wv = weight.value();
  const Tensor& bv = bias.value();
  if (xv.rank() != 3 || wv.rank() != 4 || bv.numel() != wv.shape()[0] ||
      wv.shape()[1] != xv.shape()[0]) {
    throw ShapeError("conv2d: input " + shape_string(xv.shape()) + " incompatible with weight " +
                     shape_string(wv.shape()) + " and bias " + shape_string(bv.shape()));
  }
  if (stride_h == 0 || stride_w == 0) throw DomainError("conv2d: stride must be positive");
  const std::size_t cin = xv.shape()[0], h = xv.shape()[1], w = xv.shape()[2];
  const std::size_t cout = wv.shape()[0], kh = wv.shape()[2], kw = wv.shape()[3];
  if (h < kh || w < kw) {
    throw ShapeError("conv2d: input " + shape_string(xv.shape()) + " smaller than kernel " +
                     shape_string(wv.shape()));
  }
  const std::size_t oh = (h - kh) / stride_h + 1, ow = (w - kw) / stride_w + 1;
  Tensor out(Shape{cout, oh, ow});
  for (std::size_t co = 0; co < cout; ++co) {
    double* orow = out.data() + co * oh * ow;
    for (std::size_t i = 0; i < oh * ow; ++i) orow[i] = bv[co];
    for (std::size_t ci = 0; ci < cin; ++ci) {
      const double* xc = xv.data() + ci * h * w;
      const double* wk = wv.data() + (co * cin + ci) * kh * kw;
      for (std::size_t oy = 0; oy < oh; ++oy) {
        for (std::size_t ox = 0; ox < ow; ++ox) {
          double acc = 0.0;
          const double* base = xc + (oy * stride_h) * w + ox * stride_w;
          for (std::size_t ky = 0; ky < kh; ++ky)
            for (std::size_t kx = 0; kx < kw; ++kx) acc += base[ky * w + kx] * wk[ky * kw + kx];
          orow[oy * ow + ox] += acc;
        }
      }
    }
  }
  const auto ix = x.index(), iw = weight.index(), ib = bias.index();
  return x.tape().record(
      "conv2d", std::move(out), {x, weight, bias},
      [=](Tape& t, std::uint32_t s) {
        const Tensor& g = t.out_grad(s);
        const Tensor& xv = t.value_of(ix);
        const Tensor& wv = t.value_of(iw);
        const bool need_x = t.requires_grad_of(ix);
        const bool need_w = t.requires_grad_of(iw);
        if (t.requires_grad_of(ib)) {
          Tensor& gb = t.grad_of(ib);
          for (std::size_t co = 0; co < cout; ++co)
            for (std::size_t i = 0; i < oh * ow; ++i) gb[co] += g[co * oh * ow + i];
        }
        double* gx = need_x ? t.grad_of(ix).data() : nullptr;
        double* gw = need_w ? t.grad_of(iw).data() : nullptr;
        if (!need_x && !need_w) return;
        for (std::size_t co = 0; co < cout; ++co) {
          const double* grow = g.data() + co * oh * ow;
          for (std::size_t ci = 0; ci < cin; ++ci) {
            const double* xc = xv.data() + ci * h * w;
            const double* wk = wv.data() + (co * cin + ci) * kh * kw;
            double* gxc = gx ? gx + ci * h * w : nullptr;
            double* gwk = gw ? gw + (co * cin + ci) * kh * kw : nullptr;
            for (std::size_t oy = 0; oy < oh; ++oy) {
              for (std::size_t ox = 0; ox < ow; ++ox) {
                const double go = grow[oy * ow + ox];
                if (go == 0.0) continue;
                const std::size_t off = (oy * stride_h) * w + ox * stride_w;
                for (std::size_t ky = 0; ky < kh; ++ky) {
                  for (std::size_t kx = 0; kx < kw; ++kx) {
                    if (gwk) gwk[ky * kw + kx] += go * xc[off + ky * w + kx];
                    if (gxc) gxc[off + ky * w + kx] += go * wk[ky * kw + kx];
                  }
                }
              }
            }
          }
        }
      });
}

Var depthwise_conv1d(Var x, Var weight, Var bias) {
  const Tensor& xv = x.value();
  const Tensor& wv = weight.value();
  const Tensor& bv = bias.value();
  if (xv.rank() != 2 || wv.rank() != 2 || wv.cols() != xv.cols() || bv.numel() != xv.cols()) {
    throw ShapeError("depthwise_conv1d: input " + shape_string(xv.shape()) + " with weight " +
                     shape_string(wv.shape()) + " and bias " + shape_string(bv.shape()));
  }
  const std::size_t k = wv.rows();
  if (k % 2 == 0) throw DomainError("depthwise_conv1d: kernel size must be odd");
  const std::size_t tlen = xv.rows(), c = xv.cols();
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(k / 2);
  Tensor out(xv.shape());
  for (std::size_t ti = 0; ti < tlen; ++ti) {
    double* o = out.data() + ti * c;
    for (std::size_t ch = 0; ch < c; ++ch) o[ch] = bv[ch];
    for (std::size_t j = 0; j < k; ++j) {
      const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(ti) + static_cast<std::ptrdiff_t>(j) - pad;
      if (src < 0 || src >= static_cast<std::ptrdiff_t>(tlen)) continue;
      const double* xr = xv.data() + static_cast<std::size_t>(src) * c;
      const double* wr = wv.data() + j * c;
      for (std::size_t ch = 0; ch < c; ++ch) o[ch] += xr[ch] * wr[ch];
    }
  }
  const auto ix = x.index(), iw = weight.index(), ib = bias.index();
  return x.tape().record("depthwise_conv1d", std::move(out), {x, weight, bias},
                         [=](Tape& t, std::uint32_t s) {
    const Tensor& g = t.out_grad(s);
    const Tensor& xv = t.value_of(ix);
    const Tensor& wv = t.value_of(iw);
    if (t.requires_grad_of(ib)) {
      Tensor& gb = t.grad_of(ib);
      for (std::size_t ti = 0; ti < tlen; ++ti)
        for (std::size_t ch = 0; ch < c; ++ch) gb[ch] += g[ti * c + ch];
    }
    double* gx = t.requires_grad_of(ix) ? t.grad_of(ix).data() : nullptr;
    double* gw = t.requires_grad_of(iw) ? t.grad_of(iw).data() : nullptr;
    for (std::size_t ti = 0; ti < tlen; ++ti) {
      const double* gr = g.data() + ti * c;
      for (std::size_t j = 0; j < k; ++j) {
        const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(ti) + static_cast<std::ptrdiff_t>(j) - pad;
        if (src < 0 || src >= static_cast<std::ptrdiff_t>(tlen)) continue;
        const std::size_t su = static_cast<std::size_t>(src);
        for (std::size_t ch = 0; ch < c; ++ch) {
          if (gw) gw[j * c + ch] += gr[ch] * xv[su * c + ch];
          if (gx) gx[su * c + ch] += gr[ch] * wv[j * c + ch];
        }
      }
    }
  });
}

Var dropout(Var x, double rate) {
  if (rate < 0.0 || rate >= 1.0) throw DomainError("dropout: rate must be in [0, 1)");
  Tape& tape = x.tape();
  if (!tape.training() || rate == 0.0) return x;
  const Tensor& xv = x.value();
  auto mask = std::make_shared<Tensor>(xv.shape());
  std::bernoulli_distribution keep(1.0 - rate);
  const double inv = 1.0 / (1.0 - rate);
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < xv.numel(); ++i) {
    (*mask)[i] = keep(tape.rng()) ? inv : 0.0;
    out[i] = xv[i] * (*mask)[i];
  }
  const auto ix = x.index();
  return tape.record("dropout", std::move(out), {x}, [ix, mask](Tape& t, std::uint32_t s) {
    const Tensor& g = t.out_grad(s);
    Tensor& gx = t.grad_of(ix);
    for (std::size_t i = 0; i < g.numel(); ++i) gx[i] += g[i] * (*mask)[i];
  });
}

Var embedding(Var table, std::span<const int> ids) {
  const Tensor& tv = table.value();
  require_rank2("embedding", tv, "table");
  const std::size_t vocab = tv.rows(), d = tv.cols();
  std::vector<int> idv(ids.begin(), ids.end());
  Tensor out(Shape{idv.size(), d});
  for (std::size_t i = 0; i < idv.size(); ++i) {
    if (idv[i] < 0 || static_cast<std::size_t>(idv[i]) >= vocab) {
      throw DomainError("embedding: id " + std::to_string(idv[i]) + " outside table of " +
                        std::to_string(vocab) + " rows");
    }
    std::copy_n(tv.data() + static_cast<std::size_t>(idv[i]) * d, d, out.data() + i * d);
  }
  const auto it = table.index();
  return table.tape().record("embedding", std::move(out), {table},
                             [it, idv = std::move(idv), d](Tape& t, std::uint32_t s) {
    const Tensor& g = t.out_grad(s);
    Tensor& gt = t.grad_of(it);
    for (std::size_t i = 0; i < idv.size(); ++i) {
      double* row = gt.data() + static_cast<std::size_t>(idv[i]) * d;
      for (std::size_t j = 0; j < d; ++j) row[j] += g[i * d + j];
    }
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const std::size_t r = parts[0].value().rows();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const Var& p : parts) {
    if (p.value().rank() != 2 || p.value().rows() != r) {
      throw ShapeError("concat_cols: row mismatch, " + shape_string(parts[0].shape()) + " vs " +
                       shape_string(p.shape()));
    }
    widths.push_back(p.value().cols());
    total += widths.back();
  }
  Tensor out(Shape{r, total});
  std::size_t off = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& pv = parts[k].value();
    for (std::size_t i = 0; i < r; ++i)
      std::copy_n(pv.data() + i * widths[k], widths[k], out.data() + i * total + off);
    off += widths[k];
  }
  std::vector<std::uint32_t> idx;
  for (const Var& p : parts) idx.push_back(p.index());
  return parts[0].tape().record("concat_cols", std::move(out), parts,
                                [idx, widths, r, total](Tape& t, std::uint32_t s) {
    const Tensor& g = t.out_grad(s);
    std::size_t off = 0;
    for (std::size_t k = 0; k < idx.size(); ++k) {
      if (t.requires_grad_of(idx[k])) {
        Tensor& gp = t.grad_of(idx[k]);
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < widths[k]; ++j) gp[i * widths[k] + j] += g[i * total + off + j];
      }
      off += widths[k];
    }
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  const std::size_t c = parts[0].value().cols();
  std::vector<std::size_t> heights;
  std::size_t total = 0;
  for (const Var& p : parts) {
    if (p.value().rank() != 2 || p.value().cols() != c) {
      throw ShapeError("concat_rows: column mismatch, " + shape_string(parts[0].shape()) + " vs " +
                       shape_string(p.shape()));
    }
    heights.push_back(p.value().rows());
    total += heights.back();
  }
  Tensor out(Shape{total, c});
  std::size_t off = 0;
  for (const Var& p : parts) {
    std::copy_n(p.value().data(), p.value().numel(), out.data() + off);
    off += p.value().numel();
  }
  std::vector<std::uint32_t> idx;
  for (const Var& p : parts) idx.push_back(p.index());
  return parts[0].tape().record("concat_rows", std::move(out), parts,
                                [idx, heights, c](Tape& t, std::uint32_t s) {
    const Tensor& g = t.out_grad(s);
    std::size_t off = 0;
    for (std::size_t k = 0; k < idx.size(); ++k) {
      const std::size_t n = heights[k] * c;
      if (t.requires_grad_of(idx[k])) {
        Tensor& gp = t.grad_of(idx[k]);
        for (std::size_t i = 0; i < n; ++i) gp[i] += g[off + i];
      }
      off += n;
    }
  });
}

Var slice_cols(Var a, std::size_t begin, std::size_t end) {
  const Tensor& av = a.value();
  require_rank2("slice_cols", av, "input");
  const std::size_t r = av.rows(), c = av.cols();
  if (begin >= end || end > c) {
    throw ShapeError("slice_cols: range [" + std::to_string(begin) + "," + std::to_string(end) +
                     ") invalid for " + shape_string(av.shape()));
  }
  const std::size_t w = end - begin;
  Tensor out(Shape{r, w});
  for (std::size_t i = 0; i < r; ++i) std::copy_n(av.data() + i * c + begin, w, out.data() + i * w);
  const auto ia = a.index();
  return a.tape().record("slice_cols", std::move(out), {a}, [ia, r, c, w, begin](Tape& t, std::uint32_t s) {
    const Tensor& g = t.out_grad(s);
    Tensor& ga = t.grad_of(ia);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < w; ++j) ga[i * c + begin + j] += g[i * w + j];
  });
}

Var slice_rows(Var a, std::size_t begin, std::size_t end) {
  const Tensor& av = a.value();
  require_rank2("slice_rows", av, "input");
  const std::size_t r = av.rows(), c = av.cols();
  if (begin >= end || end > r) {
    throw ShapeError("slice_rows: range [" + std::to_string(begin) + "," + std::to_string(end) +
                     ") invalid for " + shape_string(av.shape()));
  }
  Tensor out(Shape{end - begin, c});
  std::copy_n(av.data() + begin * c, (end - begin) * c, out.data());
  const auto ia = a.index();
  return a.tape().record("slice_rows", std::move(out), {a}, [ia, c, begin](Tape& t, std::uint32_t s) {
    const Tensor& g = t.out_grad(s);
    Tensor& ga = t.grad_of(ia);
    for (std::size_t i = 0; i < g.numel(); ++i) ga[begin * c + i] += g[i];
  });
}

Var sum(Var a) {
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  const auto ia = a.index();
  return a.tape().record("sum", Tensor::scalar(s), {a}, [ia](Tape& t, std::uint32_t self) {
    const double g = t.out_grad(self)[0];
    Tensor& ga = t.grad_of(ia);
    for (std::size_t i = 0; i < ga.numel(); ++i) ga[i] += g;
  });
}

Var mean(Var a) {
  const double n = static_cast<double>(a.value().numel());
  return scale(sum(a), 1.0 / n);
}

Var weighted_sum(Var a, const Tensor& weights) {
  const Tensor& av = a.value();
  if (weights.shape() != av.shape()) {
    throw ShapeError("weighted_sum: weights " + shape_string(weights.shape()) + " vs input " +
                     shape_string(av.shape()));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < av.numel(); ++i) s += av[i] * weights[i];
  const auto ia = a.index();
  return a.tape().record("weighted_sum", Tensor::scalar(s), {a},
                         [ia, weights](Tape& t, std::uint32_t self) {
    const double g = t.out_grad(self)[0];
    Tensor& ga = t.grad_of(ia);
    for (std::size_t i = 0; i < ga.numel(); ++i) ga[i] += g * weights[i];
  });
}

Var scaled_dot_product_attention(Var q, Var k, Var v, const Tensor* additive_mask) {
  const Tensor& qv = q.value();
  const Tensor& kv = k.value();
  if (qv.rank() != 2 || kv.rank() != 2 || qv.cols() != kv.cols() ||
      kv.rows() != v.value().rows()) {
    throw ShapeError("attention: q " + shape_string(qv.shape()) + ", k " + shape_string(kv.shape()) +
                     ", v " + shape_string(v.shape()) + " are incompatible");
  }
  Var scores = scale(matmul(q, transpose(k)), 1.0 / std::sqrt(static_cast<double>(qv.cols())));
  if (additive_mask) {
    if (additive_mask->shape() != scores.shape()) {
      throw ShapeError("attention: mask " + shape_string(additive_mask->shape()) + " vs scores " +
                       shape_string(scores.shape()));
    }
    scores = add(scores, q.tape().constant(*additive_mask));
  }
  return matmul(softmax(scores), v);
}

}  // namespace fsat::ad
