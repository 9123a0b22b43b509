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

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>

#include "fsat/autodiff/gradcheck.hpp"
#include "fsat/autodiff/ops.hpp"
#include "fsat/autodiff/parameter_store.hpp"
#include "fsat/error.hpp"
#include "fsat/seed.hpp"

namespace fsat::ad {
namespace {

Tensor random_tensor(const Shape& shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(shape);
  for (auto& v : t.values()) v = u(rng);
  return t;
}

TEST(Forward, SigmoidAtZeroIsHalf) {
  Tape tape;
  Var y = sigmoid(tape.constant(Tensor::scalar(0.0)));
  EXPECT_EQ(y.value().item(), 0.5);
}

TEST(Forward, IdentityMatmul) {
  Tape tape;
  Var eye = tape.constant(Tensor::matrix({{1, 0}, {0, 1}}));
  Var m = tape.constant(Tensor::matrix({{3, 4}, {5, 6}}));
  EXPECT_TRUE(matmul(eye, m).value().bit_equal(m.value()));
}

TEST(Forward, SoftmaxOfZerosIsUniform) {
  Tape tape;
  Var y = softmax(tape.constant(Tensor::vector({0, 0, 0})));
  for (double v : y.value().values()) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
}

TEST(Forward, ShapeMismatchNamesPrimitiveAndShapes) {
  Tape tape;
  Var a = tape.constant(Tensor(Shape{2, 3}));
  Var b = tape.constant(Tensor(Shape{4, 5}));
  try {
    matmul(a, b);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("matmul"), std::string::npos);
    EXPECT_NE(msg.find("[2,3]"), std::string::npos);
    EXPECT_NE(msg.find("[4,5]"), std::string::npos);
  }
  EXPECT_THROW(add(a, b), ShapeError);
}

TEST(Forward, NonFiniteOutputIsAnError) {
  Tape tape;
  EXPECT_THROW(exp(tape.constant(Tensor::scalar(1000.0))), NumericError);
}

TEST(Backward, SquareHasAnalyticDerivative) {
  Parameter x("x", Tensor::scalar(3.0));
  Tape tape;
  Var xv = tape.param(x);
  auto grads = tape.backward(mul(xv, xv));
  EXPECT_DOUBLE_EQ(grads.at("x").item(), 6.0);
}

TEST(Backward, LhucStyleScaleMatchesCentralDifference) {
  // loss = sigmoid(r) * h at r = 0, h = 1, oracle from plain central differences
  const double step = 1e-5;
  auto f = [](double r) { return 1.0 / (1.0 + std::exp(-r)); };
  const double oracle = (f(step) - f(-step)) / (2 * step);
  EXPECT_NEAR(oracle, 0.25, 1e-10);

  Parameter r("r", Tensor::scalar(0.0));
  Tape tape;
  Var loss = mul(sigmoid(tape.param(r)), tape.constant(Tensor::scalar(1.0)));
  auto grads = tape.backward(loss);
  EXPECT_NEAR(grads.at("r").item(), oracle, 1e-9);
}

TEST(Backward, DisconnectedParameterGetsExactZero) {
  Parameter x("x", Tensor::scalar(2.0));
  Parameter p("p", Tensor::vector({1.0, -2.0}));
  Tape tape;
  Var xv = tape.param(x);
  tape.param(p);
  auto grads = tape.backward(mul(xv, xv));
  ASSERT_TRUE(grads.count("p"));
  for (double v : grads.at("p").values()) EXPECT_EQ(v, 0.0);
}

TEST(Backward, RejectsNonScalarAndSecondCall) {
  Tape tape;
  Var v = tape.variable(Tensor::vector({1, 2}));
  EXPECT_THROW(tape.backward(v), ShapeError);
  Var s = sum(v);
  tape.backward(s);
  EXPECT_THROW(tape.backward(s), StateError);
}

TEST(Backward, VisitsEachOperationOnceInReverseOrder) {
  Tape tape;
  Var a = tape.variable(Tensor::matrix({{0.3, -0.2}, {0.1, 0.7}}));
  Var b = sigmoid(matmul(a, a));
  Var c = log_softmax(add(b, a));
  tape.backward(sum(c));
  const auto& visits = tape.backward_visits();
  ASSERT_FALSE(visits.empty());
  for (std::size_t i = 1; i < visits.size(); ++i) EXPECT_LT(visits[i], visits[i - 1]);
  EXPECT_EQ(visits.size(), 5u);  // matmul, sigmoid, add, log_softmax, sum
}

TEST(Backward, NonTrainableParameterIsNeverReported) {
  Parameter frozen("frozen", Tensor::scalar(1.5), /*trainable=*/false);
  Parameter live("live", Tensor::scalar(2.0));
  Tape tape;
  auto grads = tape.backward(mul(tape.param(frozen), tape.param(live)));
  EXPECT_FALSE(grads.count("frozen"));
  EXPECT_DOUBLE_EQ(grads.at("live").item(), 1.5);
  EXPECT_EQ(frozen.grad.item(), 0.0);
}

TEST(Backward, GradientAccumulationIsLinear) {
  std::mt19937_64 rng(7);
  Parameter w("w", random_tensor({3, 4}, rng));
  const Tensor x = random_tensor({2, 3}, rng);
  auto l1 = [&](Tape& t) { return sum(sigmoid(matmul(t.constant(x), t.param(w)))); };
  auto l2 = [&](Tape& t) { return sum(square(matmul(t.constant(x), t.param(w)))); };
  const double a = 0.37, b = -1.9;
  auto grad_of = [&](const std::function<Var(Tape&)>& f) {
    Tape t;
    return t.backward(f(t)).at("w");
  };
  const Tensor g1 = grad_of(l1);
  const Tensor g2 = grad_of(l2);
  const Tensor gc = grad_of([&](Tape& t) { return add(scale(l1(t), a), scale(l2(t), b)); });
  for (std::size_t i = 0; i < gc.numel(); ++i) EXPECT_NEAR(gc[i], a * g1[i] + b * g2[i], 1e-12);
}

TEST(Backward, ForwardAndBackwardAreBitReproducible) {
  std::mt19937_64 rng(11);
  Parameter w("w", random_tensor({4, 4}, rng));
  const Tensor x = random_tensor({3, 4}, rng);
  auto run = [&] {
    Tape tape(123, Mode::kTrain);
    Var y = dropout(swish(matmul(tape.constant(x), tape.param(w))), 0.3);
    Var l = sum(log_softmax(y));
    const double v = l.value().item();
    return std::make_pair(v, tape.backward(l).at("w"));
  };
  auto [v1, g1] = run();
  auto [v2, g2] = run();
  EXPECT_EQ(std::memcmp(&v1, &v2, sizeof(double)), 0);
  EXPECT_TRUE(g1.bit_equal(g2));
}

TEST(Dropout, IdentityInEvalMode) {
  Tape tape(1, Mode::kEval);
  Var x = tape.constant(Tensor::vector({1, 2, 3}));
  Var y = dropout(x, 0.5);
  EXPECT_EQ(y.index(), x.index());
}

// --- per-primitive gradient checks -------------------------------------------

struct PrimitiveCase {
  const char* name;
  std::vector<Shape> inputs;
  std::function<Var(std::vector<Var>&)> op;
  double lo = -1.0;
  double hi = 1.0;
  Mode mode = Mode::kEval;
};

class PrimitiveGradient : public ::testing::TestWithParam<PrimitiveCase> {};

TEST_P(PrimitiveGradient, MatchesCentralDifferencesAtRandomPoints) {
  const PrimitiveCase& c = GetParam();
  std::mt19937_64 rng(fnv1a(c.name));
  double worst = 0.0;
  for (int point = 0; point < 100; ++point) {
    std::vector<std::unique_ptr<Parameter>> params;
    for (std::size_t i = 0; i < c.inputs.size(); ++i) {
      params.push_back(std::make_unique<Parameter>("in" + std::to_string(i),
                                                   random_tensor(c.inputs[i], rng, c.lo, c.hi)));
    }
    Shape out_shape;
    {
      Tape probe(point, c.mode);
      std::vector<Var> vars;
      for (auto& p : params) vars.push_back(probe.param(*p));
      out_shape = c.op(vars).shape();
    }
    const Tensor weights = random_tensor(out_shape, rng);
    auto loss = [&](Tape& tape) {
      std::vector<Var> vars;
      for (auto& p : params) vars.push_back(tape.param(*p));
      return weighted_sum(c.op(vars), weights);
    };
    std::vector<Parameter*> raw;
    for (auto& p : params) raw.push_back(p.get());
    const auto report = finite_difference_check(loss, raw, 1e-5, point, c.mode);
    worst = std::max(worst, report.max_relative_error);
  }
  EXPECT_LE(worst, 1e-4) << c.name;
}

const std::vector<int> kIds = {2, 0, 2, 1};
const Tensor kMask = Tensor::matrix({{0, -1e9, -1e9}, {0, 0, -1e9}, {0, 0, 0}});

INSTANTIATE_TEST_SUITE_P(
    AllPrimitives, PrimitiveGradient,
    ::testing::Values(
        PrimitiveCase{"matmul", {{3, 4}, {4, 2}}, [](auto& v) { return matmul(v[0], v[1]); }},
        PrimitiveCase{"add", {{3, 4}, {3, 4}}, [](auto& v) { return add(v[0], v[1]); }},
        PrimitiveCase{"add_row", {{3, 4}, {4}}, [](auto& v) { return add(v[0], v[1]); }},
        PrimitiveCase{"sub_scalar", {{3, 4}, {}}, [](auto& v) { return sub(v[0], v[1]); }},
        PrimitiveCase{"mul", {{3, 4}, {3, 4}}, [](auto& v) { return mul(v[0], v[1]); }},
        PrimitiveCase{"mul_row", {{3, 4}, {4}}, [](auto& v) { return mul(v[0], v[1]); }},
        PrimitiveCase{"sigmoid", {{3, 4}}, [](auto& v) { return sigmoid(v[0]); }, -4, 4},
        PrimitiveCase{"relu", {{3, 4}}, [](auto& v) { return relu(v[0]); }},
        PrimitiveCase{"swish", {{3, 4}}, [](auto& v) { return swish(v[0]); }, -4, 4},
        PrimitiveCase{"exp", {{3, 4}}, [](auto& v) { return exp(v[0]); }},
        PrimitiveCase{"log", {{3, 4}}, [](auto& v) { return log(v[0]); }, 0.2, 3.0},
        PrimitiveCase{"square", {{3, 4}}, [](auto& v) { return square(v[0]); }},
        PrimitiveCase{"softmax", {{3, 5}}, [](auto& v) { return softmax(v[0]); }, -3, 3},
        PrimitiveCase{"log_softmax", {{3, 5}}, [](auto& v) { return log_softmax(v[0]); }, -3, 3},
        PrimitiveCase{"layer_norm", {{3, 6}, {6}, {6}},
                      [](auto& v) { return layer_norm(v[0], v[1], v[2]); }},
        PrimitiveCase{"conv2d_stride2", {{2, 7, 6}, {3, 2, 3, 3}, {3}},
                      [](auto& v) { return conv2d(v[0], v[1], v[2], 2, 2); }},
        PrimitiveCase{"depthwise_conv1d", {{6, 3}, {5, 3}, {3}},
                      [](auto& v) { return depthwise_conv1d(v[0], v[1], v[2]); }},
        PrimitiveCase{"dropout", {{4, 5}}, [](auto& v) { return dropout(v[0], 0.3); }, -1, 1,
                      Mode::kTrain},
        PrimitiveCase{"embedding", {{3, 4}}, [](auto& v) { return embedding(v[0], kIds); }},
        PrimitiveCase{"concat_cols", {{3, 2}, {3, 4}},
                      [](auto& v) { return concat_cols({v[0], v[1]}); }},
        PrimitiveCase{"concat_rows", {{2, 3}, {1, 3}},
                      [](auto& v) { return concat_rows({v[0], v[1]}); }},
        PrimitiveCase{"slice_cols", {{3, 5}}, [](auto& v) { return slice_cols(v[0], 1, 4); }},
        PrimitiveCase{"slice_rows", {{4, 3}}, [](auto& v) { return slice_rows(v[0], 1, 3); }},
        PrimitiveCase{"transpose", {{3, 5}}, [](auto& v) { return transpose(v[0]); }},
        PrimitiveCase{"reshape", {{3, 4}}, [](auto& v) { return reshape(v[0], {2, 6}); }},
        PrimitiveCase{"sum", {{3, 4}}, [](auto& v) { return sum(v[0]); }},
        PrimitiveCase{"attention", {{3, 4}, {3, 4}, {3, 4}},
                      [](auto& v) { return scaled_dot_product_attention(v[0], v[1], v[2], &kMask); }}),
    [](const auto& info) { return std::string(info.param.name); });

// --- finite_difference_check itself -----------------------------------------

TEST(FiniteDifferenceCheck, QuadraticIsTight) {
  Parameter x("x", Tensor::vector({0.5, -1.25, 2.0}));
  auto loss = [&](Tape& t) {
    Var v = t.param(x);
    return add(sum(square(v)), scale(sum(v), 3.0));
  };
  Parameter* ps[] = {&x};
  EXPECT_LT(finite_difference_check(loss, ps, 1e-5).max_relative_error, 1e-6);
}

TEST(FiniteDifferenceCheck, NoParametersGivesZero) {
  auto loss = [](Tape& t) { return t.constant(Tensor::scalar(1.0)); };
  EXPECT_EQ(finite_difference_check(loss, {}, 1e-5).max_relative_error, 0.0);
}

TEST(FiniteDifferenceCheck, DetectsNondeterministicLoss) {
  Parameter x("x", Tensor::scalar(1.0));
  int calls = 0;
  auto loss = [&](Tape& t) { return add_scalar(t.param(x), 1e-3 * ++calls); };
  Parameter* ps[] = {&x};
  EXPECT_THROW(finite_difference_check(loss, ps, 1e-5), NumericError);
}

TEST(FiniteDifferenceCheck, RejectsNonPositiveStep) {
  Parameter x("x", Tensor::scalar(1.0));
  Parameter* ps[] = {&x};
  EXPECT_THROW(finite_difference_check([&](Tape& t) { return t.param(x); }, ps, 0.0), DomainError);
}

// --- parameter store & checkpoint -------------------------------------------

TEST(Checkpoint, RoundTripsExactly) {
  std::mt19937_64 rng(3);
  ParameterStore store;
  store.add("canon/a", random_tensor({3, 2}, rng));
  store.add("canon/b", random_tensor({5}, rng), false);
  store.add("canon/c", Tensor::scalar(-0.125));
  const auto path = std::filesystem::temp_directory_path() / "fsat_ckpt_test.bin";
  save_checkpoint(path, store);
  ParameterStore loaded = load_checkpoint(path);
  ASSERT_EQ(loaded.size(), 3u);
  for (const Parameter* p : store.all()) {
    const Parameter& q = loaded.get(p->id);
    EXPECT_TRUE(q.value.bit_equal(p->value));
    EXPECT_EQ(q.trainable, p->trainable);
  }
  EXPECT_EQ(loaded.checksum(), store.checksum());
  std::filesystem::remove(path);
}

TEST(Checkpoint, RejectsForeignFiles) {
  const auto path = std::filesystem::temp_directory_path() / "fsat_ckpt_bad.bin";
  std::ofstream(path) << "not a checkpoint";
  EXPECT_THROW(load_checkpoint(path), FormatError);
  std::filesystem::remove(path);
  EXPECT_THROW(load_checkpoint(path), IoError);
}

TEST(ParameterStoreTest, ChecksumTracksValues) {
  ParameterStore store;
  store.add("w", Tensor::vector({1.0, 2.0}));
  const std::string before = store.checksum();
  EXPECT_EQ(before.size(), 64u);
  store.get("w").value[1] = 2.0000000001;
  EXPECT_NE(store.checksum(), before);
  EXPECT_THROW(store.add("w", Tensor::scalar(0)), StateError);
}

}  // namespace
}  // namespace fsat::ad
