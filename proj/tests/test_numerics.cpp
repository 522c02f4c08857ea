// Copyright 2026 The w2n Authors
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

#include "w2n/numerics/autodiff.hpp"
#include "w2n/numerics/grad_check.hpp"

namespace w2n {
namespace {

// Naive triple loop, independent of the gemm kernels.
Tensor naive_matmul(const Tensor& a, const Tensor& b) {
  const std::size_t m = a.dim(0), p = a.dim(1), n = b.dim(1);
  Tensor c({m, n});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < p; ++k) s += a.at({i, k}) * b.at({k, j});
      c.at({i, j}) = s;
    }
  return c;
}

TEST(Matmul, IdentityAndHandCase) {
  Tensor eye({2, 2}, {1, 0, 0, 1});
  Tensor b({2, 2}, {3, 4, 5, 6});
  EXPECT_EQ(kernels::matmul(eye, b), b);
  Tensor r({1, 2}, {1, 2});
  Tensor c({2, 1}, {3, 4});
  EXPECT_DOUBLE_EQ(kernels::matmul(r, c).item(), 11.0);
}

TEST(Matmul, MatchesTripleLoop) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const std::size_t m = 1 + rng.below(8), p = 1 + rng.below(8), n = 1 + rng.below(8);
    Tensor a = random_uniform({m, p}, -1, 1, seed * 2 + 1);
    Tensor b = random_uniform({p, n}, -1, 1, seed * 2 + 2);
    Tensor got = kernels::matmul(a, b);
    Tensor want = naive_matmul(a, b);
    for (std::size_t i = 0; i < got.numel(); ++i) EXPECT_NEAR(got[i], want[i], 1e-12);
  }
  Tensor a = random_uniform({3, 4}, -1, 1, 7);
  Tensor b = random_uniform({4, 2}, -1, 1, 8);
  Tensor got = kernels::matmul(a, b), want = naive_matmul(a, b);
  for (std::size_t i = 0; i < got.numel(); ++i) EXPECT_NEAR(got[i], want[i], 1e-12);
}

TEST(Matmul, BroadcastsLeadingDims) {
  Tensor a = random_uniform({2, 3, 4}, -1, 1, 1);
  Tensor w = random_uniform({4, 5}, -1, 1, 2);
  Tensor c = kernels::matmul(a, w);
  ASSERT_EQ(c.shape(), (Shape{2, 3, 5}));
  for (std::size_t b = 0; b < 2; ++b) {
    Tensor slice({3, 4}, std::vector<double>(a.vec().begin() + b * 12, a.vec().begin() + (b + 1) * 12));
    Tensor want = naive_matmul(slice, w);
    for (std::size_t i = 0; i < 15; ++i) EXPECT_NEAR(c[b * 15 + i], want[i], 1e-12);
  }
}

TEST(Matmul, ShapeMismatchNamesBothShapes) {
  Tensor a({2, 3}), b({4, 2});
  try {
    kernels::matmul(a, b);
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("(2,3)"), std::string::npos);
    EXPECT_NE(msg.find("(4,2)"), std::string::npos);
  }
}

TEST(Softmax, Examples) {
  Tensor z({3}, {0, 0, 0});
  Tensor s = kernels::softmax(z, 0);
  for (double v : s.data()) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);

  Tensor big({2}, {1000, 0});
  Tensor sb = kernels::softmax(big, 0);
  EXPECT_TRUE(sb.all_finite());
  EXPECT_NEAR(sb[0], 1.0, 1e-15);
  EXPECT_NEAR(sb[1], 0.0, 1e-15);

  // Direct evaluation in long double.
  Tensor x({3}, {1, 2, 3});
  Tensor sx = kernels::softmax(x, 0);
  long double z3 = std::exp(1.0L) + std::exp(2.0L) + std::exp(3.0L);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(sx[i], static_cast<double>(std::exp(1.0L + i) / z3), 1e-12);

  EXPECT_THROW(kernels::softmax(x, 1), DimensionError);
}

TEST(Softmax, SlicesSumToOneUpToLargeMagnitudes) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Tensor x = random_uniform({4, 6}, -1e4, 1e4, seed);
    for (int axis : {0, 1}) {
      Tensor s = kernels::softmax(x, axis);
      ASSERT_TRUE(s.all_finite());
      const auto sp = kernels::split_axis(x.shape(), axis);
      for (std::size_t o = 0; o < sp.outer; ++o)
        for (std::size_t in = 0; in < sp.inner; ++in) {
          double tot = 0.0;
          for (std::size_t j = 0; j < sp.len; ++j) {
            const double v = s[o * sp.len * sp.inner + j * sp.inner + in];
            EXPECT_GE(v, 0.0);
            tot += v;
          }
          EXPECT_NEAR(tot, 1.0, 1e-9);
        }
    }
  }
}

TEST(Softmax, CausalMaskZeroesFuture) {
  Tensor x = random_uniform({2, 3, 3}, -1, 1, 3);
  Tensor s = kernels::softmax(x, -1, true);
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t i = 0; i < 3; ++i) {
      double tot = 0.0;
      for (std::size_t j = 0; j < 3; ++j) {
        if (j > i) EXPECT_EQ(s.at({b, i, j}), 0.0);
        tot += s.at({b, i, j});
      }
      EXPECT_NEAR(tot, 1.0, 1e-12);
    }
}

TEST(LayerNorm, Examples) {
  Tensor ones({4}, 1.0), zeros({4}, 0.0);
  Tensor c({4}, {5, 5, 5, 5});
  const Tensor yc = kernels::layer_norm(c, ones, zeros);
  for (double v : yc.data()) EXPECT_EQ(v, 0.0);

  Tensor b({4}, {0.5, -1, 2, 3});
  Tensor x = random_uniform({4}, -1, 1, 11);
  EXPECT_EQ(kernels::layer_norm(x, zeros, b), b);

  // Direct mean / variance oracle.
  Tensor x8 = random_uniform({8}, -3, 3, 12);
  Tensor g8({8}, 1.0), b8({8}, 0.0);
  Tensor y = kernels::layer_norm(x8, g8, b8, 1e-6);
  double mu = 0, var = 0;
  for (double v : x8.data()) mu += v;
  mu /= 8;
  for (double v : x8.data()) var += (v - mu) * (v - mu);
  var /= 8;
  for (std::size_t i = 0; i < 8; ++i) EXPECT_NEAR(y[i], (x8[i] - mu) / std::sqrt(var + 1e-6), 1e-10);

  EXPECT_THROW(kernels::layer_norm(x8, ones, zeros), DimensionError);
}

TEST(LayerNorm, NormalizesRandomVectors) {
  Tensor g({16}, 1.0), b({16}, 0.0);
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    Tensor y = kernels::layer_norm(random_uniform({16}, -5, 5, seed), g, b);
    double mu = 0, var = 0;
    for (double v : y.data()) mu += v;
    mu /= 16;
    for (double v : y.data()) var += (v - mu) * (v - mu);
    var /= 16;
    EXPECT_LT(std::abs(mu), 1e-6);
    EXPECT_NEAR(var, 1.0, 1e-4);
  }
}

TEST(Dropout, Examples) {
  Tensor x = random_uniform({5, 5}, -1, 1, 4);
  EXPECT_EQ(kernels::dropout(x, 0.0, 1, true), x);
  EXPECT_EQ(kernels::dropout(x, 0.5, 1, false), x);
  EXPECT_THROW(kernels::dropout(x, 1.0, 1, true), ParameterError);

  Tensor ones({1000000}, 1.0);
  Tensor y = kernels::dropout(ones, 0.1, 99, true);
  double mean = 0, zeros = 0;
  for (double v : y.data()) {
    mean += v;
    zeros += v == 0.0;
  }
  mean /= 1e6;
  zeros /= 1e6;
  EXPECT_NEAR(mean, 1.0, 0.01);
  EXPECT_NEAR(zeros, 0.1, 0.001);
}

TEST(GradCheck, Examples) {
  Tensor x = random_uniform({5}, -1, 1, 21);
  EXPECT_LT(grad_check([](Tape&, Var v) { return sum(v); }, x), 1e-10);

  Tensor x3({3}, {1, 2, 3});
  Tape t;
  Var v = t.leaf(x3, true);
  Var y = sum(square(v));
  t.backward(y);
  EXPECT_EQ(t.grad(v), Tensor({3}, {2, 4, 6}));
  EXPECT_LT(grad_check([](Tape&, Var v) { return sum(square(v)); }, x3), 1e-7);

  EXPECT_THROW(grad_check([](Tape&, Var v) { return square(v); }, x3), ContractError);
}

// Every primitive against central differences on random inputs in [-1, 1].
TEST(GradCheck, EveryPrimitive) {
  const double tol = 1e-6;
  auto weight = [](Tape& t, Var y, std::uint64_t seed) {
    // Random projection so the scalar depends on every output element differently.
    Var w = t.constant(random_uniform(t.value(y).shape(), -1, 1, seed));
    return sum(mul(y, w));
  };
  Tensor a = random_uniform({2, 3, 4}, -1, 1, 1);
  Tensor b = random_uniform({2, 3, 4}, -1, 1, 2);
  Tensor m = random_uniform({4, 5}, -1, 1, 3);
  Tensor vec4 = random_uniform({4}, -1, 1, 4);
  Tensor vec4b = random_uniform({4}, -1, 1, 5);

  auto check = [&](MultiScalarFn f, std::vector<Tensor> xs, const char* name) {
    const auto r = grad_check_all(f, std::move(xs));
    EXPECT_LT(r.max_rel_error, tol) << name;
  };
  check([&](Tape& t, std::span<const Var> v) { return weight(t, add(v[0], v[1]), 9); }, {a, b}, "add");
  check([&](Tape& t, std::span<const Var> v) { return weight(t, sub(v[0], v[1]), 9); }, {a, b}, "sub");
  check([&](Tape& t, std::span<const Var> v) { return weight(t, mul(v[0], v[1]), 9); }, {a, b}, "mul");
  check([&](Tape& t, std::span<const Var> v) { return weight(t, scale(v[0], -2.5), 9); }, {a}, "scale");
  check([&](Tape& t, std::span<const Var> v) { return weight(t, add_bias(v[0], v[1]), 9); }, {a, vec4}, "add_bias");
  check([&](Tape& t, std::span<const Var> v) { return weight(t, relu(v[0]), 9); }, {a}, "relu");
  check([&](Tape& t, std::span<const Var> v) { return weight(t, matmul(v[0], v[1]), 9); }, {a, m}, "matmul");
  check([&](Tape& t, std::span<const Var> v) { return weight(t, matmul(v[0], transpose_last2(v[1])), 9); }, {a, b},
        "batched matmul");
  check([&](Tape& t, std::span<const Var> v) { return weight(t, permute(v[0], {2, 0, 1}), 9); }, {a}, "permute");
  check([&](Tape& t, std::span<const Var> v) { return weight(t, reshape(v[0], {6, 4}), 9); }, {a}, "reshape");
  check([&](Tape& t, std::span<const Var> v) { return weight(t, softmax(v[0], 1), 9); }, {a}, "softmax axis 1");
  check([&](Tape& t, std::span<const Var> v) { return weight(t, softmax(v[0], -1, true), 9); },
        {random_uniform({2, 3, 3}, -1, 1, 6)}, "causal softmax");
  check([&](Tape& t, std::span<const Var> v) { return weight(t, layer_norm(v[0], v[1], v[2]), 9); }, {a, vec4, vec4b},
        "layer_norm");
  check([&](Tape& t, std::span<const Var> v) { return weight(t, dropout(v[0], 0.3, 77, true), 9); }, {a}, "dropout");
  check([&](Tape&, std::span<const Var> v) { return mean(v[0]); }, {a}, "mean");
}

TEST(Autodiff, FanOutAccumulates) {
  Tape t;
  Var x = t.leaf(Tensor({2}, {1.5, -2.0}), true);
  Var y = sum(add(mul(x, x), scale(x, 3.0)));  // x used three times
  t.backward(y);
  EXPECT_EQ(t.grad(x), Tensor({2}, {2 * 1.5 + 3, 2 * -2.0 + 3}));
}

TEST(Autodiff, RepeatedBackwardIsBitIdentical) {
  auto run = [] {
    Tape t;
    Var a = t.leaf(random_uniform({3, 4}, -1, 1, 5), true);
    Var w = t.leaf(random_uniform({4, 4}, -1, 1, 6), true);
    Var g = t.leaf(Tensor({4}, 1.0), true);
    Var b = t.leaf(Tensor({4}, 0.0), true);
    Var y = sum(square(layer_norm(dropout(matmul(a, w), 0.1, 3, true), g, b)));
    t.backward(y);
    return std::vector<Tensor>{t.grad(a), t.grad(w), t.grad(g), t.grad(b)};
  };
  EXPECT_EQ(run(), run());
}

TEST(Autodiff, OutputsStayFinite) {
  Tape t;
  Var x = t.leaf(random_uniform({4, 8}, -1e3, 1e3, 8), true);
  Var g = t.leaf(Tensor({8}, 1.0)), b = t.leaf(Tensor({8}, 0.0));
  Var y = softmax(layer_norm(x, g, b), -1);
  EXPECT_TRUE(t.value(y).all_finite());
  t.backward(sum(square(y)));
  EXPECT_TRUE(t.grad(x).all_finite());
}

}  // namespace
}  // namespace w2n
