// Copyright 2026 The certfair Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <limits>
#include <random>

#include "certfair/autodiff.hpp"
#include "certfair/interval.hpp"
#include "test_util.hpp"

namespace certfair {
namespace {

Tensor random_tensor(const Shape& shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(shape);
  for (double& v : t.data()) v = u(rng);
  return t;
}

// Values with magnitude in [0.1, 1], keeping ReLU and abs away from their kinks.
Tensor kink_free(const Shape& shape, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> mag(0.1, 1.0);
  std::bernoulli_distribution sign(0.5);
  Tensor t(shape);
  for (double& v : t.data()) v = sign(rng) ? mag(rng) : -mag(rng);
  return t;
}

TEST(Tensor, ConstructionChecksLength) {
  EXPECT_THROW(Tensor(Shape{2, 2}, std::vector<double>{1, 2, 3}), ShapeError);
  Tensor t(Shape{2, 3}, 1.5);
  EXPECT_EQ(t.size(), 6u);
  EXPECT_EQ(t.rank(), 2u);
  EXPECT_DOUBLE_EQ(t.at(1, 2), 1.5);
  EXPECT_THROW(t.item(), ShapeError);
  EXPECT_THROW(t.dim(2), ShapeError);
}

TEST(Tensor, ArithmeticAndNorms) {
  Tensor a = Tensor::vector({3, 4});
  EXPECT_DOUBLE_EQ(l2_norm(a.data()), 5.0);
  Tensor b = Tensor::vector({1, 1});
  a += b;
  EXPECT_DOUBLE_EQ(a[0], 4.0);
  a *= 0.5;
  EXPECT_DOUBLE_EQ(a[1], 2.5);
  EXPECT_DOUBLE_EQ(dot(a.data(), b.data()), 4.5);
  EXPECT_THROW(require_same_shape(a, Tensor::vector({1, 2, 3}), "t"), ShapeError);
}

TEST(Autodiff, IdentityScale) {
  Graph g;
  g.scale(g.variable("x"), 1.0);
  Tensor x = Tensor::vector({2, 3});
  Bindings b{{"x", &x}};
  EXPECT_EQ(g.evaluate(b), x);
}

TEST(Autodiff, ReluDefinition) {
  Graph g;
  g.relu(g.variable("x"));
  Tensor x = Tensor::vector({-1, 0, 2});
  Bindings b{{"x", &x}};
  EXPECT_EQ(g.evaluate(b), Tensor::vector({0, 0, 2}));
}

TEST(Autodiff, SoftmaxSymmetric) {
  Graph g;
  g.softmax(g.constant(Tensor::vector({0, 0})));
  const Tensor& p = g.evaluate({});
  EXPECT_DOUBLE_EQ(p[0], 0.5);
  EXPECT_DOUBLE_EQ(p[1], 0.5);
}

TEST(Autodiff, SumGradientIsOnes) {
  Graph g;
  g.sum(g.variable("x"));
  std::mt19937_64 rng(3);
  Tensor x = random_tensor(Shape{3, 4}, rng);
  Bindings b{{"x", &x}};
  g.evaluate(b);
  const Gradients grads = g.backward(Tensor::scalar(1.0));
  for (double v : grads.at("x").data()) EXPECT_EQ(v, 1.0);
}

TEST(Autodiff, SquareGradient) {
  Graph g;
  NodeId x = g.variable("x");
  g.mul(x, x);
  Tensor v = Tensor::vector({3.0});
  Bindings b{{"x", &v}};
  EXPECT_DOUBLE_EQ(g.evaluate(b)[0], 9.0);
  EXPECT_DOUBLE_EQ(g.backward(Tensor::vector({1.0})).at("x")[0], 6.0);
}

TEST(Autodiff, RepeatedVariablesAccumulate) {
  Graph g;
  NodeId a = g.variable("x");
  NodeId b = g.variable("x");
  g.sum(g.add(a, g.scale(b, 2.0)));
  Tensor x = Tensor::vector({1, 2});
  Bindings bind{{"x", &x}};
  g.evaluate(bind);
  const Gradients grads = g.backward(Tensor::scalar(1.0));
  EXPECT_DOUBLE_EQ(grads.at("x")[0], 3.0);
  EXPECT_DOUBLE_EQ(grads.at("x")[1], 3.0);
}

TEST(Autodiff, Errors) {
  {
    Graph g;
    g.relu(g.variable("missing"));
    EXPECT_THROW(g.evaluate({}), std::invalid_argument);
  }
  {
    Graph g;
    g.add(g.constant(Tensor::vector({1, 2})), g.constant(Tensor::vector({1, 2, 3})));
    EXPECT_THROW(g.evaluate({}), ShapeError);
  }
  {
    Graph g;
    g.sum(g.constant(Tensor::vector({1})));
    EXPECT_THROW(g.backward(Tensor::scalar(1.0)), std::logic_error);
    g.evaluate({});
    EXPECT_THROW(g.backward(Tensor::vector({1, 2})), ShapeError);
  }
  {
    Graph g;
    g.scale(g.constant(Tensor::vector({1e308})), 1e10);
    EXPECT_THROW(g.evaluate({}), NonFiniteError);
  }
}

// Two-layer network: CE(W2 relu(W1 x + b1) + b2).
double two_layer(const Tensor& flat, const Tensor& x, std::size_t gold, Tensor* grad) {
  const std::size_t h = 5, d = x.size(), c = 3;
  Tensor w1(Shape{h, d}), b1(Shape{h}), w2(Shape{c, h}), b2(Shape{c});
  std::size_t o = 0;
  for (Tensor* t : {&w1, &b1, &w2, &b2}) {
    for (double& v : t->data()) v = flat[o++];
  }
  Graph g;
  NodeId hidden = g.relu(g.affine(g.variable("w1"), g.variable("b1"), g.constant(x)));
  g.softmax_cross_entropy(g.affine(g.variable("w2"), g.variable("b2"), hidden), gold);
  Bindings b{{"w1", &w1}, {"b1", &b1}, {"w2", &w2}, {"b2", &b2}};
  const double value = g.evaluate(b).item();
  if (grad != nullptr) {
    const Gradients gr = g.backward(Tensor::scalar(1.0));
    *grad = Tensor(flat.shape());
    o = 0;
    for (const char* name : {"w1", "b1", "w2", "b2"}) {
      for (double v : gr.at(name).data()) (*grad)[o++] = v;
    }
  }
  return value;
}

TEST(Autodiff, TwoLayerNetMatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    const Tensor x = random_tensor(Shape{4}, rng);
    const Tensor point = random_tensor(Shape{5 * 4 + 5 + 3 * 5 + 3}, rng);
    const double err = finite_diff_check(
        [&](const Tensor& p) {
          Tensor grad;
          const double v = two_layer(p, x, seed % 3, &grad);
          return std::make_pair(v, grad);
        },
        point, 1e-5);
    EXPECT_LT(err, 1e-4) << "seed " << seed;
  }
}

TEST(FiniteDiff, SumOfSquaresIsExact) {
  std::mt19937_64 rng(11);
  const Tensor point = random_tensor(Shape{7}, rng);
  auto fn = [](const Tensor& p) {
    Tensor g(p.shape());
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      s += p[i] * p[i];
      g[i] = 2.0 * p[i];
    }
    return std::make_pair(s, g);
  };
  EXPECT_LT(finite_diff_check(fn, point, 1e-4), 1e-8);
}

TEST(FiniteDiff, RejectsBadStepAndNonFinite) {
  auto fn = [](const Tensor& p) { return std::make_pair(p[0], Tensor::vector({1.0})); };
  EXPECT_THROW(finite_diff_check(fn, Tensor::vector({1.0}), 0.0), std::invalid_argument);
  EXPECT_THROW(finite_diff_check(fn, Tensor::vector({1.0}), -1.0), std::invalid_argument);
  auto nan_fn = [](const Tensor&) {
    return std::make_pair(std::numeric_limits<double>::quiet_NaN(), Tensor::vector({1.0}));
  };
  EXPECT_THROW(finite_diff_check(nan_fn, Tensor::vector({1.0}), 1e-3), NonFiniteError);
}

TEST(FiniteDiff, TinyCnnCrossEntropy) {
  const TextCnn model = testing::tiny_model(5);
  const std::vector<TokenId> ids = {2, 5, 7, 3, 9};
  const double err = finite_diff_check(
      [&](const Tensor& w) {
        TextCnn m = model;
        m.parameters().conv_weight = w;
        Graph g;
        const ParameterNodes p = m.add_parameters(g);
        const auto prepared = m.prepare(ids);
        g.softmax_cross_entropy(m.build_logits(g, p, g.constant(m.embed(prepared)), nullptr), 1);
        Bindings b;
        m.bind_parameters(b);
        const double v = g.evaluate(b).item();
        return std::make_pair(v, g.backward(Tensor::scalar(1.0)).at(CnnParameters::kConvWeight));
      },
      model.parameters().conv_weight, 1e-5);
  EXPECT_LT(err, 1e-4);
}

// Each op wrapped as x -> sum(r * op(x)) with a random projection r.
struct OpCase {
  const char* name;
  Shape input;
  std::function<NodeId(Graph&, NodeId)> build;
};

std::vector<OpCase> op_cases(std::mt19937_64& rng) {
  const Tensor w_conv = random_tensor(Shape{3, 2, 4}, rng);
  const Tensor b_conv = random_tensor(Shape{3}, rng);
  const Tensor w_aff = random_tensor(Shape{3, 5}, rng);
  const Tensor b_aff = random_tensor(Shape{3}, rng);
  const Tensor other = random_tensor(Shape{5}, rng);
  const Tensor conv_in = random_tensor(Shape{6, 4}, rng);
  return {
      {"gather", Shape{4, 3},
       [](Graph& g, NodeId x) { return g.gather(x, {0, 2, 2, 3}); }},
      {"conv1d_input", Shape{5, 4},
       [=](Graph& g, NodeId x) {
         return g.conv1d(x, g.constant(w_conv), g.constant(b_conv));
       }},
      {"conv1d_weight", Shape{3, 2, 4},
       [=](Graph& g, NodeId w) { return g.conv1d(g.constant(conv_in), w, std::nullopt); }},
      {"relu", Shape{6}, [](Graph& g, NodeId x) { return g.relu(x); }},
      {"abs", Shape{6}, [](Graph& g, NodeId x) { return g.abs(x); }},
      {"max_over_time", Shape{4, 3}, [](Graph& g, NodeId x) { return g.max_over_time(x); }},
      {"affine_input", Shape{5},
       [=](Graph& g, NodeId x) { return g.affine(g.constant(w_aff), g.constant(b_aff), x); }},
      {"affine_weight", Shape{3, 5},
       [=](Graph& g, NodeId w) { return g.affine(w, std::nullopt, g.constant(other)); }},
      {"softmax", Shape{4}, [](Graph& g, NodeId x) { return g.softmax(x); }},
      {"softmax_cross_entropy", Shape{4},
       [](Graph& g, NodeId x) { return g.softmax_cross_entropy(x, 2); }},
      {"add", Shape{5}, [=](Graph& g, NodeId x) { return g.add(x, g.constant(other)); }},
      {"sub", Shape{5}, [=](Graph& g, NodeId x) { return g.sub(g.constant(other), x); }},
      {"mul", Shape{5}, [=](Graph& g, NodeId x) { return g.mul(x, g.mul(x, g.constant(other))); }},
      {"scale", Shape{5}, [](Graph& g, NodeId x) { return g.scale(x, -2.5); }},
      {"sum", Shape{2, 3}, [](Graph& g, NodeId x) { return g.sum(x); }},
  };
}

TEST(AutodiffProperty, EveryOpMatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(1000 + seed);
    for (const OpCase& op : op_cases(rng)) {
      std::mt19937_64 local(seed * 31 + 7);
      const Tensor point = kink_free(op.input, local);
      Tensor projection;
      {
        Graph g;
        op.build(g, g.variable("x"));
        Bindings b{{"x", &point}};
        projection = random_tensor(g.evaluate(b).shape(), local);
      }
      auto fn = [&](const Tensor& x) {
        Graph g;
        g.sum(g.mul(op.build(g, g.variable("x")), g.constant(projection)));
        Bindings b{{"x", &x}};
        const double v = g.evaluate(b).item();
        return std::make_pair(v, g.backward(Tensor::scalar(1.0)).at("x"));
      };
      EXPECT_LT(finite_diff_check(fn, point, 1e-5), 1e-4) << op.name << " seed " << seed;
    }
  }
}

TEST(AutodiffProperty, EvaluateIsDeterministic) {
  std::mt19937_64 rng(8);
  const TextCnn model = testing::tiny_model(8);
  const auto ids = testing::random_ids(rng, model.vocab().size(), 9);
  const Tensor a = model.forward(ids);
  const Tensor b = model.forward(ids);
  EXPECT_EQ(a, b);
}

TEST(AutodiffProperty, BackwardIsLinear) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    std::mt19937_64 rng(seed);
    const Tensor x = kink_free(Shape{6}, rng);
    const Tensor w = random_tensor(Shape{4, 6}, rng);
    const Tensor r = random_tensor(Shape{4}, rng);
    auto f = [&](Graph& g, NodeId v) {
      return g.sum(g.mul(g.relu(g.affine(g.constant(w), std::nullopt, v)), g.constant(r)));
    };
    auto h = [&](Graph& g, NodeId v) { return g.softmax_cross_entropy(g.abs(g.scale(v, 1.5)), 4); };
    Bindings b{{"x", &x}};
    auto grad_of = [&](const std::function<NodeId(Graph&, NodeId)>& build) {
      Graph g;
      build(g, g.variable("x"));
      g.evaluate(b);
      return g.backward(Tensor::scalar(1.0)).at("x");
    };
    const Tensor gf = grad_of(f), gh = grad_of(h);
    const Tensor gsum = grad_of([&](Graph& g, NodeId v) { return g.add(f(g, v), h(g, v)); });
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(gsum[i], gf[i] + gh[i], 1e-12);
  }
}

TEST(Autodiff, AdjointOfUnreachableNodeIsZero) {
  Graph g;
  NodeId x = g.variable("x");
  NodeId unused = g.relu(g.constant(Tensor::vector({1, 2})));
  g.sum(x);
  Tensor v = Tensor::vector({1, 2});
  Bindings b{{"x", &v}};
  g.evaluate(b);
  g.backward(Tensor::scalar(1.0));
  const Tensor a = g.adjoint(unused);
  EXPECT_EQ(a[0], 0.0);
  EXPECT_EQ(a[1], 0.0);
}

}  // namespace
}  // namespace certfair
