// SPDX-License-Identifier: Apache-2.0
#include <numeric>

#include "test_util.hpp"

using namespace sentmatch;
using namespace sentmatch::testing;

TEST(SparseTarget, Examples) {
  auto p = sparse_target(3.6, 5);
  const std::vector<double> expect{0, 0, 0.4, 0.6, 0};
  for (int i = 0; i < 5; ++i) EXPECT_NEAR(p[i], expect[i], 1e-15);
  EXPECT_EQ(sparse_target(5.0, 5), (std::vector<double>{0, 0, 0, 0, 1}));
  EXPECT_EQ(sparse_target(1.0, 5), (std::vector<double>{1, 0, 0, 0, 0}));
  EXPECT_THROW(sparse_target(0.99, 5), std::invalid_argument);
  EXPECT_THROW(sparse_target(5.01, 5), std::invalid_argument);
  EXPECT_THROW(sparse_target(NAN, 5), std::invalid_argument);
}

TEST(SparseTarget, InvariantsOnDenseGrid) {
  for (int k = 0; k <= 4000; ++k) {
    const double y = 1.0 + 4.0 * k / 4000.0;
    auto p = sparse_target(y, 5);
    std::size_t nonzero = 0, first = 5;
    double mean = 0.0;
    for (std::size_t i = 0; i < 5; ++i) {
      EXPECT_GE(p[i], 0.0);
      if (p[i] > 0) {
        if (first == 5) first = i;
        EXPECT_LE(i - first, 1u);
        ++nonzero;
      }
      mean += static_cast<double>(i + 1) * p[i];
    }
    EXPECT_LE(nonzero, 2u);
    EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-12);
    EXPECT_NEAR(mean, y, 1e-12);
  }
}

TEST(RelatednessLoss, ZeroWhenPredictionEqualsTarget) {
  OrdinalHead head(2, 5);
  auto target = sparse_target(3.25, 5);
  // logits = log p on the support, very negative elsewhere
  head.dense.weight.value.data.assign(10, 0.0);
  for (int i = 0; i < 5; ++i) head.dense.bias.value[i] = target[i] > 0 ? std::log(target[i]) : -800.0;
  Graph g;
  Var x = g.constant(Tensor::vector({0.3, -0.2}));
  const Var xs[] = {x};
  const double ys[] = {3.25};
  EXPECT_NEAR(g.item(relatedness_loss(g, xs, ys, head, 0.0, head.parameters())), 0.0, 1e-15);
}

TEST(RelatednessLoss, UniformPredictionAgainstOneHot) {
  OrdinalHead head(3, 5);
  Graph g;
  const Var xs[] = {g.constant(Tensor::vector({1, 2, 3}))};
  const double ys[] = {5.0};
  EXPECT_NEAR(g.item(relatedness_loss(g, xs, ys, head, 0.0, head.parameters())), std::log(5.0), 1e-15);
}

TEST(RelatednessLoss, NonNegativeAndRejectsBadInput) {
  Rng rng(3);
  OrdinalHead head(4, 5);
  head.init(rng);
  for (int trial = 0; trial < 100; ++trial) {
    randomize(head.parameters(), rng, -3, 3);
    Graph g;
    const Var xs[] = {g.constant(random_tensor(rng, {4})), g.constant(random_tensor(rng, {4}))};
    const double ys[] = {rng.uniform(1, 5), rng.uniform(1, 5)};
    EXPECT_GE(g.item(relatedness_loss(g, xs, ys, head, 0.0, head.parameters())), -1e-15);
  }
  Graph g;
  EXPECT_THROW(relatedness_loss(g, {}, {}, head, 0.0, head.parameters()), std::invalid_argument);
  const Var xs[] = {g.constant(random_tensor(rng, {4}))};
  const double ys[] = {3.0};
  EXPECT_THROW(relatedness_loss(g, xs, ys, head, -1.0, head.parameters()), std::invalid_argument);
}

TEST(RelatednessLoss, GradientCheckWithL2) {
  Rng rng(4);
  OrdinalHead head(3, 5);
  head.init(rng);
  randomize(head.parameters(), rng);
  Parameter x1("x1", {3}), x2("x2", {3});
  randomize(x1, rng);
  randomize(x2, rng);
  ParameterList theta = head.parameters();
  ParameterList all = theta;
  all.push_back(&x1);
  all.push_back(&x2);
  auto rep = check([&](Graph &g) {
    const Var xs[] = {tanh(g.param(x1)), tanh(g.param(x2))};
    const double ys[] = {2.3, 4.9};
    return relatedness_loss(g, xs, ys, head, 1e-2, theta);
  }, all);
  EXPECT_LE(rep.max_rel_error, 1e-6);
}

TEST(PredictScore, UniformSaturatedAndShiftInvariant) {
  EXPECT_DOUBLE_EQ(expected_score(std::vector<double>(5, 0.0)), 3.0);
  EXPECT_NEAR(expected_score(std::vector<double>{0, 0, 0, 0, 60}), 5.0, 1e-12);
  Rng rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    auto z = random_values(rng, 5, -10, 10);
    const double y = expected_score(z);
    EXPECT_GE(y, 1.0);
    EXPECT_LE(y, 5.0);
    auto shifted = z;
    for (auto &v : shifted) v += 123.0;
    EXPECT_NEAR(expected_score(shifted), y, 1e-12);
    // independent long double evaluation
    long double num = 0, den = 0;
    for (int i = 0; i < 5; ++i) {
      const long double e = std::exp(static_cast<long double>(z[i]));
      num += (i + 1) * e;
      den += e;
    }
    EXPECT_NEAR(y, static_cast<double>(num / den), 1e-12);
  }
}

TEST(EntailmentLoss, UniformAndConfidentLimits) {
  ClassHead head(2);
  Graph g;
  const Var xs[] = {g.constant(Tensor::vector({1, 1}))};
  const std::size_t labels[] = {2};
  EXPECT_NEAR(g.item(entailment_loss(g, xs, labels, head, 0.0, head.parameters())), std::log(3.0), 1e-15);
  head.dense.bias.value[2] = 60.0;
  head.dense.weight.value.at(0, 0) = 0.5;
  const double lambda = 1e-4;
  const double expect_l2 = 0.5 * lambda * (60.0 * 60.0 + 0.25);
  Graph g2;
  const Var xs2[] = {g2.constant(Tensor::vector({1, 1}))};
  EXPECT_NEAR(g2.item(entailment_loss(g2, xs2, labels, head, lambda, head.parameters())), expect_l2, 1e-12);
  const std::size_t bad[] = {3};
  EXPECT_THROW(entailment_loss(g2, xs2, bad, head, 0.0, head.parameters()), std::invalid_argument);
}

TEST(EntailmentLoss, GradientCheck) {
  Rng rng(6);
  ClassHead head(4);
  head.init(rng);
  randomize(head.parameters(), rng);
  Parameter x("x", {4});
  randomize(x, rng);
  auto theta = head.parameters();
  auto all = theta;
  all.push_back(&x);
  auto rep = check([&](Graph &g) {
    const Var xs[] = {g.param(x), tanh(g.param(x))};
    const std::size_t labels[] = {0, 2};
    return entailment_loss(g, xs, labels, head, 1e-3, theta);
  }, all);
  EXPECT_LE(rep.max_rel_error, 1e-6);
}

TEST(PredictLabel, ArgmaxTiesAndSoftmaxAgreement) {
  EXPECT_EQ(argmax(std::vector<double>{1, 3, 3}), 1u);
  EXPECT_EQ(argmax(std::vector<double>{0, 0, 0}), 0u);
  Rng rng(10);
  for (int trial = 0; trial < 100; ++trial) {
    auto z = random_values(rng, 3, -5, 5);
    Graph g;
    EXPECT_EQ(argmax(g.value(softmax(g.constant({3}, z)))), argmax(z));
  }
}

TEST(Labels, CaseInsensitiveParse) {
  EXPECT_EQ(parse_label("entailment"), EntailmentLabel::entailment);
  EXPECT_EQ(parse_label("CONTRADICTION"), EntailmentLabel::contradiction);
  EXPECT_EQ(parse_label("Neutral"), EntailmentLabel::neutral);
  EXPECT_THROW(parse_label("maybe"), std::invalid_argument);
}

TEST(L2, ExcludesConstantParameters) {
  Parameter w("w", {2}), table("table", {2}, true);
  w.value.data = {3, 4};
  table.value.data = {100, 100};
  EXPECT_DOUBLE_EQ(l2_penalty({&w, &table}, 0.5), 0.25 * 25.0);
  add_l2_gradient({&w, &table}, 0.5);
  EXPECT_EQ(w.grad, (std::vector<double>{1.5, 2.0}));
  EXPECT_TRUE(table.grad.empty() || table.grad == std::vector<double>(2, 0.0));
}
