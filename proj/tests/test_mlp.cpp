#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "kbfix/mlp.hpp"
#include "kbfix/random.hpp"

using namespace kbfix;

TEST(Mlp, HandComputedForwardPass) {
  Mlp m(2, {2}, 1);
  // hidden w = [[1, -1], [0.5, 2]], b = [0, -1]; output w = [1, -2], b = 0.5
  const std::vector<double> p{1, -1, 0.5, 2, 0, -1, 1, -2, 0.5};
  m.set_parameters(p);
  // x = (2, 1): h = relu(1, 2) = (1, 2); z = 1 - 4 + 0.5 = -2.5
  const std::vector<double> x{2, 1};
  EXPECT_DOUBLE_EQ(m.logit(x), -2.5);
  EXPECT_NEAR(m.score(x), 1.0 / (1.0 + std::exp(2.5)), 1e-12);
  // x = (0, 0): h = relu(0, -1) = (0, 0); z = 0.5
  const std::vector<double> zero{0, 0};
  EXPECT_DOUBLE_EQ(m.logit(zero), 0.5);
}

TEST(Mlp, ZeroWeightsScoreOneHalf) {
  Mlp m(5, {4, 3}, 2);
  m.set_parameters(std::vector<double>(m.parameter_count(), 0.0));
  Rng rng(1);
  for (int i = 0; i < 20; ++i) {
    std::vector<double> x(5);
    for (auto& v : x) v = rng.uniform(-3, 3);
    EXPECT_DOUBLE_EQ(m.score(x), 0.5);
  }
}

TEST(Mlp, WidthMismatchIsAnError) {
  Mlp m(3, {2}, 1);
  const std::vector<double> x{1, 2};
  EXPECT_THROW(m.score(x), Error);
  EXPECT_THROW(Mlp(3, {0}, 1), Error);
}

TEST(Mlp, SigmoidIsStableAndMonotone) {
  EXPECT_DOUBLE_EQ(sigmoid(0), 0.5);
  EXPECT_GT(sigmoid(800), 0.999);
  EXPECT_GE(sigmoid(-800), 0.0);
  double prev = -1;
  for (double z = -30; z <= 30; z += 0.5) {
    EXPECT_GE(sigmoid(z), prev);
    prev = sigmoid(z);
  }
  EXPECT_NEAR(bce_from_logit(0, 1), std::log(2.0), 1e-12);
  EXPECT_TRUE(std::isfinite(bce_from_logit(-1000, 1)));
}

TEST(MlpProperty, GradientMatchesFiniteDifferences) {
  Rng rng(4);
  Mlp m(4, {5}, 9);
  std::vector<std::vector<double>> xs;
  std::vector<double> ys;
  for (int i = 0; i < 6; ++i) {
    std::vector<double> x(4);
    for (auto& v : x) v = rng.uniform(-1, 1);
    xs.push_back(x);
    ys.push_back(i % 2);
  }
  const auto g = m.gradient(xs, ys);
  auto p = m.parameters();
  const double h = 1e-6;
  for (std::size_t i = 0; i < p.size(); ++i) {
    auto q = p;
    q[i] += h;
    Mlp a = m;
    a.set_parameters(q);
    q[i] -= 2 * h;
    Mlp c = m;
    c.set_parameters(q);
    const double fd = (a.loss(xs, ys) - c.loss(xs, ys)) / (2 * h);
    EXPECT_NEAR(g[i], fd, 1e-6) << "param " << i;
  }
}

TEST(MlpTrain, SeparatesToyData) {
  Rng rng(6);
  std::vector<std::vector<double>> xs;
  std::vector<double> ys;
  for (int i = 0; i < 200; ++i) {
    const double a = rng.uniform(-1, 1), b = rng.uniform(-1, 1);
    xs.push_back({a, b});
    ys.push_back(a + b > 0 ? 1.0 : 0.0);
  }
  MlpConfig cfg;
  cfg.hidden = {8};
  cfg.learning_rate = 0.5;
  cfg.epochs = 100;
  MlpTrainReport rep;
  const auto m = train_mlp(xs, ys, cfg, &rep);
  std::size_t right = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) right += (m.score(xs[i]) > 0.5) == (ys[i] == 1.0);
  EXPECT_GE(right, 190u);
  ASSERT_EQ(rep.epoch_loss.size(), 100u);
  EXPECT_LT(rep.epoch_loss.back(), rep.epoch_loss.front());
}

TEST(MlpTrain, DeterministicForSeed) {
  std::vector<std::vector<double>> xs{{0, 1}, {1, 0}, {1, 1}, {0, 0}};
  std::vector<double> ys{1, 1, 0, 0};
  MlpConfig cfg;
  cfg.epochs = 20;
  cfg.batch_size = 2;
  const auto a = train_mlp(xs, ys, cfg), b = train_mlp(xs, ys, cfg);
  EXPECT_EQ(a.parameters(), b.parameters());
  cfg.seed = 2;
  EXPECT_NE(train_mlp(xs, ys, cfg).parameters(), a.parameters());
}

TEST(MlpTrain, RejectsDegenerateInput) {
  MlpConfig cfg;
  EXPECT_THROW(train_mlp({}, {}, cfg), Error);
  EXPECT_THROW(train_mlp({{1}}, {1}, cfg), Error);
  EXPECT_THROW(train_mlp({{1}, {0}}, {1, 0.5}, cfg), Error);
  EXPECT_THROW(train_mlp({{1}}, {1, 0}, cfg), Error);
}

TEST(Mlp, JsonRoundTripPreservesScores) {
  Mlp m(3, {4}, 12);
  const auto back = Mlp::from_json(nlohmann::json::parse(m.to_json().dump()));
  EXPECT_EQ(back.parameters(), m.parameters());
  const std::vector<double> x{0.3, -1, 2};
  EXPECT_DOUBLE_EQ(back.score(x), m.score(x));
  auto bad = m.to_json();
  bad["layers"][0]["w"].erase(0);
  EXPECT_THROW(Mlp::from_json(bad), Error);
}
