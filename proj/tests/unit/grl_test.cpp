#include "support/fixtures.hpp"

#include <gtest/gtest.h>

namespace fasdg {
namespace {

TEST(Grl, DefaultFactorIsNegative) {
  EXPECT_DOUBLE_EQ(GrlConfig{}.lambda_grl, -0.2);
  EXPECT_DOUBLE_EQ(TrainConfig{}.lambda_grl, -0.2);
}

TEST(Grl, ForwardIsIdentity) {
  const std::vector<double> v{1.0, 2.0, 3.0};
  EXPECT_EQ(grl_forward(v, GrlConfig{}), v);
  EXPECT_TRUE(grl_forward(std::vector<double>{}, GrlConfig{}).empty());
  const Matrix m = Matrix::Random(4, 7);
  const Matrix out = grl_forward(m, GrlConfig{});
  EXPECT_EQ(out.rows(), 4);
  EXPECT_EQ(out.cols(), 7);
  EXPECT_TRUE(out == m);
}

TEST(Grl, BackwardScalesByFactor) {
  const std::vector<double> g{1.0, 2.0, 3.0};
  const auto out = grl_backward(g, GrlConfig{-0.2});
  ASSERT_EQ(out.size(), 3U);
  EXPECT_DOUBLE_EQ(out[0], -0.2);
  EXPECT_DOUBLE_EQ(out[1], -0.4);
  EXPECT_DOUBLE_EQ(out[2], -0.6000000000000001);
  for (double v : grl_backward(g, GrlConfig{0.0})) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(grl_backward(g, GrlConfig{1.0}), g);
}

// f(x) = sum(tanh(W x)) behind the reversal layer: the composite's input
// gradient is lambda times the gradient of f, which central differences
// of f alone confirm.
TEST(Grl, CompositeGradientIsScaledGradientOfDownstream) {
  Linear lin(5, 3);
  std::mt19937_64 rng(4);
  lin.initialize(rng);
  const Matrix x = Matrix::Random(1, 5);
  auto f = [&lin](const Matrix& in) {
    return lin.infer(flat(in)).values.array().tanh().sum();
  };
  for (double lambda : {-0.2, 0.0, 1.0, -1.0}) {
    const GrlConfig cfg{lambda};
    const Matrix y = lin.forward(flat(grl_forward(x, cfg)), Mode::kTrain).values;
    EXPECT_EQ(f(grl_forward(x, cfg)), f(x));
    const Matrix dy = (1.0 - y.array().tanh().square()).matrix();
    const Matrix dx = grl_backward(lin.backward(flat(dy)).values, cfg);
    for (int i = 0; i < 5; ++i) {
      Matrix up = x;
      Matrix down = x;
      up(0, i) += 1e-4;
      down(0, i) -= 1e-4;
      const double numeric = lambda * (f(up) - f(down)) / 2e-4;
      EXPECT_LE(testing::relative_error(dx(0, i), numeric, 1e-8), 1e-3) << lambda << " " << i;
    }
  }
}

TEST(Grl, HasNoParametersInCensus) {
  Network full(tiny_profile(), Variant::kFull, 1);
  for (auto& p : full.all_parameters()) {
    EXPECT_EQ(p.name.find("grl"), std::string::npos) << p.name;
  }
}

}  // namespace
}  // namespace fasdg
