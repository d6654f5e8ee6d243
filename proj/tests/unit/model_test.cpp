#include "support/fixtures.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

namespace fasdg {
namespace {

Activation random_images(int n, const Dims& d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix m(n, d.size());
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return Activation{m, d};
}

std::set<std::string> group_names(Network& net) {
  std::set<std::string> out;
  for (auto& g : net.param_groups()) out.insert(g.name);
  return out;
}

TEST(Encode, ResnetShapedProfileYields2048WideEmbeddings) {
  Network net(resnet50_shaped_profile(), Variant::kBackbone, 1);
  const Activation x = random_images(48, net.profile().input_dims(), 2);
  const Matrix e = encode(net, x, Mode::kEval);
  EXPECT_EQ(e.rows(), 48);
  EXPECT_EQ(e.cols(), 2048);
}

TEST(Encode, ZeroImageWithZeroBiasesGivesZeroEmbedding) {
  Network net(tiny_profile(), Variant::kBackbone, 3);
  for (auto& p : net.all_parameters()) {
    if (p.name.ends_with(".bias")) p.param->value.setZero();
  }
  const Activation x{Matrix::Zero(2, net.profile().input_dims().size()), net.profile().input_dims()};
  const Matrix e = encode(net, x, Mode::kEval);
  EXPECT_EQ(e.cols(), 64);
  EXPECT_TRUE((e.array() == 0.0).all());
}

TEST(Encode, EvalModeIsBitwiseDeterministic) {
  Network net(tiny_profile(), Variant::kFull, 4);
  const Activation x = random_images(3, net.profile().input_dims(), 5);
  const Matrix a = encode(net, x, Mode::kEval);
  const Matrix b = encode(net, x, Mode::kEval);
  const Matrix c = encode(std::as_const(net), x);
  EXPECT_TRUE(a == b);
  EXPECT_TRUE(a == c);
}

TEST(Encode, TrainAndEvalAgreeWithoutStochasticLayers) {
  Network net(testing::deterministic_tiny(), Variant::kBackbone, 6);
  const Activation x = random_images(2, net.profile().input_dims(), 7);
  EXPECT_TRUE(encode(net, x, Mode::kTrain).isApprox(encode(net, x, Mode::kEval), 1e-14));
}

TEST(Encode, WrongImageSizeNamesBothShapes) {
  Network net(tiny_profile(), Variant::kBackbone, 1);
  const Activation x = random_images(1, Dims{3, 16, 16}, 1);
  try {
    (void)encode(net, x, Mode::kEval);
    FAIL() << "expected a shape error";
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("3x32x32"), std::string::npos) << msg;
    EXPECT_NE(msg.find("3x16x16"), std::string::npos) << msg;
  }
}

TEST(Classify, PublishedWidthsGive48x2Logits) {
  Sequential c = build_classifier(2048, 512, 0.5);
  std::mt19937_64 rng(1);
  c.initialize(rng);
  const Matrix logits = classify(c, Matrix::Random(48, 2048), Mode::kEval);
  EXPECT_EQ(logits.rows(), 48);
  EXPECT_EQ(logits.cols(), 2);
}

TEST(Classify, ZeroWeightsGiveEvenOdds) {
  Sequential c = build_classifier(8, 4, 0.5);
  for (Parameter* p : c.parameters()) p->value.setZero();
  const Matrix logits = classify(c, Matrix::Random(5, 8), Mode::kTrain);
  EXPECT_TRUE((logits.array() == 0.0).all());
  const Matrix p = softmax_rows(logits);
  EXPECT_TRUE((p.array() == 0.5).all());
}

TEST(Classify, TwoUnitHiddenToyMatchesHandArithmetic) {
  Sequential c = build_classifier(3, 2, 0.0);
  auto& fc1 = dynamic_cast<Linear&>(c.layer(0));
  auto& fc2 = dynamic_cast<Linear&>(c.layer(3));
  fc1.weight().value << 0.5, -1.0, 2.0, -1.0, 0.25, 1.0;
  fc1.bias().value << 0.1, -0.2;
  fc2.weight().value << 1.0, 2.0, -0.5, 3.0;
  fc2.bias().value << 0.05, -0.05;
  Matrix x(1, 3);
  x << 1.0, -2.0, 0.5;
  // hidden pre-activations: 0.5 + 2 + 1 + 0.1 = 3.6 and -1 - 0.5 + 0.5 - 0.2 = -1.2
  // after ReLU (3.6, 0); logits (3.6 + 0.05, -1.8 - 0.05)
  const Matrix y = classify(c, x, Mode::kEval);
  EXPECT_NEAR(y(0, 0), 3.65, 1e-12);
  EXPECT_NEAR(y(0, 1), -1.85, 1e-12);
}

TEST(Classify, WidthMismatchIsShapeError) {
  Sequential c = build_classifier(8, 4, 0.5);
  EXPECT_THROW((void)classify(c, Matrix::Zero(2, 7), Mode::kEval), ShapeError);
}

TEST(TemporalEncode, PublishedWidthsConcatenateEightStates) {
  Lstm lstm(2048, 256, 8);
  std::mt19937_64 rng(2);
  lstm.initialize(rng);
  const Matrix out = temporal_encode(lstm, Matrix::Random(8 * 2, 2048), 8, Mode::kEval);
  EXPECT_EQ(out.rows(), 2);
  EXPECT_EQ(out.cols(), 2048);
}

TEST(TemporalEncode, TinyProfileWidthIsStepsTimesHidden) {
  Network net(tiny_profile(), Variant::kLstm, 3);
  EXPECT_EQ(net.profile().temporal_width(), 32);
  const Matrix out = temporal_encode(*net.lstm(), Matrix::Random(4 * 3, 64), 4, Mode::kTrain);
  EXPECT_EQ(out.rows(), 3);
  EXPECT_EQ(out.cols(), 32);
}

TEST(TemporalEncode, ZeroInputAndZeroWeightsGiveZeroStates) {
  Lstm lstm(5, 3, 4);
  for (Parameter* p : lstm.parameters()) p->value.setZero();
  const Matrix out = temporal_encode(lstm, Matrix::Zero(4 * 2, 5), 4, Mode::kEval);
  EXPECT_TRUE((out.array() == 0.0).all());
}

TEST(TemporalEncode, ScalarCellMatchesHandUnrolledRecurrence) {
  Lstm lstm(1, 1, 2);
  // gate order: input, forget, cell, output
  lstm.w_input().value << 0.5, -0.3, 0.8, 0.2;
  lstm.w_hidden().value << 0.1, 0.4, -0.6, 0.7;
  lstm.bias().value << 0.0, 1.0, 0.1, -0.2;
  Matrix seq(2, 1);
  seq << 1.0, -0.5;
  auto sig = [](double z) { return 1.0 / (1.0 + std::exp(-z)); };
  double h = 0.0;
  double c = 0.0;
  std::vector<double> expected;
  for (double x : {1.0, -0.5}) {
    const double i = sig(0.5 * x + 0.1 * h + 0.0);
    const double f = sig(-0.3 * x + 0.4 * h + 1.0);
    const double g = std::tanh(0.8 * x - 0.6 * h + 0.1);
    const double o = sig(0.2 * x + 0.7 * h - 0.2);
    c = f * c + i * g;
    h = o * std::tanh(c);
    expected.push_back(h);
  }
  const Matrix out = temporal_encode(lstm, seq, 2, Mode::kEval);
  ASSERT_EQ(out.cols(), 2);
  EXPECT_NEAR(out(0, 0), expected[0], 1e-14);
  EXPECT_NEAR(out(0, 1), expected[1], 1e-14);
}

TEST(TemporalEncode, WrongSequenceLengthIsShapeError) {
  Lstm lstm(4, 2, 4);
  EXPECT_THROW((void)temporal_encode(lstm, Matrix::Zero(3 * 2, 4), 3, Mode::kEval), ShapeError);
}

TEST(TemporalEncode, ComposesWithEncoderAndVideoClassifier) {
  Network net(tiny_profile(), Variant::kFull, 8);
  const Activation x = random_images(4 * 2, net.profile().input_dims(), 9);
  const Matrix t = temporal_encode(*net.lstm(), encode(net, x, Mode::kEval), 4, Mode::kEval);
  const Matrix logits = classify(*net.vb_classifier(), t, Mode::kEval);
  EXPECT_EQ(logits.rows(), 2);
  EXPECT_EQ(logits.cols(), 2);
}

TEST(Network, FullVariantHasTenGroupsAndSharesOneEncoder) {
  Network net(tiny_profile(), Variant::kFull, 1);
  const std::set<std::string> want{"theta_e",     "theta_c",     "theta_f",     "theta_l",
                                   "theta_s",     "theta_r_hat", "theta_c_hat", "theta_f_hat",
                                   "theta_l_hat", "theta_s_hat"};
  EXPECT_EQ(group_names(net), want);
  std::set<const Parameter*> seen;
  for (auto& p : net.all_parameters()) EXPECT_TRUE(seen.insert(p.param).second) << p.name;
}

TEST(Network, VariantCensusMatchesComponents) {
  for (Variant v : kAllVariants) {
    Network net(tiny_profile(), v, 1);
    const auto names = group_names(net);
    const auto c = components(v);
    EXPECT_TRUE(names.count("theta_e") && names.count("theta_c")) << to_string(v);
    EXPECT_EQ(names.count("theta_f") == 1, c.dib) << to_string(v);
    EXPECT_EQ(names.count("dis_f") == 1, c.dis) << to_string(v);
    EXPECT_EQ(names.count("theta_r_hat") == 1, c.lstm) << to_string(v);
    EXPECT_EQ(names.count("theta_f_hat") == 1, c.dvb) << to_string(v);
  }
}

TEST(Network, DiscriminatorFreeCensusHasNoDomainParameters) {
  Network net(tiny_profile(), Variant::kBackbone, 1);
  for (auto& p : net.all_parameters()) {
    const std::string g = testing::group_of(p.name);
    EXPECT_TRUE(g == "theta_e" || g == "theta_c") << p.name;
  }
}

TEST(Network, EncoderInitialisationIndependentOfVariant) {
  Network a(tiny_profile(), Variant::kBackbone, 11);
  Network b(tiny_profile(), Variant::kFull, 11);
  const auto pa = testing::parameter_values(a);
  const auto pb = testing::parameter_values(b);
  for (const auto& [name, value] : pa) {
    ASSERT_TRUE(pb.count(name)) << name;
    EXPECT_TRUE(value == pb.at(name)) << name;
  }
}

TEST(Layers, MaxPoolRoutesGradientToArgmax) {
  MaxPool2d pool(2);
  Matrix x(1, 4);
  x << 0.1, 0.7, -0.3, 0.2;
  const Activation y = pool.forward(Activation{x, Dims{1, 2, 2}}, Mode::kTrain);
  EXPECT_DOUBLE_EQ(y.values(0, 0), 0.7);
  const Activation g = pool.backward(Activation{Matrix::Constant(1, 1, 2.0), y.dims});
  EXPECT_EQ(g.values(0, 0), 0.0);
  EXPECT_EQ(g.values(0, 1), 2.0);
  EXPECT_EQ(g.values(0, 2), 0.0);
  EXPECT_EQ(g.values(0, 3), 0.0);
}

TEST(Layers, DropoutIsIdentityInEvalAndScalesKeptUnitsInTrain) {
  Dropout d(0.5, 3);
  const Matrix x = Matrix::Constant(1, 1000, 1.0);
  EXPECT_TRUE(d.infer(flat(x)).values == x);
  const Matrix y = d.forward(flat(x), Mode::kTrain).values;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    EXPECT_TRUE(y.data()[i] == 0.0 || y.data()[i] == 2.0);
  }
  const double kept = (y.array() > 0.0).cast<double>().mean();
  EXPECT_NEAR(kept, 0.5, 0.06);
}

TEST(Layers, ConvolutionMatchesDirectSum) {
  Conv2d conv(2, 1, 3, 1);
  std::mt19937_64 rng(5);
  conv.initialize(rng);
  conv.bias().value(0, 0) = 0.25;
  const Activation x = random_images(1, Dims{2, 4, 5}, 6);
  const Activation y = conv.infer(x);
  ASSERT_EQ(y.dims, (Dims{1, 4, 5}));
  for (int oy = 0; oy < 4; ++oy) {
    for (int ox = 0; ox < 5; ++ox) {
      double s = 0.25;
      for (int c = 0; c < 2; ++c) {
        for (int ky = 0; ky < 3; ++ky) {
          for (int kx = 0; kx < 3; ++kx) {
            const int iy = oy + ky - 1;
            const int ix = ox + kx - 1;
            if (iy < 0 || iy >= 4 || ix < 0 || ix >= 5) continue;
            s += conv.weight().value(0, (c * 3 + ky) * 3 + kx) * x.values(0, (c * 4 + iy) * 5 + ix);
          }
        }
      }
      EXPECT_NEAR(y.values(0, oy * 5 + ox), s, 1e-12);
    }
  }
}

}  // namespace
}  // namespace fasdg
