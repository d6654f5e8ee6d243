#include "support/fixtures.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace fasdg {
namespace {

double brute_silhouette(const Matrix& x, const std::vector<int>& labels) {
  const int n = static_cast<int>(x.rows());
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    std::map<int, std::pair<double, int>> acc;
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      auto& [s, c] = acc[labels[static_cast<std::size_t>(j)]];
      s += std::sqrt((x.row(i) - x.row(j)).squaredNorm());
      ++c;
    }
    const auto own = acc.find(labels[static_cast<std::size_t>(i)]);
    if (own == acc.end()) continue;
    const double a = own->second.first / own->second.second;
    double b = 1e300;
    for (const auto& [label, sc] : acc) {
      if (label != own->first) b = std::min(b, sc.first / sc.second);
    }
    total += (b - a) / std::max(a, b);
  }
  return total / n;
}

Matrix blobs(std::mt19937_64& rng, const std::vector<int>& labels, double spread) {
  std::normal_distribution<double> n(0.0, spread);
  Matrix x(static_cast<Eigen::Index>(labels.size()), 3);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    for (int c = 0; c < 3; ++c) {
      x(static_cast<Eigen::Index>(i), c) = n(rng) + (c == labels[i] % 3 ? 4.0 * labels[i] : 0.0);
    }
  }
  return x;
}

TEST(Silhouette, MatchesBruteForce) {
  std::mt19937_64 rng(5);
  const std::vector<int> labels{0, 0, 0, 1, 1, 1, 1, 2, 2, 0, 2, 1};
  for (double spread : {0.3, 1.0, 5.0}) {
    const Matrix x = blobs(rng, labels, spread);
    EXPECT_NEAR(silhouette(x, labels), brute_silhouette(x, labels), 1e-12) << spread;
  }
}

TEST(Silhouette, SeparatedBlobsScoreHighAndSingletonsScoreZero) {
  std::mt19937_64 rng(6);
  const std::vector<int> labels{0, 0, 0, 0, 1, 1, 1, 1};
  EXPECT_GT(silhouette(blobs(rng, labels, 0.05), labels), 0.9);
  Matrix two(2, 1);
  two << 0.0, 1.0;
  EXPECT_EQ(silhouette(two, std::vector<int>{0, 1}), 0.0);
}

TEST(Silhouette, RejectsBadInput) {
  const Matrix x = Matrix::Zero(3, 2);
  EXPECT_THROW((void)silhouette(x, std::vector<int>{0, 1}), ShapeError);
  EXPECT_THROW((void)silhouette(x, std::vector<int>{1, 1, 1}), UsageError);
}

TEST(Tsne, FewerThanTwoPointsIsError) {
  EXPECT_THROW((void)tsne(Matrix::Zero(1, 4)), UsageError);
}

TEST(Tsne, SeededAndSeparatesDistantClusters) {
  std::mt19937_64 rng(7);
  const std::vector<int> labels{0, 0, 0, 0, 0, 1, 1, 1, 1, 1};
  const Matrix x = blobs(rng, labels, 0.1);
  TsneOptions opt;
  opt.seed = 3;
  opt.iterations = 300;
  const Matrix a = tsne(x, opt);
  EXPECT_EQ(a, tsne(x, opt));
  EXPECT_EQ(a.cols(), 2);
  EXPECT_GT(silhouette(a, labels), 0.5);
}

// One 1x1 convolution with two output maps, global pooling, then a linear
// head. The class score is sum_k v_ck * mean(A_k), so each channel weight is
// v_ck / hw and the raw map is relu(sum_k v_ck * w_k * x / hw).
struct ToyCam {
  Sequential features;
  Sequential head;
  Image image{1, 4, 4};
  std::array<double, 2> w{0.7, -0.4};
  std::array<std::array<double, 2>, 2> v{{{1.5, 0.5}, {-2.0, 1.0}}};

  ToyCam() {
    auto& conv = features.add<Conv2d>("conv", 1, 2, 1);
    conv.weight().value << w[0], w[1];
    conv.bias().value.setZero();
    features.add<GlobalAvgPool>("gap");
    auto& fc = head.add<Linear>("fc", 2, 2);
    fc.weight().value << v[0][0], v[0][1], v[1][0], v[1][1];
    fc.bias().value << 0.3, -0.1;
    for (int i = 0; i < 16; ++i) image.pixels[static_cast<std::size_t>(i)] = 0.05 * ((i * 7) % 16) + 0.1;
  }

  [[nodiscard]] std::vector<double> expected(int cls) const {
    std::vector<double> m;
    const double s = (v[cls][0] * w[0] + v[cls][1] * w[1]) / 16.0;
    for (double x : image.pixels) m.push_back(std::max(0.0, s * x));
    const auto [lo, hi] = std::minmax_element(m.begin(), m.end());
    const double mn = *lo;
    const double mx = *hi;
    for (double& x : m) x = mx > mn ? (x - mn) / (mx - mn) : (mx > 0 ? 1.0 : 0.0);
    return m;
  }
};

TEST(GradCam, OneByOneToyMatchesClosedForm) {
  ToyCam toy;
  const ActivationMap m = grad_cam(toy.features, toy.head, toy.image, 0, "conv");
  ASSERT_EQ(m.values.dims(), (Dims{1, 4, 4}));
  const auto e = toy.expected(0);
  for (std::size_t i = 0; i < e.size(); ++i) EXPECT_NEAR(m.values.pixels[i], e[i], 1e-6) << i;
  EXPECT_EQ(m.layer, "conv");
}

TEST(GradCam, NegativeEvidenceGivesZeroMap) {
  ToyCam toy;
  // class 1: -2.0 * 0.7 + 1.0 * -0.4 < 0 with positive pixels
  const ActivationMap m = grad_cam(toy.features, toy.head, toy.image, 1, "conv");
  for (double v : m.values.pixels) EXPECT_EQ(v, 0.0);
}

TEST(GradCam, UnknownLayerAndClassAreUsageErrors) {
  ToyCam toy;
  EXPECT_THROW((void)grad_cam(toy.features, toy.head, toy.image, 0, "nope"), UsageError);
  EXPECT_THROW((void)grad_cam(toy.features, toy.head, toy.image, 2, "conv"), UsageError);
}

TEST(GradCam, MapsAreAtInputResolutionInUnitRange) {
  for (const ModelProfile& p : {tiny_profile(), resnet50_shaped_profile()}) {
    Network net(p, Variant::kBackbone, 4);
    Image im(3, p.input_height, p.input_width);
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (double& x : im.pixels) x = u(rng);
    const ActivationMap m = grad_cam(net, im, kLive);
    EXPECT_EQ(m.values.dims(), (Dims{1, p.input_height, p.input_width})) << p.name;
    for (double v : m.values.pixels) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

TEST(GradCam, ScalingTheFinalLayerLeavesTheMapUnchanged) {
  Network net(testing::deterministic_tiny(), Variant::kBackbone, 8);
  Image im(3, 32, 32);
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (double& x : im.pixels) x = u(rng);
  const ActivationMap before = grad_cam(net, im, kSpoof);
  const int last = net.ib_classifier().find("fc2");
  ASSERT_GE(last, 0);
  for (Parameter* q : net.ib_classifier().layer(static_cast<std::size_t>(last)).parameters()) {
    q->value *= 3.5;
  }
  const ActivationMap after = grad_cam(net, im, kSpoof);
  for (std::size_t i = 0; i < before.values.pixels.size(); ++i) {
    EXPECT_NEAR(before.values.pixels[i], after.values.pixels[i], 1e-9);
  }
}

TEST(GradCam, LeavesNetworkGradientsUntouched) {
  Network net(testing::deterministic_tiny(), Variant::kBackbone, 9);
  for (auto& q : net.all_parameters()) q.param->grad.setConstant(0.25);
  (void)grad_cam(net, Image(3, 32, 32, 0.5), kLive);
  for (auto& q : net.all_parameters()) {
    EXPECT_TRUE((q.param->grad.array() == 0.25).all()) << q.name;
  }
}

class ExportTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto bench = testing::small_benchmark(12, 4, 4);
    for (const auto& d : bench) {
      for (const auto& v : d.videos) {
        LabeledImage li{v.frames.front(), v.class_label, v.domain_id, v.video_id, 0};
        samples.push_back({li, d.domain_id == 3 ? Split::kTarget : Split::kSource});
      }
    }
  }
  std::vector<EmbeddingSample> samples;
};

TEST_F(ExportTest, ReadOnlyAndDeterministic) {
  Network net(testing::deterministic_tiny(), Variant::kFull, 10);
  const auto before = testing::parameter_values(net);
  const EmbeddingDump a = export_embeddings(net, samples, true, 4);
  const EmbeddingDump b = export_embeddings(net, samples, true, 4);
  EXPECT_EQ(testing::parameter_values(net), before);
  EXPECT_EQ(a.to_tsv(), b.to_tsv());
  ASSERT_EQ(a.rows.size(), samples.size());
  EXPECT_TRUE(a.projected());
  EXPECT_EQ(a.rows.front().embedding.size(), net.profile().embedding_dim);
  EXPECT_EQ(a.rows.back().split, Split::kTarget);
}

TEST_F(ExportTest, NoProjectionWhenNotRequested) {
  Network net(testing::deterministic_tiny(), Variant::kBackbone, 11);
  const EmbeddingDump d = export_embeddings(net, samples, false, 0);
  EXPECT_FALSE(d.projected());
  EXPECT_EQ(d.to_tsv().find("\tx\ty"), std::string::npos);
}

TEST_F(ExportTest, DuplicateInputsGiveIdenticalRows) {
  Network net(testing::deterministic_tiny(), Variant::kBackbone, 12);
  std::vector<EmbeddingSample> dup{samples[0], samples[5], samples[0]};
  const EmbeddingDump d = export_embeddings(net, dup, false, 0);
  EXPECT_EQ(d.rows[0].embedding, d.rows[2].embedding);
  EXPECT_NE(d.rows[0].embedding, d.rows[1].embedding);
}

TEST_F(ExportTest, EmptyInputIsUsageError) {
  Network net(testing::deterministic_tiny(), Variant::kBackbone, 13);
  EXPECT_THROW((void)export_embeddings(net, std::vector<EmbeddingSample>{}, false, 0), UsageError);
}

}  // namespace
}  // namespace fasdg
