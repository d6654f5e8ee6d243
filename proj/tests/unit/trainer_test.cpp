#include "support/fixtures.hpp"

#include <gtest/gtest.h>

#include <map>
#include <set>

namespace fasdg {
namespace {

using testing::group_of;
using testing::parameter_values;

class TrainerTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    bench_ = new std::vector<SyntheticDataset>(testing::small_benchmark(21));
    protocol_ = new DgProtocol(make_dg_protocol(*bench_, 3, 0.25));
  }
  static void TearDownTestSuite() {
    delete protocol_;
    delete bench_;
  }

  static TrainConfig small_config() {
    TrainConfig c;
    c.sequence_length = 4;
    c.ib_per_domain = 4;
    c.vb_clips_per_domain = 1;
    c.max_steps = 4;
    c.eval_every = 0;
    c.seed = 3;
    return c;
  }

  static std::vector<SyntheticDataset>* bench_;
  static DgProtocol* protocol_;
};

std::vector<SyntheticDataset>* TrainerTest::bench_ = nullptr;
DgProtocol* TrainerTest::protocol_ = nullptr;

// Parameter groups whose values differ between two snapshots.
std::set<std::string> changed_groups(const std::map<std::string, Matrix>& a,
                                     const std::map<std::string, Matrix>& b) {
  std::set<std::string> out;
  for (const auto& [name, v] : a) {
    if (!(v == b.at(name))) out.insert(group_of(name));
  }
  return out;
}

TEST_F(TrainerTest, ImageBatchDrawsEqualCountsPerDomain) {
  std::mt19937_64 rng(1);
  const IbBatch b = compose_ib_batch(protocol_->sources, 16, rng);
  ASSERT_EQ(b.samples.size(), 48U);
  std::map<int, int> per_domain;
  std::map<int, int> per_class;
  for (std::size_t i = 0; i < b.samples.size(); ++i) {
    ++per_domain[b.samples[i].domain_id];
    ++per_class[b.samples[i].class_label];
    EXPECT_EQ(protocol_->source_ids[static_cast<std::size_t>(b.domain_labels[i])],
              b.samples[i].domain_id);
  }
  EXPECT_EQ(per_domain, (std::map<int, int>{{0, 16}, {1, 16}, {2, 16}}));
  EXPECT_EQ(per_class[kLive], 24);
  EXPECT_EQ(per_class[kSpoof], 24);
}

TEST_F(TrainerTest, MinimalImageBatchHasOneSamplePerDomain) {
  std::mt19937_64 rng(2);
  const std::span<const SourceSplit> two(protocol_->sources.data(), 2);
  const IbBatch b = compose_ib_batch(two, 1, rng);
  ASSERT_EQ(b.samples.size(), 2U);
  EXPECT_NE(b.samples[0].domain_id, b.samples[1].domain_id);
}

TEST_F(TrainerTest, BatchesAreSeedDeterministic) {
  std::mt19937_64 r1(9);
  std::mt19937_64 r2(9);
  const IbBatch a = compose_ib_batch(protocol_->sources, 5, r1);
  const IbBatch b = compose_ib_batch(protocol_->sources, 5, r2);
  ASSERT_EQ(a.samples.size(), b.samples.size());
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    EXPECT_EQ(a.samples[i].video_id, b.samples[i].video_id);
    EXPECT_EQ(a.samples[i].frame_index, b.samples[i].frame_index);
    EXPECT_TRUE(a.samples[i].image == b.samples[i].image);
  }
  const VbBatch va = compose_vb_batch(protocol_->sources, 2, 4, r1);
  const VbBatch vb = compose_vb_batch(protocol_->sources, 2, 4, r2);
  for (std::size_t i = 0; i < va.clips.size(); ++i) {
    EXPECT_EQ(va.clips[i].frames.front().video_id, vb.clips[i].frames.front().video_id);
    EXPECT_EQ(va.clips[i].frames.front().frame_index, vb.clips[i].frames.front().frame_index);
  }
}

TEST_F(TrainerTest, BatchCompositionRejectsBadCounts) {
  std::mt19937_64 rng(1);
  EXPECT_THROW((void)compose_ib_batch(protocol_->sources, 0, rng), ConfigError);
  EXPECT_THROW((void)compose_vb_batch(protocol_->sources, 0, 4, rng), ConfigError);
  std::vector<SourceSplit> sources = protocol_->sources;
  sources[1].train.clear();
  EXPECT_THROW((void)compose_ib_batch(sources, 2, rng), DataError);
}

TEST_F(TrainerTest, VideoBatchHasContiguousClipsFromOneVideo) {
  std::mt19937_64 rng(4);
  const VbBatch b = compose_vb_batch(protocol_->sources, 2, 8, rng);
  ASSERT_EQ(b.clips.size(), 6U);
  for (const auto& c : b.clips) {
    ASSERT_EQ(c.frames.size(), 8U);
    for (std::size_t t = 0; t < c.frames.size(); ++t) {
      EXPECT_EQ(c.frames[t].video_id, c.frames[0].video_id);
      EXPECT_EQ(c.frames[t].frame_index, c.frames[0].frame_index + static_cast<int>(t));
      EXPECT_EQ(c.frames[t].class_label, c.class_label);
    }
  }
}

TEST_F(TrainerTest, VideoOfExactlyTFramesYieldsItsOnlyClip) {
  std::mt19937_64 rng(5);
  const VbBatch b = compose_vb_batch(protocol_->sources, 1, 8, rng);
  for (const auto& c : b.clips) EXPECT_EQ(c.frames.front().frame_index, 0);
}

TEST_F(TrainerTest, DomainWithOnlyShortVideosIsNamed) {
  std::vector<SourceSplit> sources = protocol_->sources;
  for (auto& v : sources[1].train) v.frames.resize(3);
  std::mt19937_64 rng(6);
  try {
    (void)compose_vb_batch(sources, 2, 4, rng);
    FAIL() << "expected a data error";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("domain 1"), std::string::npos) << e.what();
  }
}

TEST_F(TrainerTest, ImageStepTouchesOnlyImageGroups) {
  Network net(testing::deterministic_tiny(), Variant::kFull, 7);
  Sgd opt(0.01, 0.9, 1e-5);
  std::mt19937_64 rng(7);
  const auto before = parameter_values(net);
  (void)ib_step(net, opt, compose_ib_batch(protocol_->sources, 4, rng), small_config());
  const auto changed = changed_groups(before, parameter_values(net));
  EXPECT_EQ(changed, (std::set<std::string>{"theta_e", "theta_c", "theta_f", "theta_l", "theta_s"}));
}

TEST_F(TrainerTest, VideoStepTouchesOnlyVideoGroups) {
  Network net(testing::deterministic_tiny(), Variant::kFull, 8);
  Sgd opt(0.01, 0.9, 1e-5);
  std::mt19937_64 rng(8);
  const auto before = parameter_values(net);
  (void)vb_step(net, opt, compose_vb_batch(protocol_->sources, 2, 4, rng), small_config());
  const auto changed = changed_groups(before, parameter_values(net));
  EXPECT_EQ(changed, (std::set<std::string>{"theta_e", "theta_r_hat", "theta_c_hat",
                                            "theta_f_hat", "theta_l_hat", "theta_s_hat"}));
}

TEST_F(TrainerTest, VideoStepUpdateIsVisibleToImagePath) {
  Network net(testing::deterministic_tiny(), Variant::kFull, 9);
  const LabeledImage probe = protocol_->sources[0].train[0].frame(0);
  const Activation x = to_batch(std::span<const LabeledImage>(&probe, 1), net.profile().input_dims());
  const Matrix before = encode(net, x, Mode::kEval);
  Sgd opt(0.01, 0.9, 0.0);
  std::mt19937_64 rng(9);
  (void)vb_step(net, opt, compose_vb_batch(protocol_->sources, 2, 4, rng), small_config());
  EXPECT_FALSE(before == encode(net, x, Mode::kEval));
}

TEST_F(TrainerTest, ZeroImageWeightLeavesDiscriminatorToWeightDecay) {
  Network net(testing::deterministic_tiny(), Variant::kDib, 10);
  TrainConfig cfg = small_config();
  cfg.lambda_ib = 0.0;
  const double lr = 0.05;
  const double wd = 0.01;
  Sgd opt(lr, 0.9, wd);
  std::mt19937_64 rng(10);
  const auto before = parameter_values(net);
  (void)ib_step(net, opt, compose_ib_batch(protocol_->sources, 4, rng), cfg);
  const auto after = parameter_values(net);
  for (const auto& [name, v] : before) {
    const std::string g = group_of(name);
    if (g == "theta_f" || g == "theta_l" || g == "theta_s") {
      EXPECT_TRUE(after.at(name).isApprox(v * (1.0 - lr * wd), 1e-15) || v.isZero()) << name;
    }
  }
}

TEST_F(TrainerTest, SmallStepReducesClassLoss) {
  auto two = std::vector<SyntheticDataset>(bench_->begin(), bench_->begin() + 3);
  const DgProtocol p = make_dg_protocol(two, 2, 0.25);
  Network net(testing::deterministic_tiny(2), Variant::kBackbone, 11);
  TrainConfig cfg = small_config();
  Sgd opt(0.005, 0.0, 0.0);
  std::mt19937_64 rng(11);
  const IbBatch b = compose_ib_batch(p.sources, 8, rng);
  const double before = ib_step(net, opt, b, cfg).class_loss;
  const double after = ib_gradients(net, b, cfg).class_loss;
  EXPECT_LT(after, before);
}

TEST(Sgd, MatchesHandSteppedScalar) {
  Parameter p("w", 1, 1);
  p.value(0, 0) = 1.0;
  Sgd opt(0.1, 0.9, 0.01);
  p.grad(0, 0) = 0.5;
  opt.update("w", p);
  // v1 = -0.1 (0.5 + 0.01) = -0.051
  EXPECT_NEAR(p.value(0, 0), 0.949, 1e-15);
  opt.update("w", p);
  // v2 = 0.9 v1 - 0.1 (0.5 + 0.00949) = -0.096849
  EXPECT_NEAR(opt.velocity().at("w")(0, 0), -0.096849, 1e-15);
  EXPECT_NEAR(p.value(0, 0), 0.852151, 1e-15);
}

TEST_F(TrainerTest, ScheduleAlternatesImageAndVideo) {
  const TrainResult r = alternating_train(*protocol_, small_config(), Variant::kFull);
  ASSERT_EQ(r.history.steps.size(), 4U);
  const std::vector<Head> want{Head::kIB, Head::kVB, Head::kIB, Head::kVB};
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(r.history.steps[i].step, static_cast<int>(i));
    EXPECT_EQ(r.history.steps[i].network, want[i]);
    EXPECT_TRUE(r.history.steps[i].losses.consistent());
  }
  const TrainResult b = alternating_train(*protocol_, small_config(), Variant::kBackbone);
  for (const auto& s : b.history.steps) EXPECT_EQ(s.network, Head::kIB);
}

TEST_F(TrainerTest, IdenticalSeedsGiveIdenticalParameters) {
  TrainConfig cfg = small_config();
  cfg.max_steps = 6;
  TrainResult a = alternating_train(*protocol_, cfg, Variant::kFull);
  TrainResult b = alternating_train(*protocol_, cfg, Variant::kFull);
  EXPECT_EQ(parameter_values(a.network), parameter_values(b.network));
  EXPECT_EQ(a.history.to_ndjson(), b.history.to_ndjson());
  cfg.seed += 1;
  TrainResult c = alternating_train(*protocol_, cfg, Variant::kFull);
  EXPECT_NE(parameter_values(a.network), parameter_values(c.network));
}

TEST_F(TrainerTest, HistoryRecordsHaveFixedFields) {
  const TrainResult r = alternating_train(*protocol_, small_config(), Variant::kFull);
  const std::string first = r.history.to_ndjson().substr(0, r.history.to_ndjson().find('\n'));
  const auto j = nlohmann::json::parse(first);
  for (const char* k : {"step", "network", "L_c", "L_l", "L_s", "total"}) {
    EXPECT_TRUE(j.contains(k)) << k;
  }
  EXPECT_EQ(j.at("network"), "IB");
}

TEST_F(TrainerTest, ZeroDomainWeightsMatchDiscriminatorFreeEncoderGradient) {
  TrainConfig cfg = small_config();
  cfg.lambda_ib = 0.0;
  cfg.lambda_vb = 0.0;
  Network full(tiny_profile(), Variant::kFull, 12);
  Network plain(tiny_profile(), Variant::kLstm, 12);
  std::mt19937_64 r1(12);
  const IbBatch ib = compose_ib_batch(protocol_->sources, 2, r1);
  const VbBatch vb = compose_vb_batch(protocol_->sources, 1, 4, r1);
  auto encoder_grads = [](Network& n) {
    std::map<std::string, Matrix> g;
    for (auto& grp : n.groups({"theta_e"})) {
      for (auto& p : grp.params) g[p.name] = p.param->grad;
    }
    return g;
  };
  (void)ib_gradients(full, ib, cfg);
  (void)ib_gradients(plain, ib, cfg);
  EXPECT_EQ(encoder_grads(full), encoder_grads(plain));
  (void)vb_gradients(full, vb, cfg);
  (void)vb_gradients(plain, vb, cfg);
  EXPECT_EQ(encoder_grads(full), encoder_grads(plain));
}

TEST(HeadSelection, LowerValidationHterWinsAndTiesGoToVideo) {
  auto report = [](double h) {
    MetricReport r;
    r.hter = h;
    return std::optional<MetricReport>(r);
  };
  EXPECT_EQ(select_inference_head(report(0.10), report(0.08)), Head::kVB);
  EXPECT_EQ(select_inference_head(report(0.05), report(0.20)), Head::kIB);
  EXPECT_EQ(select_inference_head(report(0.10), report(0.10)), Head::kVB);
  EXPECT_THROW((void)select_inference_head(report(0.1), std::nullopt), UsageError);
}

TEST_F(TrainerTest, PredictionContract) {
  Network net(tiny_profile(), Variant::kFull, 13);
  const LabeledImage img = protocol_->target_test[0].frame(0);
  const auto clips = split_into_clips(std::span<const Video>(protocol_->target_test.data(), 1), 4);
  ASSERT_FALSE(clips.empty());
  const double s = predict(net, img, Head::kIB);
  EXPECT_GE(s, 0.0);
  EXPECT_LE(s, 1.0);
  EXPECT_EQ(s, predict(net, img, Head::kIB));
  const Activation x = to_batch(std::span<const LabeledImage>(&img, 1), net.profile().input_dims());
  const Matrix p = softmax_rows(classify(net.ib_classifier(), encode(net, x)));
  EXPECT_NEAR(p(0, 0) + p(0, 1), 1.0, 1e-15);
  EXPECT_THROW((void)predict(net, img, Head::kVB), UsageError);
  EXPECT_THROW((void)predict(net, clips[0], Head::kIB), UsageError);

  for (auto& g : net.groups({"theta_c", "theta_c_hat"})) {
    for (auto& q : g.params) q.param->value.setZero();
  }
  EXPECT_EQ(predict(net, img, Head::kIB), 0.5);
  EXPECT_EQ(predict(net, clips[0], Head::kVB), 0.5);

  Network image_only(tiny_profile(), Variant::kDib, 13);
  EXPECT_THROW((void)predict(image_only, clips[0], Head::kVB), UsageError);
}

TEST_F(TrainerTest, EvaluationSelectsHeadAndThresholdsOnValidation) {
  TrainConfig cfg = small_config();
  cfg.max_steps = 2;
  const TrainResult r = alternating_train(*protocol_, cfg, Variant::kFull);
  const Evaluation e = evaluate(r.network, *protocol_);
  ASSERT_TRUE(e.vb.has_value());
  EXPECT_EQ(e.selected, select_inference_head(e.ib.validation, e.vb->validation));
  EXPECT_EQ(e.ib.validation.tau, e.ib.target.tau);
  EXPECT_EQ(e.ib.target.n_live + e.ib.target.n_spoof, 8 * 8);
  EXPECT_EQ(e.vb->target.n_live + e.vb->target.n_spoof, 8 * 2);
}

}  // namespace
}  // namespace fasdg
