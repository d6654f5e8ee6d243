#include "support/fixtures.hpp"

#include <gtest/gtest.h>

namespace fasdg {
namespace {

TEST(Config, DefaultsAreThePublishedTrainingSettings) {
  const RunConfig c;
  EXPECT_EQ(c.train.learning_rate, 0.0003);
  EXPECT_EQ(c.train.momentum, 0.9);
  EXPECT_EQ(c.train.weight_decay, 1e-5);
  EXPECT_EQ(c.train.lambda_grl, -0.2);
  EXPECT_EQ(c.train.lambda_ib, 1.0);
  EXPECT_EQ(c.train.lambda_vb, 1.0);
  EXPECT_EQ(c.train.ib_per_domain, 16);
  EXPECT_EQ(c.train.vb_clips_per_domain, 2);
  EXPECT_EQ(c.train.sequence_length, 8);
  EXPECT_EQ(c.variant, Variant::kFull);
  EXPECT_NO_THROW(c.validate());
}

TEST(Config, ParsesKeysCommentsAndBlankLines) {
  const RunConfig c = parse_config(
      "# a run\n"
      "learning_rate = 0.01\n"
      "\n"
      "variant = lstm-dvb   # trailing comment\n"
      "presets = studio, cool-speckle, checker-blur\n"
      "target_domain=1\n");
  EXPECT_EQ(c.train.learning_rate, 0.01);
  EXPECT_EQ(c.variant, variant_from_string("lstm-dvb"));
  EXPECT_EQ(c.presets, (std::vector<std::string>{"studio", "cool-speckle", "checker-blur"}));
  EXPECT_EQ(c.target_domain, 1);
}

TEST(Config, UnknownKeyListsValidKeys) {
  try {
    (void)parse_config("learning_rat = 0.1\n");
    FAIL();
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("learning_rat"), std::string::npos);
    EXPECT_NE(msg.find("line 1"), std::string::npos);
    for (const auto& [k, _] : detail::config_keys()) EXPECT_NE(msg.find(k), std::string::npos) << k;
  }
}

TEST(Config, DuplicateKeyIsError) {
  try {
    (void)parse_config("seed = 1\nmomentum = 0.5\nseed = 2\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
}

TEST(Config, MalformedValuesAreErrors) {
  EXPECT_THROW((void)parse_config("n_videos = ten\n"), ConfigError);
  EXPECT_THROW((void)parse_config("momentum\n"), ConfigError);
  EXPECT_THROW((void)parse_config("profile = resnet18\n"), ConfigError);
  EXPECT_THROW((void)parse_config("presets = studio, mars\n"), ConfigError);
  EXPECT_THROW(parse_config("momentum = 1.0\n").validate(), ConfigError);
  EXPECT_THROW(parse_config("target_domain = 4\n").validate(), ConfigError);
}

TEST(Config, SerializeRoundTrips) {
  RunConfig c = parse_config("lambda_grl = -0.35\nablate_targets = 0,2\nseed = 99\nout = /tmp/x\n");
  const std::string text = serialize_config(c);
  const RunConfig back = parse_config(text);
  EXPECT_EQ(serialize_config(back), text);
  EXPECT_EQ(back.train.lambda_grl, -0.35);
  EXPECT_EQ(back.ablate_targets, (std::vector<int>{0, 2}));
  const std::string record = serialize_config(c, false);
  EXPECT_EQ(record.find("out ="), std::string::npos);
  EXPECT_EQ(config_hash(parse_config(record)), config_hash(c));
}

TEST(Config, HashIgnoresOutputLocationOnly) {
  RunConfig a;
  RunConfig b = a;
  b.out = "elsewhere";
  EXPECT_EQ(config_hash(a), config_hash(b));
  b.train.seed = 1;
  EXPECT_NE(config_hash(a), config_hash(b));
}

TEST(Config, GenerateOptionsFollowProfileAndSequenceLength) {
  const RunConfig c = parse_config("sequence_length = 4\nframes_per_video = 6\n");
  const GenerateOptions o = c.generate_options();
  EXPECT_EQ(o.height, 32);
  EXPECT_EQ(o.width, 32);
  EXPECT_EQ(o.frames_per_video, 6);
  EXPECT_EQ(o.sequence_length, 4);
}

}  // namespace
}  // namespace fasdg
