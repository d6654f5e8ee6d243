#ifndef FASDG_PROFILE_HPP_
#define FASDG_PROFILE_HPP_

#include "fasdg/core.hpp"

#include <string>
#include <vector>

namespace fasdg {

/// One convolutional stage of the encoder: conv(kernel, stride) -> ReLU,
/// optionally followed by a residual basic block and a 2x2 max pool.
struct ConvStage {
  int out_channels = 8;
  int kernel = 3;
  int stride = 1;
  bool residual = false;
  bool pool = true;
};

/// Every width in the model is derived from the profile.
struct ModelProfile {
  std::string name = "tiny";
  int input_height = 32;
  int input_width = 32;
  int input_channels = 3;
  std::vector<ConvStage> stages;
  int embedding_dim = 64;
  int lstm_hidden = 8;
  int sequence_length = 4;
  int classifier_hidden = 32;
  int discriminator_hidden = 32;
  int num_domains = 3;
  double dropout = 0.5;

  /// Width the video-based classifier and discriminator consume.
  [[nodiscard]] int temporal_width() const { return sequence_length * lstm_hidden; }

  [[nodiscard]] Dims input_dims() const { return Dims{input_channels, input_height, input_width}; }

  void validate() const {
    if (input_height < 4 || input_width < 4 || input_channels < 1) {
      throw ConfigError("profile " + name + ": input must be at least 4x4 with >= 1 channel");
    }
    if (stages.empty()) throw ConfigError("profile " + name + ": needs at least one conv stage");
    if (embedding_dim < 1 || lstm_hidden < 1 || sequence_length < 1 || classifier_hidden < 1 ||
        discriminator_hidden < 1) {
      throw ConfigError("profile " + name + ": widths must be positive");
    }
    if (num_domains < 2) throw ConfigError("profile " + name + ": need at least 2 source domains");
    if (!(dropout >= 0.0 && dropout < 1.0)) {
      throw ConfigError("profile " + name + ": dropout must lie in [0, 1)");
    }
  }
};

/// Desk-scale profile: 32x32 input, three conv blocks, E=64, H_r=8, T=4.
inline ModelProfile tiny_profile() {
  ModelProfile p;
  p.name = "tiny";
  p.stages = {ConvStage{8, 3, 1, false, true}, ConvStage{16, 3, 1, false, true},
              ConvStage{16, 3, 1, false, true}};
  return p;
}

/// Mirrors the published interface widths: 224x224 input, a residual conv
/// stack ending in a 2048-d embedding, LSTM hidden 256 over 8 steps, a 512-wide
/// classifier and a 1024-wide discriminator trunk.
inline ModelProfile resnet50_shaped_profile() {
  ModelProfile p;
  p.name = "resnet50-shaped";
  p.input_height = 224;
  p.input_width = 224;
  p.stages = {ConvStage{16, 3, 2, false, true}, ConvStage{32, 3, 2, true, false},
              ConvStage{64, 3, 2, true, false}, ConvStage{128, 3, 2, true, false}};
  p.embedding_dim = 2048;
  p.lstm_hidden = 256;
  p.sequence_length = 8;
  p.classifier_hidden = 512;
  p.discriminator_hidden = 1024;
  return p;
}

inline std::vector<std::string> profile_names() { return {"tiny", "resnet50-shaped"}; }

inline ModelProfile profile_by_name(const std::string& name) {
  if (name == "tiny") return tiny_profile();
  if (name == "resnet50-shaped") return resnet50_shaped_profile();
  throw ConfigError("unknown profile '" + name + "' (valid: tiny, resnet50-shaped)");
}

}  // namespace fasdg

#endif  // FASDG_PROFILE_HPP_
