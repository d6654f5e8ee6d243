#ifndef FASDG_MODEL_HPP_
#define FASDG_MODEL_HPP_

#include "fasdg/data.hpp"
#include "fasdg/discriminators.hpp"
#include "fasdg/lstm.hpp"
#include "fasdg/profile.hpp"

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace fasdg {

/// Model variants: the component grid of the ablation plus the arm that swaps
/// the class-conditional discriminator for the unconditional one.
enum class Variant { kBackbone, kDib, kLstm, kLstmDvb, kDibLstm, kFull, kDis };

inline constexpr std::array<Variant, 7> kAllVariants = {
    Variant::kBackbone, Variant::kDib,  Variant::kLstm, Variant::kLstmDvb,
    Variant::kDibLstm,  Variant::kFull, Variant::kDis};

inline std::string to_string(Variant v) {
  switch (v) {
    case Variant::kBackbone: return "backbone";
    case Variant::kDib: return "dib";
    case Variant::kLstm: return "lstm";
    case Variant::kLstmDvb: return "lstm-dvb";
    case Variant::kDibLstm: return "dib-lstm";
    case Variant::kFull: return "full";
    case Variant::kDis: return "dis";
  }
  return "?";
}

inline Variant variant_from_string(const std::string& s) {
  for (Variant v : kAllVariants) {
    if (to_string(v) == s) return v;
  }
  if (s == "backbone-only") return Variant::kBackbone;
  if (s == "dis-instead-of-dib") return Variant::kDis;
  throw ConfigError("unknown variant '" + s +
                    "' (valid: backbone, dib, lstm, lstm-dvb, dib-lstm, full, dis)");
}

struct VariantComponents {
  bool dib = false;
  bool dis = false;
  bool lstm = false;
  bool dvb = false;
};

inline VariantComponents components(Variant v) {
  switch (v) {
    case Variant::kBackbone: return {};
    case Variant::kDib: return {true, false, false, false};
    case Variant::kLstm: return {false, false, true, false};
    case Variant::kLstmDvb: return {false, false, true, true};
    case Variant::kDibLstm: return {true, false, true, false};
    case Variant::kFull: return {true, false, true, true};
    case Variant::kDis: return {false, true, false, false};
  }
  return {};
}

/// Human-readable component row, e.g. "ResNet+DIB+LSTM".
inline std::string component_label(Variant v) {
  const auto c = components(v);
  std::string s = "ResNet";
  if (c.dis) s += "+Dis";
  if (c.dib) s += "+DIB";
  if (c.lstm) s += "+LSTM";
  if (c.dvb) s += "+DVB";
  return s;
}

/// A parameter with its fully qualified name.
struct NamedParameter {
  std::string name;
  Parameter* param = nullptr;
};

struct ParamGroup {
  std::string name;
  std::vector<NamedParameter> params;
};

namespace group {
inline constexpr const char* kEncoder = "theta_e";
inline constexpr const char* kClassifier = "theta_c";
inline constexpr const char* kDibTrunk = "theta_f";
inline constexpr const char* kDibLive = "theta_l";
inline constexpr const char* kDibSpoof = "theta_s";
inline constexpr const char* kLstm = "theta_r_hat";
inline constexpr const char* kVbClassifier = "theta_c_hat";
inline constexpr const char* kDvbTrunk = "theta_f_hat";
inline constexpr const char* kDvbLive = "theta_l_hat";
inline constexpr const char* kDvbSpoof = "theta_s_hat";
inline constexpr const char* kDisTrunk = "dis_f";
inline constexpr const char* kDisHead = "dis_d";
}  // namespace group

inline Sequential build_encoder(const ModelProfile& p) {
  Sequential enc;
  int channels = p.input_channels;
  for (std::size_t i = 0; i < p.stages.size(); ++i) {
    const auto& st = p.stages[i];
    const std::string id = std::to_string(i + 1);
    enc.add<Conv2d>("conv" + id, channels, st.out_channels, st.kernel, st.stride);
    enc.add<Relu>("relu" + id);
    channels = st.out_channels;
    if (st.residual) {
      Sequential body;
      body.add<Conv2d>("conv_a", channels, channels, 3);
      body.add<Relu>("relu_a");
      body.add<Conv2d>("conv_b", channels, channels, 3);
      enc.add<Residual>("res" + id, std::move(body));
      enc.add<Relu>("res_relu" + id);
    }
    if (st.pool) enc.add<MaxPool2d>("pool" + id, 2);
  }
  enc.add<GlobalAvgPool>("gap");
  enc.add<Linear>("proj", channels, p.embedding_dim);
  return enc;
}

/// FC(in->hidden) ReLU Dropout FC(hidden->2).
inline Sequential build_classifier(int in, int hidden, double dropout) {
  Sequential c;
  c.add<Linear>("fc1", in, hidden);
  c.add<Relu>("relu1");
  c.add<Dropout>("drop1", dropout);
  c.add<Linear>("fc2", hidden, 2);
  return c;
}

/// Encoder, image and video classifiers, and whichever discriminators the
/// variant includes. The encoder is a single instance used by both paths.
class Network {
 public:
  Network(ModelProfile profile, Variant variant, std::uint64_t seed)
      : profile_(std::move(profile)), variant_(variant), seed_(seed) {
    profile_.validate();
    encoder_ = build_encoder(profile_);
    (void)encoder_.output_dims(profile_.input_dims());
    ib_classifier_ = build_classifier(profile_.embedding_dim, profile_.classifier_hidden,
                                      profile_.dropout);
    const auto c = components(variant_);
    const int e = profile_.embedding_dim;
    const int d = profile_.num_domains;
    if (c.dib) dib_.emplace(e, profile_.discriminator_hidden, d, profile_.dropout);
    if (c.dis) dis_.emplace(e, profile_.discriminator_hidden, d, profile_.dropout);
    if (c.lstm) {
      lstm_.emplace(e, profile_.lstm_hidden, profile_.sequence_length);
      vb_classifier_ = build_classifier(profile_.temporal_width(), profile_.classifier_hidden,
                                        profile_.dropout);
    }
    if (c.dvb) {
      dvb_.emplace(profile_.temporal_width(), profile_.discriminator_hidden, d, profile_.dropout);
    }
    initialize();
  }

  [[nodiscard]] const ModelProfile& profile() const { return profile_; }
  [[nodiscard]] Variant variant() const { return variant_; }
  [[nodiscard]] std::uint64_t seed() const { return seed_; }
  [[nodiscard]] bool has_video_path() const { return lstm_.has_value(); }

  Sequential& encoder() { return encoder_; }
  [[nodiscard]] const Sequential& encoder() const { return encoder_; }
  Sequential& ib_classifier() { return ib_classifier_; }
  [[nodiscard]] const Sequential& ib_classifier() const { return ib_classifier_; }
  std::optional<Ccdd>& dib() { return dib_; }
  [[nodiscard]] const std::optional<Ccdd>& dib() const { return dib_; }
  std::optional<DomainDiscriminator>& dis() { return dis_; }
  [[nodiscard]] const std::optional<DomainDiscriminator>& dis() const { return dis_; }
  std::optional<Lstm>& lstm() { return lstm_; }
  [[nodiscard]] const std::optional<Lstm>& lstm() const { return lstm_; }
  std::optional<Sequential>& vb_classifier() { return vb_classifier_; }
  [[nodiscard]] const std::optional<Sequential>& vb_classifier() const { return vb_classifier_; }
  std::optional<Ccdd>& dvb() { return dvb_; }
  [[nodiscard]] const std::optional<Ccdd>& dvb() const { return dvb_; }

  /// Every parameter group present in this variant, in a fixed order.
  std::vector<ParamGroup> param_groups() {
    std::vector<ParamGroup> out;
    add_group(out, group::kEncoder, encoder_);
    add_group(out, group::kClassifier, ib_classifier_);
    if (dib_) {
      add_group(out, group::kDibTrunk, dib_->trunk());
      add_linear(out, group::kDibLive, "live_head", dib_->live_head());
      add_linear(out, group::kDibSpoof, "spoof_head", dib_->spoof_head());
    }
    if (dis_) {
      add_group(out, group::kDisTrunk, dis_->trunk());
      add_linear(out, group::kDisHead, "head", dis_->head());
    }
    if (lstm_) {
      ParamGroup g{group::kLstm, {}};
      for (Parameter* p : lstm_->parameters()) {
        g.params.push_back({std::string(group::kLstm) + ".lstm." + p->name, p});
      }
      out.push_back(std::move(g));
      add_group(out, group::kVbClassifier, *vb_classifier_);
    }
    if (dvb_) {
      add_group(out, group::kDvbTrunk, dvb_->trunk());
      add_linear(out, group::kDvbLive, "live_head", dvb_->live_head());
      add_linear(out, group::kDvbSpoof, "spoof_head", dvb_->spoof_head());
    }
    return out;
  }

  /// Groups selected by name; unknown names are ignored.
  std::vector<ParamGroup> groups(const std::vector<std::string>& names) {
    std::vector<ParamGroup> out;
    for (auto& g : param_groups()) {
      for (const auto& n : names) {
        if (g.name == n) out.push_back(g);
      }
    }
    return out;
  }

  std::vector<NamedParameter> all_parameters() {
    std::vector<NamedParameter> out;
    for (auto& g : param_groups()) {
      for (auto& p : g.params) out.push_back(p);
    }
    return out;
  }

  [[nodiscard]] std::size_t parameter_count() {
    std::size_t n = 0;
    for (auto& p : all_parameters()) n += static_cast<std::size_t>(p.param->size());
    return n;
  }

  void zero_grad() {
    for (auto& p : all_parameters()) p.param->zero_grad();
  }

  /// Dropout streams keyed by owning component, in a fixed order.
  std::vector<std::pair<std::string, std::mt19937_64*>> rng_engines() {
    std::vector<std::pair<std::string, std::mt19937_64*>> out;
    auto add = [&out](const std::string& prefix, Sequential& s) {
      auto engines = s.rng_engines();
      for (std::size_t i = 0; i < engines.size(); ++i) {
        out.emplace_back(prefix + "#" + std::to_string(i), engines[i]);
      }
    };
    add(group::kEncoder, encoder_);
    add(group::kClassifier, ib_classifier_);
    if (dib_) add(group::kDibTrunk, dib_->trunk());
    if (dis_) add(group::kDisTrunk, dis_->trunk());
    if (vb_classifier_) add(group::kVbClassifier, *vb_classifier_);
    if (dvb_) add(group::kDvbTrunk, dvb_->trunk());
    return out;
  }

  /// Resets every dropout stream to its seed-derived start.
  void reseed_dropout() {
    for (auto& [name, engine] : rng_engines()) engine->seed(fnv1a(name, seed_ ^ 0x5eedULL));
  }

 private:
  // Each component draws from its own stream, so a component's initial
  // weights do not depend on which other components the variant has.
  void initialize() {
    auto rng_for = [this](const char* name) { return std::mt19937_64(fnv1a(name, seed_)); };
    auto r = rng_for(group::kEncoder);
    encoder_.initialize(r);
    r = rng_for(group::kClassifier);
    ib_classifier_.initialize(r);
    if (dib_) {
      r = rng_for(group::kDibTrunk);
      dib_->initialize(r);
    }
    if (dis_) {
      r = rng_for(group::kDisTrunk);
      dis_->initialize(r);
    }
    if (lstm_) {
      r = rng_for(group::kLstm);
      lstm_->initialize(r);
      r = rng_for(group::kVbClassifier);
      vb_classifier_->initialize(r);
    }
    if (dvb_) {
      r = rng_for(group::kDvbTrunk);
      dvb_->initialize(r);
    }
    reseed_dropout();
  }

  static void add_group(std::vector<ParamGroup>& out, const char* name, Sequential& s) {
    ParamGroup g{name, {}};
    auto names = s.parameter_names();
    auto params = s.parameters();
    for (std::size_t i = 0; i < params.size(); ++i) {
      g.params.push_back({std::string(name) + "." + names[i], params[i]});
    }
    out.push_back(std::move(g));
  }

  static void add_linear(std::vector<ParamGroup>& out, const char* name, const char* layer,
                         Linear& l) {
    ParamGroup g{name, {}};
    for (Parameter* p : l.parameters()) {
      g.params.push_back({std::string(name) + "." + layer + "." + p->name, p});
    }
    out.push_back(std::move(g));
  }

  ModelProfile profile_;
  Variant variant_;
  std::uint64_t seed_;
  Sequential encoder_;
  Sequential ib_classifier_;
  std::optional<Ccdd> dib_;
  std::optional<DomainDiscriminator> dis_;
  std::optional<Lstm> lstm_;
  std::optional<Sequential> vb_classifier_;
  std::optional<Ccdd> dvb_;
};

/// Encoder forward. Eval mode runs the stateless path; train mode records
/// activations for a subsequent backward.
inline Matrix encode(Network& net, const Activation& images, Mode mode) {
  require_shape(images.dims == net.profile().input_dims(), "encoder input",
                to_string(net.profile().input_dims()), to_string(images.dims));
  if (mode == Mode::kEval) return net.encoder().infer(images).values;
  return net.encoder().forward(images, mode).values;
}

inline Matrix encode(const Network& net, const Activation& images) {
  require_shape(images.dims == net.profile().input_dims(), "encoder input",
                to_string(net.profile().input_dims()), to_string(images.dims));
  return net.encoder().infer(images).values;
}

/// FC -> ReLU -> Dropout -> FC; yields N x 2 logits.
inline Matrix classify(Sequential& classifier, const Matrix& emb, Mode mode) {
  const auto& first = dynamic_cast<const Linear&>(classifier.layer(0));
  require_shape(emb.cols() == first.in_features(), "classifier input width",
                std::to_string(first.in_features()), std::to_string(emb.cols()));
  if (mode == Mode::kEval) return classifier.infer(flat(emb)).values;
  return classifier.forward(flat(emb), mode).values;
}

inline Matrix classify(const Sequential& classifier, const Matrix& emb) {
  const auto& first = dynamic_cast<const Linear&>(classifier.layer(0));
  require_shape(emb.cols() == first.in_features(), "classifier input width",
                std::to_string(first.in_features()), std::to_string(emb.cols()));
  return classifier.infer(flat(emb)).values;
}

/// T*B x E time-major embeddings in, B x (T*H_r) concatenated states out.
inline Matrix temporal_encode(Lstm& lstm, const Matrix& seq, int steps, Mode mode) {
  require_shape(steps == lstm.steps(), "sequence length", std::to_string(lstm.steps()),
                std::to_string(steps));
  require_shape(seq.cols() == lstm.input_size(), "temporal input width",
                std::to_string(lstm.input_size()), std::to_string(seq.cols()));
  if (mode == Mode::kEval) return lstm.infer(seq);
  return lstm.forward(seq);
}

}  // namespace fasdg

#endif  // FASDG_MODEL_HPP_
