#ifndef FASDG_TRAINER_HPP_
#define FASDG_TRAINER_HPP_

#include "fasdg/grl.hpp"
#include "fasdg/metrics.hpp"
#include "fasdg/model.hpp"
#include "fasdg/objectives.hpp"
#include "fasdg/synthdata.hpp"

#include <json.hpp>

#include <chrono>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

namespace fasdg {

struct TrainConfig {
  double learning_rate = 0.0003;
  double momentum = 0.9;
  double weight_decay = 0.00001;
  double lambda_grl = -0.2;
  double lambda_ib = 1.0;
  double lambda_vb = 1.0;
  int ib_per_domain = 16;
  int vb_clips_per_domain = 2;
  int sequence_length = 8;
  int max_steps = 10000;
  std::uint64_t seed = 0;
  std::string profile = "tiny";
  int eval_every = 200;

  void validate() const {
    for (double v : {learning_rate, momentum, weight_decay, lambda_grl, lambda_ib, lambda_vb}) {
      if (!std::isfinite(v)) throw ConfigError("training rates must be finite");
    }
    if (learning_rate <= 0.0) throw ConfigError("learning_rate must be positive");
    if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("momentum must lie in [0, 1)");
    if (weight_decay < 0.0) throw ConfigError("weight_decay must be >= 0");
    if (lambda_ib < 0.0 || lambda_vb < 0.0) throw ConfigError("lambda_ib/lambda_vb must be >= 0");
    if (ib_per_domain < 1) throw ConfigError("ib_per_domain must be >= 1");
    if (vb_clips_per_domain < 1) throw ConfigError("vb_clips_per_domain must be >= 1");
    if (sequence_length < 1) throw ConfigError("sequence_length must be >= 1");
    if (max_steps < 0) throw ConfigError("max_steps must be >= 0");
    if (eval_every < 0) throw ConfigError("eval_every must be >= 0");
  }

  [[nodiscard]] LossWeights weights() const { return {lambda_ib, lambda_vb}; }
  [[nodiscard]] GrlConfig grl() const { return {lambda_grl}; }
};

/// Profile named by the config with the config's sequence length and the
/// number of source domains of the protocol.
inline ModelProfile resolve_profile(const TrainConfig& cfg, int num_domains) {
  ModelProfile p = profile_by_name(cfg.profile);
  p.sequence_length = cfg.sequence_length;
  p.num_domains = num_domains;
  return p;
}

enum class Head { kIB, kVB };

inline std::string to_string(Head h) { return h == Head::kIB ? "IB" : "VB"; }

// ---------------------------------------------------------------------------
// Optimiser

/// SGD with classical momentum; weight decay is folded into the gradient:
///   v <- mu v - lr (g + wd theta);  theta <- theta + v
class Sgd {
 public:
  Sgd(double lr, double momentum, double weight_decay)
      : lr_(lr), momentum_(momentum), weight_decay_(weight_decay) {}

  void step(const std::vector<ParamGroup>& groups) {
    for (const auto& g : groups) {
      for (const auto& np : g.params) update(np.name, *np.param);
    }
  }

  void update(const std::string& name, Parameter& p) {
    auto it = velocity_.find(name);
    if (it == velocity_.end()) {
      it = velocity_.emplace(name, Matrix::Zero(p.value.rows(), p.value.cols())).first;
    }
    Matrix& v = it->second;
    v = momentum_ * v - lr_ * (p.grad + weight_decay_ * p.value);
    p.value += v;
  }

  std::map<std::string, Matrix>& velocity() { return velocity_; }
  [[nodiscard]] const std::map<std::string, Matrix>& velocity() const { return velocity_; }

 private:
  double lr_;
  double momentum_;
  double weight_decay_;
  std::map<std::string, Matrix> velocity_;
};

// ---------------------------------------------------------------------------
// Batches

/// Image batch with discriminator labels (source index in [0, D)).
struct IbBatch {
  std::vector<LabeledImage> samples;
  std::vector<int> domain_labels;

  [[nodiscard]] std::vector<int> class_labels() const {
    std::vector<int> out;
    for (const auto& s : samples) out.push_back(s.class_label);
    return out;
  }
};

struct VbBatch {
  std::vector<VideoClip> clips;
  std::vector<int> domain_labels;

  [[nodiscard]] std::vector<int> class_labels() const {
    std::vector<int> out;
    for (const auto& c : clips) out.push_back(c.class_label);
    return out;
  }
};

/// Draws `per_domain` frames from every source, stratified by class (half
/// live, half spoof; an odd remainder picks its class at random), then
/// shuffles the batch. Frames of one class are drawn without replacement
/// while the pool allows it.
inline IbBatch compose_ib_batch(std::span<const SourceSplit> sources, int per_domain,
                                std::mt19937_64& rng) {
  if (per_domain < 1) throw ConfigError("per-domain batch count must be >= 1");
  if (sources.size() < 2) throw DataError("need at least 2 source domains");
  IbBatch batch;
  for (std::size_t d = 0; d < sources.size(); ++d) {
    std::array<std::vector<std::pair<int, int>>, 2> pool;  // (video, frame) per class
    for (std::size_t v = 0; v < sources[d].train.size(); ++v) {
      const Video& vid = sources[d].train[v];
      for (int f = 0; f < vid.length(); ++f) {
        pool[static_cast<std::size_t>(vid.class_label)].emplace_back(static_cast<int>(v), f);
      }
    }
    if (pool[0].empty() && pool[1].empty()) {
      throw DataError("source domain " + std::to_string(sources[d].domain_id) + " has no frames");
    }
    int n_live = per_domain / 2;
    if (per_domain % 2 == 1) n_live += std::bernoulli_distribution(0.5)(rng) ? 1 : 0;
    if (pool[0].empty()) n_live = 0;
    if (pool[1].empty()) n_live = per_domain;
    const std::array<int, 2> want{n_live, per_domain - n_live};
    for (std::size_t cls = 0; cls < 2; ++cls) {
      auto& p = pool[cls];
      for (int k = 0; k < want[cls]; ++k) {
        const auto kk = static_cast<std::size_t>(k);
        std::size_t pick = 0;
        if (kk < p.size()) {
          // partial Fisher-Yates
          std::swap(p[kk], p[std::uniform_int_distribution<std::size_t>(kk, p.size() - 1)(rng)]);
          pick = kk;
        } else {
          pick = std::uniform_int_distribution<std::size_t>(0, p.size() - 1)(rng);
        }
        const auto [v, f] = p[pick];
        batch.samples.push_back(sources[d].train[static_cast<std::size_t>(v)].frame(f));
        batch.domain_labels.push_back(static_cast<int>(d));
      }
    }
  }
  std::vector<std::size_t> order(batch.samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  IbBatch shuffled;
  for (std::size_t i : order) {
    shuffled.samples.push_back(std::move(batch.samples[i]));
    shuffled.domain_labels.push_back(batch.domain_labels[i]);
  }
  return shuffled;
}

/// `clips_per_domain` clips of `steps` contiguous frames per source,
/// alternating classes (a random class first). Videos shorter than `steps`
/// are skipped.
inline VbBatch compose_vb_batch(std::span<const SourceSplit> sources, int clips_per_domain,
                                int steps, std::mt19937_64& rng) {
  if (clips_per_domain < 1) throw ConfigError("clips per domain must be >= 1");
  if (sources.size() < 2) throw DataError("need at least 2 source domains");
  VbBatch batch;
  for (std::size_t d = 0; d < sources.size(); ++d) {
    std::array<std::vector<const Video*>, 2> usable;
    for (const auto& v : sources[d].train) {
      if (v.length() >= steps) usable[static_cast<std::size_t>(v.class_label)].push_back(&v);
    }
    if (usable[0].empty() && usable[1].empty()) {
      throw DataError("source domain " + std::to_string(sources[d].domain_id) +
                      " has no video with at least " + std::to_string(steps) + " frames");
    }
    int cls = std::bernoulli_distribution(0.5)(rng) ? 1 : 0;
    for (int k = 0; k < clips_per_domain; ++k, cls ^= 1) {
      const auto& pool = usable[static_cast<std::size_t>(cls)].empty()
                             ? usable[static_cast<std::size_t>(cls ^ 1)]
                             : usable[static_cast<std::size_t>(cls)];
      const Video& v =
          *pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng)];
      const int start = std::uniform_int_distribution<int>(0, v.length() - steps)(rng);
      VideoClip clip;
      clip.class_label = v.class_label;
      clip.domain_id = v.domain_id;
      for (int t = 0; t < steps; ++t) clip.frames.push_back(v.frame(start + t));
      batch.clips.push_back(std::move(clip));
      batch.domain_labels.push_back(static_cast<int>(d));
    }
  }
  return batch;
}

// ---------------------------------------------------------------------------
// Gradients and steps

namespace detail {

inline std::vector<int> gather(std::span<const int> values, const std::vector<int>& rows) {
  std::vector<int> out;
  out.reserve(rows.size());
  for (int r : rows) out.push_back(values[static_cast<std::size_t>(r)]);
  return out;
}

struct DomainBranch {
  double live_loss = 0.0;
  double spoof_loss = 0.0;
  Matrix grad;  // w.r.t. the discriminator input, before the GRL
};

inline DomainBranch run_ccdd(Ccdd& ccdd, const Matrix& features, std::span<const int> classes,
                             std::span<const int> domains, double weight) {
  const CcddOutput out = ccdd.forward(features, classes, Mode::kTrain);
  const auto live_dom = gather(domains, out.split.live_rows);
  const auto spoof_dom = gather(domains, out.split.spoof_rows);
  const CrossEntropy ce_l = softmax_cross_entropy(out.live_logits, live_dom);
  const CrossEntropy ce_s = softmax_cross_entropy(out.spoof_logits, spoof_dom);
  DomainBranch b;
  b.live_loss = ce_l.loss;
  b.spoof_loss = ce_s.loss;
  b.grad = ccdd.backward(weight * ce_l.grad, weight * ce_s.grad);
  return b;
}

inline void check_finite(const LossBreakdown& l, const std::vector<ParamGroup>& groups,
                         const char* which) {
  if (!std::isfinite(l.total)) {
    std::ostringstream os;
    os << which << " step: non-finite energy (L_c=" << l.class_loss
       << ", L_l=" << l.live_domain_loss << ", L_s=" << l.spoof_domain_loss << ")";
    throw NumericalError(os.str());
  }
  for (const auto& g : groups) {
    for (const auto& p : g.params) {
      if (!p.param->grad.allFinite()) {
        throw NumericalError(std::string(which) + " step: non-finite gradient in " + p.name);
      }
    }
  }
}

}  // namespace detail

inline std::vector<std::string> ib_group_names() {
  return {group::kEncoder,  group::kClassifier, group::kDibTrunk, group::kDibLive,
          group::kDibSpoof, group::kDisTrunk,   group::kDisHead};
}

inline std::vector<std::string> vb_group_names() {
  return {group::kEncoder,  group::kLstm,     group::kVbClassifier,
          group::kDvbTrunk, group::kDvbLive,  group::kDvbSpoof};
}

/// Zeroes the image-path gradients and fills them for one batch. The encoder
/// receives the classifier gradient plus lambda_GRL times the discriminator
/// gradient. For the unconditional discriminator its single loss is reported
/// in live_domain_loss.
inline LossBreakdown ib_gradients(Network& net, const IbBatch& batch, const TrainConfig& cfg) {
  auto groups = net.groups(ib_group_names());
  for (auto& g : groups) {
    for (auto& p : g.params) p.param->zero_grad();
  }
  const auto classes = batch.class_labels();
  const Activation x = to_batch(batch.samples, net.profile().input_dims());
  const Matrix emb = encode(net, x, Mode::kTrain);
  const Matrix logits = classify(net.ib_classifier(), emb, Mode::kTrain);
  const CrossEntropy ce = softmax_cross_entropy(logits, classes);
  Matrix d_emb = net.ib_classifier().backward(flat(ce.grad)).values;

  LossBreakdown l;
  l.class_loss = ce.loss;
  l.weight = cfg.lambda_ib;
  if (net.dib()) {
    const auto b = detail::run_ccdd(*net.dib(), grl_forward(emb, cfg.grl()), classes,
                                    batch.domain_labels, cfg.lambda_ib);
    l.live_domain_loss = b.live_loss;
    l.spoof_domain_loss = b.spoof_loss;
    d_emb += grl_backward(b.grad, cfg.grl());
  } else if (net.dis()) {
    const DisOutput out = net.dis()->forward(grl_forward(emb, cfg.grl()), Mode::kTrain);
    const CrossEntropy ce_d = softmax_cross_entropy(out.logits, batch.domain_labels);
    l.live_domain_loss = ce_d.loss;
    d_emb += grl_backward(net.dis()->backward(cfg.lambda_ib * ce_d.grad), cfg.grl());
  }
  l.total = ib_energy(l.class_loss, l.live_domain_loss, l.spoof_domain_loss, cfg.weights());
  net.encoder().backward(Activation{std::move(d_emb), Dims{net.profile().embedding_dim, 1, 1}});
  return l;
}

/// Video-path counterpart of ib_gradients.
inline LossBreakdown vb_gradients(Network& net, const VbBatch& batch, const TrainConfig& cfg) {
  if (!net.has_video_path()) throw UsageError("variant has no video-based network");
  auto groups = net.groups(vb_group_names());
  for (auto& g : groups) {
    for (auto& p : g.params) p.param->zero_grad();
  }
  const int steps = net.profile().sequence_length;
  const auto classes = batch.class_labels();
  const Activation x = to_sequence_batch(batch.clips, steps, net.profile().input_dims());
  const Matrix emb = encode(net, x, Mode::kTrain);
  const Matrix temporal = temporal_encode(*net.lstm(), emb, steps, Mode::kTrain);
  const Matrix logits = classify(*net.vb_classifier(), temporal, Mode::kTrain);
  const CrossEntropy ce = softmax_cross_entropy(logits, classes);
  Matrix d_temporal = net.vb_classifier()->backward(flat(ce.grad)).values;

  LossBreakdown l;
  l.class_loss = ce.loss;
  l.weight = cfg.lambda_vb;
  if (net.dvb()) {
    const auto b = detail::run_ccdd(*net.dvb(), grl_forward(temporal, cfg.grl()), classes,
                                    batch.domain_labels, cfg.lambda_vb);
    l.live_domain_loss = b.live_loss;
    l.spoof_domain_loss = b.spoof_loss;
    d_temporal += grl_backward(b.grad, cfg.grl());
  }
  l.total = vb_energy(l.class_loss, l.live_domain_loss, l.spoof_domain_loss, cfg.weights());
  Matrix d_emb = net.lstm()->backward(d_temporal);
  net.encoder().backward(Activation{std::move(d_emb), Dims{net.profile().embedding_dim, 1, 1}});
  return l;
}

/// One image-path update; returns the losses before the update.
inline LossBreakdown ib_step(Network& net, Sgd& opt, const IbBatch& batch, const TrainConfig& cfg) {
  const LossBreakdown l = ib_gradients(net, batch, cfg);
  const auto groups = net.groups(ib_group_names());
  detail::check_finite(l, groups, "IB");
  opt.step(groups);
  return l;
}

/// One video-path update; returns the losses before the update.
inline LossBreakdown vb_step(Network& net, Sgd& opt, const VbBatch& batch, const TrainConfig& cfg) {
  const LossBreakdown l = vb_gradients(net, batch, cfg);
  const auto groups = net.groups(vb_group_names());
  detail::check_finite(l, groups, "VB");
  opt.step(groups);
  return l;
}

// ---------------------------------------------------------------------------
// Scoring

/// Live probability of every frame, image head, eval mode.
inline std::vector<ScoredSample> score_frames(const Network& net, std::span<const Video> videos) {
  std::vector<ScoredSample> out;
  constexpr std::size_t kChunk = 64;
  std::vector<const Image*> ptrs;
  std::vector<int> labels;
  auto flush = [&] {
    if (ptrs.empty()) return;
    const Activation x = to_batch(std::span<const Image* const>(ptrs), net.profile().input_dims());
    const Matrix p = softmax_rows(classify(net.ib_classifier(), encode(net, x)));
    for (std::size_t i = 0; i < ptrs.size(); ++i) {
      out.push_back({p(static_cast<Eigen::Index>(i), 0), labels[i]});
    }
    ptrs.clear();
    labels.clear();
  };
  for (const auto& v : videos) {
    for (const auto& f : v.frames) {
      ptrs.push_back(&f);
      labels.push_back(v.class_label);
      if (ptrs.size() == kChunk) flush();
    }
  }
  flush();
  return out;
}

/// Non-overlapping clips of T frames from every video, in order.
inline std::vector<VideoClip> split_into_clips(std::span<const Video> videos, int steps) {
  std::vector<VideoClip> clips;
  for (const auto& v : videos) {
    for (int start = 0; start + steps <= v.length(); start += steps) {
      VideoClip c;
      c.class_label = v.class_label;
      c.domain_id = v.domain_id;
      for (int t = 0; t < steps; ++t) c.frames.push_back(v.frame(start + t));
      clips.push_back(std::move(c));
    }
  }
  return clips;
}

inline Matrix vb_logits(const Network& net, std::span<const VideoClip> clips) {
  const int steps = net.profile().sequence_length;
  const Activation x = to_sequence_batch(clips, steps, net.profile().input_dims());
  return classify(*net.vb_classifier(), net.lstm()->infer(encode(net, x)));
}

/// Live probability of every clip, video head, eval mode.
inline std::vector<ScoredSample> score_clips(const Network& net, std::span<const Video> videos) {
  if (!net.has_video_path()) throw UsageError("variant has no video-based network");
  const auto clips = split_into_clips(videos, net.profile().sequence_length);
  std::vector<ScoredSample> out;
  constexpr std::size_t kChunk = 16;
  for (std::size_t i = 0; i < clips.size(); i += kChunk) {
    const std::size_t n = std::min(kChunk, clips.size() - i);
    const std::span<const VideoClip> part(clips.data() + i, n);
    const Matrix p = softmax_rows(vb_logits(net, part));
    for (std::size_t k = 0; k < n; ++k) {
      out.push_back({p(static_cast<Eigen::Index>(k), 0), part[k].class_label});
    }
  }
  return out;
}

using Sample = std::variant<LabeledImage, VideoClip>;

/// Live probability of one image (IB head) or one clip (VB head).
inline double predict(const Network& net, const Sample& input, Head head) {
  if (head == Head::kIB) {
    const auto* img = std::get_if<LabeledImage>(&input);
    if (!img) throw UsageError("the IB head scores single images, got a clip");
    const Activation x = to_batch(std::span<const LabeledImage>(img, 1), net.profile().input_dims());
    return softmax_rows(classify(net.ib_classifier(), encode(net, x)))(0, 0);
  }
  const auto* clip = std::get_if<VideoClip>(&input);
  if (!clip) throw UsageError("the VB head scores clips, got a single image");
  if (!net.has_video_path()) throw UsageError("variant has no video-based network");
  validate(*clip, net.profile().sequence_length);
  return softmax_rows(vb_logits(net, std::span<const VideoClip>(clip, 1)))(0, 0);
}

/// Lower validation HTER wins; an exact tie goes to the video head.
inline Head select_inference_head(const std::optional<MetricReport>& val_ib,
                                  const std::optional<MetricReport>& val_vb) {
  if (!val_ib || !val_vb) throw UsageError("head selection needs both validation reports");
  return val_ib->hter < val_vb->hter ? Head::kIB : Head::kVB;
}

inline std::vector<Video> all_validation(const DgProtocol& p) {
  std::vector<Video> out;
  for (const auto& s : p.sources) out.insert(out.end(), s.validation.begin(), s.validation.end());
  return out;
}

/// Per-head evaluation: threshold at the validation EER, reports on both
/// validation (self-thresholded) and the target test split.
struct HeadEvaluation {
  MetricReport validation;
  MetricReport target;
};

struct Evaluation {
  HeadEvaluation ib;
  std::optional<HeadEvaluation> vb;
  Head selected = Head::kIB;

  [[nodiscard]] const MetricReport& selected_target() const {
    return selected == Head::kIB ? ib.target : vb->target;
  }
};

inline HeadEvaluation evaluate_head(const std::vector<ScoredSample>& val,
                                    const std::vector<ScoredSample>& test) {
  return {evaluate_scores(val, val), evaluate_scores(val, test)};
}

inline Evaluation evaluate(const Network& net, const DgProtocol& p) {
  if (p.target_test.empty()) throw DataError("target test split is empty");
  const auto val = all_validation(p);
  Evaluation e;
  e.ib = evaluate_head(score_frames(net, val), score_frames(net, p.target_test));
  if (net.has_video_path()) {
    e.vb = evaluate_head(score_clips(net, val), score_clips(net, p.target_test));
    e.selected = select_inference_head(e.ib.validation, e.vb->validation);
  }
  return e;
}

/// Validation-only scores for model selection during training.
inline double validation_hter(const Network& net, const DgProtocol& p, Head* chosen = nullptr) {
  const auto val = all_validation(p);
  const auto f = score_frames(net, val);
  MetricReport ib = evaluate_scores(f, f);
  Head h = Head::kIB;
  double best = ib.hter;
  if (net.has_video_path()) {
    const auto c = score_clips(net, val);
    MetricReport vb = evaluate_scores(c, c);
    h = select_inference_head(ib, vb);
    best = h == Head::kIB ? ib.hter : vb.hter;
  }
  if (chosen) *chosen = h;
  return best;
}

// ---------------------------------------------------------------------------
// Training loop

struct StepRecord {
  int step = 0;
  Head network = Head::kIB;
  LossBreakdown losses;
  double wall_seconds = 0.0;
};

struct ValidationRecord {
  int step = 0;
  double hter = 0.0;
  Head head = Head::kIB;
};

struct TrainHistory {
  std::vector<StepRecord> steps;
  std::vector<ValidationRecord> validations;

  /// One JSON object per line: step, network, L_c, L_l, L_s, total. Wall time
  /// is not serialised so the file is reproducible.
  [[nodiscard]] std::string to_ndjson() const {
    std::string out;
    for (const auto& r : steps) {
      nlohmann::json j = {{"step", r.step},
                          {"network", to_string(r.network)},
                          {"L_c", r.losses.class_loss},
                          {"L_l", r.losses.live_domain_loss},
                          {"L_s", r.losses.spoof_domain_loss},
                          {"total", r.losses.total}};
      out += j.dump() + "\n";
    }
    return out;
  }
};

/// Owns all mutable training state so it can be checkpointed and resumed.
class Trainer {
 public:
  Trainer(const DgProtocol& protocol, TrainConfig cfg, Variant variant)
      : protocol_(&protocol),
        cfg_(std::move(cfg)),
        net_((cfg_.validate(), resolve_profile(cfg_, protocol.num_sources())), variant, cfg_.seed),
        opt_(cfg_.learning_rate, cfg_.momentum, cfg_.weight_decay),
        rng_(cfg_.seed ^ 0xba7c4ULL) {}

  using Callback = std::function<void(const Trainer&)>;

  /// Steps until max_steps. The network alternates IB, VB, IB, ... when the
  /// variant has a video path and runs IB only otherwise. `on_eval` fires
  /// after each periodic validation.
  void run(const Callback& on_eval = {}) {
    const auto t0 = std::chrono::steady_clock::now();
    while (step_ < cfg_.max_steps) {
      const bool video = net_.has_video_path() && step_ % 2 == 1;
      StepRecord rec;
      rec.step = step_;
      rec.network = video ? Head::kVB : Head::kIB;
      if (video) {
        const VbBatch b = compose_vb_batch(protocol_->sources, cfg_.vb_clips_per_domain,
                                           net_.profile().sequence_length, rng_);
        rec.losses = vb_step(net_, opt_, b, cfg_);
      } else {
        const IbBatch b = compose_ib_batch(protocol_->sources, cfg_.ib_per_domain, rng_);
        rec.losses = ib_step(net_, opt_, b, cfg_);
      }
      rec.wall_seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      history_.steps.push_back(rec);
      ++step_;
      const bool eval_now =
          cfg_.eval_every > 0 && (step_ % cfg_.eval_every == 0 || step_ == cfg_.max_steps);
      if (eval_now) {
        validate_now();
        if (on_eval) on_eval(*this);
      }
    }
  }

  [[nodiscard]] const TrainConfig& config() const { return cfg_; }
  Network& network() { return net_; }
  [[nodiscard]] const Network& network() const { return net_; }
  [[nodiscard]] const std::optional<Network>& best() const { return best_; }
  [[nodiscard]] double best_hter() const { return best_hter_; }
  [[nodiscard]] const TrainHistory& history() const { return history_; }
  [[nodiscard]] int step() const { return step_; }
  Sgd& optimizer() { return opt_; }
  [[nodiscard]] const Sgd& optimizer() const { return opt_; }
  std::mt19937_64& rng() { return rng_; }
  [[nodiscard]] const std::mt19937_64& rng() const { return rng_; }

  /// Restores loop state from a checkpoint.
  void restore(int step, TrainHistory history, const std::mt19937_64& rng) {
    step_ = step;
    history_ = std::move(history);
    rng_ = rng;
  }

  /// Reinstates the best-so-far network of an interrupted run.
  void restore_best(Network best, double hter) {
    best_ = std::move(best);
    best_hter_ = hter;
  }

 private:
  void validate_now() {
    Head h = Head::kIB;
    const double v = validation_hter(net_, *protocol_, &h);
    history_.validations.push_back({step_, v, h});
    if (!best_ || v <= best_hter_) {
      best_hter_ = v;
      best_ = net_;
    }
  }

  const DgProtocol* protocol_;
  TrainConfig cfg_;
  Network net_;
  Sgd opt_;
  std::mt19937_64 rng_;
  TrainHistory history_;
  int step_ = 0;
  std::optional<Network> best_;
  double best_hter_ = 1.0;
};

struct TrainResult {
  Network network;
  TrainHistory history;
};

inline TrainResult alternating_train(const DgProtocol& protocol, const TrainConfig& cfg,
                                     Variant variant) {
  if (protocol.num_sources() < 2) throw DataError("need at least 2 source domains");
  Trainer t(protocol, cfg, variant);
  t.run();
  return {t.network(), t.history()};
}

}  // namespace fasdg

#endif  // FASDG_TRAINER_HPP_
