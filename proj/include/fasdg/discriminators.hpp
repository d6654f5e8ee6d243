#ifndef FASDG_DISCRIMINATORS_HPP_
#define FASDG_DISCRIMINATORS_HPP_

#include "fasdg/layers.hpp"

#include <span>
#include <string>
#include <vector>

namespace fasdg {

/// Row-wise softmax, max-shifted.
[[nodiscard]] inline Matrix softmax_rows(const Matrix& logits) {
  Matrix p(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double m = logits.row(r).maxCoeff();
    p.row(r) = (logits.row(r).array() - m).exp().matrix();
    p.row(r) /= p.row(r).sum();
  }
  return p;
}

/// Softmax distributions over the source domains, one row per sample.
struct DomainScores {
  Matrix values;

  [[nodiscard]] int rows() const { return static_cast<int>(values.rows()); }
  [[nodiscard]] int num_domains() const { return static_cast<int>(values.cols()); }
};

/// Batch rows partitioned by class label, each list in batch order.
struct SplitIndex {
  std::vector<int> live_rows;
  std::vector<int> spoof_rows;
};

[[nodiscard]] inline SplitIndex split_by_class(std::span<const int> class_labels) {
  SplitIndex s;
  for (std::size_t i = 0; i < class_labels.size(); ++i) {
    if (class_labels[i] == 0) {
      s.live_rows.push_back(static_cast<int>(i));
    } else if (class_labels[i] == 1) {
      s.spoof_rows.push_back(static_cast<int>(i));
    } else {
      throw DataError("class label must be 0 or 1, got " + std::to_string(class_labels[i]));
    }
  }
  return s;
}

/// Scatters the per-split rows back into batch order.
[[nodiscard]] inline Matrix merge_split(const Matrix& live, const Matrix& spoof,
                                        const SplitIndex& split) {
  const Eigen::Index cols = live.rows() > 0 ? live.cols() : spoof.cols();
  Matrix out(static_cast<Eigen::Index>(split.live_rows.size() + split.spoof_rows.size()), cols);
  for (std::size_t i = 0; i < split.live_rows.size(); ++i) {
    out.row(split.live_rows[i]) = live.row(static_cast<Eigen::Index>(i));
  }
  for (std::size_t i = 0; i < split.spoof_rows.size(); ++i) {
    out.row(split.spoof_rows[i]) = spoof.row(static_cast<Eigen::Index>(i));
  }
  return out;
}

/// FC(in->hidden) ReLU Dropout FC(hidden->hidden) ReLU Dropout.
inline Sequential make_discriminator_trunk(int in, int hidden, double dropout) {
  Sequential trunk;
  trunk.add<Linear>("fc1", in, hidden);
  trunk.add<Relu>("relu1");
  trunk.add<Dropout>("drop1", dropout);
  trunk.add<Linear>("fc2", hidden, hidden);
  trunk.add<Relu>("relu2");
  trunk.add<Dropout>("drop2", dropout);
  return trunk;
}

struct CcddOutput {
  DomainScores live;
  DomainScores spoof;
  Matrix live_logits;
  Matrix spoof_logits;
  SplitIndex split;
};

/// Class-conditional domain discriminator: a shared two-layer trunk whose
/// output is split by class label and routed to a live head or a spoof head.
///
/// Live rows are placed ahead of spoof rows before the trunk runs, so each
/// head's output depends only on the rows of its own class.
class Ccdd {
 public:
  Ccdd(int in, int hidden, int num_domains, double dropout)
      : in_(in),
        trunk_(make_discriminator_trunk(in, hidden, dropout)),
        live_head_(hidden, num_domains),
        spoof_head_(hidden, num_domains) {}

  [[nodiscard]] int in_features() const { return in_; }
  [[nodiscard]] int num_domains() const { return live_head_.out_features(); }
  Sequential& trunk() { return trunk_; }
  Linear& live_head() { return live_head_; }
  Linear& spoof_head() { return spoof_head_; }

  void initialize(std::mt19937_64& rng) {
    trunk_.initialize(rng);
    live_head_.initialize(rng);
    spoof_head_.initialize(rng);
  }

  CcddOutput forward(const Matrix& emb, std::span<const int> class_labels, Mode mode) {
    auto [stacked, split] = stack(emb, class_labels);
    const Activation h = trunk_.forward(flat(std::move(stacked)), mode);
    const auto nl = static_cast<Eigen::Index>(split.live_rows.size());
    const auto ns = static_cast<Eigen::Index>(split.spoof_rows.size());
    split_ = split;
    CcddOutput out;
    out.live_logits = live_head_.forward(flat(h.values.topRows(nl)), mode).values;
    out.spoof_logits = spoof_head_.forward(flat(h.values.bottomRows(ns)), mode).values;
    finish(out, std::move(split));
    return out;
  }

  [[nodiscard]] CcddOutput infer(const Matrix& emb, std::span<const int> class_labels) const {
    auto [stacked, split] = stack(emb, class_labels);
    const Activation h = trunk_.infer(flat(std::move(stacked)));
    const auto nl = static_cast<Eigen::Index>(split.live_rows.size());
    const auto ns = static_cast<Eigen::Index>(split.spoof_rows.size());
    CcddOutput out;
    out.live_logits = live_head_.infer(flat(h.values.topRows(nl))).values;
    out.spoof_logits = spoof_head_.infer(flat(h.values.bottomRows(ns))).values;
    finish(out, std::move(split));
    return out;
  }

  /// Takes gradients w.r.t. each head's logits; returns the gradient w.r.t.
  /// the embedding rows in original batch order.
  Matrix backward(const Matrix& d_live_logits, const Matrix& d_spoof_logits) {
    const Matrix g_live = live_head_.backward(flat(d_live_logits)).values;
    const Matrix g_spoof = spoof_head_.backward(flat(d_spoof_logits)).values;
    Matrix g(g_live.rows() + g_spoof.rows(), live_head_.in_features());
    g.topRows(g_live.rows()) = g_live;
    g.bottomRows(g_spoof.rows()) = g_spoof;
    const Matrix d_stacked = trunk_.backward(flat(std::move(g))).values;
    return merge_split(d_stacked.topRows(static_cast<Eigen::Index>(split_.live_rows.size())),
                       d_stacked.bottomRows(static_cast<Eigen::Index>(split_.spoof_rows.size())),
                       split_);
  }

 private:
  [[nodiscard]] std::pair<Matrix, SplitIndex> stack(const Matrix& emb,
                                                    std::span<const int> class_labels) const {
    require_shape(emb.cols() == in_, "discriminator input width", std::to_string(in_),
                  std::to_string(emb.cols()));
    require_shape(static_cast<Eigen::Index>(class_labels.size()) == emb.rows(),
                  "class label count", std::to_string(emb.rows()),
                  std::to_string(class_labels.size()));
    SplitIndex split = split_by_class(class_labels);
    Matrix stacked(emb.rows(), emb.cols());
    Eigen::Index r = 0;
    for (int i : split.live_rows) stacked.row(r++) = emb.row(i);
    for (int i : split.spoof_rows) stacked.row(r++) = emb.row(i);
    return {std::move(stacked), std::move(split)};
  }

  static void finish(CcddOutput& out, SplitIndex split) {
    out.live.values = softmax_rows(out.live_logits);
    out.spoof.values = softmax_rows(out.spoof_logits);
    out.split = std::move(split);
  }

  int in_;
  Sequential trunk_;
  Linear live_head_;
  Linear spoof_head_;
  SplitIndex split_;
};

struct DisOutput {
  DomainScores scores;
  Matrix logits;
};

/// Unconditional domain discriminator: the same trunk as Ccdd with a single
/// domain head shared by every sample.
class DomainDiscriminator {
 public:
  DomainDiscriminator(int in, int hidden, int num_domains, double dropout)
      : in_(in), trunk_(make_discriminator_trunk(in, hidden, dropout)), head_(hidden, num_domains) {}

  [[nodiscard]] int in_features() const { return in_; }
  [[nodiscard]] int num_domains() const { return head_.out_features(); }
  Sequential& trunk() { return trunk_; }
  Linear& head() { return head_; }

  void initialize(std::mt19937_64& rng) {
    trunk_.initialize(rng);
    head_.initialize(rng);
  }

  DisOutput forward(const Matrix& emb, Mode mode) {
    check(emb);
    DisOutput out;
    out.logits = head_.forward(trunk_.forward(flat(emb), mode), mode).values;
    out.scores.values = softmax_rows(out.logits);
    return out;
  }

  [[nodiscard]] DisOutput infer(const Matrix& emb) const {
    check(emb);
    DisOutput out;
    out.logits = head_.infer(trunk_.infer(flat(emb))).values;
    out.scores.values = softmax_rows(out.logits);
    return out;
  }

  Matrix backward(const Matrix& d_logits) {
    return trunk_.backward(head_.backward(flat(d_logits))).values;
  }

 private:
  void check(const Matrix& emb) const {
    require_shape(emb.cols() == in_, "discriminator input width", std::to_string(in_),
                  std::to_string(emb.cols()));
  }

  int in_;
  Sequential trunk_;
  Linear head_;
};

}  // namespace fasdg

#endif  // FASDG_DISCRIMINATORS_HPP_
