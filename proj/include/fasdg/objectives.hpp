#ifndef FASDG_OBJECTIVES_HPP_
#define FASDG_OBJECTIVES_HPP_

#include "fasdg/discriminators.hpp"

#include <cmath>
#include <span>
#include <string>
#include <utility>

namespace fasdg {

/// Mean softmax cross-entropy together with its gradient w.r.t. the logits.
struct CrossEntropy {
  double loss = 0.0;
  Matrix grad;
};

/// Mean cross-entropy of `logits` against integer `labels`. An empty batch
/// yields loss 0 and an empty gradient.
[[nodiscard]] inline CrossEntropy softmax_cross_entropy(const Matrix& logits,
                                                        std::span<const int> labels) {
  require_shape(static_cast<Eigen::Index>(labels.size()) == logits.rows(), "label count",
                std::to_string(logits.rows()), std::to_string(labels.size()));
  CrossEntropy ce;
  ce.grad = Matrix::Zero(logits.rows(), logits.cols());
  if (logits.rows() == 0) return ce;
  const double inv_n = 1.0 / static_cast<double>(logits.rows());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const int y = labels[static_cast<std::size_t>(r)];
    if (y < 0 || y >= logits.cols()) {
      throw DataError("label " + std::to_string(y) + " outside [0, " +
                      std::to_string(logits.cols()) + ")");
    }
    const double m = logits.row(r).maxCoeff();
    const RowVector e = (logits.row(r).array() - m).exp().matrix();
    const double z = e.sum();
    ce.loss += (std::log(z) + m - logits(r, y)) * inv_n;
    ce.grad.row(r) = e / z * inv_n;
    ce.grad(r, y) -= inv_n;
  }
  return ce;
}

/// Live/spoof classification loss: mean softmax cross-entropy.
[[nodiscard]] inline double class_loss(const Matrix& logits, std::span<const int> labels) {
  if (logits.rows() == 0) throw DataError("class loss needs at least one sample");
  require_shape(logits.cols() == 2, "class logits width", "2", std::to_string(logits.cols()));
  for (int y : labels) {
    if (y != 0 && y != 1) throw DataError("class label must be 0 or 1, got " + std::to_string(y));
  }
  return softmax_cross_entropy(logits, labels).loss;
}

/// Mean of -log p[label] over the rows of a probability matrix; 0 when empty.
[[nodiscard]] inline double mean_negative_log_likelihood(const DomainScores& scores,
                                                         std::span<const int> labels) {
  require_shape(static_cast<int>(labels.size()) == scores.rows(), "domain label count",
                std::to_string(scores.rows()), std::to_string(labels.size()));
  if (scores.rows() == 0) return 0.0;
  double sum = 0.0;
  for (int r = 0; r < scores.rows(); ++r) {
    const int y = labels[static_cast<std::size_t>(r)];
    if (y < 0 || y >= scores.num_domains()) {
      throw DataError("domain label " + std::to_string(y) + " outside [0, " +
                      std::to_string(scores.num_domains()) + ")");
    }
    sum -= std::log(scores.values(r, y));
  }
  return sum / scores.rows();
}

/// (L_l, L_s): domain cross-entropy of the live head over live rows and of
/// the spoof head over spoof rows.
[[nodiscard]] inline std::pair<double, double> domain_losses(const DomainScores& s_live,
                                                             const DomainScores& s_spoof,
                                                             std::span<const int> live_domains,
                                                             std::span<const int> spoof_domains) {
  return {mean_negative_log_likelihood(s_live, live_domains),
          mean_negative_log_likelihood(s_spoof, spoof_domains)};
}

struct LossWeights {
  double lambda_ib = 1.0;
  double lambda_vb = 1.0;
};

/// Loss terms of one step. `weight` is the lambda the total was built with.
struct LossBreakdown {
  double class_loss = 0.0;
  double live_domain_loss = 0.0;
  double spoof_domain_loss = 0.0;
  double weight = 1.0;
  double total = 0.0;

  [[nodiscard]] bool consistent(double tol = 1e-6) const {
    return std::abs(total - (class_loss + weight * (live_domain_loss + spoof_domain_loss))) <= tol;
  }
};

/// E = L_c + lambda_IB (L_l + L_s). The min-max character comes from the
/// gradient reversal layer, not from a sign here.
[[nodiscard]] inline double ib_energy(double l_c, double l_l, double l_s, const LossWeights& w) {
  return l_c + w.lambda_ib * (l_l + l_s);
}

/// Video counterpart of ib_energy, weighted by lambda_VB.
[[nodiscard]] inline double vb_energy(double l_c, double l_l, double l_s, const LossWeights& w) {
  return l_c + w.lambda_vb * (l_l + l_s);
}

}  // namespace fasdg

#endif  // FASDG_OBJECTIVES_HPP_
