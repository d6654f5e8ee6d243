#ifndef FASDG_METRICS_HPP_
#define FASDG_METRICS_HPP_

#include "fasdg/core.hpp"
#include "fasdg/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace fasdg {

/// Live probability for one sample; label 0 = live, 1 = spoof.
struct ScoredSample {
  double score = 0.0;
  int label = kLive;
};

/// Operating point at a threshold. A sample is accepted as live iff
/// score >= tau; FAR is the accepted spoof fraction, FRR the rejected live
/// fraction.
struct ErrorRates {
  double hter = 0.0;
  double far = 0.0;
  double frr = 0.0;
};

struct MetricReport {
  double tau = 0.0;
  double hter = 0.0;
  double auc = 0.0;
  double acer = 0.0;
  double far = 0.0;
  double frr = 0.0;
  int n_live = 0;
  int n_spoof = 0;
};

namespace detail {

struct ClassCounts {
  std::int64_t live = 0;
  std::int64_t spoof = 0;
};

inline ClassCounts count_classes(std::span<const ScoredSample> s, const char* what) {
  ClassCounts c;
  for (const auto& x : s) {
    if (!std::isfinite(x.score)) throw DataError(std::string(what) + ": non-finite score");
    if (x.label == kLive) {
      ++c.live;
    } else if (x.label == kSpoof) {
      ++c.spoof;
    } else {
      throw DataError(std::string(what) + ": label must be 0 or 1");
    }
  }
  if (c.live == 0 || c.spoof == 0) {
    throw DataError(std::string(what) + ": needs both live and spoof samples");
  }
  return c;
}

}  // namespace detail

/// Error rates at `tau`.
[[nodiscard]] inline ErrorRates hter(std::span<const ScoredSample> test, double tau) {
  const auto c = detail::count_classes(test, "hter");
  std::int64_t false_accept = 0;
  std::int64_t false_reject = 0;
  for (const auto& x : test) {
    const bool accepted = x.score >= tau;
    if (x.label == kSpoof && accepted) ++false_accept;
    if (x.label == kLive && !accepted) ++false_reject;
  }
  ErrorRates r;
  r.far = static_cast<double>(false_accept) / static_cast<double>(c.spoof);
  r.frr = static_cast<double>(false_reject) / static_cast<double>(c.live);
  r.hter = (r.far + r.frr) / 2.0;
  return r;
}

/// (APCER + BPCER) / 2 at `tau`. With a single attack type this coincides
/// with HTER.
[[nodiscard]] inline double acer(std::span<const ScoredSample> test, double tau) {
  const ErrorRates r = hter(test, tau);
  const double apcer = r.far;
  const double bpcer = r.frr;
  return (apcer + bpcer) / 2.0;
}

/// Threshold where FAR and FRR are closest.
///
/// Candidates are -inf, the midpoints between adjacent distinct scores, and
/// +inf; together they realise every distinct decision. |FAR - FRR| is
/// compared exactly in integer arithmetic and ties resolve to the lower
/// threshold.
[[nodiscard]] inline double eer_threshold(std::span<const ScoredSample> dev) {
  const auto c = detail::count_classes(dev, "eer_threshold");
  std::vector<double> live;
  std::vector<double> spoof;
  for (const auto& x : dev) (x.label == kLive ? live : spoof).push_back(x.score);
  std::sort(live.begin(), live.end());
  std::sort(spoof.begin(), spoof.end());
  std::vector<double> unique;
  unique.reserve(dev.size());
  std::merge(live.begin(), live.end(), spoof.begin(), spoof.end(), std::back_inserter(unique));
  unique.erase(std::unique(unique.begin(), unique.end()), unique.end());

  std::vector<double> candidates;
  candidates.reserve(unique.size() + 1);
  candidates.push_back(-std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i + 1 < unique.size(); ++i) {
    candidates.push_back(unique[i] + (unique[i + 1] - unique[i]) / 2.0);
  }
  candidates.push_back(std::numeric_limits<double>::infinity());

  double best_tau = candidates.front();
  std::int64_t best_gap = std::numeric_limits<std::int64_t>::max();
  for (double tau : candidates) {
    const auto rejected_live =
        static_cast<std::int64_t>(std::lower_bound(live.begin(), live.end(), tau) - live.begin());
    const auto accepted_spoof = static_cast<std::int64_t>(
        spoof.end() - std::lower_bound(spoof.begin(), spoof.end(), tau));
    // |FA/n_spoof - FR/n_live| scaled by n_spoof * n_live.
    const std::int64_t gap = std::abs(accepted_spoof * c.live - rejected_live * c.spoof);
    if (gap < best_gap) {
      best_gap = gap;
      best_tau = tau;
    }
  }
  return best_tau;
}

/// ROC area as the Mann-Whitney statistic: the probability that a random live
/// sample outscores a random spoof sample, ties counting one half.
[[nodiscard]] inline double auc(std::span<const ScoredSample> samples) {
  const auto c = detail::count_classes(samples, "auc");
  std::vector<ScoredSample> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end(),
            [](const ScoredSample& a, const ScoredSample& b) { return a.score < b.score; });
  // Twice the live rank sum, with tied groups sharing their average rank.
  std::int64_t twice_rank_sum = 0;
  std::size_t i = 0;
  while (i < sorted.size()) {
    std::size_t j = i;
    std::int64_t live_in_group = 0;
    while (j < sorted.size() && sorted[j].score == sorted[i].score) {
      if (sorted[j].label == kLive) ++live_in_group;
      ++j;
    }
    // ranks i+1 .. j, average (i + 1 + j) / 2
    twice_rank_sum += live_in_group * static_cast<std::int64_t>(i + 1 + j);
    i = j;
  }
  const std::int64_t twice_u = twice_rank_sum - c.live * (c.live + 1);
  return static_cast<double>(twice_u) / (2.0 * static_cast<double>(c.live * c.spoof));
}

/// Threshold from `dev` (EER), error rates and AUC on `test`.
[[nodiscard]] inline MetricReport evaluate_scores(std::span<const ScoredSample> dev,
                                                  std::span<const ScoredSample> test) {
  MetricReport r;
  r.tau = eer_threshold(dev);
  const ErrorRates e = hter(test, r.tau);
  r.hter = e.hter;
  r.far = e.far;
  r.frr = e.frr;
  r.acer = acer(test, r.tau);
  r.auc = auc(test);
  const auto c = detail::count_classes(test, "evaluate");
  r.n_live = static_cast<int>(c.live);
  r.n_spoof = static_cast<int>(c.spoof);
  return r;
}

}  // namespace fasdg

#endif  // FASDG_METRICS_HPP_
