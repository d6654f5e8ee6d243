#ifndef FASDG_ANALYSIS_HPP_
#define FASDG_ANALYSIS_HPP_

#include "fasdg/imageio.hpp"
#include "fasdg/model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace fasdg {

// ---------------------------------------------------------------------------
// Embedding export

enum class Split { kSource, kTarget };

inline std::string to_string(Split s) { return s == Split::kSource ? "source" : "target"; }

struct EmbeddingSample {
  LabeledImage image;
  Split split = Split::kSource;
};

struct EmbeddingRow {
  std::string sample_id;
  int domain_id = 0;
  int class_label = kLive;
  Split split = Split::kSource;
  RowVector embedding;
  std::optional<std::array<double, 2>> projection;
};

struct EmbeddingDump {
  std::vector<EmbeddingRow> rows;

  [[nodiscard]] bool projected() const { return !rows.empty() && rows.front().projection.has_value(); }

  /// Tab-separated: sample_id, domain_id, class_label, split, e0..e{E-1},
  /// then x, y when projected.
  [[nodiscard]] std::string to_tsv() const {
    std::string out = "sample_id\tdomain_id\tclass_label\tsplit";
    const Eigen::Index e = rows.empty() ? 0 : rows.front().embedding.size();
    for (Eigen::Index i = 0; i < e; ++i) out += "\te" + std::to_string(i);
    if (projected()) out += "\tx\ty";
    out += "\n";
    char buf[32];
    auto num = [&buf](double v) {
      return std::string(buf, std::to_chars(buf, buf + sizeof(buf), v).ptr);
    };
    for (const auto& r : rows) {
      out += r.sample_id + "\t" + std::to_string(r.domain_id) + "\t" +
             std::to_string(r.class_label) + "\t" + to_string(r.split);
      for (Eigen::Index i = 0; i < r.embedding.size(); ++i) out += "\t" + num(r.embedding(i));
      if (r.projection) out += "\t" + num((*r.projection)[0]) + "\t" + num((*r.projection)[1]);
      out += "\n";
    }
    return out;
  }
};

inline std::string sample_id(const LabeledImage& s) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "v%07d_f%04d", s.video_id, s.frame_index);
  return buf;
}

struct TsneOptions {
  double perplexity = 30.0;
  int iterations = 500;
  double learning_rate = 200.0;
  double early_exaggeration = 12.0;
  int exaggeration_iterations = 100;
  std::uint64_t seed = 0;
};

namespace detail {

inline Matrix squared_distances(const Matrix& x) {
  const Eigen::VectorXd n = x.rowwise().squaredNorm();
  Matrix d = (-2.0 * x * x.transpose()).colwise() + n;
  d.rowwise() += n.transpose();
  return d.cwiseMax(0.0);
}

/// Conditional affinities p_{j|i} with the bandwidth of row i set by
/// bisection so that the row's entropy matches log(perplexity).
inline Matrix conditional_affinities(const Matrix& d2, double perplexity) {
  const Eigen::Index n = d2.rows();
  const double target = std::log(perplexity);
  Matrix p = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double beta = 1.0;
    double lo = 0.0;
    double hi = std::numeric_limits<double>::infinity();
    for (int it = 0; it < 100; ++it) {
      double min_d = std::numeric_limits<double>::infinity();
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j != i) min_d = std::min(min_d, d2(i, j));
      }
      double sum = 0.0;
      double weighted = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j == i) continue;
        const double w = std::exp(-beta * (d2(i, j) - min_d));
        p(i, j) = w;
        sum += w;
        weighted += w * (d2(i, j) - min_d);
      }
      const double entropy = std::log(sum) + beta * weighted / sum;
      p.row(i) /= sum;
      const double diff = entropy - target;
      if (std::abs(diff) < 1e-5) break;
      if (diff > 0) {
        lo = beta;
        beta = std::isinf(hi) ? beta * 2.0 : (beta + hi) / 2.0;
      } else {
        hi = beta;
        beta = (beta + lo) / 2.0;
      }
    }
  }
  return p;
}

}  // namespace detail

/// Exact t-SNE (dense O(N^2) per iteration). The perplexity is capped at
/// (N - 1) / 3 for small inputs.
inline Matrix tsne(const Matrix& x, const TsneOptions& opt = {}) {
  const Eigen::Index n = x.rows();
  if (n < 2) throw UsageError("t-SNE needs at least 2 points");
  if (n > 5000) throw UsageError("exact t-SNE is limited to 5000 points");
  const double perplexity = std::min(opt.perplexity, std::max(1.0, (n - 1) / 3.0));
  Matrix p = detail::conditional_affinities(detail::squared_distances(x), perplexity);
  p = (p + p.transpose()) / (2.0 * static_cast<double>(n));
  p = p.cwiseMax(1e-12);

  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> init(0.0, 1e-4);
  Matrix y(n, 2);
  for (Eigen::Index i = 0; i < y.size(); ++i) y.data()[i] = init(rng);
  Matrix velocity = Matrix::Zero(n, 2);
  Matrix gains = Matrix::Ones(n, 2);

  for (int it = 0; it < opt.iterations; ++it) {
    const double exaggeration = it < opt.exaggeration_iterations ? opt.early_exaggeration : 1.0;
    const double momentum = it < 250 ? 0.5 : 0.8;
    Matrix num = (detail::squared_distances(y).array() + 1.0).inverse().matrix();
    num.diagonal().setZero();
    const Matrix q = (num / num.sum()).cwiseMax(1e-12);
    const Matrix coeff = ((exaggeration * p - q).array() * num.array()).matrix();
    Matrix grad(n, 2);
    for (Eigen::Index i = 0; i < n; ++i) {
      grad.row(i) = 4.0 * (coeff.row(i).sum() * y.row(i) - coeff.row(i) * y);
    }
    for (Eigen::Index i = 0; i < grad.size(); ++i) {
      const bool same_sign = (grad.data()[i] > 0) == (velocity.data()[i] > 0);
      gains.data()[i] = std::max(same_sign ? gains.data()[i] * 0.8 : gains.data()[i] + 0.2, 0.01);
    }
    velocity = momentum * velocity - opt.learning_rate * grad.cwiseProduct(gains);
    y += velocity;
    y.rowwise() -= y.colwise().mean();
  }
  return y;
}

/// Mean silhouette coefficient over all points (Euclidean), computed from
/// every pairwise distance. Points in singleton clusters score 0.
inline double silhouette(const Matrix& x, std::span<const int> labels) {
  const Eigen::Index n = x.rows();
  if (static_cast<Eigen::Index>(labels.size()) != n) {
    throw ShapeError("silhouette: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(n) + " points");
  }
  std::vector<int> clusters(labels.begin(), labels.end());
  std::sort(clusters.begin(), clusters.end());
  clusters.erase(std::unique(clusters.begin(), clusters.end()), clusters.end());
  if (clusters.size() < 2) throw UsageError("silhouette needs at least 2 clusters");
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    std::vector<double> sum(clusters.size(), 0.0);
    std::vector<int> count(clusters.size(), 0);
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == i) continue;
      const auto k = static_cast<std::size_t>(
          std::lower_bound(clusters.begin(), clusters.end(), labels[static_cast<std::size_t>(j)]) -
          clusters.begin());
      sum[k] += (x.row(i) - x.row(j)).norm();
      ++count[k];
    }
    const auto own = static_cast<std::size_t>(
        std::lower_bound(clusters.begin(), clusters.end(), labels[static_cast<std::size_t>(i)]) -
        clusters.begin());
    if (count[own] == 0) continue;
    const double a = sum[own] / count[own];
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < clusters.size(); ++k) {
      if (k != own && count[k] > 0) b = std::min(b, sum[k] / count[k]);
    }
    total += (b - a) / std::max(a, b);
  }
  return total / static_cast<double>(n);
}

/// Encoder output for every sample in eval mode. Parameters are only read.
inline EmbeddingDump export_embeddings(const Network& net, std::span<const EmbeddingSample> samples,
                                       bool project, std::uint64_t seed) {
  if (samples.empty()) throw UsageError("no samples to embed");
  const Dims dims = net.profile().input_dims();
  constexpr std::size_t kChunk = 64;
  EmbeddingDump dump;
  Matrix all(static_cast<Eigen::Index>(samples.size()), net.profile().embedding_dim);
  for (std::size_t i = 0; i < samples.size(); i += kChunk) {
    const std::size_t end = std::min(samples.size(), i + kChunk);
    std::vector<const Image*> imgs;
    for (std::size_t k = i; k < end; ++k) {
      validate(samples[k].image, std::numeric_limits<int>::max());
      imgs.push_back(&samples[k].image.image);
    }
    const Matrix e = encode(net, to_batch(std::span<const Image* const>(imgs), dims));
    all.middleRows(static_cast<Eigen::Index>(i), e.rows()) = e;
  }
  if (!all.allFinite()) throw NumericalError("non-finite embedding");
  std::optional<Matrix> proj;
  if (project) {
    TsneOptions opt;
    opt.seed = seed;
    proj = tsne(all, opt);
  }
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const auto& s = samples[k];
    EmbeddingRow r;
    r.sample_id = sample_id(s.image);
    r.domain_id = s.image.domain_id;
    r.class_label = s.image.class_label;
    r.split = s.split;
    r.embedding = all.row(static_cast<Eigen::Index>(k));
    if (proj) {
      r.projection = std::array<double, 2>{(*proj)(static_cast<Eigen::Index>(k), 0),
                                           (*proj)(static_cast<Eigen::Index>(k), 1)};
    }
    dump.rows.push_back(std::move(r));
  }
  return dump;
}

// ---------------------------------------------------------------------------
// Grad-CAM

struct ActivationMap {
  Image values;  // one channel, values in [0, 1]
  int target_class = kLive;
  std::string layer;
};

/// Bilinear resize with pixel centres at half-integer coordinates.
inline Image resize_bilinear(const Image& src, int height, int width) {
  Image out(src.channels, height, width);
  const double sy = static_cast<double>(src.height) / height;
  const double sx = static_cast<double>(src.width) / width;
  for (int c = 0; c < src.channels; ++c) {
    for (int y = 0; y < height; ++y) {
      const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, src.height - 1.0);
      const int y0 = static_cast<int>(std::floor(fy));
      const int y1 = std::min(y0 + 1, src.height - 1);
      const double wy = fy - y0;
      for (int x = 0; x < width; ++x) {
        const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, src.width - 1.0);
        const int x0 = static_cast<int>(std::floor(fx));
        const int x1 = std::min(x0 + 1, src.width - 1);
        const double wx = fx - x0;
        out.at(c, y, x) = (1 - wy) * ((1 - wx) * src.at(c, y0, x0) + wx * src.at(c, y0, x1)) +
                          wy * ((1 - wx) * src.at(c, y1, x0) + wx * src.at(c, y1, x1));
      }
    }
  }
  return out;
}

/// Min-max normalisation to [0, 1]. A constant map becomes all ones when
/// positive and all zeros otherwise.
inline void normalize_map(Image& m) {
  const auto [lo, hi] = std::minmax_element(m.pixels.begin(), m.pixels.end());
  const double mn = *lo;
  const double mx = *hi;
  for (double& v : m.pixels) {
    if (mx > mn) {
      v = (v - mn) / (mx - mn);
    } else {
      v = mx > 0.0 ? 1.0 : 0.0;
    }
  }
}

/// Grad-CAM over any feature stack followed by a head producing class
/// scores. `layer` names a layer of `features` with spatial output. Works on
/// copies, so the caller's parameters and gradients are left untouched.
inline ActivationMap grad_cam(const Sequential& features, const Sequential& head, const Image& image,
                              int target_class, const std::string& layer) {
  const int idx = features.find(layer);
  if (idx < 0) {
    std::string valid;
    for (const auto& n : features.names()) valid += (valid.empty() ? "" : ", ") + n;
    throw UsageError("unknown layer '" + layer + "' (layers: " + valid + ")");
  }
  Sequential f = features;
  Sequential h = head;
  std::vector<Activation> trace;
  const Image* one[] = {&image};
  const Activation x = to_batch(std::span<const Image* const>(one), image.dims());
  const Activation feat = f.forward(x, Mode::kEval, &trace);
  const Activation& a = trace[static_cast<std::size_t>(idx)];
  if (a.dims.height * a.dims.width < 2) {
    throw UsageError("layer '" + layer + "' has no spatial extent");
  }
  const Activation scores = h.forward(flat(feat.values), Mode::kEval);
  if (target_class < 0 || target_class >= scores.values.cols()) {
    throw UsageError("target class " + std::to_string(target_class) + " out of range");
  }
  Matrix g = Matrix::Zero(1, scores.values.cols());
  g(0, target_class) = 1.0;
  const Activation gf = h.backward(Activation{g, scores.dims});
  std::vector<Activation> grads;
  f.backward(Activation{gf.values, feat.dims}, &grads);
  const Activation& ga = grads[static_cast<std::size_t>(idx)];

  const int k = a.dims.channels;
  const int hw = a.dims.height * a.dims.width;
  Image cam(1, a.dims.height, a.dims.width);
  for (int c = 0; c < k; ++c) {
    double w = 0.0;
    for (int i = 0; i < hw; ++i) w += ga.values(0, c * hw + i);
    w /= hw;
    for (int i = 0; i < hw; ++i) cam.pixels[static_cast<std::size_t>(i)] += w * a.values(0, c * hw + i);
  }
  for (double& v : cam.pixels) v = std::max(v, 0.0);
  ActivationMap out;
  out.values = resize_bilinear(cam, image.height, image.width);
  normalize_map(out.values);
  out.target_class = target_class;
  out.layer = layer;
  return out;
}

/// Last ReLU of the deepest convolutional stage.
inline std::string default_cam_layer(const ModelProfile& p) {
  const std::string id = std::to_string(p.stages.size());
  return p.stages.back().residual ? "res_relu" + id : "relu" + id;
}

/// Grad-CAM of the image-based classifier on top of the encoder.
inline ActivationMap grad_cam(const Network& net, const Image& image, int target_class,
                              const std::string& layer = "") {
  require_shape(image.dims() == net.profile().input_dims(), "grad-cam input",
                to_string(net.profile().input_dims()), to_string(image.dims()));
  return grad_cam(net.encoder(), net.ib_classifier(), image, target_class,
                  layer.empty() ? default_cam_layer(net.profile()) : layer);
}

/// Heat overlay: the map drives a red tint blended over the input.
inline Image cam_overlay(const Image& image, const ActivationMap& map, double alpha = 0.5) {
  Image out(3, image.height, image.width);
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      const double m = map.values.at(0, y, x);
      const std::array<double, 3> heat{m, 0.0, 1.0 - m};
      for (int c = 0; c < 3; ++c) {
        const double base = image.at(image.channels == 3 ? c : 0, y, x);
        out.at(c, y, x) = (1.0 - alpha) * base + alpha * heat[static_cast<std::size_t>(c)];
      }
    }
  }
  return out;
}

inline void write_cam(const std::filesystem::path& dir, const std::string& stem, const Image& image,
                      const ActivationMap& map) {
  std::filesystem::create_directories(dir);
  write_netpbm(dir / (stem + "_map.pgm"), map.values);
  write_netpbm(dir / (stem + "_overlay.ppm"), cam_overlay(image, map));
}

}  // namespace fasdg

#endif  // FASDG_ANALYSIS_HPP_
