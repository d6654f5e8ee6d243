#ifndef FASDG_LAYERS_HPP_
#define FASDG_LAYERS_HPP_

#include "fasdg/core.hpp"

#include <algorithm>
#include <limits>
#include <memory>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace fasdg {

/// A trainable tensor together with its accumulated gradient.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;

  Parameter() = default;
  Parameter(std::string n, int rows, int cols)
      : name(std::move(n)), value(Matrix::Zero(rows, cols)), grad(Matrix::Zero(rows, cols)) {}

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
  [[nodiscard]] Eigen::Index size() const { return value.size(); }
};

/// Fan-in scaled normal initialisation (He et al.).
inline void init_fan_in(Matrix& w, int fan_in, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / std::max(fan_in, 1)));
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = dist(rng);
}

/// Base class for feed-forward layers.
///
/// `infer` is const and keeps no state, so a frozen layer may be evaluated from
/// several threads. `forward` records whatever `backward` needs; `backward`
/// must follow the matching `forward` and accumulates into parameter grads.
class Layer {
 public:
  virtual ~Layer() = default;

  [[nodiscard]] virtual std::string kind() const = 0;
  [[nodiscard]] virtual Dims output_dims(const Dims& in) const = 0;
  [[nodiscard]] virtual Activation infer(const Activation& x) const = 0;
  virtual Activation forward(const Activation& x, Mode mode) = 0;
  virtual Activation backward(const Activation& grad_out) = 0;
  [[nodiscard]] virtual std::unique_ptr<Layer> clone() const = 0;

  virtual std::vector<Parameter*> parameters() { return {}; }
  virtual std::vector<std::string> parameter_names() {
    std::vector<std::string> out;
    for (Parameter* p : parameters()) out.push_back(p->name);
    return out;
  }
  virtual std::vector<std::mt19937_64*> rng_engines() { return {}; }
  virtual void initialize(std::mt19937_64& /*rng*/) {}
};

class Linear final : public Layer {
 public:
  Linear(int in, int out, bool bias = true)
      : in_(in), out_(out), has_bias_(bias), weight_("weight", out, in), bias_("bias", 1, out) {}

  [[nodiscard]] std::string kind() const override { return "linear"; }
  [[nodiscard]] int in_features() const { return in_; }
  [[nodiscard]] int out_features() const { return out_; }
  Parameter& weight() { return weight_; }
  Parameter& bias() { return bias_; }

  [[nodiscard]] Dims output_dims(const Dims& in) const override {
    require_shape(in.size() == in_, "linear input width", std::to_string(in_),
                  std::to_string(in.size()));
    return Dims{out_, 1, 1};
  }

  [[nodiscard]] Activation infer(const Activation& x) const override {
    require_shape(x.values.cols() == in_, "linear input width", std::to_string(in_),
                  std::to_string(x.values.cols()));
    Matrix y = x.values * weight_.value.transpose();
    if (has_bias_) y.rowwise() += bias_.value.row(0);
    return flat(std::move(y));
  }

  Activation forward(const Activation& x, Mode /*mode*/) override {
    input_ = x.values;
    in_dims_ = x.dims;
    return infer(x);
  }

  Activation backward(const Activation& g) override {
    weight_.grad.noalias() += g.values.transpose() * input_;
    if (has_bias_) bias_.grad.row(0) += g.values.colwise().sum();
    Matrix dx = g.values * weight_.value;
    return Activation{std::move(dx), in_dims_};
  }

  [[nodiscard]] std::unique_ptr<Layer> clone() const override {
    return std::make_unique<Linear>(*this);
  }

  std::vector<Parameter*> parameters() override {
    if (has_bias_) return {&weight_, &bias_};
    return {&weight_};
  }

  void initialize(std::mt19937_64& rng) override {
    init_fan_in(weight_.value, in_, rng);
    bias_.value.setZero();
  }

 private:
  int in_;
  int out_;
  bool has_bias_;
  Parameter weight_;
  Parameter bias_;
  Matrix input_;
  Dims in_dims_;
};

class Relu final : public Layer {
 public:
  [[nodiscard]] std::string kind() const override { return "relu"; }
  [[nodiscard]] Dims output_dims(const Dims& in) const override { return in; }

  [[nodiscard]] Activation infer(const Activation& x) const override {
    return Activation{x.values.cwiseMax(0.0), x.dims};
  }

  Activation forward(const Activation& x, Mode /*mode*/) override {
    mask_ = (x.values.array() > 0.0).cast<double>().matrix();
    return infer(x);
  }

  Activation backward(const Activation& g) override {
    return Activation{g.values.cwiseProduct(mask_), g.dims};
  }

  [[nodiscard]] std::unique_ptr<Layer> clone() const override {
    return std::make_unique<Relu>(*this);
  }

 private:
  Matrix mask_;
};

/// Inverted dropout. Each instance owns its random stream so that adding or
/// removing other stochastic layers never shifts its masks.
class Dropout final : public Layer {
 public:
  explicit Dropout(double rate, std::uint64_t seed = 0) : rate_(rate), engine_(seed) {
    if (!(rate >= 0.0 && rate < 1.0)) throw ConfigError("dropout rate must lie in [0, 1)");
  }

  [[nodiscard]] std::string kind() const override { return "dropout"; }
  [[nodiscard]] double rate() const { return rate_; }
  [[nodiscard]] Dims output_dims(const Dims& in) const override { return in; }
  [[nodiscard]] Activation infer(const Activation& x) const override { return x; }

  Activation forward(const Activation& x, Mode mode) override {
    if (mode == Mode::kEval || rate_ == 0.0) {
      mask_.resize(0, 0);
      return x;
    }
    std::bernoulli_distribution keep(1.0 - rate_);
    const double scale = 1.0 / (1.0 - rate_);
    mask_.resize(x.values.rows(), x.values.cols());
    for (Eigen::Index i = 0; i < mask_.size(); ++i) {
      mask_.data()[i] = keep(engine_) ? scale : 0.0;
    }
    return Activation{x.values.cwiseProduct(mask_), x.dims};
  }

  Activation backward(const Activation& g) override {
    if (mask_.size() == 0) return g;
    return Activation{g.values.cwiseProduct(mask_), g.dims};
  }

  [[nodiscard]] std::unique_ptr<Layer> clone() const override {
    return std::make_unique<Dropout>(*this);
  }

  std::vector<std::mt19937_64*> rng_engines() override { return {&engine_}; }
  void reseed(std::uint64_t seed) { engine_.seed(seed); }

 private:
  double rate_;
  std::mt19937_64 engine_;
  Matrix mask_;
};

/// 2-D convolution with square kernels, zero padding and a common stride,
/// lowered to one GEMM per sample via im2col.
class Conv2d final : public Layer {
 public:
  Conv2d(int in_channels, int out_channels, int kernel, int stride = 1, int padding = -1)
      : in_c_(in_channels),
        out_c_(out_channels),
        k_(kernel),
        stride_(stride),
        pad_(padding < 0 ? kernel / 2 : padding),
        weight_("weight", out_channels, in_channels * kernel * kernel),
        bias_("bias", 1, out_channels) {}

  [[nodiscard]] std::string kind() const override { return "conv2d"; }
  Parameter& weight() { return weight_; }
  Parameter& bias() { return bias_; }

  [[nodiscard]] Dims output_dims(const Dims& in) const override {
    require_shape(in.channels == in_c_, "conv2d input channels", std::to_string(in_c_),
                  std::to_string(in.channels));
    const int ho = (in.height + 2 * pad_ - k_) / stride_ + 1;
    const int wo = (in.width + 2 * pad_ - k_) / stride_ + 1;
    require_shape(ho > 0 && wo > 0, "conv2d spatial extent", "positive output",
                  to_string(in));
    return Dims{out_c_, ho, wo};
  }

  [[nodiscard]] Activation infer(const Activation& x) const override {
    const Dims od = output_dims(x.dims);
    Matrix y(x.values.rows(), od.size());
    Matrix cols;
    for (Eigen::Index n = 0; n < x.values.rows(); ++n) {
      im2col(x.values.row(n).data(), x.dims, od, cols);
      apply(cols, od, y.row(n).data());
    }
    return Activation{std::move(y), od};
  }

  Activation forward(const Activation& x, Mode /*mode*/) override {
    const Dims od = output_dims(x.dims);
    in_dims_ = x.dims;
    out_dims_ = od;
    cols_.resize(static_cast<std::size_t>(x.values.rows()));
    Matrix y(x.values.rows(), od.size());
    for (Eigen::Index n = 0; n < x.values.rows(); ++n) {
      auto& cols = cols_[static_cast<std::size_t>(n)];
      im2col(x.values.row(n).data(), x.dims, od, cols);
      apply(cols, od, y.row(n).data());
    }
    return Activation{std::move(y), od};
  }

  Activation backward(const Activation& g) override {
    const Eigen::Index n_batch = g.values.rows();
    Matrix dx = Matrix::Zero(n_batch, in_dims_.size());
    Matrix dcols;
    for (Eigen::Index n = 0; n < n_batch; ++n) {
      Eigen::Map<const Matrix> dy(g.values.row(n).data(), out_c_, out_dims_.spatial());
      const auto& cols = cols_[static_cast<std::size_t>(n)];
      weight_.grad.noalias() += dy * cols.transpose();
      bias_.grad.row(0) += dy.rowwise().sum().transpose();
      dcols.noalias() = weight_.value.transpose() * dy;
      col2im(dcols, dx.row(n).data());
    }
    return Activation{std::move(dx), in_dims_};
  }

  [[nodiscard]] std::unique_ptr<Layer> clone() const override {
    return std::make_unique<Conv2d>(*this);
  }

  std::vector<Parameter*> parameters() override { return {&weight_, &bias_}; }

  void initialize(std::mt19937_64& rng) override {
    init_fan_in(weight_.value, in_c_ * k_ * k_, rng);
    bias_.value.setZero();
  }

 private:
  void im2col(const double* src, const Dims& in, const Dims& od, Matrix& cols) const {
    cols.resize(in_c_ * k_ * k_, od.spatial());
    for (int c = 0; c < in_c_; ++c) {
      for (int ky = 0; ky < k_; ++ky) {
        for (int kx = 0; kx < k_; ++kx) {
          double* row = cols.row((c * k_ + ky) * k_ + kx).data();
          for (int oy = 0; oy < od.height; ++oy) {
            const int iy = oy * stride_ - pad_ + ky;
            for (int ox = 0; ox < od.width; ++ox) {
              const int ix = ox * stride_ - pad_ + kx;
              const bool inside = iy >= 0 && iy < in.height && ix >= 0 && ix < in.width;
              row[oy * od.width + ox] =
                  inside ? src[(c * in.height + iy) * in.width + ix] : 0.0;
            }
          }
        }
      }
    }
  }

  void col2im(const Matrix& dcols, double* dst) const {
    for (int c = 0; c < in_c_; ++c) {
      for (int ky = 0; ky < k_; ++ky) {
        for (int kx = 0; kx < k_; ++kx) {
          const double* row = dcols.row((c * k_ + ky) * k_ + kx).data();
          for (int oy = 0; oy < out_dims_.height; ++oy) {
            const int iy = oy * stride_ - pad_ + ky;
            if (iy < 0 || iy >= in_dims_.height) continue;
            for (int ox = 0; ox < out_dims_.width; ++ox) {
              const int ix = ox * stride_ - pad_ + kx;
              if (ix < 0 || ix >= in_dims_.width) continue;
              dst[(c * in_dims_.height + iy) * in_dims_.width + ix] +=
                  row[oy * out_dims_.width + ox];
            }
          }
        }
      }
    }
  }

  void apply(const Matrix& cols, const Dims& od, double* dst) const {
    Eigen::Map<Matrix> out(dst, out_c_, od.spatial());
    out.noalias() = weight_.value * cols;
    out.colwise() += bias_.value.row(0).transpose();
  }

  int in_c_;
  int out_c_;
  int k_;
  int stride_;
  int pad_;
  Parameter weight_;
  Parameter bias_;
  Dims in_dims_;
  Dims out_dims_;
  std::vector<Matrix> cols_;
};

/// Non-overlapping max pooling (window = stride = size).
class MaxPool2d final : public Layer {
 public:
  explicit MaxPool2d(int size = 2) : size_(size) {}

  [[nodiscard]] std::string kind() const override { return "maxpool2d"; }

  [[nodiscard]] Dims output_dims(const Dims& in) const override {
    require_shape(in.height >= size_ && in.width >= size_, "maxpool2d input",
                  "spatial extent >= " + std::to_string(size_), to_string(in));
    return Dims{in.channels, in.height / size_, in.width / size_};
  }

  [[nodiscard]] Activation infer(const Activation& x) const override {
    return pool(x, nullptr);
  }

  Activation forward(const Activation& x, Mode /*mode*/) override {
    in_dims_ = x.dims;
    return pool(x, &argmax_);
  }

  Activation backward(const Activation& g) override {
    Matrix dx = Matrix::Zero(g.values.rows(), in_dims_.size());
    const Eigen::Index per = g.values.cols();
    for (Eigen::Index n = 0; n < g.values.rows(); ++n) {
      for (Eigen::Index j = 0; j < per; ++j) {
        dx(n, argmax_[static_cast<std::size_t>(n * per + j)]) += g.values(n, j);
      }
    }
    return Activation{std::move(dx), in_dims_};
  }

  [[nodiscard]] std::unique_ptr<Layer> clone() const override {
    return std::make_unique<MaxPool2d>(*this);
  }

 private:
  Activation pool(const Activation& x, std::vector<int>* argmax) const {
    const Dims in = x.dims;
    const Dims od = output_dims(in);
    Matrix y(x.values.rows(), od.size());
    if (argmax) argmax->assign(static_cast<std::size_t>(y.size()), 0);
    for (Eigen::Index n = 0; n < x.values.rows(); ++n) {
      const double* src = x.values.row(n).data();
      for (int c = 0; c < od.channels; ++c) {
        for (int oy = 0; oy < od.height; ++oy) {
          for (int ox = 0; ox < od.width; ++ox) {
            double best = -std::numeric_limits<double>::infinity();
            int best_idx = 0;
            for (int dy = 0; dy < size_; ++dy) {
              for (int dx = 0; dx < size_; ++dx) {
                const int idx = (c * in.height + oy * size_ + dy) * in.width + ox * size_ + dx;
                if (src[idx] > best) {
                  best = src[idx];
                  best_idx = idx;
                }
              }
            }
            const int out_idx = (c * od.height + oy) * od.width + ox;
            y(n, out_idx) = best;
            if (argmax) (*argmax)[static_cast<std::size_t>(n * od.size() + out_idx)] = best_idx;
          }
        }
      }
    }
    return Activation{std::move(y), od};
  }

  int size_;
  Dims in_dims_;
  std::vector<int> argmax_;
};

/// Spatial mean per channel; yields a flat C-wide feature vector.
class GlobalAvgPool final : public Layer {
 public:
  [[nodiscard]] std::string kind() const override { return "gap"; }
  [[nodiscard]] Dims output_dims(const Dims& in) const override { return Dims{in.channels, 1, 1}; }

  [[nodiscard]] Activation infer(const Activation& x) const override {
    const int hw = x.dims.spatial();
    Matrix y(x.values.rows(), x.dims.channels);
    for (Eigen::Index n = 0; n < x.values.rows(); ++n) {
      Eigen::Map<const Matrix> m(x.values.row(n).data(), x.dims.channels, hw);
      y.row(n) = m.rowwise().mean().transpose();
    }
    return flat(std::move(y));
  }

  Activation forward(const Activation& x, Mode /*mode*/) override {
    in_dims_ = x.dims;
    return infer(x);
  }

  Activation backward(const Activation& g) override {
    const int hw = in_dims_.spatial();
    Matrix dx(g.values.rows(), in_dims_.size());
    for (Eigen::Index n = 0; n < g.values.rows(); ++n) {
      Eigen::Map<Matrix> m(dx.row(n).data(), in_dims_.channels, hw);
      for (int c = 0; c < in_dims_.channels; ++c) m.row(c).setConstant(g.values(n, c) / hw);
    }
    return Activation{std::move(dx), in_dims_};
  }

  [[nodiscard]] std::unique_ptr<Layer> clone() const override {
    return std::make_unique<GlobalAvgPool>(*this);
  }

 private:
  Dims in_dims_;
};

/// Ordered stack of named layers.
class Sequential {
 public:
  Sequential() = default;
  Sequential(const Sequential& other) { *this = other; }
  Sequential(Sequential&&) noexcept = default;
  Sequential& operator=(Sequential&&) noexcept = default;
  Sequential& operator=(const Sequential& other) {
    if (this == &other) return *this;
    names_ = other.names_;
    layers_.clear();
    for (const auto& l : other.layers_) layers_.push_back(l->clone());
    return *this;
  }

  template <typename L, typename... Args>
  L& add(std::string name, Args&&... args) {
    auto layer = std::make_unique<L>(std::forward<Args>(args)...);
    L& ref = *layer;
    names_.push_back(std::move(name));
    layers_.push_back(std::move(layer));
    return ref;
  }

  void push(std::string name, std::unique_ptr<Layer> layer) {
    names_.push_back(std::move(name));
    layers_.push_back(std::move(layer));
  }

  [[nodiscard]] std::size_t size() const { return layers_.size(); }
  [[nodiscard]] bool empty() const { return layers_.empty(); }
  [[nodiscard]] const std::string& name(std::size_t i) const { return names_[i]; }
  [[nodiscard]] const std::vector<std::string>& names() const { return names_; }
  Layer& layer(std::size_t i) { return *layers_[i]; }
  [[nodiscard]] const Layer& layer(std::size_t i) const { return *layers_[i]; }

  /// Index of the named layer, or -1.
  [[nodiscard]] int find(const std::string& name) const {
    for (std::size_t i = 0; i < names_.size(); ++i) {
      if (names_[i] == name) return static_cast<int>(i);
    }
    return -1;
  }

  [[nodiscard]] Dims output_dims(Dims d) const {
    for (const auto& l : layers_) d = l->output_dims(d);
    return d;
  }

  [[nodiscard]] Activation infer(Activation x) const {
    for (const auto& l : layers_) x = l->infer(x);
    return x;
  }

  /// Training-time forward. When `trace` is given, trace[i] receives the
  /// output of layer i.
  Activation forward(Activation x, Mode mode, std::vector<Activation>* trace = nullptr) {
    if (trace) trace->clear();
    for (auto& l : layers_) {
      x = l->forward(x, mode);
      if (trace) trace->push_back(x);
    }
    return x;
  }

  /// Backward through every layer. When `grad_trace` is given,
  /// grad_trace[i] receives the gradient w.r.t. the output of layer i.
  Activation backward(Activation g, std::vector<Activation>* grad_trace = nullptr) {
    if (grad_trace) grad_trace->assign(layers_.size(), Activation{});
    for (std::size_t i = layers_.size(); i-- > 0;) {
      if (grad_trace) (*grad_trace)[i] = g;
      g = layers_[i]->backward(g);
    }
    return g;
  }

  /// Parameters named "<layer>.<tensor>".
  std::vector<Parameter*> parameters() {
    std::vector<Parameter*> out;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      for (Parameter* p : layers_[i]->parameters()) out.push_back(p);
    }
    return out;
  }

  [[nodiscard]] std::vector<std::string> parameter_names() {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      for (const auto& n : layers_[i]->parameter_names()) out.push_back(names_[i] + "." + n);
    }
    return out;
  }

  std::vector<std::mt19937_64*> rng_engines() {
    std::vector<std::mt19937_64*> out;
    for (auto& l : layers_) {
      for (auto* e : l->rng_engines()) out.push_back(e);
    }
    return out;
  }

  void initialize(std::mt19937_64& rng) {
    for (auto& l : layers_) l->initialize(rng);
  }

 private:
  std::vector<std::string> names_;
  std::vector<std::unique_ptr<Layer>> layers_;
};

/// Identity-skip residual block: y = x + body(x).
class Residual final : public Layer {
 public:
  explicit Residual(Sequential body) : body_(std::move(body)) {}

  [[nodiscard]] std::string kind() const override { return "residual"; }
  Sequential& body() { return body_; }

  [[nodiscard]] Dims output_dims(const Dims& in) const override {
    const Dims out = body_.output_dims(in);
    require_shape(out == in, "residual body output", to_string(in), to_string(out));
    return in;
  }

  [[nodiscard]] Activation infer(const Activation& x) const override {
    Activation y = body_.infer(x);
    y.values += x.values;
    return y;
  }

  Activation forward(const Activation& x, Mode mode) override {
    Activation y = body_.forward(x, mode);
    y.values += x.values;
    return y;
  }

  Activation backward(const Activation& g) override {
    Activation dx = body_.backward(g);
    dx.values += g.values;
    return dx;
  }

  [[nodiscard]] std::unique_ptr<Layer> clone() const override {
    return std::make_unique<Residual>(*this);
  }

  std::vector<Parameter*> parameters() override { return body_.parameters(); }
  std::vector<std::string> parameter_names() override { return body_.parameter_names(); }

  std::vector<std::mt19937_64*> rng_engines() override { return body_.rng_engines(); }
  void initialize(std::mt19937_64& rng) override { body_.initialize(rng); }

 private:
  Sequential body_;
};

}  // namespace fasdg

#endif  // FASDG_LAYERS_HPP_
