#ifndef FASDG_LSTM_HPP_
#define FASDG_LSTM_HPP_

#include "fasdg/layers.hpp"

#include <vector>

namespace fasdg {

/// Single-layer LSTM that unrolls over a fixed number of steps and emits the
/// concatenation of every hidden state.
///
/// Input rows are time-major: row t*B + b holds step t of sequence b, which
/// is the layout of a T x B x E tensor. The output is B x (T*H) with h_t in
/// columns [t*H, (t+1)*H). The initial hidden and cell states are zero.
/// Gate order inside the stacked weights is input, forget, cell, output.
class Lstm {
 public:
  Lstm(int input_size, int hidden_size, int steps)
      : input_(input_size),
        hidden_(hidden_size),
        steps_(steps),
        w_input_("w_input", 4 * hidden_size, input_size),
        w_hidden_("w_hidden", 4 * hidden_size, hidden_size),
        bias_("bias", 1, 4 * hidden_size) {}

  [[nodiscard]] int input_size() const { return input_; }
  [[nodiscard]] int hidden_size() const { return hidden_; }
  [[nodiscard]] int steps() const { return steps_; }
  [[nodiscard]] int output_size() const { return steps_ * hidden_; }

  Parameter& w_input() { return w_input_; }
  Parameter& w_hidden() { return w_hidden_; }
  Parameter& bias() { return bias_; }

  std::vector<Parameter*> parameters() { return {&w_input_, &w_hidden_, &bias_}; }

  void initialize(std::mt19937_64& rng) {
    init_fan_in(w_input_.value, input_, rng);
    init_fan_in(w_hidden_.value, hidden_, rng);
    w_input_.value *= std::sqrt(0.5);
    w_hidden_.value *= std::sqrt(0.5);
    bias_.value.setZero();
  }

  [[nodiscard]] Matrix infer(const Matrix& seq) const {
    Matrix out;
    run(seq, out, nullptr);
    return out;
  }

  Matrix forward(const Matrix& seq) {
    Matrix out;
    run(seq, out, &cache_);
    return out;
  }

  /// Gradient w.r.t. the concatenated outputs in, gradient w.r.t. the
  /// time-major input sequence out.
  Matrix backward(const Matrix& grad_out) {
    const int b = cache_.batch;
    const int h = hidden_;
    require_shape(grad_out.rows() == b && grad_out.cols() == output_size(), "lstm output grad",
                  std::to_string(b) + "x" + std::to_string(output_size()),
                  std::to_string(grad_out.rows()) + "x" + std::to_string(grad_out.cols()));
    Matrix dx = Matrix::Zero(static_cast<Eigen::Index>(steps_) * b, input_);
    Matrix dh_next = Matrix::Zero(b, h);
    Matrix dc_next = Matrix::Zero(b, h);
    for (int t = steps_ - 1; t >= 0; --t) {
      const auto& st = cache_.steps[static_cast<std::size_t>(t)];
      Matrix dh = grad_out.middleCols(static_cast<Eigen::Index>(t) * h, h) + dh_next;
      const Matrix tanh_c = st.c.array().tanh().matrix();
      Matrix d_o = dh.cwiseProduct(tanh_c);
      Matrix dc = dc_next + dh.cwiseProduct(st.o).cwiseProduct(
                                (1.0 - tanh_c.array().square()).matrix());
      Matrix d_i = dc.cwiseProduct(st.g);
      Matrix d_g = dc.cwiseProduct(st.i);
      Matrix d_f = dc.cwiseProduct(st.c_prev);
      dc_next = dc.cwiseProduct(st.f);

      Matrix dz(b, 4 * h);
      dz.middleCols(0, h) = d_i.cwiseProduct(st.i).cwiseProduct((1.0 - st.i.array()).matrix());
      dz.middleCols(h, h) = d_f.cwiseProduct(st.f).cwiseProduct((1.0 - st.f.array()).matrix());
      dz.middleCols(2 * h, h) =
          d_g.cwiseProduct((1.0 - st.g.array().square()).matrix());
      dz.middleCols(3 * h, h) = d_o.cwiseProduct(st.o).cwiseProduct((1.0 - st.o.array()).matrix());

      w_input_.grad.noalias() += dz.transpose() * st.x;
      w_hidden_.grad.noalias() += dz.transpose() * st.h_prev;
      bias_.grad.row(0) += dz.colwise().sum();
      dx.middleRows(static_cast<Eigen::Index>(t) * b, b) = dz * w_input_.value;
      dh_next = dz * w_hidden_.value;
    }
    return dx;
  }

 private:
  struct Step {
    Matrix x, h_prev, c_prev, i, f, g, o, c;
  };
  struct Cache {
    int batch = 0;
    std::vector<Step> steps;
  };

  static Matrix sigmoid(const Matrix& z) {
    return (1.0 / (1.0 + (-z.array()).exp())).matrix();
  }

  void run(const Matrix& seq, Matrix& out, Cache* cache) const {
    require_shape(seq.cols() == input_, "lstm input width", std::to_string(input_),
                  std::to_string(seq.cols()));
    require_shape(seq.rows() % steps_ == 0, "lstm sequence rows",
                  "multiple of sequence length " + std::to_string(steps_),
                  std::to_string(seq.rows()));
    const int b = static_cast<int>(seq.rows()) / steps_;
    const int h = hidden_;
    out.resize(b, output_size());
    Matrix h_prev = Matrix::Zero(b, h);
    Matrix c_prev = Matrix::Zero(b, h);
    if (cache) {
      cache->batch = b;
      cache->steps.assign(static_cast<std::size_t>(steps_), Step{});
    }
    for (int t = 0; t < steps_; ++t) {
      const Matrix x = seq.middleRows(static_cast<Eigen::Index>(t) * b, b);
      Matrix z = x * w_input_.value.transpose() + h_prev * w_hidden_.value.transpose();
      z.rowwise() += bias_.value.row(0);
      Matrix i = sigmoid(z.middleCols(0, h));
      Matrix f = sigmoid(z.middleCols(h, h));
      Matrix g = z.middleCols(2 * h, h).array().tanh().matrix();
      Matrix o = sigmoid(z.middleCols(3 * h, h));
      Matrix c = f.cwiseProduct(c_prev) + i.cwiseProduct(g);
      Matrix hh = o.cwiseProduct(c.array().tanh().matrix());
      out.middleCols(static_cast<Eigen::Index>(t) * h, h) = hh;
      if (cache) {
        cache->steps[static_cast<std::size_t>(t)] =
            Step{x, h_prev, c_prev, std::move(i), std::move(f), std::move(g), std::move(o), c};
      }
      h_prev = std::move(hh);
      c_prev = std::move(c);
    }
  }

  int input_;
  int hidden_;
  int steps_;
  Parameter w_input_;
  Parameter w_hidden_;
  Parameter bias_;
  Cache cache_;
};

}  // namespace fasdg

#endif  // FASDG_LSTM_HPP_
