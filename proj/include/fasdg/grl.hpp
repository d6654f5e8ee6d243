#ifndef FASDG_GRL_HPP_
#define FASDG_GRL_HPP_

#include "fasdg/core.hpp"

#include <vector>

namespace fasdg {

/// The adaptation factor is applied verbatim in the backward pass; a negative
/// value reverses the gradient. There is no schedule.
struct GrlConfig {
  double lambda_grl = -0.2;
};

/// Identity.
template <typename T>
[[nodiscard]] T grl_forward(const T& x, const GrlConfig& /*cfg*/) {
  return x;
}

/// Scales the upstream gradient by lambda_grl.
[[nodiscard]] inline Matrix grl_backward(const Matrix& g, const GrlConfig& cfg) {
  return cfg.lambda_grl * g;
}

[[nodiscard]] inline std::vector<double> grl_backward(const std::vector<double>& g,
                                                      const GrlConfig& cfg) {
  std::vector<double> out(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) out[i] = cfg.lambda_grl * g[i];
  return out;
}

}  // namespace fasdg

#endif  // FASDG_GRL_HPP_
