#ifndef FASDG_CORE_HPP_
#define FASDG_CORE_HPP_

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>

namespace fasdg {

/// Row-major dense matrix. Activations keep one sample per row.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic, Eigen::RowMajor>;

// Error hierarchy. The CLI maps each family onto an exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

class UsageError : public Error {
 public:
  using Error::Error;
};

enum class Mode { kTrain, kEval };

/// Per-sample extent of an activation: channels x height x width.
/// Flat feature vectors use (features, 1, 1).
struct Dims {
  int channels = 0;
  int height = 1;
  int width = 1;

  [[nodiscard]] int size() const { return channels * height * width; }
  [[nodiscard]] int spatial() const { return height * width; }
  friend bool operator==(const Dims&, const Dims&) = default;
};

inline std::string to_string(const Dims& d) {
  std::ostringstream os;
  os << d.channels << "x" << d.height << "x" << d.width;
  return os.str();
}

/// A batch of activations: rows are samples, each row holds a CHW block.
struct Activation {
  Matrix values;
  Dims dims;

  [[nodiscard]] int batch() const { return static_cast<int>(values.rows()); }
};

inline Activation flat(Matrix values) {
  Dims d{static_cast<int>(values.cols()), 1, 1};
  return Activation{std::move(values), d};
}

inline void require_shape(bool ok, std::string_view what, const std::string& expected,
                          const std::string& actual) {
  if (!ok) {
    throw ShapeError(std::string(what) + ": expected " + expected + ", got " + actual);
  }
}

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

/// 64-bit FNV-1a; stable across platforms, used for seeds and config hashes.
inline std::uint64_t fnv1a(std::string_view text, std::uint64_t h = 1469598103934665603ULL) {
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = kDigits[v & 0xF];
    v >>= 4;
  }
  return out;
}

}  // namespace fasdg

#endif  // FASDG_CORE_HPP_
