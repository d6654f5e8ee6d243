// Shared helpers for the unit and acceptance suites.
#ifndef FASDG_TESTS_SUPPORT_FIXTURES_HPP_
#define FASDG_TESTS_SUPPORT_FIXTURES_HPP_

#include "fasdg/fasdg.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace fasdg::testing {

/// The tiny profile with dropout disabled, so train-mode forwards are
/// deterministic and finite differences see the same function twice.
inline ModelProfile deterministic_tiny(int num_domains = 3, int steps = 4) {
  ModelProfile p = tiny_profile();
  p.dropout = 0.0;
  p.num_domains = num_domains;
  p.sequence_length = steps;
  return p;
}

inline GenerateOptions small_options(int n_videos = 8, int frames = 8, int steps = 4) {
  GenerateOptions o;
  o.n_videos = n_videos;
  o.frames_per_video = frames;
  o.sequence_length = steps;
  return o;
}

inline std::vector<SyntheticDataset> small_benchmark(std::uint64_t seed, int n_videos = 8,
                                                     int frames = 8) {
  return generate_benchmark(preset_names(), small_options(n_videos, frames), seed);
}

/// Replaces every bias with a small random value so no ReLU input sits
/// exactly on its hinge.
inline void jitter_biases(const std::vector<Parameter*>& params, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.1, 0.1);
  for (Parameter* q : params) {
    if (q->name != "bias") continue;
    for (Eigen::Index i = 0; i < q->value.size(); ++i) q->value.data()[i] = u(rng);
  }
}

inline void jitter_biases(Network& net, std::uint64_t seed) {
  std::vector<Parameter*> params;
  for (auto& p : net.all_parameters()) params.push_back(p.param);
  jitter_biases(params, seed);
}

/// Snapshot of every parameter value keyed by qualified name.
inline std::map<std::string, Matrix> parameter_values(Network& net) {
  std::map<std::string, Matrix> out;
  for (auto& p : net.all_parameters()) out[p.name] = p.param->value;
  return out;
}

inline std::string group_of(const std::string& qualified) {
  return qualified.substr(0, qualified.find('.'));
}

/// |a - b| relative to the larger magnitude, with `floor` guarding the
/// denominator for near-zero entries.
inline double relative_error(double a, double b, double floor = 1e-6) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

struct GroupCheck {
  std::string group;
  int entries = 0;
  double worst = 0.0;
  std::string worst_name;
};

/// Compares the analytic gradient of every parameter in `groups` against
/// central differences of `energy`. `analytic` must fill the gradients and
/// return the energy; `energy` only evaluates. Up to `per_tensor` entries of
/// each tensor are probed, chosen at random.
///
/// When the forward and backward one-sided slopes disagree, a ReLU or pooling
/// switch lies inside the step, and the step is shrunk tenfold (at most down
/// to `h * 1e-2`) before the central difference is taken.
inline std::vector<GroupCheck> finite_difference_check(
    Network& net, const std::vector<std::string>& groups,
    const std::function<double()>& analytic, const std::function<double()>& energy,
    int per_tensor, std::uint64_t seed, double h = 1e-5, double floor = 1e-6) {
  analytic();
  std::map<std::string, Matrix> grads;
  for (auto& g : net.groups(groups)) {
    for (auto& p : g.params) grads[p.name] = p.param->grad;
  }
  std::mt19937_64 rng(seed);
  std::vector<GroupCheck> out;
  for (auto& g : net.groups(groups)) {
    GroupCheck gc;
    gc.group = g.name;
    for (auto& p : g.params) {
      Matrix& w = p.param->value;
      std::vector<Eigen::Index> idx(static_cast<std::size_t>(w.size()));
      for (Eigen::Index i = 0; i < w.size(); ++i) idx[static_cast<std::size_t>(i)] = i;
      std::shuffle(idx.begin(), idx.end(), rng);
      idx.resize(std::min<std::size_t>(idx.size(), static_cast<std::size_t>(per_tensor)));
      for (Eigen::Index i : idx) {
        const double keep = w.data()[i];
        const double centre = energy();
        double numeric = 0.0;
        for (double step = h; step >= h * 1e-2 * 0.999; step /= 10.0) {
          w.data()[i] = keep + step;
          const double up = energy();
          w.data()[i] = keep - step;
          const double down = energy();
          w.data()[i] = keep;
          numeric = (up - down) / (2.0 * step);
          if (relative_error((up - centre) / step, (centre - down) / step, floor) <= 1e-3) break;
        }
        const double err = relative_error(grads[p.name].data()[i], numeric, floor);
        ++gc.entries;
        if (err > gc.worst) {
          gc.worst = err;
          gc.worst_name = p.name + "[" + std::to_string(i) + "]";
        }
      }
    }
    out.push_back(gc);
  }
  return out;
}

/// Fresh, empty scratch directory under the system temp directory.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("fasdg-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

/// Relative path -> bytes for every regular file below `root`.
inline std::map<std::string, std::string> tree_contents(const std::filesystem::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : std::filesystem::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) {
      out[std::filesystem::relative(e.path(), root).generic_string()] = read_file(e.path());
    }
  }
  return out;
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::filesystem::create_directories(p.parent_path());
  std::ofstream os(p, std::ios::binary);
  os << text;
}

/// Runs the CLI with `args`, stdout and stderr appended to `log`. Returns the
/// exit status.
inline int run_cli(const std::string& cli, const std::string& args,
                   const std::filesystem::path& log) {
  const std::string cmd = "\"" + cli + "\" " + args + " >>\"" + log.string() + "\" 2>&1";
  const int rc = std::system(cmd.c_str());
  if (rc == -1) return -1;
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace fasdg::testing

#endif  // FASDG_TESTS_SUPPORT_FIXTURES_HPP_
