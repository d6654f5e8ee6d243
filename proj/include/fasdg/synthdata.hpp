#ifndef FASDG_SYNTHDATA_HPP_
#define FASDG_SYNTHDATA_HPP_

#include "fasdg/data.hpp"
#include "fasdg/imageio.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <string>
#include <vector>

namespace fasdg {

enum class Texture { kFlat, kStripes, kSpeckle, kChecker };

inline std::string to_string(Texture t) {
  switch (t) {
    case Texture::kFlat: return "flat";
    case Texture::kStripes: return "stripes";
    case Texture::kSpeckle: return "speckle";
    case Texture::kChecker: return "checker";
  }
  return "?";
}

inline Texture texture_from_string(const std::string& s) {
  if (s == "flat") return Texture::kFlat;
  if (s == "stripes") return Texture::kStripes;
  if (s == "speckle") return Texture::kSpeckle;
  if (s == "checker") return Texture::kChecker;
  throw ConfigError("unknown texture '" + s + "' (valid: flat, stripes, speckle, checker)");
}

/// Capture conditions of one domain. They act on live and spoof alike.
struct DomainSpec {
  int domain_id = 0;
  std::array<double, 3> gains{1.0, 1.0, 1.0};
  double blur_sigma = 0.0;
  double noise_sigma = 0.0;
  Texture texture = Texture::kFlat;
  double texture_scale = 8.0;
  double background_level = 0.35;
  int downscale = 1;

  void validate(int height, int width) const {
    for (double g : gains) {
      if (!(g >= 0.5 && g <= 1.5)) throw ConfigError("colour gains must lie in [0.5, 1.5]");
    }
    if (!(blur_sigma >= 0.0) || !(noise_sigma >= 0.0)) {
      throw ConfigError("blur and noise sigmas must be >= 0");
    }
    if (downscale < 1 || downscale > std::min(height, width) / 4) {
      throw ConfigError("downscale factor must lie in [1, size/4]");
    }
    if (!(texture_scale > 0.0)) throw ConfigError("texture scale must be positive");
    if (!(background_level >= 0.0 && background_level <= 1.0)) {
      throw ConfigError("background level must lie in [0, 1]");
    }
  }
};

/// What separates live from spoof. Live faces move, flicker and blink; spoofs
/// are a frozen reproduction carrying a halftone grid, placed and lit at
/// random once per video. The remaining fields
/// describe the attack medium of a particular domain: a paper border, an ink
/// colour cast, screen glare and a loss of contrast.
struct ClassSignalSpec {
  double grid_period = 3.0;
  double grid_contrast = 0.3;
  int border_width = 1;
  double border_contrast = 0.5;
  double live_jitter = 1.0;
  double live_flicker = 0.08;
  double blink_probability = 0.25;
  std::array<double, 3> medium_gains{1.0, 1.0, 1.0};
  double glare = 0.0;
  double contrast_loss = 0.0;

  void validate() const {
    if (!(grid_period >= 2.0)) throw ConfigError("grid period must be >= 2 pixels");
    if (!(grid_contrast >= 0.0 && grid_contrast <= 1.0) ||
        !(border_contrast >= 0.0 && border_contrast <= 1.0)) {
      throw ConfigError("contrasts must lie in [0, 1]");
    }
    if (border_width < 0) throw ConfigError("border width must be >= 0");
    if (!(blink_probability >= 0.0 && blink_probability <= 1.0)) {
      throw ConfigError("blink probability must lie in [0, 1]");
    }
    for (double g : medium_gains) {
      if (!(g >= 0.5 && g <= 1.5)) throw ConfigError("medium gains must lie in [0.5, 1.5]");
    }
    if (!(glare >= 0.0 && glare <= 1.0) || !(contrast_loss >= 0.0 && contrast_loss < 1.0)) {
      throw ConfigError("glare must lie in [0, 1] and contrast loss in [0, 1)");
    }
  }
};

struct SyntheticDataset {
  int domain_id = 0;
  std::string preset;
  DomainSpec spec;
  ClassSignalSpec signal;
  std::vector<Video> videos;

  [[nodiscard]] std::size_t frame_count() const {
    std::size_t n = 0;
    for (const auto& v : videos) n += v.frames.size();
    return n;
  }

  [[nodiscard]] std::vector<LabeledImage> manifest() const {
    std::vector<LabeledImage> out;
    for (const auto& v : videos) {
      for (int f = 0; f < v.length(); ++f) out.push_back(v.frame(f));
    }
    return out;
  }
};

struct GenerateOptions {
  int n_videos = 40;
  int frames_per_video = 16;
  int height = 32;
  int width = 32;
  int sequence_length = 4;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t video_seed(std::uint64_t seed, int domain_id, int video_index) {
  return splitmix64(splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(domain_id) + 17)) +
                    static_cast<std::uint64_t>(video_index));
}

/// Per-video appearance drawn once; frames vary only through the live
/// motion terms and the capture noise.
struct VideoLook {
  double cx = 0, cy = 0, rx = 0, ry = 0, tone = 0, shade_angle = 0, shade_strength = 0;
  double bg_phase = 0, bg_angle = 0, grid_phase_x = 0, grid_phase_y = 0, flicker_phase = 0;
  std::vector<std::array<double, 3>> speckles;  // x, y, amplitude
  double glare_x = 0, glare_y = 0;
};

inline VideoLook draw_look(std::mt19937_64& rng, int h, int w) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  VideoLook l;
  l.cx = w / 2.0 + (u(rng) - 0.5) * 3.0;
  l.cy = h / 2.0 + (u(rng) - 0.5) * 3.0;
  l.rx = w * (0.22 + 0.06 * u(rng));
  l.ry = h * (0.29 + 0.06 * u(rng));
  l.tone = 0.55 + 0.2 * u(rng);
  l.shade_angle = 2.0 * std::numbers::pi * u(rng);
  l.shade_strength = 0.1 + 0.1 * u(rng);
  l.bg_phase = 2.0 * std::numbers::pi * u(rng);
  l.bg_angle = std::numbers::pi * u(rng);
  l.grid_phase_x = 2.0 * std::numbers::pi * u(rng);
  l.grid_phase_y = 2.0 * std::numbers::pi * u(rng);
  l.flicker_phase = 2.0 * std::numbers::pi * u(rng);
  for (int i = 0; i < 12; ++i) l.speckles.push_back({u(rng) * w, u(rng) * h, u(rng) - 0.5});
  l.glare_x = w * (0.25 + 0.5 * u(rng));
  l.glare_y = h * (0.25 + 0.5 * u(rng));
  return l;
}

inline double background(const DomainSpec& spec, const VideoLook& l, double x, double y) {
  switch (spec.texture) {
    case Texture::kFlat: return spec.background_level;
    case Texture::kStripes: {
      const double t = x * std::cos(l.bg_angle) + y * std::sin(l.bg_angle);
      return spec.background_level +
             0.15 * std::sin(2.0 * std::numbers::pi * t / spec.texture_scale + l.bg_phase);
    }
    case Texture::kSpeckle: {
      double v = spec.background_level;
      const double s2 = spec.texture_scale * spec.texture_scale / 4.0;
      for (const auto& sp : l.speckles) {
        const double dx = x - sp[0];
        const double dy = y - sp[1];
        v += 0.4 * sp[2] * std::exp(-(dx * dx + dy * dy) / s2);
      }
      return v;
    }
    case Texture::kChecker: {
      const double k = std::numbers::pi / spec.texture_scale;
      const double c = std::sin(k * x + l.bg_phase) * std::sin(k * y + l.bg_angle);
      return spec.background_level + (c >= 0.0 ? 0.12 : -0.12);
    }
  }
  return spec.background_level;
}

struct FrameState {
  double dx = 0, dy = 0, gain = 1.0;
  bool eyes_closed = false;
};

/// Grayscale render of one frame before any capture nuisance.
inline std::vector<double> render_gray(const DomainSpec& spec, const ClassSignalSpec& sig,
                                       const VideoLook& l, const FrameState& fs, bool spoof,
                                       bool overlay, int h, int w) {
  std::vector<double> g(static_cast<std::size_t>(h * w));
  const double cx = l.cx + fs.dx;
  const double cy = l.cy + fs.dy;
  const int margin = static_cast<int>(std::lround(0.1 * std::min(h, w)));
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double px = x + 0.5;
      const double py = y + 0.5;
      const double ux = (px - cx) / l.rx;
      const double uy = (py - cy) / l.ry;
      const double d = ux * ux + uy * uy;
      const double alpha = std::clamp((1.0 - d) * 4.0, 0.0, 1.0);
      double face = l.tone * fs.gain *
                    (1.0 + l.shade_strength *
                               (ux * std::cos(l.shade_angle) + uy * std::sin(l.shade_angle)));
      if (!fs.eyes_closed) {
        for (double side : {-1.0, 1.0}) {
          const double ex = (px - (cx + side * 0.42 * l.rx)) / (0.16 * l.rx);
          const double ey = (py - (cy - 0.25 * l.ry)) / (0.12 * l.ry);
          face *= 1.0 - 0.6 * std::exp(-(ex * ex + ey * ey));
        }
      } else {
        // closed lids: a thin dark line instead of the iris
        for (double side : {-1.0, 1.0}) {
          const double ex = (px - (cx + side * 0.42 * l.rx)) / (0.2 * l.rx);
          const double ey = (py - (cy - 0.25 * l.ry)) / (0.04 * l.ry);
          face *= 1.0 - 0.3 * std::exp(-(ex * ex + ey * ey));
        }
      }
      const double mouth_x = (px - cx) / (0.35 * l.rx);
      const double mouth_y = (py - (cy + 0.45 * l.ry)) / (0.07 * l.ry);
      face *= 1.0 - 0.35 * std::exp(-(mouth_x * mouth_x + mouth_y * mouth_y));
      double v = background(spec, l, px, py) * (1.0 - alpha) + face * alpha;
      if (spoof && overlay) {
        const bool inside = x >= margin && x < w - margin && y >= margin && y < h - margin;
        if (inside) {
          const double k = 2.0 * std::numbers::pi / sig.grid_period;
          const double dots =
              0.5 + 0.5 * std::cos(k * px + l.grid_phase_x) * std::cos(k * py + l.grid_phase_y);
          v *= 1.0 - sig.grid_contrast * dots;
          const int edge = std::min({x - margin, w - margin - 1 - x, y - margin, h - margin - 1 - y});
          if (edge < sig.border_width) {
            v = v * (1.0 - sig.border_contrast) + sig.border_contrast * 0.95;
          }
        }
      }
      g[static_cast<std::size_t>(y * w + x)] = std::clamp(v, 0.0, 1.0);
    }
  }
  return g;
}

inline void gaussian_blur(Image& im, double sigma) {
  if (sigma <= 0.0) return;
  const int r = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> k(static_cast<std::size_t>(2 * r + 1));
  double sum = 0.0;
  for (int i = -r; i <= r; ++i) {
    k[static_cast<std::size_t>(i + r)] = std::exp(-(i * i) / (2.0 * sigma * sigma));
    sum += k[static_cast<std::size_t>(i + r)];
  }
  for (double& v : k) v /= sum;
  Image tmp = im;
  for (int c = 0; c < im.channels; ++c) {
    for (int y = 0; y < im.height; ++y) {
      for (int x = 0; x < im.width; ++x) {
        double acc = 0.0;
        for (int i = -r; i <= r; ++i) {
          acc += k[static_cast<std::size_t>(i + r)] * im.at(c, y, std::clamp(x + i, 0, im.width - 1));
        }
        tmp.at(c, y, x) = acc;
      }
    }
    for (int y = 0; y < im.height; ++y) {
      for (int x = 0; x < im.width; ++x) {
        double acc = 0.0;
        for (int i = -r; i <= r; ++i) {
          acc += k[static_cast<std::size_t>(i + r)] * tmp.at(c, std::clamp(y + i, 0, im.height - 1), x);
        }
        im.at(c, y, x) = acc;
      }
    }
  }
}

/// Box-average down by `factor`, then nearest-neighbour back up.
inline void resample(Image& im, int factor) {
  if (factor <= 1) return;
  const int hs = im.height / factor;
  const int ws = im.width / factor;
  Image small(im.channels, hs, ws);
  for (int c = 0; c < im.channels; ++c) {
    for (int y = 0; y < hs; ++y) {
      for (int x = 0; x < ws; ++x) {
        double acc = 0.0;
        for (int dy = 0; dy < factor; ++dy) {
          for (int dx = 0; dx < factor; ++dx) acc += im.at(c, y * factor + dy, x * factor + dx);
        }
        small.at(c, y, x) = acc / (factor * factor);
      }
    }
    for (int y = 0; y < im.height; ++y) {
      for (int x = 0; x < im.width; ++x) {
        im.at(c, y, x) = small.at(c, std::min(y / factor, hs - 1), std::min(x / factor, ws - 1));
      }
    }
  }
}

}  // namespace detail

/// Tints a grayscale render to three channels.
inline Image tint(const std::vector<double>& gray, int h, int w) {
  Image im(3, h, w);
  for (int c = 0; c < 3; ++c) {
    for (int i = 0; i < h * w; ++i) im.pixels[static_cast<std::size_t>(c * h * w + i)] = gray[static_cast<std::size_t>(i)];
  }
  return im;
}

/// Attack-medium artefacts of a spoof frame: ink cast, contrast loss towards
/// mid-grey, then a soft specular highlight.
inline void apply_medium(Image& im, const ClassSignalSpec& sig, const detail::VideoLook& l) {
  const double spread = 2.0 * std::pow(0.18 * std::min(im.height, im.width), 2);
  for (int c = 0; c < im.channels; ++c) {
    for (int y = 0; y < im.height; ++y) {
      for (int x = 0; x < im.width; ++x) {
        double v = im.at(c, y, x) * sig.medium_gains[static_cast<std::size_t>(c % 3)];
        v = 0.5 + (v - 0.5) * (1.0 - sig.contrast_loss);
        if (sig.glare > 0.0) {
          const double dx = x + 0.5 - l.glare_x;
          const double dy = y + 0.5 - l.glare_y;
          v += sig.glare * (1.0 - v) * std::exp(-(dx * dx + dy * dy) / spread);
        }
        im.at(c, y, x) = v;
      }
    }
  }
}

/// Capture pipeline, fixed order: colour cast, blur, down/up-scale, noise.
inline Image apply_nuisance(Image im, const DomainSpec& spec, std::mt19937_64& rng) {
  for (int c = 0; c < im.channels; ++c) {
    for (int i = 0; i < im.height * im.width; ++i) {
      im.pixels[static_cast<std::size_t>(c * im.height * im.width + i)] *= spec.gains[static_cast<std::size_t>(c % 3)];
    }
  }
  detail::gaussian_blur(im, spec.blur_sigma);
  detail::resample(im, spec.downscale);
  if (spec.noise_sigma > 0.0) {
    std::normal_distribution<double> noise(0.0, spec.noise_sigma);
    for (double& v : im.pixels) v += noise(rng);
  }
  return im;
}

/// Clamps to [0, 1] and snaps to the 8-bit grid, so frames survive a
/// lossless image round trip unchanged.
inline void quantize(Image& im) {
  for (double& v : im.pixels) v = std::lround(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0;
}

/// Renders one video deterministically from (seed, domain, index).
inline Video render_video(const DomainSpec& spec, const ClassSignalSpec& sig, int video_index,
                          int class_label, int frames, int h, int w, std::uint64_t seed) {
  std::mt19937_64 rng(detail::video_seed(seed, spec.domain_id, video_index));
  const detail::VideoLook look = detail::draw_look(rng, h, w);
  std::normal_distribution<double> step(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Video v;
  v.video_id = spec.domain_id * 100000 + video_index;
  v.class_label = class_label;
  v.domain_id = spec.domain_id;
  const bool spoof = class_label == kSpoof;
  detail::FrameState fs;
  if (spoof) {
    // a still medium: placed and lit once, then frozen for the whole video
    fs.dx = std::clamp(sig.live_jitter * step(rng), -2.5, 2.5);
    fs.dy = std::clamp(sig.live_jitter * step(rng), -2.5, 2.5);
    fs.gain = 1.0 + sig.live_flicker * std::sin(look.flicker_phase);
  }
  for (int f = 0; f < frames; ++f) {
    if (!spoof) {
      fs.dx = std::clamp(0.6 * fs.dx + sig.live_jitter * step(rng), -2.5, 2.5);
      fs.dy = std::clamp(0.6 * fs.dy + sig.live_jitter * step(rng), -2.5, 2.5);
      fs.gain = 1.0 + sig.live_flicker * std::sin(look.flicker_phase + 1.3 * f);
      fs.eyes_closed = u(rng) < sig.blink_probability;
    }
    Image im = tint(detail::render_gray(spec, sig, look, fs, spoof, true, h, w), h, w);
    if (spoof) apply_medium(im, sig, look);
    im = apply_nuisance(std::move(im), spec, rng);
    quantize(im);
    v.frames.push_back(std::move(im));
  }
  return v;
}

/// Renders `n_videos` videos alternating live/spoof (even index live).
inline SyntheticDataset generate_domain(const DomainSpec& spec, const ClassSignalSpec& sig,
                                        const GenerateOptions& opt, std::uint64_t seed) {
  spec.validate(opt.height, opt.width);
  sig.validate();
  if (opt.n_videos < 2) throw ConfigError("need at least 2 videos (one per class)");
  if (opt.frames_per_video < opt.sequence_length) {
    throw ConfigError("frames per video (" + std::to_string(opt.frames_per_video) +
                      ") must be >= sequence length (" + std::to_string(opt.sequence_length) + ")");
  }
  SyntheticDataset ds;
  ds.domain_id = spec.domain_id;
  ds.spec = spec;
  ds.signal = sig;
  for (int i = 0; i < opt.n_videos; ++i) {
    ds.videos.push_back(render_video(spec, sig, i, i % 2 == 0 ? kLive : kSpoof,
                                     opt.frames_per_video, opt.height, opt.width, seed));
  }
  return ds;
}

/// A named, documented domain preset.
struct DomainPreset {
  std::string name;
  std::string description;
  DomainSpec spec;
  ClassSignalSpec signal;
};

/// The four presets of the default benchmark, in order of increasing
/// divergence from the first.
inline std::vector<DomainPreset> benchmark_presets() {
  std::vector<DomainPreset> p(4);
  p[0].name = "studio";
  p[0].description = "neutral colour, flat background, sharp, light noise; warm washed-out prints";
  p[0].spec = DomainSpec{0, {1.0, 1.0, 1.0}, 0.0, 0.02, Texture::kFlat, 8.0, 0.35, 1};
  p[0].signal = ClassSignalSpec{3.0, 0.10, 1, 0.15, 1.5, 0.15, 0.3, {1.1, 1.0, 0.85}, 0.0, 0.25};

  p[1].name = "warm-stripes";
  p[1].description = "warm cast, striped background, mild blur; cool screens with glare";
  p[1].spec = DomainSpec{1, {1.2, 1.0, 0.8}, 0.4, 0.03, Texture::kStripes, 4.0, 0.40, 1};
  p[1].signal = ClassSignalSpec{4.0, 0.10, 1, 0.15, 1.5, 0.15, 0.3, {0.9, 1.0, 1.15}, 0.5, 0.0};

  p[2].name = "cool-speckle";
  p[2].description = "cool cast, speckled background, moderate noise; green-tinted flat prints";
  p[2].spec = DomainSpec{2, {0.8, 0.95, 1.2}, 0.2, 0.04, Texture::kSpeckle, 3.0, 0.30, 1};
  p[2].signal = ClassSignalSpec{3.0, 0.20, 1, 0.15, 1.5, 0.15, 0.3, {1.0, 1.1, 0.9}, 0.0, 0.35};

  p[3].name = "checker-blur";
  p[3].description = "yellow cast, fine checker background, heavy blur; blue screens with glare";
  p[3].spec = DomainSpec{3, {1.1, 1.15, 0.85}, 0.5, 0.035, Texture::kChecker, 3.0, 0.45, 1};
  p[3].signal = ClassSignalSpec{4.0, 0.15, 1, 0.15, 1.5, 0.15, 0.3, {0.85, 0.95, 1.2}, 0.3, 0.15};
  return p;
}

inline std::vector<std::string> preset_names() {
  std::vector<std::string> out;
  for (const auto& p : benchmark_presets()) out.push_back(p.name);
  return out;
}

/// Looks up a preset by name and assigns it `domain_id`.
inline DomainPreset preset_by_name(const std::string& name, int domain_id) {
  for (auto p : benchmark_presets()) {
    if (p.name == name) {
      p.spec.domain_id = domain_id;
      return p;
    }
  }
  std::string valid;
  for (const auto& n : preset_names()) valid += (valid.empty() ? "" : ", ") + n;
  throw ConfigError("unknown preset '" + name + "' (valid: " + valid + ")");
}

inline std::vector<SyntheticDataset> generate_benchmark(const std::vector<std::string>& presets,
                                                       const GenerateOptions& opt,
                                                       std::uint64_t seed) {
  std::vector<SyntheticDataset> out;
  for (std::size_t i = 0; i < presets.size(); ++i) {
    const DomainPreset p = preset_by_name(presets[i], static_cast<int>(i));
    SyntheticDataset ds = generate_domain(p.spec, p.signal, opt, seed);
    ds.preset = p.name;
    out.push_back(std::move(ds));
  }
  return out;
}

/// Four domains, 40 videos x 16 frames each at 32x32.
inline std::vector<SyntheticDataset> default_benchmark(std::uint64_t seed) {
  return generate_benchmark(preset_names(), GenerateOptions{}, seed);
}

// ---------------------------------------------------------------------------
// Leave-one-domain-out protocol

struct SourceSplit {
  int domain_id = 0;
  std::vector<Video> train;
  std::vector<Video> validation;
};

struct DgProtocol {
  std::vector<int> source_ids;
  int target_id = -1;
  std::vector<SourceSplit> sources;
  std::vector<Video> target_test;

  /// Index of a source domain in [0, D); the discriminators' label space.
  [[nodiscard]] int source_index(int domain_id) const {
    for (std::size_t i = 0; i < source_ids.size(); ++i) {
      if (source_ids[i] == domain_id) return static_cast<int>(i);
    }
    throw DataError("domain " + std::to_string(domain_id) + " is not a source domain");
  }
  [[nodiscard]] int num_sources() const { return static_cast<int>(source_ids.size()); }
};

/// Holds out `target_id` entirely; validation is drawn per source domain and
/// per class at video granularity (the last round(fraction * n) videos of
/// each class).
inline DgProtocol make_dg_protocol(const std::vector<SyntheticDataset>& domains, int target_id,
                                   double val_fraction) {
  if (domains.size() < 3) throw ConfigError("protocol needs at least 3 domains");
  if (!(val_fraction >= 0.0 && val_fraction < 1.0)) {
    throw ConfigError("validation fraction must lie in [0, 1)");
  }
  DgProtocol p;
  p.target_id = target_id;
  bool found = false;
  for (const auto& ds : domains) {
    if (ds.domain_id == target_id) {
      found = true;
      p.target_test = ds.videos;
      continue;
    }
    p.source_ids.push_back(ds.domain_id);
    SourceSplit split;
    split.domain_id = ds.domain_id;
    for (int cls : {kLive, kSpoof}) {
      std::vector<const Video*> vids;
      for (const auto& v : ds.videos) {
        if (v.class_label == cls) vids.push_back(&v);
      }
      const auto n_val = static_cast<std::size_t>(std::lround(val_fraction * static_cast<double>(vids.size())));
      for (std::size_t i = 0; i < vids.size(); ++i) {
        (i + n_val >= vids.size() ? split.validation : split.train).push_back(*vids[i]);
      }
    }
    auto by_id = [](const Video& a, const Video& b) { return a.video_id < b.video_id; };
    std::sort(split.train.begin(), split.train.end(), by_id);
    std::sort(split.validation.begin(), split.validation.end(), by_id);
    p.sources.push_back(std::move(split));
  }
  if (!found) throw ConfigError("target domain " + std::to_string(target_id) + " not present");
  return p;
}

// ---------------------------------------------------------------------------
// On-disk layout: <root>/domains/<id>/manifest.json plus one PPM per frame.

inline nlohmann::json to_json(const DomainSpec& s) {
  return {{"domain_id", s.domain_id},     {"gains", s.gains},
          {"blur_sigma", s.blur_sigma},   {"noise_sigma", s.noise_sigma},
          {"texture", to_string(s.texture)}, {"texture_scale", s.texture_scale},
          {"background_level", s.background_level}, {"downscale", s.downscale}};
}

inline nlohmann::json to_json(const ClassSignalSpec& s) {
  return {{"grid_period", s.grid_period},       {"grid_contrast", s.grid_contrast},
          {"border_width", s.border_width},     {"border_contrast", s.border_contrast},
          {"live_jitter", s.live_jitter},       {"live_flicker", s.live_flicker},
          {"blink_probability", s.blink_probability},
          {"medium_gains", s.medium_gains},     {"glare", s.glare},
          {"contrast_loss", s.contrast_loss}};
}

inline std::filesystem::path domain_dir(const std::filesystem::path& root, int domain_id) {
  return root / "domains" / std::to_string(domain_id);
}

inline void save_dataset(const std::filesystem::path& root, const SyntheticDataset& ds) {
  namespace fs = std::filesystem;
  const fs::path dir = domain_dir(root, ds.domain_id);
  fs::create_directories(dir / "frames");
  nlohmann::json records = nlohmann::json::array();
  for (const auto& v : ds.videos) {
    for (int f = 0; f < v.length(); ++f) {
      char name[64];
      std::snprintf(name, sizeof(name), "frames/v%07d_f%04d.ppm", v.video_id, f);
      write_netpbm(dir / name, v.frames[static_cast<std::size_t>(f)]);
      records.push_back({{"path", name},
                         {"class_label", v.class_label},
                         {"domain_id", v.domain_id},
                         {"video_id", v.video_id},
                         {"frame_index", f}});
    }
  }
  nlohmann::json m = {{"domain_id", ds.domain_id},
                      {"preset", ds.preset},
                      {"spec", to_json(ds.spec)},
                      {"signal", to_json(ds.signal)},
                      {"records", records}};
  std::ofstream os(dir / "manifest.json");
  os << m.dump(1) << "\n";
  if (!os) throw DataError("cannot write manifest in " + dir.string());
}

/// Reads one domain directory. Labels come from the manifest only; videos are
/// rebuilt by grouping records on video_id and ordering by frame_index.
inline SyntheticDataset load_dataset(const std::filesystem::path& dir) {
  std::ifstream is(dir / "manifest.json");
  if (!is) throw DataError("missing manifest: " + (dir / "manifest.json").string());
  nlohmann::json m;
  try {
    is >> m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed manifest in " + dir.string() + ": " + e.what());
  }
  SyntheticDataset ds;
  ds.domain_id = m.at("domain_id").get<int>();
  ds.preset = m.value("preset", std::string{});
  ds.spec.domain_id = ds.domain_id;
  struct Rec {
    int frame;
    int cls;
    std::string path;
  };
  std::map<int, std::vector<Rec>> by_video;
  for (const auto& r : m.at("records")) {
    if (r.at("domain_id").get<int>() != ds.domain_id) {
      throw DataError("record domain disagrees with manifest domain in " + dir.string());
    }
    by_video[r.at("video_id").get<int>()].push_back(
        {r.at("frame_index").get<int>(), r.at("class_label").get<int>(), r.at("path").get<std::string>()});
  }
  for (auto& [vid, recs] : by_video) {
    std::sort(recs.begin(), recs.end(), [](const Rec& a, const Rec& b) { return a.frame < b.frame; });
    Video v;
    v.video_id = vid;
    v.class_label = recs.front().cls;
    v.domain_id = ds.domain_id;
    for (const auto& r : recs) {
      if (r.cls != v.class_label) throw DataError("video " + std::to_string(vid) + " mixes classes");
      v.frames.push_back(read_netpbm(dir / r.path));
    }
    ds.videos.push_back(std::move(v));
  }
  return ds;
}

/// Loads every domain under <root>/domains, ordered by id.
inline std::vector<SyntheticDataset> load_benchmark(const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  const fs::path base = root / "domains";
  if (!fs::is_directory(base)) {
    throw DataError("no dataset at " + root.string() + " (run `fasdg generate` first)");
  }
  std::set<int> ids;
  for (const auto& e : fs::directory_iterator(base)) {
    if (e.is_directory()) ids.insert(std::stoi(e.path().filename().string()));
  }
  std::vector<SyntheticDataset> out;
  for (int id : ids) out.push_back(load_dataset(domain_dir(root, id)));
  return out;
}

}  // namespace fasdg

#endif  // FASDG_SYNTHDATA_HPP_
