#ifndef FASDG_DATA_HPP_
#define FASDG_DATA_HPP_

#include "fasdg/core.hpp"

#include <cmath>
#include <span>
#include <string>
#include <vector>

namespace fasdg {

inline constexpr int kLive = 0;
inline constexpr int kSpoof = 1;

/// Planar (CHW) image with values in [0, 1].
struct Image {
  int channels = 3;
  int height = 0;
  int width = 0;
  std::vector<double> pixels;

  Image() = default;
  Image(int c, int h, int w, double fill = 0.0)
      : channels(c), height(h), width(w), pixels(static_cast<std::size_t>(c * h * w), fill) {}

  [[nodiscard]] double& at(int c, int y, int x) {
    return pixels[static_cast<std::size_t>((c * height + y) * width + x)];
  }
  [[nodiscard]] double at(int c, int y, int x) const {
    return pixels[static_cast<std::size_t>((c * height + y) * width + x)];
  }
  [[nodiscard]] Dims dims() const { return Dims{channels, height, width}; }
  friend bool operator==(const Image&, const Image&) = default;
};

struct LabeledImage {
  Image image;
  int class_label = kLive;
  int domain_id = 0;
  int video_id = 0;
  int frame_index = 0;
};

/// T consecutive frames of one video.
struct VideoClip {
  std::vector<LabeledImage> frames;
  int class_label = kLive;
  int domain_id = 0;
};

struct Video {
  int video_id = 0;
  int class_label = kLive;
  int domain_id = 0;
  std::vector<Image> frames;

  [[nodiscard]] LabeledImage frame(int i) const {
    return LabeledImage{frames[static_cast<std::size_t>(i)], class_label, domain_id, video_id, i};
  }
  [[nodiscard]] int length() const { return static_cast<int>(frames.size()); }
};

inline void validate(const LabeledImage& s, int num_domains) {
  if (s.class_label != kLive && s.class_label != kSpoof) {
    throw DataError("class label must be 0 (live) or 1 (spoof), got " +
                    std::to_string(s.class_label));
  }
  if (s.domain_id < 0 || s.domain_id >= num_domains) {
    throw DataError("domain id " + std::to_string(s.domain_id) + " outside [0, " +
                    std::to_string(num_domains) + ")");
  }
  for (double v : s.image.pixels) {
    if (!std::isfinite(v)) throw DataError("non-finite pixel value");
  }
}

inline void validate(const VideoClip& clip, int sequence_length) {
  if (static_cast<int>(clip.frames.size()) != sequence_length) {
    throw ShapeError("clip length: expected " + std::to_string(sequence_length) + ", got " +
                     std::to_string(clip.frames.size()));
  }
  for (std::size_t i = 0; i < clip.frames.size(); ++i) {
    const auto& f = clip.frames[i];
    if (f.video_id != clip.frames.front().video_id || f.class_label != clip.class_label ||
        f.domain_id != clip.domain_id) {
      throw DataError("clip frames disagree on video, class or domain");
    }
    if (i > 0 && f.frame_index <= clip.frames[i - 1].frame_index) {
      throw DataError("clip frame indices must increase strictly");
    }
  }
}

/// Packs images into one activation batch, checking their size against `dims`.
inline Activation to_batch(std::span<const Image* const> images, const Dims& dims) {
  Matrix m(static_cast<Eigen::Index>(images.size()), dims.size());
  for (std::size_t n = 0; n < images.size(); ++n) {
    const Image& im = *images[n];
    require_shape(im.dims() == dims, "image size", to_string(dims), to_string(im.dims()));
    m.row(static_cast<Eigen::Index>(n)) =
        Eigen::Map<const RowVector>(im.pixels.data(), dims.size());
  }
  return Activation{std::move(m), dims};
}

inline Activation to_batch(std::span<const LabeledImage> samples, const Dims& dims) {
  std::vector<const Image*> ptrs;
  ptrs.reserve(samples.size());
  for (const auto& s : samples) ptrs.push_back(&s.image);
  return to_batch(std::span<const Image* const>(ptrs), dims);
}

/// Stacks clips time-major (row t*B + b is frame t of clip b).
inline Activation to_sequence_batch(std::span<const VideoClip> clips, int steps, const Dims& dims) {
  std::vector<const Image*> ptrs(clips.size() * static_cast<std::size_t>(steps));
  for (std::size_t b = 0; b < clips.size(); ++b) {
    require_shape(static_cast<int>(clips[b].frames.size()) == steps, "clip length",
                  std::to_string(steps), std::to_string(clips[b].frames.size()));
    for (int t = 0; t < steps; ++t) {
      ptrs[static_cast<std::size_t>(t) * clips.size() + b] =
          &clips[b].frames[static_cast<std::size_t>(t)].image;
    }
  }
  return to_batch(std::span<const Image* const>(ptrs), dims);
}

}  // namespace fasdg

#endif  // FASDG_DATA_HPP_
