#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "dyad/geometry.hpp"
#include "dyad/io.hpp"
#include "dyad/tensor.hpp"

namespace dyad {

inline constexpr std::size_t kChunkSourceFrames = 64;  // 64 frames, stride 2
inline constexpr std::size_t kChunkFrames = 32;
inline constexpr std::size_t kChunkSide = 112;
inline constexpr std::size_t kAudioSampleRate = 44100;
inline constexpr std::size_t kAudioChunkSamples = 132300;

// Decoded video held as a (frames, H, W, 3) tensor with values in [0,255].
class VideoStream {
 public:
  explicit VideoStream(Tensor frames, double fps = 25.0);

  std::size_t frame_count() const { return shape_[0]; }
  std::size_t height() const { return shape_[1]; }
  std::size_t width() const { return shape_[2]; }
  double fps() const { return fps_; }
  double pixel(std::size_t frame, std::size_t y, std::size_t x,
               std::size_t channel) const;
  const Tensor& frames() const { return frames_; }

 private:
  Tensor frames_;
  Shape shape_;
  double fps_;
};

struct FrameRange {
  std::size_t start = 0;  // inclusive
  std::size_t end = 0;    // exclusive; always start + 64
};

// Per-channel pixel normalization statistics (of the pretraining corpus the
// visual backbone expects).
struct NormalizationStats {
  std::array<double, 3> mean{};
  std::array<double, 3> stddev{};

  NormalizationStats(std::array<double, 3> mean, std::array<double, 3> stddev);
};

// Synchronized face / local / extended chunks plus the audio window.
struct ChunkBundle {
  Tensor face, local, extended;  // (32, side, side, 3) in [0,255]
  Tensor audio;                  // (132300,)
  std::size_t chunk_index = 0;
  FrameRange source_range;
};

// Consecutive disjoint 64-frame ranges; remainder under 64 frames dropped.
std::vector<FrameRange> plan_chunks(std::size_t frame_count);

// 32 frames (stride 2 within the range), optional track crop, bilinear
// resize to side x side.
Tensor extract_chunk(const VideoStream& video, const FrameRange& range,
                     const std::optional<Track>& crop,
                     std::size_t side = kChunkSide);

// Audio window anchored at the chunk's start time, exactly 132300 samples,
// zero-padded past the end of the buffer.
Tensor extract_audio(const AudioBuffer& audio, const FrameRange& range,
                     double fps);

// x -> (x/255 - mean_c) / std_c
Tensor normalize_pixels(const Tensor& chunk, const NormalizationStats& stats);
Tensor denormalize_pixels(const Tensor& chunk, const NormalizationStats& stats);

// Uniform index subsampling down to roughly `target` chunks.
std::vector<std::size_t> subsample_uniform(std::size_t count,
                                           std::size_t target = 120);

}  // namespace dyad
