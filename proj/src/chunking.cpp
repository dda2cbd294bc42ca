#include "dyad/chunking.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dyad {

VideoStream::VideoStream(Tensor frames, double fps)
    : frames_(std::move(frames)), fps_(fps) {
  if (frames_.rank() != 4 || frames_.shape()[3] != 3) {
    throw std::invalid_argument("VideoStream: expected (T,H,W,3) tensor, got " +
                                shape_str(frames_.shape()));
  }
  shape_ = frames_.shape();
  for (double v : frames_.data()) {
    if (v < 0.0 || v > 255.0)
      throw std::invalid_argument("VideoStream: pixel values must be in [0,255]");
  }
}

double VideoStream::pixel(std::size_t frame, std::size_t y, std::size_t x,
                          std::size_t channel) const {
  return frames_.data()[((frame * shape_[1] + y) * shape_[2] + x) * 3 + channel];
}

NormalizationStats::NormalizationStats(std::array<double, 3> mean_,
                                       std::array<double, 3> stddev_)
    : mean(mean_), stddev(stddev_) {
  for (double s : stddev)
    if (s <= 0.0)
      throw std::invalid_argument("NormalizationStats: stddev must be > 0");
}

std::vector<FrameRange> plan_chunks(std::size_t frame_count) {
  if (frame_count < kChunkSourceFrames) {
    throw std::invalid_argument("plan_chunks: need at least 64 frames, got " +
                                std::to_string(frame_count));
  }
  std::vector<FrameRange> ranges;
  for (std::size_t s = 0; s + kChunkSourceFrames <= frame_count;
       s += kChunkSourceFrames)
    ranges.push_back({s, s + kChunkSourceFrames});
  return ranges;
}

namespace {

// Bilinear sample of one frame region, clamped at the region borders.
double sample_bilinear(const VideoStream& v, std::size_t frame, double y,
                       double x, std::size_t c) {
  double max_y = static_cast<double>(v.height()) - 1.0;
  double max_x = static_cast<double>(v.width()) - 1.0;
  y = std::clamp(y, 0.0, max_y);
  x = std::clamp(x, 0.0, max_x);
  std::size_t y0 = static_cast<std::size_t>(std::floor(y));
  std::size_t x0 = static_cast<std::size_t>(std::floor(x));
  std::size_t y1 = std::min(y0 + 1, static_cast<std::size_t>(max_y));
  std::size_t x1 = std::min(x0 + 1, static_cast<std::size_t>(max_x));
  double fy = y - static_cast<double>(y0);
  double fx = x - static_cast<double>(x0);
  double top = (1 - fx) * v.pixel(frame, y0, x0, c) + fx * v.pixel(frame, y0, x1, c);
  double bot = (1 - fx) * v.pixel(frame, y1, x0, c) + fx * v.pixel(frame, y1, x1, c);
  return (1 - fy) * top + fy * bot;
}

}  // namespace

Tensor extract_chunk(const VideoStream& video, const FrameRange& range,
                     const std::optional<Track>& crop, std::size_t side) {
  if (range.end != range.start + kChunkSourceFrames ||
      range.end > video.frame_count()) {
    throw std::invalid_argument("extract_chunk: invalid frame range");
  }
  if (crop && crop->empty())
    throw std::invalid_argument("extract_chunk: crop track is empty");

  std::vector<double> out(kChunkFrames * side * side * 3);
  std::size_t oi = 0;
  for (std::size_t k = 0; k < kChunkFrames; ++k) {
    std::size_t frame = range.start + 2 * k;
    double rx1 = 0, ry1 = 0;
    double rw = static_cast<double>(video.width());
    double rh = static_cast<double>(video.height());
    if (crop) {
      const auto& box = crop->nearest(frame);
      rx1 = box.x1;
      ry1 = box.y1;
      rw = box.width();
      rh = box.height();
    }
    double sy = rh / static_cast<double>(side);
    double sx = rw / static_cast<double>(side);
    for (std::size_t i = 0; i < side; ++i) {
      double y = ry1 + (static_cast<double>(i) + 0.5) * sy - 0.5;
      for (std::size_t j = 0; j < side; ++j) {
        double x = rx1 + (static_cast<double>(j) + 0.5) * sx - 0.5;
        for (std::size_t c = 0; c < 3; ++c)
          out[oi++] = sample_bilinear(video, frame, y, x, c);
      }
    }
  }
  return Tensor::from_data({kChunkFrames, side, side, 3}, std::move(out));
}

Tensor extract_audio(const AudioBuffer& audio, const FrameRange& range,
                     double fps) {
  if (audio.sample_rate != kAudioSampleRate) {
    throw std::invalid_argument("extract_audio: expected 44100 Hz, got " +
                                std::to_string(audio.sample_rate));
  }
  double start_time = static_cast<double>(range.start) / fps;
  auto start = static_cast<std::size_t>(
      std::llround(start_time * static_cast<double>(kAudioSampleRate)));
  std::vector<double> out(kAudioChunkSamples, 0.0);
  for (std::size_t i = 0; i < kAudioChunkSamples; ++i) {
    std::size_t s = start + i;
    if (s >= audio.samples.size()) break;  // zero-padded tail
    out[i] = audio.samples[s];
  }
  return Tensor::from_data({kAudioChunkSamples}, std::move(out));
}

Tensor normalize_pixels(const Tensor& chunk, const NormalizationStats& stats) {
  if (chunk.rank() != 4 || chunk.shape()[3] != 3)
    throw std::invalid_argument("normalize_pixels: expected (T,H,W,3) chunk");
  std::vector<double> out(chunk.size());
  const auto d = chunk.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::size_t c = i % 3;
    out[i] = (d[i] / 255.0 - stats.mean[c]) / stats.stddev[c];
  }
  return Tensor::from_data(chunk.shape(), std::move(out));
}

Tensor denormalize_pixels(const Tensor& chunk, const NormalizationStats& stats) {
  std::vector<double> out(chunk.size());
  const auto d = chunk.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::size_t c = i % 3;
    out[i] = (d[i] * stats.stddev[c] + stats.mean[c]) * 255.0;
  }
  return Tensor::from_data(chunk.shape(), std::move(out));
}

std::vector<std::size_t> subsample_uniform(std::size_t count,
                                           std::size_t target) {
  std::vector<std::size_t> idx;
  if (count <= target) {
    idx.resize(count);
    for (std::size_t i = 0; i < count; ++i) idx[i] = i;
    return idx;
  }
  for (std::size_t i = 0; i < target; ++i) {
    auto k = static_cast<std::size_t>(std::llround(
        static_cast<double>(i) * static_cast<double>(count) /
        static_cast<double>(target)));
    k = std::min(k, count - 1);
    if (idx.empty() || idx.back() != k) idx.push_back(k);
  }
  return idx;
}

}  // namespace dyad
