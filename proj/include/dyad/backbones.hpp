#pragma once

#include <memory>
#include <vector>

#include "dyad/chunking.hpp"
#include "dyad/tensor.hpp"

namespace dyad {

inline constexpr std::size_t kFeatureTime = 16;
inline constexpr std::size_t kFeatureChannels = 128;
inline constexpr std::size_t kAudioFeatureDim = 128;

// Contract: (32, 4S, 4S, 3) normalized chunk -> (16, S, S, 128) features.
class VisualBackbone {
 public:
  virtual ~VisualBackbone() = default;
  virtual Tensor forward(const Tensor& chunk) const = 0;
  virtual std::vector<Parameter>& parameters() = 0;
  virtual std::size_t spatial_out() const = 0;
};

// Contract: (132300,) raw audio -> (128,) features.
class AudioBackbone {
 public:
  virtual ~AudioBackbone() = default;
  virtual Tensor forward(const Tensor& audio) const = 0;
  virtual std::vector<Parameter>& parameters() = 0;
};

// Deterministic stand-in for the pretrained video network: temporal pairwise
// averaging 32->16, spatial 4x4 average pooling, then a seeded 3->128 linear
// channel lift with ReLU. Frozen by default.
class StubVisualBackbone : public VisualBackbone {
 public:
  StubVisualBackbone(std::uint64_t seed, std::size_t spatial_out = 28);
  Tensor forward(const Tensor& chunk) const override;
  std::vector<Parameter>& parameters() override { return params_; }
  std::size_t spatial_out() const override { return spatial_out_; }

 private:
  std::size_t spatial_out_;
  std::vector<Parameter> params_;  // [0] weight (3,128), [1] bias (128,)
};

// Stand-in for the pretrained audio network: 128 seeded strided windows of
// squared samples, weighted, log-compressed. Frozen by default.
class StubAudioBackbone : public AudioBackbone {
 public:
  explicit StubAudioBackbone(std::uint64_t seed);
  Tensor forward(const Tensor& audio) const override;
  std::vector<Parameter>& parameters() override { return params_; }

  static constexpr std::size_t kWindow = 1024;
  static constexpr double kLogFloor = 1e-6;

 private:
  std::vector<Parameter> params_;  // [0] band weights (128, kWindow)
  std::vector<std::size_t> starts_;
};

void freeze(VisualBackbone& backbone);
void freeze(AudioBackbone& backbone);
void unfreeze(VisualBackbone& backbone);
void unfreeze(AudioBackbone& backbone);

// The three backbones of the feature stage; local and extended context share
// one parameter set by construction.
struct BackboneSet {
  std::shared_ptr<VisualBackbone> face;     // g_F
  std::shared_ptr<VisualBackbone> context;  // g_L and g_E, shared weights
  std::shared_ptr<AudioBackbone> audio;     // g_A

  static BackboneSet stubs(std::uint64_t seed, std::size_t spatial_out = 28);
};

// Frozen-backbone outputs for one chunk.
struct ChunkFeatures {
  Tensor face;      // (16,S,S,128)
  Tensor local;     // (16,S,S,128)
  Tensor extended;  // (16,S,S,128)
  Tensor audio;     // (128,)
};

ChunkFeatures extract_features(const BackboneSet& backbones,
                               const ChunkBundle& bundle,
                               const NormalizationStats& stats);

}  // namespace dyad
