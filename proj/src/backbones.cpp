#include "dyad/backbones.hpp"

#include <stdexcept>

namespace dyad {

StubVisualBackbone::StubVisualBackbone(std::uint64_t seed,
                                       std::size_t spatial_out)
    : spatial_out_(spatial_out) {
  std::mt19937_64 rng(seed);
  params_.emplace_back("stub_visual_lift_w",
                       Tensor::uniform({3, kFeatureChannels}, -1.0, 1.0, rng, true),
                       /*frozen=*/true);
  params_.emplace_back("stub_visual_lift_b",
                       Tensor::uniform({kFeatureChannels}, -0.1, 0.1, rng, true),
                       /*frozen=*/true);
}

Tensor StubVisualBackbone::forward(const Tensor& chunk) const {
  Shape expected{kChunkFrames, 4 * spatial_out_, 4 * spatial_out_, 3};
  if (chunk.shape() != expected) {
    throw std::invalid_argument("StubVisualBackbone: expected " +
                                shape_str(expected) + ", got " +
                                shape_str(chunk.shape()));
  }
  auto t = pool_avg(chunk, {2, 1, 1, 1}, {2, 1, 1, 1});      // 32 -> 16
  auto s = pool_avg(t, {1, 4, 4, 1}, {1, 4, 4, 1});          // 4S -> S
  auto flat = reshape(s, {kFeatureTime * spatial_out_ * spatial_out_, 3});
  auto lifted = relu(add(matmul(flat, params_[0].tensor), params_[1].tensor));
  return reshape(lifted,
                 {kFeatureTime, spatial_out_, spatial_out_, kFeatureChannels});
}

StubAudioBackbone::StubAudioBackbone(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  params_.emplace_back(
      "stub_audio_bank",
      Tensor::uniform({kAudioFeatureDim, kWindow}, 0.1, 1.0, rng, true),
      /*frozen=*/true);
  starts_.resize(kAudioFeatureDim);
  for (std::size_t j = 0; j < kAudioFeatureDim; ++j)
    starts_[j] = j * (kAudioChunkSamples - kWindow) / (kAudioFeatureDim - 1);
}

Tensor StubAudioBackbone::forward(const Tensor& audio) const {
  if (audio.shape() != Shape{kAudioChunkSamples}) {
    throw std::invalid_argument("StubAudioBackbone: expected (132300,), got " +
                                shape_str(audio.shape()));
  }
  auto power = reshape(mul(audio, audio), {1, kAudioChunkSamples});
  std::vector<Tensor> energies;
  energies.reserve(kAudioFeatureDim);
  for (std::size_t j = 0; j < kAudioFeatureDim; ++j) {
    auto window = reshape(slice(power, 1, starts_[j], kWindow), {1, kWindow});
    auto weights = reshape(slice(params_[0].tensor, 0, j, 1), {kWindow, 1});
    auto e = add(matmul(window, weights), Tensor::full({1, 1}, kLogFloor));
    energies.push_back(log_op(e));
  }
  return reshape(concat(energies, 0), {kAudioFeatureDim});
}

namespace {
void set_frozen(std::vector<Parameter>& params, bool frozen) {
  for (auto& p : params) p.frozen = frozen;
}
}  // namespace

void freeze(VisualBackbone& backbone) { set_frozen(backbone.parameters(), true); }
void freeze(AudioBackbone& backbone) { set_frozen(backbone.parameters(), true); }
void unfreeze(VisualBackbone& backbone) { set_frozen(backbone.parameters(), false); }
void unfreeze(AudioBackbone& backbone) { set_frozen(backbone.parameters(), false); }

BackboneSet BackboneSet::stubs(std::uint64_t seed, std::size_t spatial_out) {
  BackboneSet set;
  set.face = std::make_shared<StubVisualBackbone>(seed, spatial_out);
  set.context = std::make_shared<StubVisualBackbone>(seed + 1, spatial_out);
  set.audio = std::make_shared<StubAudioBackbone>(seed + 2);
  return set;
}

ChunkFeatures extract_features(const BackboneSet& backbones,
                               const ChunkBundle& bundle,
                               const NormalizationStats& stats) {
  ChunkFeatures f;
  f.face = backbones.face->forward(normalize_pixels(bundle.face, stats));
  f.local = backbones.context->forward(normalize_pixels(bundle.local, stats));
  f.extended =
      backbones.context->forward(normalize_pixels(bundle.extended, stats));
  f.audio = backbones.audio->forward(bundle.audio);
  return f;
}

}  // namespace dyad
