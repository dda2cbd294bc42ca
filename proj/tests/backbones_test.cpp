#include "dyad/backbones.hpp"

#include <cmath>
#include <random>

#include "doctest.h"

using namespace dyad;

TEST_CASE("visual stub maps (32,4S,4S,3) to (16,S,S,128)") {
  StubVisualBackbone bb(1, 7);
  std::mt19937_64 rng(2);
  auto chunk = Tensor::uniform({32, 28, 28, 3}, -1.0, 1.0, rng);
  auto z = bb.forward(chunk);
  CHECK(z.shape() == Shape{16, 7, 7, 128});
  CHECK(bb.spatial_out() == 7);
  CHECK_THROWS_AS(bb.forward(Tensor::zeros({32, 27, 28, 3})),
                  std::invalid_argument);
}

TEST_CASE("full-geometry visual stub produces the canonical feature shape") {
  StubVisualBackbone bb(1);  // default spatial_out = 28
  auto z = bb.forward(Tensor::full({32, 112, 112, 3}, 0.5));
  CHECK(z.shape() == Shape{16, 28, 28, 128});
}

TEST_CASE("visual stub is deterministic in its seed") {
  StubVisualBackbone a(11, 4), b(11, 4), c(12, 4);
  std::mt19937_64 rng(3);
  auto chunk = Tensor::uniform({32, 16, 16, 3}, 0.0, 1.0, rng);
  auto za = a.forward(chunk), zb = b.forward(chunk), zc = c.forward(chunk);
  bool same = true, differs = false;
  for (std::size_t i = 0; i < za.size(); ++i) {
    same = same && za.data()[i] == zb.data()[i];
    differs = differs || za.data()[i] != zc.data()[i];
  }
  CHECK(same);
  CHECK(differs);
}

TEST_CASE("visual stub pools before the channel lift") {
  // A constant input must yield features that are constant across time and
  // space (the lift acts per location on the pooled RGB triple).
  StubVisualBackbone bb(5, 4);
  auto z = bb.forward(Tensor::full({32, 16, 16, 3}, 0.25));
  for (std::size_t ch = 0; ch < 128; ++ch) {
    double ref = z.at({0, 0, 0, ch});
    CHECK(z.at({15, 3, 3, ch}) == doctest::Approx(ref).epsilon(1e-12));
    CHECK(ref >= 0.0);  // ReLU output
  }
}

TEST_CASE("visual stub parameters are frozen by default") {
  StubVisualBackbone bb(1, 4);
  for (const auto& p : bb.parameters()) CHECK(p.frozen);
  unfreeze(bb);
  for (const auto& p : bb.parameters()) CHECK(!p.frozen);
  freeze(bb);
  for (const auto& p : bb.parameters()) CHECK(p.frozen);
}

TEST_CASE("audio stub maps (132300,) to (128,)") {
  StubAudioBackbone bb(1);
  std::mt19937_64 rng(4);
  auto audio = Tensor::uniform({132300}, -1.0, 1.0, rng);
  auto z = bb.forward(audio);
  CHECK(z.shape() == Shape{128});
  CHECK_THROWS_AS(bb.forward(Tensor::zeros({132301})), std::invalid_argument);
}

TEST_CASE("audio stub log-energy on silence hits the floor") {
  StubAudioBackbone bb(1);
  auto z = bb.forward(Tensor::zeros({132300}));
  for (double v : z.data())
    CHECK(v == doctest::Approx(std::log(StubAudioBackbone::kLogFloor))
                   .epsilon(1e-12));
}

TEST_CASE("audio stub responds monotonically to amplitude") {
  StubAudioBackbone bb(1);
  auto quiet = bb.forward(Tensor::full({132300}, 0.01));
  auto loud = bb.forward(Tensor::full({132300}, 0.5));
  for (std::size_t i = 0; i < 128; ++i)
    CHECK(loud.data()[i] > quiet.data()[i]);
}

TEST_CASE("backbone set shares the context network between scales") {
  auto set = BackboneSet::stubs(7, 4);
  CHECK(set.face != set.context);
  std::mt19937_64 rng(8);
  auto chunk = Tensor::uniform({32, 16, 16, 3}, 0.0, 255.0, rng);

  ChunkBundle bundle;
  bundle.face = chunk;
  bundle.local = chunk;
  bundle.extended = chunk;
  bundle.audio = Tensor::full({132300}, 0.1);
  NormalizationStats stats({0.45, 0.45, 0.45}, {0.225, 0.225, 0.225});
  auto f = extract_features(set, bundle, stats);
  CHECK(f.face.shape() == Shape{16, 4, 4, 128});
  CHECK(f.local.shape() == Shape{16, 4, 4, 128});
  CHECK(f.extended.shape() == Shape{16, 4, 4, 128});
  CHECK(f.audio.shape() == Shape{128});
  // identical input through the shared context network gives identical output
  for (std::size_t i = 0; i < f.local.size(); ++i)
    CHECK(f.local.data()[i] == f.extended.data()[i]);
}

TEST_CASE("audio stub gradients flow when unfrozen") {
  StubAudioBackbone bb(3);
  std::mt19937_64 rng(9);
  auto audio = Tensor::uniform({132300}, -0.5, 0.5, rng, /*requires_grad=*/true);
  auto loss = mean(bb.forward(audio));
  loss.backward();
  double total = 0;
  for (double g : audio.grad()) total += std::abs(g);
  CHECK(total > 0.0);
}
