#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dyad/geometry.hpp"
#include "dyad/io.hpp"

namespace dyad {

// Knobs of the generated corpus. Effect sizes control how strongly each
// signal channel (metadata, audio band energy, face brightness) drives the
// ground-truth trait labels; 0 decouples the channel entirely.
struct SyntheticSpec {
  std::size_t participant_count = 20;  // even; two per session
  std::size_t frame_count = 128;       // per task video
  std::size_t frame_height = 16;
  std::size_t frame_width = 16;
  double fps = 25.0;
  double metadata_effect = 1.0;
  double audio_effect = 1.0;
  double video_effect = 0.3;
  double noise = 0.05;
  std::vector<std::string> tasks = {"Talk"};
};

// Writes video/audio/detection files plus `manifest.json` under out_dir and
// returns the manifest. Deterministic in (spec, seed).
SessionManifest generate_synthetic(const SyntheticSpec& spec,
                                   std::uint64_t seed,
                                   const std::string& out_dir);

// One stable (lightly jittered) target box per frame plus transient
// distractor detections; `target_box` receives the planted resting box.
DetectionStream synthetic_detections(std::uint64_t seed, std::size_t frames,
                                     std::size_t width, std::size_t height,
                                     BoundingBox* target_box = nullptr);

}  // namespace dyad
