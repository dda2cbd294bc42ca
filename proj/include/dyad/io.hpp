#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dyad/metadata.hpp"
#include "dyad/tensor.hpp"

namespace dyad {

// Raw tensor file: 4 little-endian u32 dims, then f64 data row-major.
void save_raw_tensor(const std::string& path, const Tensor& t);
Tensor load_raw_tensor(const std::string& path);

// Single-channel float64 audio: u32 sample rate, u64 sample count, f64 data.
struct AudioBuffer {
  std::uint32_t sample_rate = 44100;
  std::vector<double> samples;
};
void save_audio(const std::string& path, const AudioBuffer& audio);
AudioBuffer load_audio(const std::string& path);

// Named-tensor archive used for model checkpoints; carries an opaque
// JSON config blob alongside the weights.
struct TensorArchive {
  std::string config_json;
  std::vector<std::pair<std::string, Tensor>> tensors;
};
void save_archive(const std::string& path, const TensorArchive& archive);
TensorArchive load_archive(const std::string& path);

// --- session manifest ----------------------------------------------------

struct TaskMedia {
  std::string name;                       // Talk, Lego, Animals, Ghost
  int order = 1;                          // 1..4
  std::optional<int> difficulty;          // 0..3 when the task has levels
  std::map<std::string, std::string> video;       // participant id -> path
  std::map<std::string, std::string> detections;  // participant id -> path
  std::string audio;
  std::size_t frame_count = 0;
  double fps = 25.0;
};

struct SessionEntry {
  std::string session_id;
  std::array<std::string, 2> participants;
  bool relationship_known = false;
  std::map<std::string, int> session_index;                // per participant
  std::map<std::string, std::array<double, 8>> pre_mood;   // per participant
  std::map<std::string, std::optional<double>> pre_fatigue;
  std::vector<TaskMedia> tasks;
};

struct SessionManifest {
  std::vector<ParticipantProfile> participants;
  std::vector<SessionEntry> sessions;

  const ParticipantProfile& profile(const std::string& id) const;
  // Per-participant session state for one task of a session.
  SessionState state_for(const SessionEntry& session, const TaskMedia& task,
                         const std::string& participant_id) const;
};

void save_manifest(const std::string& path, const SessionManifest& manifest);
SessionManifest load_manifest(const std::string& path);

}  // namespace dyad
