#include "dyad/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <stdexcept>

#include "dyad/chunking.hpp"
#include "dyad/metadata.hpp"

namespace dyad {

namespace fs = std::filesystem;

DetectionStream synthetic_detections(std::uint64_t seed, std::size_t frames,
                                     std::size_t width, std::size_t height,
                                     BoundingBox* target_box) {
  std::mt19937_64 rng(seed);
  double w = static_cast<double>(width), h = static_cast<double>(height);

  // resting face box: roughly centered, between a quarter and half the frame
  std::uniform_real_distribution<double> frac(0.25, 0.45);
  double bw = frac(rng) * w, bh = frac(rng) * h;
  std::uniform_real_distribution<double> cx_d(0.35 * w, 0.65 * w);
  std::uniform_real_distribution<double> cy_d(0.3 * h, 0.55 * h);
  double cx = cx_d(rng), cy = cy_d(rng);
  BoundingBox rest{0, cx - bw / 2, cy - bh / 2, cx + bw / 2, cy + bh / 2};
  if (target_box) *target_box = rest;

  DetectionStream stream;
  stream.frame_count = frames;
  stream.frame_width = w;
  stream.frame_height = h;
  stream.per_frame.resize(frames);

  std::uniform_real_distribution<double> jitter(-0.01 * w, 0.01 * w);
  std::uniform_real_distribution<double> u01(0, 1);
  std::size_t gap_until = 0;
  for (std::size_t f = 0; f < frames; ++f) {
    // occasional short detector dropouts (always shorter than 25 frames)
    if (f >= gap_until && u01(rng) < 0.01)
      gap_until = f + 2 + static_cast<std::size_t>(u01(rng) * 10);
    if (f < gap_until) continue;
    double dx = jitter(rng), dy = jitter(rng);
    stream.per_frame[f].push_back(
        {f, rest.x1 + dx, rest.y1 + dy, rest.x2 + dx, rest.y2 + dy});
  }

  // transient distractors: short-lived boxes away from the target
  std::uniform_real_distribution<double> size_d(0.1 * w, 0.25 * w);
  for (std::size_t f = 0; f < frames; ++f) {
    if (u01(rng) >= 0.12) continue;
    std::size_t span = 1 + static_cast<std::size_t>(u01(rng) * 3);
    double dw = size_d(rng), dh = size_d(rng);
    // corners of the frame, far from the centered target
    double dx1 = u01(rng) < 0.5 ? 0.02 * w : w - 0.02 * w - dw;
    double dy1 = u01(rng) < 0.5 ? 0.02 * h : h - 0.02 * h - dh;
    for (std::size_t k = 0; k < span && f + k < frames; ++k)
      stream.per_frame[f + k].push_back(
          {f + k, dx1, dy1, dx1 + dw, dy1 + dh});
  }
  return stream;
}

namespace {

// Deterministic per-trait weighting of the 20-entry local metadata vector;
// values in {-1,-0.5,0,0.5,1}.
double meta_weight(std::size_t trait, std::size_t j) {
  return (static_cast<double>((j * 7 + trait * 3) % 5) - 2.0) / 2.0;
}

double audio_weight(std::size_t trait) { return trait % 2 == 0 ? 1.0 : -1.0; }
double video_weight(std::size_t trait) { return trait % 3 == 0 ? -1.0 : 1.0; }

struct PlantedSignals {
  double audio_amp = 0.5;       // per participant, [0.2, 1.0]
  double face_brightness = 140;  // per participant, [80, 200]
};

}  // namespace

SessionManifest generate_synthetic(const SyntheticSpec& spec,
                                   std::uint64_t seed,
                                   const std::string& out_dir) {
  if (spec.participant_count < 2 || spec.participant_count % 2 != 0)
    throw std::invalid_argument(
        "generate_synthetic: participant_count must be even and >= 2");
  if (spec.frame_count < kChunkSourceFrames)
    throw std::invalid_argument("generate_synthetic: frame_count below one chunk");
  if (spec.tasks.empty())
    throw std::invalid_argument("generate_synthetic: no tasks requested");

  fs::create_directories(out_dir);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0, 1);
  std::normal_distribution<double> gauss(0, 1);

  SessionManifest manifest;
  const std::size_t n_sessions = spec.participant_count / 2;

  // profiles + planted per-participant signals
  std::vector<PlantedSignals> signals(spec.participant_count);
  std::vector<SessionState> states(spec.participant_count);
  for (std::size_t i = 0; i < spec.participant_count; ++i) {
    ParticipantProfile p;
    p.id = "p" + std::to_string(100 + i);
    p.age = 20 + 45 * u01(rng);
    p.gender = i % 2 ? Gender::M : Gender::F;
    p.culture_region = static_cast<int>(i % kCultureRegions);
    manifest.participants.push_back(p);

    signals[i].audio_amp = 0.2 + 0.8 * u01(rng);
    signals[i].face_brightness = 80 + 120 * u01(rng);

    SessionState st;
    st.session_index = 1;
    for (auto& m : st.pre_mood) m = 1 + 4 * u01(rng);
    st.pre_fatigue = u01(rng) < 0.2 ? std::nullopt
                                    : std::make_optional(10 * u01(rng));
    st.relationship_known = (i / 2) % 2 == 0;
    states[i] = st;
  }

  for (std::size_t s = 0; s < n_sessions; ++s) {
    SessionEntry entry;
    entry.session_id = "s" + std::to_string(100 + s);
    entry.participants = {manifest.participants[2 * s].id,
                          manifest.participants[2 * s + 1].id};
    entry.relationship_known = states[2 * s].relationship_known;
    for (std::size_t k = 0; k < 2; ++k) {
      const auto& pid = entry.participants[k];
      entry.session_index[pid] = 1;
      entry.pre_mood[pid] = states[2 * s + k].pre_mood;
      entry.pre_fatigue[pid] = states[2 * s + k].pre_fatigue;
    }

    for (std::size_t t = 0; t < spec.tasks.size(); ++t) {
      TaskMedia task;
      task.name = spec.tasks[t];
      task.order = static_cast<int>(t + 1);
      if (task.name != "Talk")  // conversational task has no difficulty level
        task.difficulty = static_cast<int>(s % 4);
      task.frame_count = spec.frame_count;
      task.fps = spec.fps;

      fs::path dir = fs::path(out_dir) / entry.session_id / task.name;
      fs::create_directories(dir);

      // session audio: both participants' planted amplitudes mixed
      double amp = 0.5 * (signals[2 * s].audio_amp + signals[2 * s + 1].audio_amp);
      AudioBuffer audio;
      audio.sample_rate = kAudioSampleRate;
      double seconds = static_cast<double>(spec.frame_count) / spec.fps;
      audio.samples.resize(static_cast<std::size_t>(
          std::ceil(seconds * kAudioSampleRate)));
      for (std::size_t i = 0; i < audio.samples.size(); ++i) {
        double tt = static_cast<double>(i) / kAudioSampleRate;
        audio.samples[i] =
            amp * std::sin(2 * M_PI * 440 * tt) + 0.005 * gauss(rng);
      }
      fs::path audio_rel =
          fs::path(entry.session_id) / task.name / "audio.bin";
      save_audio((fs::path(out_dir) / audio_rel).string(), audio);
      task.audio = audio_rel.string();

      for (std::size_t k = 0; k < 2; ++k) {
        const auto& pid = entry.participants[k];
        const auto& sig = signals[2 * s + k];

        BoundingBox face_box;
        auto detections = synthetic_detections(
            rng(), spec.frame_count, spec.frame_width, spec.frame_height,
            &face_box);
        fs::path det_rel =
            fs::path(entry.session_id) / task.name / (pid + ".det");
        save_detections((fs::path(out_dir) / det_rel).string(), detections);
        task.detections[pid] = det_rel.string();

        // video: mid-grey background, brighter face region, mild noise
        std::vector<double> px(spec.frame_count * spec.frame_height *
                               spec.frame_width * 3);
        std::size_t idx = 0;
        for (std::size_t f = 0; f < spec.frame_count; ++f)
          for (std::size_t y = 0; y < spec.frame_height; ++y)
            for (std::size_t x = 0; x < spec.frame_width; ++x) {
              bool in_face = x + 0.5 >= face_box.x1 && x + 0.5 <= face_box.x2 &&
                             y + 0.5 >= face_box.y1 && y + 0.5 <= face_box.y2;
              double base = in_face ? sig.face_brightness : 60.0;
              for (std::size_t c = 0; c < 3; ++c)
                px[idx++] = std::clamp(base + 8 * gauss(rng), 0.0, 255.0);
            }
        auto video = Tensor::from_data(
            {spec.frame_count, spec.frame_height, spec.frame_width, 3},
            std::move(px));
        fs::path video_rel =
            fs::path(entry.session_id) / task.name / (pid + ".video");
        save_raw_tensor((fs::path(out_dir) / video_rel).string(), video);
        task.video[pid] = video_rel.string();
      }
      entry.tasks.push_back(std::move(task));
    }
    manifest.sessions.push_back(std::move(entry));
  }

  // labels: planted linear couplings plus noise
  for (std::size_t i = 0; i < spec.participant_count; ++i) {
    auto& profile = manifest.participants[i];
    // encode with the first task's shared fields (order 1, first difficulty)
    SessionState st = states[i];
    st.task_order = 1;
    st.task_difficulty = spec.tasks[0] == "Talk"
                             ? std::nullopt
                             : std::make_optional<int>((i / 2) % 4);
    auto meta = encode_local(profile, st);
    double a_norm = std::log(signals[i].audio_amp) - std::log(0.55);
    double b_norm = (signals[i].face_brightness - 140.0) / 60.0;
    for (std::size_t trait = 0; trait < 5; ++trait) {
      double m_score = 0, m_center = 0;
      for (std::size_t j = 0; j < kLocalMetaDim; ++j) {
        m_score += meta_weight(trait, j) * meta.data()[j];
        m_center += meta_weight(trait, j) * 0.5;
      }
      profile.ocean[trait] = spec.metadata_effect * (m_score - m_center) +
                             spec.audio_effect * audio_weight(trait) * a_norm +
                             spec.video_effect * video_weight(trait) * b_norm +
                             spec.noise * gauss(rng);
    }
  }

  save_manifest((fs::path(out_dir) / "manifest.json").string(), manifest);
  return manifest;
}

}  // namespace dyad
