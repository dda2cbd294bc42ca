#pragma once

#include <array>
#include <optional>
#include <string>

#include "dyad/tensor.hpp"

namespace dyad {

enum class Gender { F, M };

inline constexpr int kCultureRegions = 6;
inline constexpr std::size_t kIndividualDim = 18;
inline constexpr std::size_t kLocalMetaDim = 20;
inline constexpr std::size_t kExtendedMetaDim = 19;

// Stable per-participant context plus ground-truth labels (labels are never
// encoded as inputs).
struct ParticipantProfile {
  std::string id;
  double age = 0;                    // years; clamped to [17,75] on encode
  Gender gender = Gender::F;
  int culture_region = 0;            // one of 6 categories
  std::array<double, 5> ocean{};     // OCEAN z-scores (ground truth)
};

// Transient per-session, per-task context.
struct SessionState {
  int session_index = 1;             // 1..5
  std::array<double, 8> pre_mood{};  // good,bad,happy,sad,friendly,
                                     // unfriendly,tense,relaxed; each in [1,5]
  std::optional<double> pre_fatigue; // [0,10]; missing -> encoded as 0
  int task_order = 1;                // 1..4
  std::optional<int> task_difficulty;  // 0..3; tasks without a level -> 0
  bool relationship_known = false;
};

struct MetadataVectors {
  Tensor local;     // (20,)
  Tensor extended;  // (19,)
};

// [age, gender, culture one-hot(6), session_index, mood(8), fatigue] -> (18,)
Tensor encode_individual(const ParticipantProfile& profile,
                         const SessionState& state);

// individual(18) || [task_order, task_difficulty] -> (20,)
Tensor encode_local(const ParticipantProfile& profile,
                    const SessionState& state);

// interlocutor individual(18) || [relationship_known] -> (19,)
Tensor encode_extended(const ParticipantProfile& interlocutor,
                       const SessionState& state);

// A SessionState is per participant: session_index, mood and fatigue belong
// to the profiled person, while task and relationship fields are shared
// across the dyad.
MetadataVectors encode_metadata(const ParticipantProfile& target,
                                const SessionState& target_state,
                                const ParticipantProfile& interlocutor,
                                const SessionState& interlocutor_state);

}  // namespace dyad
