#include "dyad/metadata.hpp"

#include <algorithm>
#include <stdexcept>

namespace dyad {

namespace {

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

void check_state(const SessionState& state) {
  if (state.session_index < 1 || state.session_index > 5)
    throw std::invalid_argument("session_index must be in 1..5");
  for (double m : state.pre_mood)
    if (m < 1 || m > 5)
      throw std::invalid_argument("pre-session mood ratings must be in [1,5]");
  if (state.pre_fatigue && (*state.pre_fatigue < 0 || *state.pre_fatigue > 10))
    throw std::invalid_argument("pre-session fatigue must be in [0,10]");
  if (state.task_order < 1 || state.task_order > 4)
    throw std::invalid_argument("task_order must be in 1..4");
  if (state.task_difficulty &&
      (*state.task_difficulty < 0 || *state.task_difficulty > 3))
    throw std::invalid_argument("task_difficulty must be in 0..3");
}

}  // namespace

Tensor encode_individual(const ParticipantProfile& profile,
                         const SessionState& state) {
  if (profile.culture_region < 0 || profile.culture_region >= kCultureRegions)
    throw std::invalid_argument("culture_region must be in 0..5");
  check_state(state);

  std::vector<double> v;
  v.reserve(kIndividualDim);
  v.push_back(clamp01((profile.age - 17.0) / (75.0 - 17.0)));
  v.push_back(profile.gender == Gender::M ? 1.0 : 0.0);
  for (int c = 0; c < kCultureRegions; ++c)
    v.push_back(c == profile.culture_region ? 1.0 : 0.0);
  v.push_back((state.session_index - 1) / 4.0);
  for (double m : state.pre_mood) v.push_back((m - 1.0) / 4.0);
  v.push_back(state.pre_fatigue ? *state.pre_fatigue / 10.0 : 0.0);
  return Tensor::from_data({kIndividualDim}, std::move(v));
}

Tensor encode_local(const ParticipantProfile& profile,
                    const SessionState& state) {
  auto ind = encode_individual(profile, state);
  std::vector<double> v(ind.data().begin(), ind.data().end());
  v.push_back((state.task_order - 1) / 3.0);
  v.push_back(state.task_difficulty ? *state.task_difficulty / 3.0 : 0.0);
  return Tensor::from_data({kLocalMetaDim}, std::move(v));
}

Tensor encode_extended(const ParticipantProfile& interlocutor,
                       const SessionState& state) {
  auto ind = encode_individual(interlocutor, state);
  std::vector<double> v(ind.data().begin(), ind.data().end());
  v.push_back(state.relationship_known ? 1.0 : 0.0);
  return Tensor::from_data({kExtendedMetaDim}, std::move(v));
}

MetadataVectors encode_metadata(const ParticipantProfile& target,
                                const SessionState& target_state,
                                const ParticipantProfile& interlocutor,
                                const SessionState& interlocutor_state) {
  return {encode_local(target, target_state),
          encode_extended(interlocutor, interlocutor_state)};
}

}  // namespace dyad
