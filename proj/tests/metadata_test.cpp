#include "dyad/metadata.hpp"

#include <numeric>

#include "doctest.h"

using namespace dyad;

namespace {

ParticipantProfile target_profile() {
  ParticipantProfile p;
  p.id = "p1";
  p.age = 46;
  p.gender = Gender::M;
  p.culture_region = 2;
  return p;
}

SessionState target_state() {
  SessionState s;
  s.session_index = 3;
  s.pre_mood = {1, 2, 3, 4, 5, 1, 2, 3};
  s.pre_fatigue = 7;
  s.task_order = 2;
  s.task_difficulty = std::nullopt;  // task without a difficulty level
  s.relationship_known = true;
  return s;
}

}  // namespace

TEST_CASE("golden 20-d local vector") {
  auto v = encode_local(target_profile(), target_state());
  REQUIRE(v.shape() == Shape{20});
  const std::vector<double> golden = {
      0.5, 1, 0, 0, 1, 0, 0, 0,            // age, gender, culture one-hot
      0.5,                                  // session index 3 -> 0.5
      0, 0.25, 0.5, 0.75, 1, 0, 0.25, 0.5,  // mood
      0.7,                                  // fatigue 7 -> 0.7
      1.0 / 3,                              // task order 2 -> 1/3
      0.0};                                 // no difficulty level -> 0
  for (std::size_t i = 0; i < 20; ++i)
    CHECK(v.data()[i] == doctest::Approx(golden[i]).epsilon(1e-15));
}

TEST_CASE("golden 19-d extended vector") {
  ParticipantProfile other;
  other.id = "p2";
  other.age = 17;
  other.gender = Gender::F;
  other.culture_region = 5;
  auto st = target_state();
  auto v = encode_extended(other, st);
  REQUIRE(v.shape() == Shape{19});
  const std::vector<double> golden = {
      0, 0, 0, 0, 0, 0, 0, 1,
      0.5,
      0, 0.25, 0.5, 0.75, 1, 0, 0.25, 0.5,
      0.7,
      1.0};  // known relationship
  for (std::size_t i = 0; i < 19; ++i)
    CHECK(v.data()[i] == doctest::Approx(golden[i]).epsilon(1e-15));
}

TEST_CASE("age normalization endpoints and clamping") {
  auto st = target_state();
  auto p = target_profile();
  p.age = 17;
  CHECK(encode_individual(p, st).data()[0] == 0.0);
  p.age = 75;
  CHECK(encode_individual(p, st).data()[0] == 1.0);
  p.age = 16;  // dataset includes 16+; clamp keeps encoding total
  CHECK(encode_individual(p, st).data()[0] == 0.0);
  p.age = 80;
  CHECK(encode_individual(p, st).data()[0] == 1.0);
}

TEST_CASE("missing fatigue encodes as zero") {
  auto st = target_state();
  st.pre_fatigue = std::nullopt;
  auto v = encode_individual(target_profile(), st);
  CHECK(v.data()[17] == 0.0);
}

TEST_CASE("difficulty range and task order components") {
  auto st = target_state();
  st.task_order = 1;
  CHECK(encode_local(target_profile(), st).data()[18] == 0.0);
  st.task_difficulty = 3;
  CHECK(encode_local(target_profile(), st).data()[19] == 1.0);
  st.task_order = 5;
  CHECK_THROWS_AS(encode_local(target_profile(), st), std::invalid_argument);
}

TEST_CASE("relationship component") {
  auto st = target_state();
  st.relationship_known = false;
  CHECK(encode_extended(target_profile(), st).data()[18] == 0.0);
}

TEST_CASE("outputs in [0,1], one-hot block sums to 1") {
  auto v = encode_local(target_profile(), target_state());
  double onehot = 0;
  for (std::size_t i = 0; i < 20; ++i) {
    CHECK(v.data()[i] >= 0.0);
    CHECK(v.data()[i] <= 1.0);
    if (i >= 2 && i < 8) onehot += v.data()[i];
  }
  CHECK(onehot == 1.0);
}

TEST_CASE("invalid categories rejected") {
  auto p = target_profile();
  p.culture_region = 6;
  CHECK_THROWS_AS(encode_individual(p, target_state()), std::invalid_argument);
  auto st = target_state();
  st.pre_mood[3] = 6;
  CHECK_THROWS_AS(encode_individual(target_profile(), st),
                  std::invalid_argument);
}

TEST_CASE("swapping target and interlocutor swaps individual blocks") {
  ParticipantProfile a = target_profile();
  ParticipantProfile b;
  b.id = "p2";
  b.age = 30;
  b.gender = Gender::F;
  b.culture_region = 4;
  SessionState sa = target_state();
  SessionState sb = target_state();
  sb.session_index = 1;
  sb.pre_fatigue = 2;

  auto ab = encode_metadata(a, sa, b, sb);
  auto ba = encode_metadata(b, sb, a, sa);
  for (std::size_t i = 0; i < kIndividualDim; ++i) {
    CHECK(ab.local.data()[i] == ba.extended.data()[i]);
    CHECK(ba.local.data()[i] == ab.extended.data()[i]);
  }
  // shared session/dyadic components unchanged
  CHECK(ab.local.data()[18] == ba.local.data()[18]);
  CHECK(ab.local.data()[19] == ba.local.data()[19]);
  CHECK(ab.extended.data()[18] == ba.extended.data()[18]);
}

TEST_CASE("encode_individual equals first 18 extended components") {
  auto p = target_profile();
  auto st = target_state();
  auto ind = encode_individual(p, st);
  auto ext = encode_extended(p, st);
  for (std::size_t i = 0; i < kIndividualDim; ++i)
    CHECK(ind.data()[i] == ext.data()[i]);
}
