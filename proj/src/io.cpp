#include "dyad/io.hpp"

#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace dyad {

namespace {

using nlohmann::json;

template <typename T>
void write_le(std::ostream& os, T v) {
  unsigned char buf[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i)
    buf[i] = static_cast<unsigned char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T read_le(std::istream& is) {
  unsigned char buf[sizeof(T)];
  is.read(reinterpret_cast<char*>(buf), sizeof(T));
  if (!is) throw std::runtime_error("unexpected end of file");
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i)
    v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return static_cast<T>(v);
}

void write_doubles(std::ostream& os, std::span<const double> data) {
  os.write(reinterpret_cast<const char*>(data.data()),
           static_cast<std::streamsize>(data.size() * sizeof(double)));
}

std::vector<double> read_doubles(std::istream& is, std::size_t n) {
  std::vector<double> data(n);
  is.read(reinterpret_cast<char*>(data.data()),
          static_cast<std::streamsize>(n * sizeof(double)));
  if (!is) throw std::runtime_error("unexpected end of file reading doubles");
  return data;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  return os;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open for reading: " + path);
  return is;
}

}  // namespace

void save_raw_tensor(const std::string& path, const Tensor& t) {
  if (t.rank() != 4)
    throw std::invalid_argument("save_raw_tensor: expected rank-4 tensor, got " +
                                shape_str(t.shape()));
  auto os = open_out(path);
  for (auto d : t.shape()) write_le<std::uint32_t>(os, static_cast<std::uint32_t>(d));
  write_doubles(os, t.data());
}

Tensor load_raw_tensor(const std::string& path) {
  auto is = open_in(path);
  Shape shape(4);
  for (auto& d : shape) d = read_le<std::uint32_t>(is);
  auto data = read_doubles(is, shape_size(shape));
  return Tensor::from_data(std::move(shape), std::move(data));
}

void save_audio(const std::string& path, const AudioBuffer& audio) {
  auto os = open_out(path);
  write_le<std::uint32_t>(os, audio.sample_rate);
  write_le<std::uint64_t>(os, audio.samples.size());
  write_doubles(os, audio.samples);
}

AudioBuffer load_audio(const std::string& path) {
  auto is = open_in(path);
  AudioBuffer a;
  a.sample_rate = read_le<std::uint32_t>(is);
  auto n = read_le<std::uint64_t>(is);
  a.samples = read_doubles(is, n);
  return a;
}

void save_archive(const std::string& path, const TensorArchive& archive) {
  auto os = open_out(path);
  write_le<std::uint64_t>(os, archive.config_json.size());
  os.write(archive.config_json.data(),
           static_cast<std::streamsize>(archive.config_json.size()));
  write_le<std::uint32_t>(os, static_cast<std::uint32_t>(archive.tensors.size()));
  for (const auto& [name, t] : archive.tensors) {
    write_le<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_le<std::uint32_t>(os, static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape())
      write_le<std::uint32_t>(os, static_cast<std::uint32_t>(d));
    write_doubles(os, t.data());
  }
}

TensorArchive load_archive(const std::string& path) {
  auto is = open_in(path);
  TensorArchive ar;
  auto cfg_len = read_le<std::uint64_t>(is);
  ar.config_json.resize(cfg_len);
  is.read(ar.config_json.data(), static_cast<std::streamsize>(cfg_len));
  auto count = read_le<std::uint32_t>(is);
  for (std::uint32_t i = 0; i < count; ++i) {
    auto name_len = read_le<std::uint32_t>(is);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    auto rank = read_le<std::uint32_t>(is);
    Shape shape(rank);
    for (auto& d : shape) d = read_le<std::uint32_t>(is);
    auto data = read_doubles(is, shape_size(shape));
    ar.tensors.emplace_back(std::move(name),
                            Tensor::from_data(std::move(shape), std::move(data)));
  }
  return ar;
}

// --- manifest --------------------------------------------------------------

const ParticipantProfile& SessionManifest::profile(const std::string& id) const {
  for (const auto& p : participants)
    if (p.id == id) return p;
  throw std::invalid_argument("manifest: unknown participant " + id);
}

SessionState SessionManifest::state_for(const SessionEntry& session,
                                        const TaskMedia& task,
                                        const std::string& participant_id) const {
  SessionState st;
  st.session_index = session.session_index.at(participant_id);
  st.pre_mood = session.pre_mood.at(participant_id);
  st.pre_fatigue = session.pre_fatigue.at(participant_id);
  st.task_order = task.order;
  st.task_difficulty = task.difficulty;
  st.relationship_known = session.relationship_known;
  return st;
}

namespace {

json profile_to_json(const ParticipantProfile& p) {
  return json{{"id", p.id},
              {"age", p.age},
              {"gender", p.gender == Gender::M ? "M" : "F"},
              {"culture_region", p.culture_region},
              {"ocean", p.ocean}};
}

ParticipantProfile profile_from_json(const json& j) {
  ParticipantProfile p;
  p.id = j.at("id").get<std::string>();
  p.age = j.at("age").get<double>();
  auto g = j.at("gender").get<std::string>();
  if (g != "M" && g != "F")
    throw std::runtime_error("manifest: gender must be F or M, got " + g);
  p.gender = g == "M" ? Gender::M : Gender::F;
  p.culture_region = j.at("culture_region").get<int>();
  auto oc = j.at("ocean").get<std::vector<double>>();
  if (oc.size() != 5) throw std::runtime_error("manifest: ocean needs 5 values");
  std::copy(oc.begin(), oc.end(), p.ocean.begin());
  return p;
}

json task_to_json(const TaskMedia& t) {
  json j{{"name", t.name},       {"order", t.order},
         {"video", t.video},     {"detections", t.detections},
         {"audio", t.audio},     {"frame_count", t.frame_count},
         {"fps", t.fps}};
  if (t.difficulty)
    j["difficulty"] = *t.difficulty;
  else
    j["difficulty"] = nullptr;
  return j;
}

TaskMedia task_from_json(const json& j) {
  TaskMedia t;
  t.name = j.at("name").get<std::string>();
  t.order = j.at("order").get<int>();
  if (!j.at("difficulty").is_null()) t.difficulty = j.at("difficulty").get<int>();
  t.video = j.at("video").get<std::map<std::string, std::string>>();
  t.detections = j.at("detections").get<std::map<std::string, std::string>>();
  t.audio = j.at("audio").get<std::string>();
  t.frame_count = j.at("frame_count").get<std::size_t>();
  t.fps = j.at("fps").get<double>();
  return t;
}

}  // namespace

void save_manifest(const std::string& path, const SessionManifest& manifest) {
  json j;
  j["participants"] = json::array();
  for (const auto& p : manifest.participants)
    j["participants"].push_back(profile_to_json(p));
  j["sessions"] = json::array();
  for (const auto& s : manifest.sessions) {
    json js{{"session_id", s.session_id},
            {"participants", s.participants},
            {"relationship_known", s.relationship_known},
            {"session_index", s.session_index},
            {"pre_mood", s.pre_mood}};
    json fat = json::object();
    for (const auto& [id, f] : s.pre_fatigue) {
      if (f)
        fat[id] = *f;
      else
        fat[id] = nullptr;
    }
    js["pre_fatigue"] = fat;
    js["tasks"] = json::array();
    for (const auto& t : s.tasks) js["tasks"].push_back(task_to_json(t));
    j["sessions"].push_back(std::move(js));
  }
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  os << j.dump(2) << '\n';
}

SessionManifest load_manifest(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open for reading: " + path);
  json j = json::parse(is);
  SessionManifest m;
  for (const auto& jp : j.at("participants"))
    m.participants.push_back(profile_from_json(jp));
  for (const auto& js : j.at("sessions")) {
    SessionEntry s;
    s.session_id = js.at("session_id").get<std::string>();
    auto ids = js.at("participants").get<std::vector<std::string>>();
    if (ids.size() != 2)
      throw std::runtime_error("manifest: session needs exactly 2 participants");
    s.participants = {ids[0], ids[1]};
    s.relationship_known = js.at("relationship_known").get<bool>();
    s.session_index = js.at("session_index").get<std::map<std::string, int>>();
    s.pre_mood =
        js.at("pre_mood").get<std::map<std::string, std::array<double, 8>>>();
    for (const auto& [id, f] : js.at("pre_fatigue").items())
      s.pre_fatigue[id] = f.is_null() ? std::optional<double>{}
                                      : std::optional<double>{f.get<double>()};
    for (const auto& jt : js.at("tasks")) s.tasks.push_back(task_from_json(jt));
    m.sessions.push_back(std::move(s));
  }
  return m;
}

}  // namespace dyad
