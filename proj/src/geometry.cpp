#include "dyad/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace dyad {

bool operator==(const BoundingBox& a, const BoundingBox& b) {
  return a.frame == b.frame && a.x1 == b.x1 && a.y1 == b.y1 && a.x2 == b.x2 &&
         a.y2 == b.y2;
}

std::size_t DetectionStream::total_detections() const {
  std::size_t n = 0;
  for (const auto& f : per_frame) n += f.size();
  return n;
}

double DetectionStream::detection_ratio() const {
  if (frame_count == 0) return 0.0;
  std::size_t covered = 0;
  for (const auto& f : per_frame)
    if (!f.empty()) ++covered;
  return static_cast<double>(covered) / static_cast<double>(frame_count);
}

const BoundingBox& Track::nearest(std::size_t frame) const {
  if (boxes.empty()) throw std::invalid_argument("Track::nearest: empty track");
  auto it = std::lower_bound(
      boxes.begin(), boxes.end(), frame,
      [](const BoundingBox& b, std::size_t f) { return b.frame < f; });
  if (it == boxes.end()) return boxes.back();
  if (it == boxes.begin()) return *it;
  auto prev = std::prev(it);
  return (frame - prev->frame) <= (it->frame - frame) ? *prev : *it;
}

double iou(const BoundingBox& a, const BoundingBox& b) {
  double ix = std::max(0.0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
  double iy = std::max(0.0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
  double inter = ix * iy;
  double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

Track interpolate_gaps(const Track& track, std::size_t max_gap) {
  Track out;
  for (std::size_t i = 0; i < track.boxes.size(); ++i) {
    const auto& cur = track.boxes[i];
    if (!out.boxes.empty()) {
      const auto& prev = out.boxes.back();
      std::size_t gap = cur.frame - prev.frame;
      if (gap > 1 && gap < max_gap) {
        for (std::size_t f = prev.frame + 1; f < cur.frame; ++f) {
          double t = static_cast<double>(f - prev.frame) /
                     static_cast<double>(gap);
          out.boxes.push_back({f, prev.x1 + t * (cur.x1 - prev.x1),
                               prev.y1 + t * (cur.y1 - prev.y1),
                               prev.x2 + t * (cur.x2 - prev.x2),
                               prev.y2 + t * (cur.y2 - prev.y2)});
        }
      }
    }
    out.boxes.push_back(cur);
  }
  return out;
}

BoundingBox identify_target(const DetectionStream& stream, double threshold) {
  // Flatten in frame order, row-major within each frame.
  std::vector<BoundingBox> all;
  for (const auto& f : stream.per_frame)
    for (const auto& b : f) all.push_back(b);
  if (all.empty())
    throw std::invalid_argument("identify_target: stream has no detections");

  BoundingBox best = all.front();
  double best_score = -1.0;
  bool found = false;
  for (const auto& cand : all) {
    double acc = 0.0;
    std::size_t n = 0;
    for (const auto& other : all) {
      if (other.frame == cand.frame) continue;
      acc += iou(cand, other);
      ++n;
    }
    double score = n > 0 ? acc / static_cast<double>(n) : 0.0;
    if (!found && score > threshold) return cand;  // earliest qualifying
    if (score > best_score) {
      best_score = score;
      best = cand;
    }
  }
  return best;  // fallback: maximal mean IoU
}

namespace {

// Greedy best-IoU association over frames [from, to) in the given order.
void associate(const DetectionStream& stream, BoundingBox last,
               std::size_t seed_frame, bool forward,
               std::vector<BoundingBox>& out) {
  std::size_t n = stream.frame_count;
  for (std::size_t step = 1; step < n; ++step) {
    std::size_t f;
    if (forward) {
      f = seed_frame + step;
      if (f >= n) break;
    } else {
      if (step > seed_frame) break;
      f = seed_frame - step;
    }
    const auto& dets = stream.per_frame[f];
    double best_iou = 0.0;
    const BoundingBox* best = nullptr;
    for (const auto& d : dets) {
      double v = iou(d, last);
      if (v > best_iou) {
        best_iou = v;
        best = &d;
      }
    }
    if (best) {  // accepted only when IoU > 0
      out.push_back(*best);
      last = *best;
    }
  }
}

}  // namespace

Track track_target(const DetectionStream& stream, const BoundingBox& seed,
                   std::size_t max_gap) {
  if (seed.frame >= stream.frame_count)
    throw std::invalid_argument("track_target: seed frame out of range");
  std::vector<BoundingBox> backward, forward;
  associate(stream, seed, seed.frame, false, backward);
  associate(stream, seed, seed.frame, true, forward);

  Track raw;
  raw.boxes.assign(backward.rbegin(), backward.rend());
  raw.boxes.push_back(seed);
  raw.boxes.insert(raw.boxes.end(), forward.begin(), forward.end());
  return interpolate_gaps(raw, max_gap);
}

void write_detections(std::ostream& os, const DetectionStream& stream) {
  for (const auto& frame : stream.per_frame)
    for (const auto& b : frame)
      os << b.frame << ' ' << b.x1 << ' ' << b.y1 << ' ' << b.x2 << ' ' << b.y2
         << '\n';
}

DetectionStream read_detections(std::istream& is, std::size_t frame_count,
                                double frame_width, double frame_height) {
  DetectionStream s;
  s.frame_count = frame_count;
  s.frame_width = frame_width;
  s.frame_height = frame_height;
  s.per_frame.resize(frame_count);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    BoundingBox b;
    if (!(ls >> b.frame >> b.x1 >> b.y1 >> b.x2 >> b.y2))
      throw std::runtime_error("read_detections: malformed line: " + line);
    if (b.frame >= frame_count)
      throw std::runtime_error("read_detections: frame index out of range");
    if (!(b.x1 < b.x2 && b.y1 < b.y2))
      throw std::runtime_error("read_detections: degenerate box: " + line);
    s.per_frame[b.frame].push_back(b);
  }
  return s;
}

void save_detections(const std::string& path, const DetectionStream& stream) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("save_detections: cannot open " + path);
  write_detections(os, stream);
}

DetectionStream load_detections(const std::string& path,
                                std::size_t frame_count, double frame_width,
                                double frame_height) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("load_detections: cannot open " + path);
  return read_detections(is, frame_count, frame_width, frame_height);
}

}  // namespace dyad
