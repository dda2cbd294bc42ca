#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

namespace dyad {

// Axis-aligned face box on one frame, pixel coordinates.
struct BoundingBox {
  std::size_t frame = 0;
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return width() * height(); }
};

bool operator==(const BoundingBox& a, const BoundingBox& b);

// All detections of a video, grouped per frame.
struct DetectionStream {
  std::size_t frame_count = 0;
  double frame_width = 0, frame_height = 0;
  std::vector<std::vector<BoundingBox>> per_frame;  // size == frame_count

  std::size_t total_detections() const;
  double detection_ratio() const;  // frames with >=1 detection / frame_count
};

// Per-frame boxes of one person, strictly increasing frame indices.
struct Track {
  std::vector<BoundingBox> boxes;

  bool empty() const { return boxes.empty(); }
  // Nearest-in-time box for an arbitrary frame; track must be non-empty.
  const BoundingBox& nearest(std::size_t frame) const;
};

double iou(const BoundingBox& a, const BoundingBox& b);

// Fill detection gaps shorter than max_gap frames by linear interpolation
// of the box corners. Existing boxes are never altered.
Track interpolate_gaps(const Track& track, std::size_t max_gap = 25);

// Earliest detection whose mean IoU against detections in other frames
// exceeds `threshold`; falls back to the best-scoring detection when none
// qualifies. Throws on an empty stream.
BoundingBox identify_target(const DetectionStream& stream,
                            double threshold = 0.2);

// Greedy IoU association outward from the seed frame in both directions,
// then gap interpolation.
Track track_target(const DetectionStream& stream, const BoundingBox& seed,
                   std::size_t max_gap = 25);

// Line format: "frame x1 y1 x2 y2", sorted by frame.
void write_detections(std::ostream& os, const DetectionStream& stream);
DetectionStream read_detections(std::istream& is, std::size_t frame_count,
                                double frame_width, double frame_height);
void save_detections(const std::string& path, const DetectionStream& stream);
DetectionStream load_detections(const std::string& path,
                                std::size_t frame_count, double frame_width,
                                double frame_height);

}  // namespace dyad
