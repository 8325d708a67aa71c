#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <unordered_set>
#include <vector>

#include "pmc/error.hpp"

namespace pmc {

/// Half-open frame range [start, end).
struct FrameRange {
  int start = 0;
  int end = 0;

  int length() const { return end - start; }
  bool contains(const FrameRange& o) const { return o.start >= start && o.end <= end; }
  bool overlaps(const FrameRange& o) const { return start < o.end && o.start < end; }
  friend bool operator==(const FrameRange&, const FrameRange&) = default;
};

struct Point2 {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point2&, const Point2&) = default;
};

inline double distance(Point2 a, Point2 b) { return std::hypot(a.x - b.x, a.y - b.y); }

/// Per-frame 2D joint positions, frames stored row-major as T x J x 2.
struct PoseSequence {
  std::string id;
  double fps = 30.0;
  int width = 0;
  int height = 0;
  std::vector<std::string> joint_names;
  std::vector<double> coords;

  std::size_t num_joints() const { return joint_names.size(); }
  std::size_t num_frames() const {
    return joint_names.empty() ? 0 : coords.size() / (2 * joint_names.size());
  }

  double& x(std::size_t t, std::size_t j) { return coords[(t * num_joints() + j) * 2]; }
  double& y(std::size_t t, std::size_t j) { return coords[(t * num_joints() + j) * 2 + 1]; }
  double x(std::size_t t, std::size_t j) const { return coords[(t * num_joints() + j) * 2]; }
  double y(std::size_t t, std::size_t j) const { return coords[(t * num_joints() + j) * 2 + 1]; }
  Point2 at(std::size_t t, std::size_t j) const { return {x(t, j), y(t, j)}; }

  double diagonal() const {
    return std::sqrt(static_cast<double>(width) * width + static_cast<double>(height) * height);
  }

  /// Same metadata, no frames.
  PoseSequence empty_like() const {
    PoseSequence out;
    out.id = id;
    out.fps = fps;
    out.width = width;
    out.height = height;
    out.joint_names = joint_names;
    return out;
  }

  void append_frame(const std::vector<Point2>& pose) {
    for (const auto& p : pose) {
      coords.push_back(p.x);
      coords.push_back(p.y);
    }
  }

  friend bool operator==(const PoseSequence&, const PoseSequence&) = default;
};

/// Cubic coefficients of one keypoint: x(u) = a_x u^3 + b_x u^2 + c_x u + d_x, same for y.
using CoeffBlock = std::array<double, 8>;

enum Coeff : std::size_t { kAx = 0, kBx, kCx, kDx, kAy, kBy, kCy, kDy };

/// One motion segment. Normalized time u = (t - start_frame) / n_frames.
struct SplinePrimitive {
  std::vector<CoeffBlock> coeffs;
  int start_frame = 0;
  int n_frames = 0;

  std::size_t num_joints() const { return coeffs.size(); }
  FrameRange range() const { return {start_frame, start_frame + n_frames}; }

  Point2 eval(std::size_t joint, double u) const {
    const auto& c = coeffs[joint];
    return {((c[kAx] * u + c[kBx]) * u + c[kCx]) * u + c[kDx],
            ((c[kAy] * u + c[kBy]) * u + c[kCy]) * u + c[kDy]};
  }

  /// Pose at local frame index i (0 <= i < n_frames); i == n_frames gives the curve end.
  Point2 eval_frame(std::size_t joint, int i) const {
    return eval(joint, static_cast<double>(i) / static_cast<double>(n_frames));
  }

  friend bool operator==(const SplinePrimitive&, const SplinePrimitive&) = default;
};

struct PrimitiveSequence {
  std::string source_id;
  std::vector<SplinePrimitive> primitives;

  std::size_t size() const { return primitives.size(); }
  int total_frames() const {
    return primitives.empty() ? 0 : primitives.back().start_frame + primitives.back().n_frames -
                                        primitives.front().start_frame;
  }
  friend bool operator==(const PrimitiveSequence&, const PrimitiveSequence&) = default;
};

/// Concept labels; class index i < size() is labels[i], blank is the last class.
struct ConceptVocabulary {
  std::vector<std::string> labels;

  int blank_index() const { return static_cast<int>(labels.size()); }
  int num_classes() const { return static_cast<int>(labels.size()) + 1; }

  int index_of(const std::string& label) const {
    const auto it = std::find(labels.begin(), labels.end(), label);
    if (it == labels.end()) fail(ErrorKind::UnknownConcept, "unknown concept '" + label + "'");
    return static_cast<int>(it - labels.begin());
  }
  bool contains(const std::string& label) const {
    return std::find(labels.begin(), labels.end(), label) != labels.end();
  }
  friend bool operator==(const ConceptVocabulary&, const ConceptVocabulary&) = default;
};

struct WeakAnnotation {
  std::string sequence_id;
  std::string label;
  FrameRange repetition;
  std::array<FrameRange, 3> instances;
  friend bool operator==(const WeakAnnotation&, const WeakAnnotation&) = default;
};

struct Description {
  std::vector<std::string> labels;
  std::vector<FrameRange> intervals;
  std::vector<double> scores;
  friend bool operator==(const Description&, const Description&) = default;
};

using LabelSequence = std::vector<int>;

// ---------------------------------------------------------------------------
// Validation

inline void validate(const PoseSequence& seq) {
  const auto J = seq.joint_names.size();
  require(J >= 1, ErrorKind::ValidationError, "pose sequence needs at least one joint");
  require(seq.coords.size() % (2 * J) == 0, ErrorKind::ValidationError,
          "frame data is not a whole number of J x 2 frames");
  require(seq.num_frames() >= 1, ErrorKind::ValidationError, "pose sequence needs at least one frame");
  require(std::isfinite(seq.fps) && seq.fps > 0, ErrorKind::ValidationError, "fps must be positive");
  require(seq.width >= 0 && seq.height >= 0, ErrorKind::ValidationError, "negative frame size");
  for (double v : seq.coords) {
    require(std::isfinite(v), ErrorKind::ValidationError, "non-finite coordinate");
  }
  std::unordered_set<std::string> names(seq.joint_names.begin(), seq.joint_names.end());
  require(names.size() == J, ErrorKind::ValidationError, "duplicate joint names");
}

inline void validate(const SplinePrimitive& p, std::size_t num_joints, int min_segment_frames) {
  require(p.n_frames >= min_segment_frames, ErrorKind::ValidationError,
          "primitive shorter than min_segment_frames");
  require(p.coeffs.size() == num_joints, ErrorKind::ValidationError,
          "primitive joint count differs from source");
  for (const auto& block : p.coeffs)
    for (double v : block)
      require(std::isfinite(v), ErrorKind::ValidationError, "non-finite spline coefficient");
}

inline void validate(const PrimitiveSequence& seq, int min_segment_frames = 1) {
  require(!seq.primitives.empty(), ErrorKind::ValidationError, "primitive sequence is empty");
  const auto J = seq.primitives.front().num_joints();
  require(J >= 1, ErrorKind::ValidationError, "primitive without joints");
  int expected_start = seq.primitives.front().start_frame;
  for (const auto& p : seq.primitives) {
    validate(p, J, min_segment_frames);
    require(p.start_frame == expected_start, ErrorKind::ValidationError,
            "primitives do not tile the frame range contiguously");
    expected_start += p.n_frames;
  }
}

inline void validate(const ConceptVocabulary& vocab) {
  std::unordered_set<std::string> seen;
  for (const auto& l : vocab.labels) {
    require(!l.empty(), ErrorKind::ValidationError, "empty concept label");
    require(seen.insert(l).second, ErrorKind::ValidationError, "duplicate concept label '" + l + "'");
  }
}

inline void validate(const WeakAnnotation& ann, const ConceptVocabulary* vocab = nullptr) {
  require(!ann.label.empty(), ErrorKind::ValidationError, "annotation without concept");
  if (vocab != nullptr) {
    require(vocab->contains(ann.label), ErrorKind::ValidationError,
            "annotation concept '" + ann.label + "' not in vocabulary");
  }
  require(ann.repetition.start >= 0 && ann.repetition.start < ann.repetition.end,
          ErrorKind::ValidationError, "repetition range must satisfy 0 <= start < end");
  for (std::size_t i = 0; i < ann.instances.size(); ++i) {
    const auto& r = ann.instances[i];
    require(r.start < r.end, ErrorKind::ValidationError, "instance range must satisfy start < end");
    require(ann.repetition.contains(r), ErrorKind::ValidationError,
            "instance range outside repetition range");
    for (std::size_t k = 0; k < i; ++k) {
      require(!ann.instances[k].overlaps(r), ErrorKind::ValidationError, "instance ranges overlap");
    }
  }
}

inline void validate(const Description& d) {
  require(d.labels.size() == d.intervals.size() && d.labels.size() == d.scores.size(),
          ErrorKind::ValidationError, "description fields differ in length");
  for (std::size_t i = 0; i < d.intervals.size(); ++i) {
    const auto& r = d.intervals[i];
    require(r.start <= r.end, ErrorKind::ValidationError, "inverted description interval");
    require(d.scores[i] >= 0.0 && d.scores[i] <= 1.0, ErrorKind::ValidationError,
            "description score outside [0,1]");
    if (i > 0) {
      require(d.intervals[i - 1].end <= r.start, ErrorKind::ValidationError,
              "description intervals overlap or are unsorted");
    }
  }
}

}  // namespace pmc
