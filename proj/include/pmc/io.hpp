#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pmc/error.hpp"
#include "pmc/types.hpp"

namespace pmc {

using json = nlohmann::json;

inline constexpr int kFormatVersion = 1;

inline json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::MalformedFile, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return json::parse(buf.str());
  } catch (const json::exception& e) {
    fail(ErrorKind::MalformedFile, path.string() + ": " + e.what());
  }
}

/// Writes through a temporary file and renames, so readers never see a partial file.
inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::MalformedFile, "cannot write " + tmp.string());
    out << text;
    out.flush();
    if (!out) fail(ErrorKind::MalformedFile, "short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline void write_json_file(const std::filesystem::path& path, const json& j) {
  write_text_file(path, j.dump(1) + "\n");
}

namespace detail {

// Wraps nlohmann type errors so every schema problem surfaces as MalformedFile.
template <typename F>
auto schema_guard(const char* what, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const json::exception& e) {
    fail(ErrorKind::MalformedFile, std::string(what) + ": " + e.what());
  }
}

inline void check_version(const json& j, const char* what) {
  if (!j.is_object() || !j.contains("version")) {
    fail(ErrorKind::MalformedFile, std::string(what) + ": missing version field");
  }
  if (j.at("version").get<int>() != kFormatVersion) {
    fail(ErrorKind::VersionMismatch, std::string(what) + ": unsupported version");
  }
}

inline FrameRange range_from_json(const json& j) {
  if (!j.is_array() || j.size() != 2) fail(ErrorKind::MalformedFile, "range must be [start, end]");
  return {j[0].get<int>(), j[1].get<int>()};
}

}  // namespace detail

inline json range_to_json(const FrameRange& r) { return json::array({r.start, r.end}); }

// ---------------------------------------------------------------------------
// PoseSequence

inline json to_json(const PoseSequence& seq) {
  json frames = json::array();
  for (std::size_t t = 0; t < seq.num_frames(); ++t) {
    json frame = json::array();
    for (std::size_t j = 0; j < seq.num_joints(); ++j) frame.push_back({seq.x(t, j), seq.y(t, j)});
    frames.push_back(std::move(frame));
  }
  return {{"version", kFormatVersion}, {"id", seq.id},         {"fps", seq.fps},
          {"width", seq.width},        {"height", seq.height}, {"joint_names", seq.joint_names},
          {"frames", std::move(frames)}};
}

inline PoseSequence pose_sequence_from_json(const json& j) {
  detail::check_version(j, "pose sequence");
  PoseSequence seq = detail::schema_guard("pose sequence", [&] {
    PoseSequence s;
    s.id = j.at("id").get<std::string>();
    s.fps = j.at("fps").get<double>();
    s.width = j.at("width").get<int>();
    s.height = j.at("height").get<int>();
    s.joint_names = j.at("joint_names").get<std::vector<std::string>>();
    const auto& frames = j.at("frames");
    if (!frames.is_array()) fail(ErrorKind::MalformedFile, "frames must be an array");
    for (const auto& frame : frames) {
      if (!frame.is_array()) fail(ErrorKind::MalformedFile, "frame must be an array of joints");
      if (frame.size() != s.joint_names.size()) {
        fail(ErrorKind::ValidationError, "frame joint count differs from joint_names");
      }
      for (const auto& p : frame) {
        if (!p.is_array() || p.size() != 2) fail(ErrorKind::MalformedFile, "joint must be [x, y]");
        // NaN/Inf are not valid JSON numbers; null marks them in lenient writers.
        if (!p[0].is_number() || !p[1].is_number()) {
          fail(ErrorKind::ValidationError, "non-finite coordinate");
        }
        s.coords.push_back(p[0].get<double>());
        s.coords.push_back(p[1].get<double>());
      }
    }
    return s;
  });
  validate(seq);
  return seq;
}

inline PoseSequence load_pose_sequence(const std::filesystem::path& path) {
  return pose_sequence_from_json(read_json_file(path));
}

inline void save_pose_sequence(const PoseSequence& seq, const std::filesystem::path& path) {
  validate(seq);
  write_json_file(path, to_json(seq));
}

// ---------------------------------------------------------------------------
// Weak annotations

inline json annotation_record_to_json(const WeakAnnotation& a) {
  json inst = json::array();
  for (const auto& r : a.instances) inst.push_back(range_to_json(r));
  return {{"concept", a.label}, {"repetition", range_to_json(a.repetition)}, {"instances", inst}};
}

inline json annotations_to_json(const std::string& sequence_id, const std::vector<WeakAnnotation>& anns) {
  json list = json::array();
  for (const auto& a : anns) list.push_back(annotation_record_to_json(a));
  return {{"version", kFormatVersion}, {"sequence_id", sequence_id}, {"annotations", list}};
}

inline WeakAnnotation annotation_record_from_json(const json& rec, const std::string& sequence_id) {
  WeakAnnotation a = detail::schema_guard("annotation", [&] {
    WeakAnnotation out;
    out.sequence_id = sequence_id;
    out.label = rec.at("concept").get<std::string>();
    out.repetition = detail::range_from_json(rec.at("repetition"));
    const auto& inst = rec.at("instances");
    if (!inst.is_array() || inst.size() != 3) {
      fail(ErrorKind::ValidationError, "annotation must carry exactly 3 instance ranges");
    }
    for (std::size_t i = 0; i < 3; ++i) out.instances[i] = detail::range_from_json(inst[i]);
    return out;
  });
  return a;
}

/// Parses an annotation document; with a vocabulary, unknown concepts are rejected.
inline std::vector<WeakAnnotation> annotations_from_json(const json& j,
                                                         const ConceptVocabulary* vocab = nullptr) {
  detail::check_version(j, "annotation file");
  const auto sequence_id =
      detail::schema_guard("annotation file", [&] { return j.at("sequence_id").get<std::string>(); });
  const auto& list = j.at("annotations");
  if (!list.is_array()) fail(ErrorKind::MalformedFile, "annotations must be an array");
  std::vector<WeakAnnotation> out;
  for (const auto& rec : list) {
    auto a = annotation_record_from_json(rec, sequence_id);
    validate(a, vocab);
    out.push_back(std::move(a));
  }
  return out;
}

inline std::vector<WeakAnnotation> load_annotations(const std::filesystem::path& path,
                                                    const ConceptVocabulary* vocab = nullptr) {
  return annotations_from_json(read_json_file(path), vocab);
}

inline void save_annotations(const std::string& sequence_id, const std::vector<WeakAnnotation>& anns,
                             const std::filesystem::path& path) {
  for (const auto& a : anns) validate(a);
  write_json_file(path, annotations_to_json(sequence_id, anns));
}

// ---------------------------------------------------------------------------
// Primitive files

inline json to_json(const SplinePrimitive& p) {
  json coeffs = json::array();
  for (const auto& b : p.coeffs) coeffs.push_back(b);
  return {{"start", p.start_frame}, {"n_frames", p.n_frames}, {"coeffs", coeffs}};
}

inline SplinePrimitive spline_from_json(const json& j) {
  return detail::schema_guard("primitive", [&] {
    SplinePrimitive p;
    p.start_frame = j.at("start").get<int>();
    p.n_frames = j.at("n_frames").get<int>();
    for (const auto& b : j.at("coeffs")) {
      if (!b.is_array() || b.size() != 8) fail(ErrorKind::MalformedFile, "coefficient block needs 8 values");
      p.coeffs.push_back(b.get<CoeffBlock>());
    }
    return p;
  });
}

inline json to_json(const PrimitiveSequence& seq) {
  json prims = json::array();
  for (const auto& p : seq.primitives) prims.push_back(to_json(p));
  return {{"version", kFormatVersion}, {"source_id", seq.source_id}, {"primitives", prims}};
}

inline PrimitiveSequence primitive_sequence_from_json(const json& j) {
  detail::check_version(j, "primitive file");
  PrimitiveSequence seq;
  seq.source_id = detail::schema_guard("primitive file", [&] { return j.at("source_id").get<std::string>(); });
  for (const auto& p : j.at("primitives")) seq.primitives.push_back(spline_from_json(p));
  validate(seq);
  return seq;
}

inline PrimitiveSequence load_primitives(const std::filesystem::path& path) {
  return primitive_sequence_from_json(read_json_file(path));
}

inline void save_primitives(const PrimitiveSequence& seq, const std::filesystem::path& path) {
  validate(seq);
  write_json_file(path, to_json(seq));
}

// ---------------------------------------------------------------------------
// Description

inline json to_json(const Description& d) {
  json items = json::array();
  for (std::size_t i = 0; i < d.labels.size(); ++i) {
    items.push_back({{"label", d.labels[i]}, {"interval", range_to_json(d.intervals[i])}, {"score", d.scores[i]}});
  }
  return {{"version", kFormatVersion}, {"labels", d.labels}, {"occurrences", items}};
}

inline Description description_from_json(const json& j) {
  detail::check_version(j, "description");
  Description d = detail::schema_guard("description", [&] {
    Description out;
    for (const auto& item : j.at("occurrences")) {
      out.labels.push_back(item.at("label").get<std::string>());
      out.intervals.push_back(detail::range_from_json(item.at("interval")));
      out.scores.push_back(item.at("score").get<double>());
    }
    return out;
  });
  validate(d);
  return d;
}

inline json to_json(const ConceptVocabulary& v) { return v.labels; }

}  // namespace pmc
