#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "pmc/error.hpp"
#include "pmc/io.hpp"
#include "pmc/random.hpp"
#include "pmc/recognizer.hpp"
#include "pmc/types.hpp"

namespace pmc {

/// One aligned concept repetition: its splines and where they came from.
struct Occurrence {
  std::string label;
  std::vector<SplinePrimitive> splines;
  std::string sequence_id;
  FrameRange source;

  int num_splines() const { return static_cast<int>(splines.size()); }
  int num_frames() const {
    int n = 0;
    for (const auto& s : splines) n += s.n_frames;
    return n;
  }
  friend bool operator==(const Occurrence&, const Occurrence&) = default;
};

inline void validate(const Occurrence& occ) {
  require(!occ.splines.empty(), ErrorKind::ValidationError, "occurrence without splines");
  const auto J = occ.splines.front().num_joints();
  int expected = occ.splines.front().start_frame;
  for (const auto& s : occ.splines) {
    validate(s, J, 1);
    require(s.start_frame == expected, ErrorKind::ValidationError, "occurrence splines are not contiguous");
    expected += s.n_frames;
  }
}

inline json to_json(const Occurrence& occ) {
  json splines = json::array();
  for (const auto& s : occ.splines) splines.push_back(to_json(s));
  return {{"concept", occ.label},
          {"sequence_id", occ.sequence_id},
          {"source", range_to_json(occ.source)},
          {"splines", std::move(splines)}};
}

inline Occurrence occurrence_from_json(const json& j) {
  Occurrence occ = detail::schema_guard("occurrence", [&] {
    Occurrence o;
    o.label = j.at("concept").get<std::string>();
    o.sequence_id = j.value("sequence_id", std::string{});
    if (j.contains("source")) o.source = detail::range_from_json(j.at("source"));
    for (const auto& s : j.at("splines")) o.splines.push_back(spline_from_json(s));
    return o;
  });
  validate(occ);
  return occ;
}

// ---------------------------------------------------------------------------
// Occurrence extraction

/// Non-empty aligned occurrences of one described sequence.
inline std::vector<Occurrence> occurrences_from_alignment(const DescriptionResult& result,
                                                          const ConceptVocabulary& vocab) {
  std::vector<Occurrence> out;
  for (const auto& occ : result.occurrences) {
    if (occ.primitives.empty()) continue;
    Occurrence o;
    o.label = vocab.labels[occ.label];
    o.sequence_id = result.primitives.source_id;
    for (int k : occ.primitives) o.splines.push_back(result.primitives.primitives[k]);
    o.source = {o.splines.front().start_frame, o.splines.back().start_frame + o.splines.back().n_frames};
    out.push_back(std::move(o));
  }
  return out;
}

using OccurrenceSet = std::map<std::string, std::vector<Occurrence>>;

/// Describes and aligns every sequence, grouping aligned occurrences by concept.
inline OccurrenceSet extract_occurrences(const std::vector<PrimitiveSequence>& sequences, const TrainedModel& model,
                                         const DescribeConfig& cfg = {}) {
  OccurrenceSet out;
  for (const auto& label : model.vocabulary.labels) out[label];
  for (const auto& prims : sequences) {
    for (auto& o : occurrences_from_alignment(describe_primitives(prims, model, cfg), model.vocabulary)) {
      out[o.label].push_back(std::move(o));
    }
  }
  return out;
}

/// The primitives whose midpoints fall inside `r`, as one occurrence; nullopt when there are none.
inline std::optional<Occurrence> occurrence_in_range(const std::string& label, const PrimitiveSequence& prims,
                                                     FrameRange r) {
  Occurrence o;
  o.label = label;
  o.sequence_id = prims.source_id;
  for (const auto& p : prims.primitives) {
    const double mid = p.start_frame + 0.5 * p.n_frames;
    if (mid >= r.start && mid < r.end) o.splines.push_back(p);
  }
  if (o.splines.empty()) return std::nullopt;
  o.source = {o.splines.front().start_frame, o.splines.back().start_frame + o.splines.back().n_frames};
  return o;
}

/// Single-repetition references from the instance ranges of weak annotations.
inline std::vector<Occurrence> reference_occurrences(const std::vector<WeakAnnotation>& anns,
                                                     const PrimitiveSequence& prims) {
  std::vector<Occurrence> out;
  for (const auto& a : anns)
    for (const auto& r : a.instances)
      if (auto o = occurrence_in_range(a.label, prims, r)) out.push_back(std::move(*o));
  return out;
}

// ---------------------------------------------------------------------------
// Filtering

struct LengthFiltered {
  std::vector<Occurrence> occurrences;
  int l_star = 0;
};

/// Keeps occurrences whose spline count is the mode; ties go to the smaller count.
inline LengthFiltered length_filter(const std::vector<Occurrence>& occs) {
  if (occs.empty()) fail(ErrorKind::EmptyInput, "length filter needs at least one occurrence");
  std::map<int, int> counts;
  for (const auto& o : occs) ++counts[o.num_splines()];
  LengthFiltered out;
  int best = 0;
  for (const auto& [len, n] : counts) {
    if (n > best) {
      best = n;
      out.l_star = len;
    }
  }
  for (const auto& o : occs)
    if (o.num_splines() == out.l_star) out.occurrences.push_back(o);
  return out;
}

/// Mean L2 over splines, joints and u in {0, 1/3, 2/3, 1}, after moving each
/// occurrence's first-frame root joint (joint 0) to the origin.
inline double occurrence_distance(const Occurrence& d, const Occurrence& g) {
  if (d.num_splines() != g.num_splines()) fail(ErrorKind::LengthMismatch, "occurrences differ in spline count");
  require(!d.splines.empty(), ErrorKind::EmptyInput, "empty occurrence");
  const auto J = d.splines.front().num_joints();
  require(g.splines.front().num_joints() == J, ErrorKind::ShapeMismatch, "occurrences differ in joint count");
  const Point2 rd = d.splines.front().eval(0, 0.0);
  const Point2 rg = g.splines.front().eval(0, 0.0);
  constexpr double us[4] = {0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0};
  double total = 0.0;
  for (std::size_t s = 0; s < d.splines.size(); ++s)
    for (std::size_t j = 0; j < J; ++j)
      for (double u : us) {
        const Point2 a = d.splines[s].eval(j, u);
        const Point2 b = g.splines[s].eval(j, u);
        total += distance({a.x - rd.x, a.y - rd.y}, {b.x - rg.x, b.y - rg.y});
      }
  return total / static_cast<double>(d.splines.size() * J * 4);
}

inline constexpr double kDefaultSimilarityThreshold = 8.0;

/// Keeps d iff some length-compatible reference lies within `threshold` pixels (inclusive).
inline std::vector<Occurrence> similarity_filter(const std::vector<Occurrence>& occs,
                                                 const std::vector<Occurrence>& refs,
                                                 double threshold = kDefaultSimilarityThreshold) {
  std::vector<const Occurrence*> usable;
  for (const auto& r : refs) {
    if (!occs.empty() && r.num_splines() == occs.front().num_splines()) usable.push_back(&r);
  }
  if (!occs.empty() && usable.empty()) {
    fail(ErrorKind::NoCompatibleReference, "no reference occurrence with a matching spline count");
  }
  std::vector<Occurrence> out;
  for (const auto& d : occs) {
    if (d.num_splines() != occs.front().num_splines()) fail(ErrorKind::LengthMismatch, "mixed spline counts");
    double best = std::numeric_limits<double>::infinity();
    for (const auto* g : usable) best = std::min(best, occurrence_distance(d, *g));
    if (best <= threshold) out.push_back(d);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Concept models

inline constexpr double kDefaultCovF = 0.01;

/// Independent diagonal Gaussians, one per spline index, over 8J coefficients plus duration in frames.
struct ConceptModel {
  std::string label;
  int l_star = 0;
  double cov_f = kDefaultCovF;
  int support = 0;
  std::vector<Vec> mu;
  std::vector<Vec> var;

  std::size_t num_joints() const { return mu.empty() ? 0 : static_cast<std::size_t>((mu.front().size() - 1) / 8); }
};

inline void validate(const ConceptModel& m) {
  require(!m.label.empty(), ErrorKind::ValidationError, "concept model without label");
  require(m.l_star >= 1 && static_cast<std::size_t>(m.l_star) == m.mu.size() && m.mu.size() == m.var.size(),
          ErrorKind::ValidationError, "l_star must equal the number of gaussians");
  require(m.support >= 1, ErrorKind::ValidationError, "concept model support must be >= 1");
  require(std::isfinite(m.cov_f) && m.cov_f >= 0.0, ErrorKind::ValidationError, "cov_f must be >= 0");
  const auto D = m.mu.front().size();
  require(D >= 9 && (D - 1) % 8 == 0, ErrorKind::ValidationError, "gaussian dimension must be 8J + 1");
  for (std::size_t i = 0; i < m.mu.size(); ++i) {
    require(m.mu[i].size() == D && m.var[i].size() == D, ErrorKind::ValidationError, "gaussian dimension mismatch");
    require(m.mu[i].allFinite() && m.var[i].allFinite(), ErrorKind::ValidationError, "non-finite gaussian");
    require(m.var[i].minCoeff() >= 0.0, ErrorKind::ValidationError, "negative variance");
  }
}

inline Vec spline_parameters(const SplinePrimitive& s) {
  const auto J = static_cast<Eigen::Index>(s.num_joints());
  Vec v(8 * J + 1);
  for (Eigen::Index j = 0; j < J; ++j)
    for (int c = 0; c < 8; ++c) v[8 * j + c] = s.coeffs[j][c];
  v[8 * J] = s.n_frames;
  return v;
}

/// Population mean and variance per spline index.
inline ConceptModel fit_concept_model(const std::vector<Occurrence>& occs, double cov_f = kDefaultCovF) {
  if (occs.empty()) fail(ErrorKind::EmptyInput, "no occurrences to fit a concept model");
  ConceptModel m;
  m.label = occs.front().label;
  m.l_star = occs.front().num_splines();
  m.cov_f = cov_f;
  m.support = static_cast<int>(occs.size());
  for (const auto& o : occs) {
    require(o.num_splines() == m.l_star, ErrorKind::LengthMismatch, "occurrences differ in spline count");
  }
  const double n = static_cast<double>(occs.size());
  for (int l = 0; l < m.l_star; ++l) {
    Vec mean = Vec::Zero(spline_parameters(occs.front().splines[l]).size());
    for (const auto& o : occs) mean += spline_parameters(o.splines[l]);
    mean /= n;
    Vec var = Vec::Zero(mean.size());
    for (const auto& o : occs) var += (spline_parameters(o.splines[l]) - mean).cwiseAbs2();
    var /= n;
    m.mu.push_back(std::move(mean));
    m.var.push_back(std::move(var));
  }
  validate(m);
  return m;
}

/// Draws the l* parameter vectors independently; durations round to the nearest integer >= 2.
/// Splines are laid out from frame 0 and are not yet stitched.
inline Occurrence sample_concept(const ConceptModel& model, Rng& rng) {
  Occurrence occ;
  occ.label = model.label;
  const auto J = model.num_joints();
  int start = 0;
  for (int l = 0; l < model.l_star; ++l) {
    const Vec& mu = model.mu[l];
    Vec v = mu;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      const double sd = std::sqrt(model.cov_f * model.var[l][i]);
      if (sd > 0.0) v[i] = rng.normal(mu[i], sd);
    }
    SplinePrimitive s;
    s.coeffs.resize(J);
    for (std::size_t j = 0; j < J; ++j)
      for (int c = 0; c < 8; ++c) s.coeffs[j][c] = v[static_cast<Eigen::Index>(8 * j + c)];
    s.n_frames = static_cast<int>(std::max<long>(2, round_half_up(v[static_cast<Eigen::Index>(8 * J)])));
    s.start_frame = start;
    start += s.n_frames;
    occ.splines.push_back(std::move(s));
  }
  occ.source = {0, start};
  return occ;
}

inline json to_json(const ConceptModel& m) {
  json gaussians = json::array();
  for (std::size_t l = 0; l < m.mu.size(); ++l) {
    gaussians.push_back({{"mu", std::vector<double>(m.mu[l].begin(), m.mu[l].end())},
                         {"var", std::vector<double>(m.var[l].begin(), m.var[l].end())}});
  }
  return {{"version", kFormatVersion}, {"concept", m.label}, {"l_star", m.l_star},
          {"cov_f", m.cov_f},          {"support", m.support}, {"gaussians", std::move(gaussians)}};
}

inline ConceptModel concept_model_from_json(const json& j) {
  detail::check_version(j, "concept model");
  ConceptModel m = detail::schema_guard("concept model", [&] {
    ConceptModel out;
    out.label = j.at("concept").get<std::string>();
    out.l_star = j.at("l_star").get<int>();
    out.cov_f = j.at("cov_f").get<double>();
    out.support = j.at("support").get<int>();
    for (const auto& g : j.at("gaussians")) {
      const auto mu = g.at("mu").get<std::vector<double>>();
      const auto var = g.at("var").get<std::vector<double>>();
      out.mu.push_back(Eigen::Map<const Vec>(mu.data(), static_cast<Eigen::Index>(mu.size())));
      out.var.push_back(Eigen::Map<const Vec>(var.data(), static_cast<Eigen::Index>(var.size())));
    }
    return out;
  });
  if (m.mu.empty()) fail(ErrorKind::ValidationError, "concept model without gaussians");
  validate(m);
  return m;
}

inline ConceptModel load_concept_model(const std::filesystem::path& path) {
  return concept_model_from_json(read_json_file(path));
}

inline void save_concept_model(const ConceptModel& m, const std::filesystem::path& path) {
  validate(m);
  write_json_file(path, to_json(m));
}

using ConceptModels = std::map<std::string, ConceptModel>;

struct ConceptFitConfig {
  double cov_f = kDefaultCovF;
  double similarity_threshold = kDefaultSimilarityThreshold;
};

struct ConceptFitReport {
  int extracted = 0;
  int after_length = 0;
  int after_similarity = 0;
  bool similarity_applied = false;
};

/// length filter -> similarity filter against references -> Gaussian fit.
/// Without a compatible reference, or if every occurrence would be dropped, the
/// similarity stage is skipped for that concept and the report says so.
inline ConceptModel fit_concept(const std::vector<Occurrence>& occs, const std::vector<Occurrence>& refs,
                                const ConceptFitConfig& cfg, ConceptFitReport* report = nullptr) {
  ConceptFitReport rep;
  rep.extracted = static_cast<int>(occs.size());
  const auto by_length = length_filter(occs);
  rep.after_length = static_cast<int>(by_length.occurrences.size());
  std::vector<Occurrence> kept = by_length.occurrences;
  try {
    auto similar = similarity_filter(by_length.occurrences, refs, cfg.similarity_threshold);
    if (!similar.empty()) {
      kept = std::move(similar);
      rep.similarity_applied = true;
    }
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::NoCompatibleReference) throw;
  }
  rep.after_similarity = static_cast<int>(kept.size());
  if (report != nullptr) *report = rep;
  return fit_concept_model(kept, cfg.cov_f);
}

// ---------------------------------------------------------------------------
// Stitching and synthesis

/// Chains splines end to start. Each spline after the first gets its (d_x, d_y) set to
/// the previous spline's pose at u = 1, and the rest of its segment moves by the same
/// offset; with one spline per segment, that is every junction.
inline PrimitiveSequence stitch(const std::vector<Occurrence>& segments) {
  require(!segments.empty(), ErrorKind::EmptyInput, "nothing to stitch");
  PrimitiveSequence out;
  int start = 0;
  for (const auto& seg : segments) {
    validate(seg);
    for (const auto& s : seg.splines) {
      SplinePrimitive p = s;
      p.start_frame = start;
      if (!out.primitives.empty()) {
        const auto& prev = out.primitives.back();
        require(prev.num_joints() == p.num_joints(), ErrorKind::ShapeMismatch, "segments differ in joint count");
        for (std::size_t j = 0; j < p.num_joints(); ++j) {
          const Point2 end = prev.eval(j, 1.0);
          p.coeffs[j][kDx] = end.x;
          p.coeffs[j][kDy] = end.y;
        }
      }
      start += p.n_frames;
      out.primitives.push_back(std::move(p));
    }
  }
  return out;
}

/// Largest gap between a spline's end (u = 1) and the next spline's start.
inline double max_junction_gap(const PrimitiveSequence& prims) {
  double worst = 0.0;
  for (std::size_t k = 1; k < prims.size(); ++k)
    for (std::size_t j = 0; j < prims.primitives[k].num_joints(); ++j)
      worst = std::max(worst, distance(prims.primitives[k - 1].eval(j, 1.0), prims.primitives[k].eval(j, 0.0)));
  return worst;
}

/// Splits a stitched sequence back into per-segment occurrences with the stitched coefficients.
inline std::vector<Occurrence> restitched_segments(const std::vector<Occurrence>& segments,
                                                   const PrimitiveSequence& stitched) {
  std::vector<Occurrence> out = segments;
  std::size_t k = 0;
  for (auto& seg : out) {
    for (auto& s : seg.splines) s = stitched.primitives[k++];
    seg.source = {seg.splines.front().start_frame, seg.splines.back().start_frame + seg.splines.back().n_frames};
  }
  return out;
}

struct MotionScript {
  std::vector<std::pair<std::string, int>> entries;
  std::uint64_t seed = 0;
  friend bool operator==(const MotionScript&, const MotionScript&) = default;
};

inline void validate(const MotionScript& s, const ConceptVocabulary* vocab = nullptr) {
  require(!s.entries.empty(), ErrorKind::ValidationError, "script has no entries");
  for (const auto& [label, count] : s.entries) {
    require(count >= 1, ErrorKind::ValidationError, "script repetition count must be >= 1");
    if (vocab != nullptr && !vocab->contains(label)) fail(ErrorKind::UnknownConcept, "unknown concept '" + label + "'");
  }
}

inline json to_json(const MotionScript& s) {
  json entries = json::array();
  for (const auto& [label, count] : s.entries) entries.push_back({label, count});
  return {{"entries", std::move(entries)}, {"seed", s.seed}};
}

inline MotionScript motion_script_from_json(const json& j) {
  MotionScript s = detail::schema_guard("script", [&] {
    MotionScript out;
    for (const auto& e : j.at("entries")) {
      if (!e.is_array() || e.size() != 2) fail(ErrorKind::MalformedFile, "script entry must be [concept, count]");
      out.entries.emplace_back(e[0].get<std::string>(), e[1].get<int>());
    }
    out.seed = j.value("seed", std::uint64_t{0});
    return out;
  });
  validate(s);
  return s;
}

struct Synthesis {
  std::vector<Occurrence> segments;  // stitched, one per repetition
  PrimitiveSequence primitives;
  PoseSequence poses;
};

inline const ConceptModel& model_for(const ConceptModels& models, const std::string& label) {
  const auto it = models.find(label);
  if (it == models.end()) fail(ErrorKind::UnknownConcept, "no concept model for '" + label + "'");
  return it->second;
}

inline Synthesis assemble(std::vector<Occurrence> segments, const PoseSequence& meta, const std::string& id) {
  Synthesis out;
  out.primitives = stitch(segments);
  out.primitives.source_id = id;
  out.segments = restitched_segments(segments, out.primitives);
  out.poses = execute_primitives(out.primitives, meta);
  return out;
}

/// Repetition i of the script samples from its own RNG stream (seed, i).
inline Synthesis synthesize(const MotionScript& script, const ConceptModels& models, const PoseSequence& meta,
                            const std::string& id = "synth") {
  validate(script);
  std::vector<Occurrence> segments;
  std::uint64_t slot = 0;
  for (const auto& [label, count] : script.entries) {
    const auto& model = model_for(models, label);
    for (int r = 0; r < count; ++r) {
      auto rng = Rng::stream(script.seed, slot++);
      segments.push_back(sample_concept(model, rng));
    }
  }
  return assemble(std::move(segments), meta, id);
}

// ---------------------------------------------------------------------------
// Edits

enum class EditKind { Relabel, Insert, Delete, SetPrimitiveParam };

inline const char* to_string(EditKind k) {
  switch (k) {
    case EditKind::Relabel: return "relabel";
    case EditKind::Insert: return "insert";
    case EditKind::Delete: return "delete";
    case EditKind::SetPrimitiveParam: return "set_primitive_param";
  }
  return "?";
}

struct EditCommand {
  EditKind kind = EditKind::Relabel;
  int target = 0;                         // segment (slot) index
  std::string label;                      // relabel / insert by concept
  int count = 1;                          // insert by concept: repetitions
  std::optional<Occurrence> occurrence;   // insert an explicit occurrence
  int primitive = 0;                      // set_primitive_param: spline index within the segment
  int joint = 0;
  int coeff = 0;                          // 0..7, order a_x b_x c_x d_x a_y b_y c_y d_y
  double value = 0.0;
};

inline EditKind edit_kind_from_string(const std::string& s) {
  for (auto k : {EditKind::Relabel, EditKind::Insert, EditKind::Delete, EditKind::SetPrimitiveParam})
    if (s == to_string(k)) return k;
  fail(ErrorKind::ValidationError, "unknown edit kind '" + s + "'");
}

inline json to_json(const EditCommand& c) {
  json j = {{"kind", to_string(c.kind)}, {"target", c.target}};
  switch (c.kind) {
    case EditKind::Relabel: j["concept"] = c.label; break;
    case EditKind::Insert:
      if (c.occurrence) {
        j["occurrence"] = to_json(*c.occurrence);
      } else {
        j["entry"] = {c.label, c.count};
      }
      break;
    case EditKind::Delete: break;
    case EditKind::SetPrimitiveParam:
      j["primitive"] = c.primitive;
      j["joint"] = c.joint;
      j["coeff"] = c.coeff;
      j["value"] = c.value;
      break;
  }
  return j;
}

inline EditCommand edit_command_from_json(const json& j) {
  return detail::schema_guard("edit command", [&] {
    EditCommand c;
    c.kind = edit_kind_from_string(j.at("kind").get<std::string>());
    c.target = j.at("target").get<int>();
    switch (c.kind) {
      case EditKind::Relabel: c.label = j.at("concept").get<std::string>(); break;
      case EditKind::Insert:
        if (j.contains("occurrence")) {
          c.occurrence = occurrence_from_json(j.at("occurrence"));
        } else {
          const auto& e = j.at("entry");
          if (!e.is_array() || e.size() != 2) fail(ErrorKind::ValidationError, "entry must be [concept, count]");
          c.label = e[0].get<std::string>();
          c.count = e[1].get<int>();
        }
        break;
      case EditKind::Delete: break;
      case EditKind::SetPrimitiveParam:
        c.primitive = j.at("primitive").get<int>();
        c.joint = j.at("joint").get<int>();
        c.coeff = j.at("coeff").get<int>();
        c.value = j.at("value").get<double>();
        break;
    }
    return c;
  });
}

/// Applies one edit and re-stitches. Segments before the edit point are untouched. Stitching
/// pins every spline's start position to its predecessor, so a position edit only takes effect
/// on the first spline of the sequence.
inline std::vector<Occurrence> apply_edit(const std::vector<Occurrence>& segments, const EditCommand& cmd,
                                          const ConceptModels& models, Rng& rng) {
  auto out = segments;
  const int n = static_cast<int>(out.size());
  auto check_slot = [&](int i, int limit) {
    if (i < 0 || i >= limit) fail(ErrorKind::IndexOutOfRange, "segment index " + std::to_string(i) + " out of range");
  };
  switch (cmd.kind) {
    case EditKind::Relabel: {
      check_slot(cmd.target, n);
      out[cmd.target] = sample_concept(model_for(models, cmd.label), rng);
      break;
    }
    case EditKind::Insert: {
      check_slot(cmd.target, n + 1);
      std::vector<Occurrence> added;
      if (cmd.occurrence) {
        validate(*cmd.occurrence);
        added.push_back(*cmd.occurrence);
      } else {
        require(cmd.count >= 1, ErrorKind::ValidationError, "insert count must be >= 1");
        const auto& model = model_for(models, cmd.label);
        for (int r = 0; r < cmd.count; ++r) added.push_back(sample_concept(model, rng));
      }
      out.insert(out.begin() + cmd.target, added.begin(), added.end());
      break;
    }
    case EditKind::Delete: {
      check_slot(cmd.target, n);
      require(n > 1, ErrorKind::ValidationError, "cannot delete the only segment");
      out.erase(out.begin() + cmd.target);
      break;
    }
    case EditKind::SetPrimitiveParam: {
      check_slot(cmd.target, n);
      auto& seg = out[cmd.target];
      if (cmd.primitive < 0 || cmd.primitive >= seg.num_splines()) {
        fail(ErrorKind::IndexOutOfRange, "primitive index out of range");
      }
      auto& s = seg.splines[cmd.primitive];
      if (cmd.joint < 0 || cmd.joint >= static_cast<int>(s.num_joints())) {
        fail(ErrorKind::IndexOutOfRange, "joint index out of range");
      }
      if (cmd.coeff < 0 || cmd.coeff >= 8) fail(ErrorKind::IndexOutOfRange, "coefficient index out of range");
      require(std::isfinite(cmd.value), ErrorKind::ValidationError, "coefficient value must be finite");
      s.coeffs[cmd.joint][cmd.coeff] = cmd.value;
      break;
    }
  }
  return restitched_segments(out, stitch(out));
}

}  // namespace pmc
