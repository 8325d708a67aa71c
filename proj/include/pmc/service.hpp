#pragma once

#include <algorithm>
#include <cctype>
#include <condition_variable>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "pmc/pipeline.hpp"

// After Eigen: <resolv.h>, included by httplib, defines a _res macro.
#include <httplib.h>

// On-disk project state and the JSON-over-HTTP API used by the studio.
namespace pmc::service {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Trajectories

/// Centered moving average; the window shrinks at the ends.
inline std::vector<double> moving_average(const std::vector<double>& v, int width = 5) {
  const int n = static_cast<int>(v.size()), h = width / 2;
  std::vector<double> out(v.size());
  for (int t = 0; t < n; ++t) {
    const int lo = std::max(0, t - h), hi = std::min(n - 1, t + h);
    double s = 0.0;
    for (int k = lo; k <= hi; ++k) s += v[k];
    out[t] = s / (hi - lo + 1);
  }
  return out;
}

struct Extremum {
  int frame = 0;
  bool is_max = false;
};

/// Frames whose smoothed value is a strict min or max over a full +-radius window.
inline std::vector<Extremum> local_extrema(const std::vector<double>& v, int radius = 3, int smooth = 5) {
  const auto s = moving_average(v, smooth);
  const int n = static_cast<int>(s.size());
  std::vector<Extremum> out;
  for (int t = radius; t + radius < n; ++t) {
    bool is_max = true, is_min = true;
    for (int k = t - radius; k <= t + radius; ++k) {
      if (k == t) continue;
      is_max = is_max && s[t] > s[k];
      is_min = is_min && s[t] < s[k];
    }
    if (is_max || is_min) out.push_back({t, is_max});
  }
  return out;
}

inline json trajectory_json(const PoseSequence& seq, int joint) {
  require(joint >= 0 && joint < static_cast<int>(seq.num_joints()), ErrorKind::IndexOutOfRange,
          "joint index out of range");
  std::vector<double> xs, ys;
  for (std::size_t t = 0; t < seq.num_frames(); ++t) {
    const Point2 p = seq.at(t, static_cast<std::size_t>(joint));
    xs.push_back(p.x);
    ys.push_back(p.y);
  }
  auto extrema = [](const std::vector<double>& v) {
    json out = json::array();
    for (const auto& e : local_extrema(v)) out.push_back({{"frame", e.frame}, {"kind", e.is_max ? "max" : "min"}});
    return out;
  };
  return {{"sequence_id", seq.id}, {"joint", joint},      {"name", seq.joint_names[joint]},
          {"x", xs},               {"y", ys},             {"extrema", {{"x", extrema(xs)}, {"y", extrema(ys)}}}};
}

// ---------------------------------------------------------------------------
// Training requests

/// Options shared by the train endpoint and the command-line tool.
struct TrainRequest {
  pipeline::TrainOptions train;
  ConceptFitConfig concepts;
  DescribeConfig describe;
  std::optional<ConceptVocabulary> vocabulary;  // default: sorted annotated labels
};

inline TrainRequest train_request_from_json(const json& j) {
  TrainRequest r;
  if (j.is_null()) return r;
  require(j.is_object(), ErrorKind::ValidationError, "train request must be an object");
  r.train.training.epochs = j.value("epochs", r.train.training.epochs);
  r.train.training.warmup_epochs = j.value("warmup_epochs", r.train.training.warmup_epochs);
  r.train.training.seed = j.value("seed", r.train.training.seed);
  r.train.training.adam.learning_rate = j.value("learning_rate", r.train.training.adam.learning_rate);
  r.train.model.hidden_dim = j.value("hidden_dim", r.train.model.hidden_dim);
  r.train.model.seed = j.value("seed", r.train.model.seed);
  r.train.segmentation.lambda = j.value("lambda", r.train.segmentation.lambda);
  r.concepts.cov_f = j.value("cov_f", r.concepts.cov_f);
  r.concepts.similarity_threshold = j.value("similarity_threshold", r.concepts.similarity_threshold);
  r.describe.beam_width = j.value("beam_width", r.describe.beam_width);
  if (j.contains("vocabulary")) r.vocabulary = ConceptVocabulary{j.at("vocabulary").get<std::vector<std::string>>()};
  require(r.train.training.epochs >= 1, ErrorKind::ValidationError, "epochs must be >= 1");
  require(r.train.model.hidden_dim >= 1, ErrorKind::ValidationError, "hidden_dim must be >= 1");
  require(r.describe.beam_width >= 1, ErrorKind::ValidationError, "beam_width must be >= 1");
  require(r.concepts.cov_f >= 0.0, ErrorKind::ValidationError, "cov_f must be >= 0");
  return r;
}

inline ConceptVocabulary vocabulary_of(const std::vector<pipeline::LoadedSequence>& seqs) {
  std::set<std::string> labels;
  for (const auto& s : seqs)
    for (const auto& a : s.annotations) labels.insert(a.label);
  return {{labels.begin(), labels.end()}};
}

struct TrainOutcome {
  TrainedModel model;
  pipeline::ExtractResult extracted;
  TrainingHistory history;
};

/// Trains the recognizer on the annotated sequences and fits concept models on all of them.
inline TrainOutcome run_training(const std::vector<pipeline::LoadedSequence>& seqs, const TrainRequest& req) {
  TrainOutcome out;
  const auto vocab = req.vocabulary ? *req.vocabulary : vocabulary_of(seqs);
  require(!vocab.labels.empty(), ErrorKind::EmptyDataset, "no annotated sequences to train on");
  out.model = pipeline::train_recognizer(vocab, seqs, req.train, &out.history);
  out.extracted = pipeline::extract_concept_models(out.model, seqs, req.concepts, req.describe);
  return out;
}

// ---------------------------------------------------------------------------
// Project

struct Session {
  std::string id;
  std::uint64_t version = 1;
  std::uint64_t seed = 0;
  std::uint64_t edits = 0;
  json source;  // how the session was opened
  PoseSequence meta;  // skeleton and frame metadata, no frames
  std::vector<Occurrence> segments;

  Synthesis render() const { return assemble(segments, meta, id); }
};

inline json to_json(const Session& s) {
  json segs = json::array();
  for (const auto& o : s.segments) segs.push_back(to_json(o));
  json meta = to_json(s.meta);
  meta.erase("frames");
  return {{"version", kFormatVersion}, {"id", s.id},         {"token", s.version}, {"seed", s.seed},
          {"edits", s.edits},          {"source", s.source}, {"meta", meta},       {"segments", segs}};
}

inline Session session_from_json(const json& j) {
  return detail::schema_guard("session", [&] {
    Session s;
    s.id = j.at("id").get<std::string>();
    s.version = j.at("token").get<std::uint64_t>();
    s.seed = j.at("seed").get<std::uint64_t>();
    s.edits = j.at("edits").get<std::uint64_t>();
    s.source = j.at("source");
    const auto& meta = j.at("meta");
    s.meta.id = meta.at("id").get<std::string>();
    s.meta.fps = meta.at("fps").get<double>();
    s.meta.width = meta.at("width").get<int>();
    s.meta.height = meta.at("height").get<int>();
    s.meta.joint_names = meta.at("joint_names").get<std::vector<std::string>>();
    for (const auto& o : j.at("segments")) s.segments.push_back(occurrence_from_json(o));
    return s;
  });
}

/// Summary returned by the session endpoints.
inline json session_view(const Session& s) {
  const auto r = s.render();
  json segs = json::array();
  for (const auto& o : r.segments) {
    json splines = json::array();
    for (const auto& p : o.splines) splines.push_back(to_json(p));
    segs.push_back({{"concept", o.label}, {"frames", range_to_json(o.source)}, {"primitives", splines}});
  }
  return {{"id", s.id},
          {"version", s.version},
          {"num_frames", r.poses.num_frames()},
          {"max_junction_gap", max_junction_gap(r.primitives)},
          {"segments", segs}};
}

enum class JobStatus { Queued, Running, Succeeded, Failed };

inline const char* to_string(JobStatus s) {
  switch (s) {
    case JobStatus::Queued: return "queued";
    case JobStatus::Running: return "running";
    case JobStatus::Succeeded: return "succeeded";
    case JobStatus::Failed: return "failed";
  }
  return "?";
}

struct Job {
  std::string id;
  JobStatus status = JobStatus::Queued;
  json request;
  json result;
  std::string error;
};

inline json to_json(const Job& j) {
  json out = {{"id", j.id}, {"status", to_string(j.status)}, {"request", j.request}};
  if (!j.result.is_null()) out["result"] = j.result;
  if (!j.error.empty()) out["error"] = j.error;
  return out;
}

inline Job job_from_json(const json& j) {
  return detail::schema_guard("job", [&] {
    Job out;
    out.id = j.at("id").get<std::string>();
    const auto s = j.at("status").get<std::string>();
    for (auto k : {JobStatus::Queued, JobStatus::Running, JobStatus::Succeeded, JobStatus::Failed})
      if (s == to_string(k)) out.status = k;
    out.request = j.value("request", json());
    out.result = j.value("result", json());
    out.error = j.value("error", std::string());
    return out;
  });
}

inline bool valid_id(const std::string& id) {
  if (id.empty() || id.size() > 128) return false;
  return std::all_of(id.begin(), id.end(),
                     [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.'; }) &&
         id != "." && id != "..";
}

/// Project directory layout:
///   sequences/<id>.json  annotations/<id>.json  models/recognizer.json  concepts/<label>.json
///   descriptions/<id>.json  sessions/<id>.json  jobs/<id>.json  exports/<session>/
/// Every mutation is written before the call returns. Methods are thread-safe.
class Project {
 public:
  explicit Project(fs::path root) : root_(std::move(root)) {
    fs::create_directories(root_);
    for (const auto& f : json_files("sequences")) {
      auto seq = load_pose_sequence(f);
      sequences_[seq.id] = std::move(seq);
    }
    for (const auto& f : json_files("annotations")) {
      const auto j = read_json_file(f);
      annotations_[j.at("sequence_id").get<std::string>()] = annotations_from_json(j);
    }
    if (fs::exists(root_ / "models" / "recognizer.json"))
      model_ = std::make_shared<const TrainedModel>(load_checkpoint(root_ / "models" / "recognizer.json"));
    concepts_ = pipeline::load_concept_models(root_ / "concepts");
    for (const auto& f : json_files("sessions")) {
      auto s = session_from_json(read_json_file(f));
      next_session_ = std::max(next_session_, numeric_suffix(s.id) + 1);
      sessions_[s.id] = std::move(s);
    }
    for (const auto& f : json_files("jobs")) {
      auto job = job_from_json(read_json_file(f));
      next_job_ = std::max(next_job_, numeric_suffix(job.id) + 1);
      if (job.status == JobStatus::Queued || job.status == JobStatus::Running) {
        job.status = JobStatus::Failed;
        job.error = "interrupted by a restart";
        write_json_file(root_ / "jobs" / (job.id + ".json"), to_json(job));
      }
      jobs_[job.id] = std::move(job);
    }
    worker_ = std::thread([this] { work(); });
  }

  ~Project() {
    {
      std::lock_guard lk(mu_);
      stopping_ = true;
    }
    cv_.notify_all();
    worker_.join();
  }

  Project(const Project&) = delete;
  Project& operator=(const Project&) = delete;

  const fs::path& root() const { return root_; }

  // Sequences ---------------------------------------------------------------

  json add_sequence(const json& body) {
    auto seq = pose_sequence_from_json(body);
    require(valid_id(seq.id), ErrorKind::ValidationError, "sequence id must be [A-Za-z0-9_.-]+");
    std::lock_guard lk(mu_);
    if (sequences_.count(seq.id)) fail(ErrorKind::Conflict, "sequence '" + seq.id + "' already exists");
    save_pose_sequence(seq, root_ / "sequences" / (seq.id + ".json"));
    json out = {{"id", seq.id}, {"num_frames", seq.num_frames()}, {"num_joints", seq.num_joints()}};
    sequences_[seq.id] = std::move(seq);
    return out;
  }

  json list_sequences() const {
    std::lock_guard lk(mu_);
    json out = json::array();
    for (const auto& [id, s] : sequences_)
      out.push_back({{"id", id},
                     {"num_frames", s.num_frames()},
                     {"num_joints", s.num_joints()},
                     {"annotated", annotations_.count(id) != 0}});
    return out;
  }

  json trajectories(const std::string& id, int joint) const {
    std::lock_guard lk(mu_);
    return trajectory_json(sequence(id), joint);
  }

  /// Replaces the sequence's annotations with an annotation document.
  json set_annotations(const std::string& id, const json& body) {
    auto anns = annotations_from_json(body);
    std::lock_guard lk(mu_);
    const auto& seq = sequence(id);
    require(body.at("sequence_id").get<std::string>() == id, ErrorKind::ValidationError,
            "annotation sequence_id does not match the URL");
    const int T = static_cast<int>(seq.num_frames());
    for (const auto& a : anns) {
      require(a.repetition.end <= T, ErrorKind::ValidationError, "annotation extends past the last frame");
    }
    save_annotations(id, anns, root_ / "annotations" / (id + ".json"));
    annotations_[id] = std::move(anns);
    return {{"sequence_id", id}, {"annotations", annotations_[id].size()}};
  }

  // Training ----------------------------------------------------------------

  json submit_training(const json& body) {
    const auto req = train_request_from_json(body);
    std::lock_guard lk(mu_);
    auto seqs = loaded_sequences();
    bool any = false;
    for (const auto& s : seqs) any = any || !s.annotations.empty();
    require(any, ErrorKind::EmptyDataset, "no annotated sequences to train on");
    Job job;
    job.id = "j" + std::to_string(next_job_++);
    job.request = body.is_null() ? json::object() : body;
    write_json_file(root_ / "jobs" / (job.id + ".json"), to_json(job));
    jobs_[job.id] = job;
    queue_.push_back({job.id, req, std::move(seqs)});
    cv_.notify_all();
    return to_json(job);
  }

  json job(const std::string& id) const {
    std::lock_guard lk(mu_);
    const auto it = jobs_.find(id);
    if (it == jobs_.end()) fail(ErrorKind::NotFound, "unknown job '" + id + "'");
    return to_json(it->second);
  }

  /// Blocks until the job leaves the queue; for tests and the command-line tool.
  json wait_job(const std::string& id) {
    std::unique_lock lk(mu_);
    done_cv_.wait(lk, [&] {
      const auto it = jobs_.find(id);
      return it == jobs_.end() || it->second.status == JobStatus::Succeeded || it->second.status == JobStatus::Failed;
    });
    lk.unlock();
    return job(id);
  }

  std::shared_ptr<const TrainedModel> model() const {
    std::lock_guard lk(mu_);
    return model_;
  }

  json concepts() const {
    std::lock_guard lk(mu_);
    json out = json::array();
    for (const auto& [_, m] : concepts_) out.push_back(to_json(m));
    return out;
  }

  // Description -------------------------------------------------------------

  json describe_sequence(const std::string& id, const json& body) {
    DescribeConfig cfg;
    if (body.is_object()) cfg.beam_width = body.value("beam_width", cfg.beam_width);
    require(cfg.beam_width >= 1, ErrorKind::ValidationError, "beam_width must be >= 1");
    std::shared_ptr<const TrainedModel> model;
    PoseSequence seq;
    {
      std::lock_guard lk(mu_);
      seq = sequence(id);
      model = require_model();
    }
    const auto d = describe(seq, *model, cfg).description;
    json out = to_json(d);
    out["sequence_id"] = id;
    std::lock_guard lk(mu_);
    write_json_file(root_ / "descriptions" / (id + ".json"), out);
    return out;
  }

  // Sessions ----------------------------------------------------------------

  /// Body: {"script": {...}} or {"sequence_id": id, "description"?: {...}}; optional "seed".
  json open_session(const json& body) {
    require(body.is_object(), ErrorKind::ValidationError, "session request must be an object");
    Session s;
    s.seed = body.value("seed", std::uint64_t{0});
    s.source = body;
    std::unique_lock lk(mu_);
    if (body.contains("script")) {
      const auto script = motion_script_from_json(body.at("script"));
      if (!body.contains("seed")) s.seed = script.seed;
      s.meta = body.contains("sequence_id") ? sequence(body.at("sequence_id").get<std::string>()).empty_like()
                                            : default_meta();
      const auto models = concepts_;
      lk.unlock();
      s.segments = synthesize(script, models, s.meta, "session").segments;
    } else if (body.contains("sequence_id")) {
      const auto id = body.at("sequence_id").get<std::string>();
      const PoseSequence seq = sequence(id);
      const auto model = require_model();
      lk.unlock();
      s.meta = seq.empty_like();
      if (body.contains("description")) {
        const auto d = description_from_json(body.at("description"));
        const auto prims = segment_primitives(seq, model->segmentation);
        for (std::size_t i = 0; i < d.labels.size(); ++i)
          if (auto o = occurrence_in_range(d.labels[i], prims, d.intervals[i])) s.segments.push_back(std::move(*o));
      } else {
        s.segments = occurrences_from_alignment(describe(seq, *model, {}), model->vocabulary);
      }
      require(!s.segments.empty(), ErrorKind::ValidationError, "description has no non-empty occurrences");
    } else {
      fail(ErrorKind::ValidationError, "session request needs 'script' or 'sequence_id'");
    }
    s.segments = assemble(s.segments, s.meta, "session").segments;
    if (!lk.owns_lock()) lk.lock();
    s.id = "s" + std::to_string(next_session_++);
    s.meta.id = s.id;
    persist(s);
    sessions_[s.id] = s;
    return session_view(s);
  }

  json session(const std::string& id) const {
    std::lock_guard lk(mu_);
    return session_view(find_session(id));
  }

  /// Body: EditCommand fields plus "version", the token the edit was based on.
  json edit_session(const std::string& id, const json& body) {
    require(body.is_object() && body.contains("version"), ErrorKind::ValidationError,
            "edit needs the session version token");
    const auto cmd = edit_command_from_json(body);
    const auto token = detail::schema_guard("edit", [&] { return body.at("version").get<std::uint64_t>(); });
    std::lock_guard lk(mu_);
    Session& s = find_session(id);
    if (token != s.version) {
      fail(ErrorKind::Conflict, "stale version token " + std::to_string(token) + ", session is at " +
                                    std::to_string(s.version));
    }
    Rng rng = Rng::stream(s.seed, (1ULL << 32) + s.edits);
    Session next = s;
    next.segments = apply_edit(s.segments, cmd, concepts_, rng);
    ++next.edits;
    ++next.version;
    persist(next);
    s = std::move(next);
    return session_view(s);
  }

  json session_frames(const std::string& id, std::optional<int> start, std::optional<int> end) const {
    Session s;
    {
      std::lock_guard lk(mu_);
      s = find_session(id);
    }
    const auto poses = s.render().poses;
    const int T = static_cast<int>(poses.num_frames());
    const int a = start.value_or(0), b = end.value_or(T);
    require(0 <= a && a <= b && b <= T, ErrorKind::ValidationError, "frame range out of bounds");
    json out = to_json(pipeline::clip(poses, {a, b}));
    out["start"] = a;
    out["session_version"] = s.version;
    return out;
  }

  json export_session(const std::string& id) {
    std::lock_guard lk(mu_);
    const Session& s = find_session(id);
    const auto r = s.render();
    const fs::path dir = root_ / "exports" / id;
    save_pose_sequence(r.poses, dir / "poses.json");
    save_primitives(r.primitives, dir / "primitives.json");
    json segs = json::array();
    for (const auto& o : r.segments) segs.push_back(to_json(o));
    write_json_file(dir / "segments.json", {{"version", kFormatVersion}, {"segments", segs}});
    return {{"id", id},
            {"version", s.version},
            {"num_frames", r.poses.num_frames()},
            {"poses", fs::relative(dir / "poses.json", root_).generic_string()},
            {"primitives", fs::relative(dir / "primitives.json", root_).generic_string()},
            {"segments", fs::relative(dir / "segments.json", root_).generic_string()}};
  }

 private:
  struct Pending {
    std::string job_id;
    TrainRequest request;
    std::vector<pipeline::LoadedSequence> sequences;
  };

  std::vector<fs::path> json_files(const char* sub) const {
    std::vector<fs::path> out;
    if (!fs::is_directory(root_ / sub)) return out;
    for (const auto& e : fs::directory_iterator(root_ / sub))
      if (e.path().extension() == ".json") out.push_back(e.path());
    std::sort(out.begin(), out.end());
    return out;
  }

  static std::uint64_t numeric_suffix(const std::string& id) {
    try {
      return std::stoull(id.substr(1));
    } catch (...) {
      return 0;
    }
  }

  const PoseSequence& sequence(const std::string& id) const {
    const auto it = sequences_.find(id);
    if (it == sequences_.end()) fail(ErrorKind::NotFound, "unknown sequence '" + id + "'");
    return it->second;
  }

  Session& find_session(const std::string& id) {
    const auto it = sessions_.find(id);
    if (it == sessions_.end()) fail(ErrorKind::NotFound, "unknown session '" + id + "'");
    return it->second;
  }
  const Session& find_session(const std::string& id) const { return const_cast<Project*>(this)->find_session(id); }

  std::shared_ptr<const TrainedModel> require_model() const {
    if (!model_) fail(ErrorKind::Conflict, "no trained model; POST /train first");
    return model_;
  }

  // Joint names of the first registered sequence, else the synthetic skeleton.
  PoseSequence default_meta() const {
    if (!sequences_.empty()) return sequences_.begin()->second.empty_like();
    return synth_skeleton();
  }

  std::vector<pipeline::LoadedSequence> loaded_sequences() const {
    std::vector<pipeline::LoadedSequence> out;
    for (const auto& [id, seq] : sequences_) {
      pipeline::LoadedSequence s;
      s.id = id;
      s.split = "train";
      s.poses = seq;
      if (const auto it = annotations_.find(id); it != annotations_.end()) s.annotations = it->second;
      out.push_back(std::move(s));
    }
    return out;
  }

  void persist(const Session& s) const { write_json_file(root_ / "sessions" / (s.id + ".json"), to_json(s)); }

  void set_job(Job job) {
    write_json_file(root_ / "jobs" / (job.id + ".json"), to_json(job));
    jobs_[job.id] = std::move(job);
  }

  void work() {
    for (;;) {
      Pending p;
      {
        std::unique_lock lk(mu_);
        cv_.wait(lk, [&] { return stopping_ || !queue_.empty(); });
        if (stopping_) return;
        p = std::move(queue_.front());
        queue_.pop_front();
        Job j = jobs_.at(p.job_id);
        j.status = JobStatus::Running;
        set_job(std::move(j));
      }
      Job j;
      try {
        auto out = run_training(p.sequences, p.request);
        std::lock_guard lk(mu_);
        save_checkpoint(out.model, root_ / "models" / "recognizer.json");
        fs::remove_all(root_ / "concepts");
        pipeline::save_concept_models(out.extracted.models, root_ / "concepts");
        model_ = std::make_shared<const TrainedModel>(std::move(out.model));
        concepts_ = std::move(out.extracted.models);
        j = jobs_.at(p.job_id);
        j.status = JobStatus::Succeeded;
        json support = json::object();
        for (const auto& [label, m] : concepts_) support[label] = m.support;
        j.result = {{"epochs", out.history.epochs.size()},
                    {"final_loss", out.history.epochs.empty() ? 0.0 : out.history.epochs.back().loss.total},
                    {"lambda", model_->segmentation.lambda},
                    {"vocabulary", model_->vocabulary.labels},
                    {"concept_support", support}};
        set_job(std::move(j));
      } catch (const std::exception& e) {
        std::lock_guard lk(mu_);
        j = jobs_.at(p.job_id);
        j.status = JobStatus::Failed;
        j.error = e.what();
        set_job(std::move(j));
      }
      done_cv_.notify_all();
    }
  }

  fs::path root_;
  mutable std::mutex mu_;
  std::condition_variable cv_, done_cv_;
  bool stopping_ = false;
  std::map<std::string, PoseSequence> sequences_;
  std::map<std::string, std::vector<WeakAnnotation>> annotations_;
  std::shared_ptr<const TrainedModel> model_;
  ConceptModels concepts_;
  std::map<std::string, Session> sessions_;
  std::map<std::string, Job> jobs_;
  std::deque<Pending> queue_;
  std::uint64_t next_session_ = 1, next_job_ = 1;
  std::thread worker_;
};

// ---------------------------------------------------------------------------
// HTTP

inline int http_status(ErrorKind k) {
  switch (k) {
    case ErrorKind::NotFound: return 404;
    case ErrorKind::Conflict: return 409;
    default: return 400;
  }
}

inline json error_json(const std::string& kind, const std::string& message) {
  return {{"error", {{"kind", kind}, {"message", message}}}};
}

/// Registers every route on `server`; `project` must outlive it.
inline void install_routes(httplib::Server& server, Project& project) {
  using Req = httplib::Request;
  using Res = httplib::Response;
  auto reply = [](Res& res, const json& body, int status = 200) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  };
  // Wraps a handler so library errors map onto 400/404/409 with a JSON body.
  auto guarded = [reply](auto fn) {
    return [fn, reply](const Req& req, Res& res) {
      try {
        fn(req, res);
      } catch (const Error& e) {
        reply(res, error_json(to_string(e.kind()), e.what()), http_status(e.kind()));
      } catch (const json::exception& e) {
        reply(res, error_json("MalformedFile", e.what()), 400);
      } catch (const std::exception& e) {
        reply(res, error_json("Internal", e.what()), 500);
      }
    };
  };
  auto body_of = [](const Req& req) -> json {
    if (req.body.empty()) return json();
    try {
      return json::parse(req.body);
    } catch (const json::exception& e) {
      fail(ErrorKind::ValidationError, std::string("request body is not JSON: ") + e.what());
    }
  };
  auto int_param = [](const Req& req, const char* name) -> std::optional<int> {
    if (!req.has_param(name)) return std::nullopt;
    const auto v = req.get_param_value(name);
    try {
      std::size_t used = 0;
      const int n = std::stoi(v, &used);
      if (used == v.size()) return n;
    } catch (...) {
    }
    fail(ErrorKind::ValidationError, std::string("query parameter '") + name + "' must be an integer");
  };

  server.Post("/sequences", guarded([&, reply, body_of](const Req& req, Res& res) {
                reply(res, project.add_sequence(body_of(req)), 201);
              }));
  server.Get("/sequences", guarded([&, reply](const Req&, Res& res) { reply(res, project.list_sequences()); }));
  server.Get(R"(/sequences/([^/]+)/trajectories)", guarded([&, reply, int_param](const Req& req, Res& res) {
               const auto joint = int_param(req, "joint");
               require(joint.has_value(), ErrorKind::ValidationError, "query parameter 'joint' is required");
               reply(res, project.trajectories(req.matches[1], *joint));
             }));
  server.Post(R"(/sequences/([^/]+)/annotations)", guarded([&, reply, body_of](const Req& req, Res& res) {
                reply(res, project.set_annotations(req.matches[1], body_of(req)), 201);
              }));
  server.Post("/train", guarded([&, reply, body_of](const Req& req, Res& res) {
                reply(res, project.submit_training(body_of(req)), 202);
              }));
  server.Get(R"(/jobs/([^/]+))", guarded([&, reply](const Req& req, Res& res) { reply(res, project.job(req.matches[1])); }));
  server.Post(R"(/describe/([^/]+))", guarded([&, reply, body_of](const Req& req, Res& res) {
                reply(res, project.describe_sequence(req.matches[1], body_of(req)));
              }));
  server.Get("/concepts", guarded([&, reply](const Req&, Res& res) { reply(res, project.concepts()); }));
  server.Post("/sessions", guarded([&, reply, body_of](const Req& req, Res& res) {
                reply(res, project.open_session(body_of(req)), 201);
              }));
  server.Get(R"(/sessions/([^/]+))", guarded([&, reply](const Req& req, Res& res) {
               reply(res, project.session(req.matches[1]));
             }));
  server.Post(R"(/sessions/([^/]+)/edits)", guarded([&, reply, body_of](const Req& req, Res& res) {
                reply(res, project.edit_session(req.matches[1], body_of(req)));
              }));
  server.Get(R"(/sessions/([^/]+)/frames)", guarded([&, reply, int_param](const Req& req, Res& res) {
               reply(res, project.session_frames(req.matches[1], int_param(req, "start"), int_param(req, "end")));
             }));
  server.Post(R"(/sessions/([^/]+)/export)", guarded([&, reply](const Req& req, Res& res) {
                reply(res, project.export_session(req.matches[1]));
              }));
  server.set_error_handler([reply](const Req&, Res& res) {
    if (res.body.empty()) reply(res, error_json(res.status == 404 ? "NotFound" : "Error", "no such route"), res.status);
  });
}

}  // namespace pmc::service
