#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pmc/checkpoint.hpp"
#include "pmc/classifier.hpp"
#include "pmc/generator.hpp"
#include "pmc/io.hpp"
#include "pmc/metrics.hpp"
#include "pmc/primitives.hpp"
#include "pmc/recognizer.hpp"
#include "pmc/synth_bench.hpp"

// Pipeline stages shared by the command-line tool and the HTTP service.
namespace pmc::pipeline {

struct LoadedSequence {
  std::string id;
  std::string split;
  PoseSequence poses;
  std::vector<WeakAnnotation> annotations;
  std::optional<GroundTruth> truth;
};

inline std::vector<LoadedSequence> load_split(const Manifest& m, const std::string& split) {
  std::vector<LoadedSequence> out;
  for (const auto* e : m.split(split)) {
    LoadedSequence s;
    s.id = e->id;
    s.split = e->split;
    s.poses = load_pose_sequence(e->pose);
    s.annotations = load_annotations(e->annotations, &m.vocabulary);
    if (!e->truth.empty() && std::filesystem::exists(e->truth)) s.truth = ground_truth_from_json(read_json_file(e->truth));
    out.push_back(std::move(s));
  }
  return out;
}

inline std::vector<LoadedSequence> from_dataset(const Dataset& ds, const std::string& split) {
  std::vector<LoadedSequence> out;
  for (const auto* it : ds.split(split)) out.push_back({it->id, it->split, it->poses, it->truth.annotations, it->truth});
  return out;
}

// ---------------------------------------------------------------------------
// Segmentation

inline constexpr double kTargetMedianSegment = 15.0;

/// Lambda from the config, or calibrated on `seqs` when the config's lambda is negative.
inline SegmentationConfig resolve_segmentation(const std::vector<LoadedSequence>& seqs, SegmentationConfig seg,
                                               double target_median = kTargetMedianSegment) {
  if (seg.lambda < 0.0) {
    std::vector<PoseSequence> poses;
    for (const auto& s : seqs) poses.push_back(s.poses);
    seg.lambda = 0.0;
    seg.lambda = calibrate_lambda(poses, seg, target_median);
  }
  validate(seg);
  return seg;
}

inline std::vector<PrimitiveSequence> segment_all(const std::vector<LoadedSequence>& seqs,
                                                  const SegmentationConfig& seg) {
  std::vector<PrimitiveSequence> out;
  for (const auto& s : seqs) out.push_back(segment_primitives(s.poses, seg));
  return out;
}

struct FitReport {
  PrimitiveSequence primitives;
  double kd = 0.0;       // percent of the frame diagonal
  double seconds = 0.0;  // segmentation + fitting wall time
};

inline FitReport fit_sequence(const PoseSequence& poses, const SegmentationConfig& seg) {
  const auto t0 = std::chrono::steady_clock::now();
  FitReport r;
  r.primitives = segment_primitives(poses, seg);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  r.kd = keypoint_difference(execute_primitives(r.primitives, poses), poses);
  return r;
}

// ---------------------------------------------------------------------------
// Recognizer

struct TrainOptions {
  SegmentationConfig segmentation{-1.0, 5, 0};  // negative lambda: calibrate
  ModelConfig model;
  TrainingConfig training;
};

inline TrainedModel train_recognizer(const ConceptVocabulary& vocab, const std::vector<LoadedSequence>& seqs,
                                     const TrainOptions& opt, TrainingHistory* history = nullptr) {
  const auto seg = resolve_segmentation(seqs, opt.segmentation);
  std::vector<AnnotatedSequence> data;
  for (const auto& s : seqs) {
    if (s.annotations.empty()) continue;
    data.push_back({segment_primitives(s.poses, seg), s.annotations});
  }
  return train(vocab, data, opt.model, seg, opt.training, history);
}

struct DescriptionEval {
  double norm_ed = 0.0;  // mean over sequences
  double seq_acc = 0.0;  // percent
  double rep_map = 0.0;  // [0,1]
  std::vector<IntervalPrediction> predictions;
  std::vector<GroundTruthInterval> truths;
  std::map<std::string, Description> descriptions;
};

/// SeqAcc against ground-truth label sequences and mAP against ground-truth instance intervals.
inline DescriptionEval evaluate_description(const TrainedModel& model, const std::vector<LoadedSequence>& seqs,
                                            const DescribeConfig& cfg = {}) {
  DescriptionEval out;
  int n = 0;
  for (const auto& s : seqs) {
    require(s.truth.has_value(), ErrorKind::ValidationError, "sequence '" + s.id + "' has no ground truth");
    const auto result = describe(s.poses, model, cfg);
    const auto& d = result.description;
    out.norm_ed += norm_edit_distance(d.labels, s.truth->labels());
    ++n;
    for (std::size_t i = 0; i < d.labels.size(); ++i) out.predictions.push_back({s.id, d.labels[i], d.intervals[i], d.scores[i]});
    for (const auto& o : s.truth->occurrences) out.truths.push_back({s.id, o.label, o.interval});
    out.descriptions[s.id] = d;
  }
  require(n > 0, ErrorKind::EmptyDataset, "no sequences to evaluate");
  out.norm_ed /= n;
  out.seq_acc = (1.0 - out.norm_ed) * 100.0;
  out.rep_map = repetition_map(out.predictions, out.truths);
  return out;
}

// ---------------------------------------------------------------------------
// Concept models

struct ExtractResult {
  OccurrenceSet occurrences;
  ConceptModels models;
  std::map<std::string, ConceptFitReport> reports;
};

/// Aligned occurrences of every sequence, filtered against the annotated single-repetition references.
inline ExtractResult extract_concept_models(const TrainedModel& model, const std::vector<LoadedSequence>& seqs,
                                            const ConceptFitConfig& cfg = {}, const DescribeConfig& dcfg = {}) {
  std::vector<PrimitiveSequence> prims;
  std::map<std::string, std::vector<Occurrence>> refs;
  for (const auto& s : seqs) {
    prims.push_back(segment_primitives(s.poses, model.segmentation));
    for (auto& r : reference_occurrences(s.annotations, prims.back())) refs[r.label].push_back(std::move(r));
  }
  ExtractResult out;
  out.occurrences = extract_occurrences(prims, model, dcfg);
  for (const auto& [label, occs] : out.occurrences) {
    if (occs.empty()) continue;
    ConceptFitReport rep;
    out.models[label] = fit_concept(occs, refs[label], cfg, &rep);
    out.reports[label] = rep;
  }
  return out;
}

inline void save_concept_models(const ConceptModels& models, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& [label, m] : models) save_concept_model(m, dir / (label + ".json"));
}

inline ConceptModels load_concept_models(const std::filesystem::path& dir) {
  ConceptModels out;
  if (!std::filesystem::is_directory(dir)) return out;
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.path().extension() == ".json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    auto m = load_concept_model(f);
    out[m.label] = std::move(m);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Generative evaluation

/// Frames [r.start, r.end) of a sequence.
inline PoseSequence clip(const PoseSequence& seq, FrameRange r) {
  PoseSequence out = seq.empty_like();
  const auto J = seq.num_joints();
  out.coords.assign(seq.coords.begin() + static_cast<std::ptrdiff_t>(r.start * J * 2),
                    seq.coords.begin() + static_cast<std::ptrdiff_t>(r.end * J * 2));
  return out;
}

/// One clip per ground-truth repetition (or per annotated instance without ground truth).
inline void real_clips(const std::vector<LoadedSequence>& seqs, const ConceptVocabulary& vocab,
                       std::vector<PoseSequence>& clips, std::vector<int>& labels) {
  for (const auto& s : seqs) {
    if (s.truth) {
      for (const auto& o : s.truth->occurrences) {
        clips.push_back(clip(s.poses, o.interval));
        labels.push_back(vocab.index_of(o.label));
      }
    } else {
      for (const auto& a : s.annotations)
        for (const auto& r : a.instances) {
          clips.push_back(clip(s.poses, r));
          labels.push_back(vocab.index_of(a.label));
        }
    }
  }
}

struct GenerationEval {
  GenMetrics metrics;
  double classifier_train_acc = 0.0;
};

/// Trains the action classifier on `held_out` real clips, then scores samples of `models` against them.
inline GenerationEval evaluate_generation(const ConceptModels& models, const ConceptVocabulary& vocab,
                                          const std::vector<LoadedSequence>& held_out,
                                          const ClassifierConfig& ccfg = {}, const GenMetricsConfig& gcfg = {}) {
  std::vector<PoseSequence> clips;
  std::vector<int> labels;
  real_clips(held_out, vocab, clips, labels);
  const auto classifier = train_action_classifier(clips, labels, static_cast<int>(vocab.labels.size()), ccfg);
  GenerationEval out;
  const auto predicted = classifier.classify(clips);
  int correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) correct += predicted[i] == labels[i];
  out.classifier_train_acc = 100.0 * correct / static_cast<double>(labels.size());
  PoseSequence meta = held_out.front().poses.empty_like();
  out.metrics = gen_metrics(models, vocab, clips, labels, classifier, meta, gcfg);
  return out;
}

/// Mean APE / AVE between each held-out repetition and a synthesized repetition of its concept.
inline std::pair<double, double> pose_errors(const ConceptModels& models, const std::vector<LoadedSequence>& seqs,
                                             std::uint64_t seed) {
  double a = 0.0, v = 0.0;
  int n = 0;
  for (const auto& s : seqs) {
    if (!s.truth) continue;
    for (const auto& o : s.truth->occurrences) {
      const auto it = models.find(o.label);
      if (it == models.end()) continue;
      Rng rng = Rng::stream(seed, static_cast<std::uint64_t>(n));
      const auto gen = sample_clip(it->second, s.poses.empty_like(), rng);
      const auto real = clip(s.poses, o.interval);
      a += ape(gen, real);
      v += ave(gen, real);
      ++n;
    }
  }
  require(n > 0, ErrorKind::EmptyDataset, "no ground-truth repetitions with a concept model");
  return {a / n, v / n};
}

}  // namespace pmc::pipeline
