#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pmc/ctc.hpp"
#include "pmc/error.hpp"
#include "pmc/nn.hpp"
#include "pmc/primitives.hpp"
#include "pmc/random.hpp"
#include "pmc/types.hpp"

namespace pmc {

using nn::Mat;
using nn::Vec;

// ---------------------------------------------------------------------------
// Features

/// Per-dimension standardization of raw primitive vectors (8 coefficients per joint, then log duration).
struct FeatureStats {
  Vec mean;
  Vec stddev;

  std::size_t num_joints() const { return static_cast<std::size_t>((mean.size() - 1) / 8); }
};

inline Vec raw_primitive_vector(const SplinePrimitive& p) {
  const auto J = static_cast<Eigen::Index>(p.num_joints());
  Vec v(8 * J + 1);
  for (Eigen::Index j = 0; j < J; ++j)
    for (int c = 0; c < 8; ++c) v[8 * j + c] = p.coeffs[j][c];
  v[8 * J] = std::log(static_cast<double>(p.n_frames));
  return v;
}

inline FeatureStats compute_feature_stats(const std::vector<const PrimitiveSequence*>& seqs) {
  std::vector<Vec> rows;
  for (const auto* s : seqs)
    for (const auto& p : s->primitives) rows.push_back(raw_primitive_vector(p));
  require(!rows.empty(), ErrorKind::EmptyDataset, "no primitives to compute feature statistics");
  const auto D = rows.front().size();
  FeatureStats st;
  st.mean = Vec::Zero(D);
  for (const auto& r : rows) {
    require(r.size() == D, ErrorKind::ShapeMismatch, "primitives with differing joint counts");
    st.mean += r;
  }
  st.mean /= static_cast<double>(rows.size());
  Vec var = Vec::Zero(D);
  for (const auto& r : rows) var += (r - st.mean).cwiseAbs2();
  var /= static_cast<double>(rows.size());
  st.stddev = var.cwiseSqrt();
  for (Eigen::Index i = 0; i < D; ++i)
    if (st.stddev[i] < 1e-8) st.stddev[i] = 1.0;
  return st;
}

/// Standardized coefficients and log(n_frames); dimension 8J + 1.
inline Vec featurize(const SplinePrimitive& prim, const FeatureStats& stats) {
  require(prim.num_joints() == stats.num_joints(), ErrorKind::ShapeMismatch,
          "primitive joint count differs from feature statistics");
  return ((raw_primitive_vector(prim) - stats.mean).array() / stats.stddev.array()).matrix();
}

inline Mat featurize_sequence(const PrimitiveSequence& seq, const FeatureStats& stats) {
  Mat x(stats.mean.size(), static_cast<Eigen::Index>(seq.size()));
  for (std::size_t k = 0; k < seq.size(); ++k) x.col(static_cast<Eigen::Index>(k)) = featurize(seq.primitives[k], stats);
  return x;
}

// ---------------------------------------------------------------------------
// Model

struct ModelConfig {
  int feature_dim = 0;
  int hidden_dim = 128;
  int window_size = 13;
  int num_classes = 0;
  nn::CellKind cell_kind = nn::CellKind::Gru;
  std::uint64_t seed = 0;
};

inline void validate(const ModelConfig& cfg) {
  require(cfg.window_size >= 1 && cfg.window_size % 2 == 1, ErrorKind::ValidationError,
          "window_size must be odd and >= 1");
  require(cfg.hidden_dim >= 1, ErrorKind::ValidationError, "hidden_dim must be >= 1");
  require(cfg.feature_dim >= 1, ErrorKind::ValidationError, "feature_dim must be >= 1");
  require(cfg.num_classes >= 2, ErrorKind::ValidationError, "need at least one concept plus blank");
}

/// The description model: m-MLP / t-MLP encoders, windowed recurrence, shared softmax head.
class Recognizer {
 public:
  Recognizer() = default;
  explicit Recognizer(const ModelConfig& cfg)
      : cfg_(cfg), mmlp_("mmlp"), tmlp_("tmlp"), rnn_("rnn", cfg.cell_kind) {
    validate(cfg_);
  }

  const ModelConfig& config() const { return cfg_; }

  nn::ParameterSet init_params() const {
    Rng rng(cfg_.seed);
    nn::ParameterSet p;
    const Eigen::Index F = cfg_.feature_dim;
    const Eigen::Index H = cfg_.hidden_dim;
    mmlp_.init(p, F, H, H, rng);
    tmlp_.init(p, 2 * F, H, H, rng);
    rnn_.init(p, H, H, rng);
    p["head.w"] = nn::uniform_init(cfg_.num_classes, H, static_cast<double>(H), rng);
    p["head.b"] = nn::uniform_init(cfg_.num_classes, 1, static_cast<double>(H), rng);
    return p;
  }

  /// Window of step i: [start, end] clipped at the sequence edges.
  std::pair<int, int> window(int i, int steps) const {
    const int half = cfg_.window_size / 2;
    return {std::max(0, i - half), std::min(steps - 1, i + half)};
  }

  struct Cache {
    nn::Mlp2::Cache m, t;
    nn::RecurrentLayer::Cache rnn;
    Mat h;                       // H x steps, read-out states
    Mat logits;                  // classes x steps
    std::vector<std::vector<int>> gather;  // per recurrent step, source latent column per window (-1 inactive)
    int K = 0;
  };

  /// Logits (classes x (2K-1)) for a standardized feature matrix (F x K).
  Mat forward_logits(const nn::ParameterSet& params, const Mat& features, Cache* cache = nullptr) const {
    const auto K = static_cast<int>(features.cols());
    require(K >= 1, ErrorKind::ValidationError, "need at least one primitive");
    require(features.rows() == cfg_.feature_dim, ErrorKind::ShapeMismatch, "feature dimension mismatch");
    const int N = 2 * K - 1;
    const Eigen::Index H = cfg_.hidden_dim;

    nn::Mlp2::Cache mc, tc;
    const Mat m = mmlp_.forward(params, features, cache ? &mc : nullptr);
    Mat latents(H, N);
    for (int k = 0; k < K; ++k) latents.col(2 * k) = m.col(k);
    if (K > 1) {
      Mat pairs(2 * features.rows(), K - 1);
      pairs.topRows(features.rows()) = features.leftCols(K - 1);
      pairs.bottomRows(features.rows()) = features.rightCols(K - 1);
      const Mat t = tmlp_.forward(params, pairs, cache ? &tc : nullptr);
      for (int k = 0; k + 1 < K; ++k) latents.col(2 * k + 1) = t.col(k);
    }

    // Windows are left-padded to a common length and read out at their last element.
    int steps = 0;
    for (int i = 0; i < N; ++i) {
      const auto [s, e] = window(i, N);
      steps = std::max(steps, e - s + 1);
    }
    nn::RecurrentInput input;
    std::vector<std::vector<int>> gather(steps, std::vector<int>(N, -1));
    for (int r = 0; r < steps; ++r) {
      Mat x = Mat::Zero(H, N);
      std::vector<char> act(N, 0);
      for (int i = 0; i < N; ++i) {
        const auto [s, e] = window(i, N);
        const int offset = steps - (e - s + 1);
        if (r < offset) continue;
        const int src = s + r - offset;
        x.col(i) = latents.col(src);
        act[i] = 1;
        gather[r][i] = src;
      }
      input.steps.push_back(std::move(x));
      input.active.push_back(std::move(act));
    }
    nn::RecurrentLayer::Cache rc;
    Mat h = rnn_.forward(params, input, N, cache ? &rc : nullptr);
    Mat logits = params.at("head.w") * h;
    logits.colwise() += params.at("head.b").col(0);
    if (cache != nullptr) {
      cache->m = std::move(mc);
      cache->t = std::move(tc);
      cache->rnn = std::move(rc);
      cache->h = h;
      cache->logits = logits;
      cache->gather = std::move(gather);
      cache->K = K;
    }
    return logits;
  }

  /// Backpropagates d(logits) into parameter gradients.
  void backward(const nn::ParameterSet& params, const Cache& cache, const Mat& d_logits,
                nn::ParameterSet& grads) const {
    const int K = cache.K;
    const int N = 2 * K - 1;
    const Eigen::Index H = cfg_.hidden_dim;
    grads["head.w"] += d_logits * cache.h.transpose();
    grads["head.b"] += d_logits.rowwise().sum();
    const Mat dh = params.at("head.w").transpose() * d_logits;
    const auto dxs = rnn_.backward(params, cache.rnn, dh, grads);
    Mat d_latents = Mat::Zero(H, N);
    for (std::size_t r = 0; r < dxs.size(); ++r)
      for (int i = 0; i < N; ++i)
        if (cache.gather[r][i] >= 0) d_latents.col(cache.gather[r][i]) += dxs[r].col(i);
    Mat dm(H, K);
    for (int k = 0; k < K; ++k) dm.col(k) = d_latents.col(2 * k);
    mmlp_.backward(params, cache.m, dm, grads);
    if (K > 1) {
      Mat dt(H, K - 1);
      for (int k = 0; k + 1 < K; ++k) dt.col(k) = d_latents.col(2 * k + 1);
      tmlp_.backward(params, cache.t, dt, grads);
    }
  }

  PosteriorSequence forward(const nn::ParameterSet& params, const Mat& features) const {
    PosteriorSequence post;
    post.probs = nn::softmax_columns(forward_logits(params, features)).transpose();
    post.blank = cfg_.num_classes - 1;
    return post;
  }

 private:
  ModelConfig cfg_;
  nn::Mlp2 mmlp_;
  nn::Mlp2 tmlp_;
  nn::RecurrentLayer rnn_;
};

// ---------------------------------------------------------------------------
// Weak supervision

/// Training targets for one sequence. -1 marks masked (unsupervised) steps.
struct PseudoTargets {
  LabelSequence label_sequence;
  std::vector<int> primitive_targets;   // size K
  std::vector<int> transition_targets;  // size K - 1
  int repetitions = 0;                  // n, summed over merged annotations
};

inline long round_half_up(double v) { return static_cast<long>(std::floor(v + 0.5)); }

/// Pseudo-targets for one weak annotation over a primitive segmentation.
inline PseudoTargets make_pseudo_targets(const WeakAnnotation& ann, const PrimitiveSequence& prims,
                                         const ConceptVocabulary& vocab) {
  validate(ann, &vocab);
  validate(prims);
  const int label = vocab.index_of(ann.label);
  const int blank = vocab.blank_index();
  const auto K = prims.size();
  const FrameRange span{prims.primitives.front().start_frame,
                        prims.primitives.front().start_frame + prims.total_frames()};
  require(span.contains(ann.repetition), ErrorKind::ValidationError,
          "annotation ranges lie outside the primitive frame span");

  double avg_len = 0.0;
  for (const auto& r : ann.instances) avg_len += r.length();
  avg_len /= 3.0;
  if (avg_len < 1.0) fail(ErrorKind::DegenerateAnnotation, "average instance length below one frame");
  const int n = static_cast<int>(std::max<long>(1, round_half_up(ann.repetition.length() / avg_len)));

  PseudoTargets out;
  out.repetitions = n;
  out.label_sequence.assign(static_cast<std::size_t>(n), label);
  out.primitive_targets.assign(K, -1);
  out.transition_targets.assign(K > 0 ? K - 1 : 0, -1);

  std::vector<char> inside(K, 0);
  for (std::size_t k = 0; k < K; ++k) {
    const auto& p = prims.primitives[k];
    const double mid = p.start_frame + 0.5 * p.n_frames;
    inside[k] = mid >= ann.repetition.start && mid < ann.repetition.end;
    if (inside[k]) out.primitive_targets[k] = label;
  }

  // Estimated occurrence boundaries, snapped to the nearest primitive boundary (ties to the earlier).
  std::vector<int> snapped;
  if (K > 1) {
    for (int m = 1; m < n; ++m) {
      const double frame = ann.repetition.start + m * avg_len;
      std::size_t best = 1;
      double best_dist = std::abs(prims.primitives[1].start_frame - frame);
      for (std::size_t k = 2; k < K; ++k) {
        const double d = std::abs(prims.primitives[k].start_frame - frame);
        if (d < best_dist) {
          best_dist = d;
          best = k;
        }
      }
      snapped.push_back(static_cast<int>(best));
    }
  }
  for (std::size_t k = 0; k + 1 < K; ++k) {
    if (!inside[k] || !inside[k + 1]) continue;
    const bool boundary = std::find(snapped.begin(), snapped.end(), static_cast<int>(k + 1)) != snapped.end();
    out.transition_targets[k] = boundary ? blank : label;
  }
  return out;
}

/// Merges the pseudo-targets of all annotations of one sequence (ordered by repetition start).
inline PseudoTargets make_sequence_targets(std::vector<WeakAnnotation> anns, const PrimitiveSequence& prims,
                                           const ConceptVocabulary& vocab) {
  std::sort(anns.begin(), anns.end(),
            [](const auto& a, const auto& b) { return a.repetition.start < b.repetition.start; });
  PseudoTargets out;
  out.primitive_targets.assign(prims.size(), -1);
  out.transition_targets.assign(prims.size() > 0 ? prims.size() - 1 : 0, -1);
  for (const auto& a : anns) {
    const auto t = make_pseudo_targets(a, prims, vocab);
    out.label_sequence.insert(out.label_sequence.end(), t.label_sequence.begin(), t.label_sequence.end());
    out.repetitions += t.repetitions;
    for (std::size_t k = 0; k < t.primitive_targets.size(); ++k)
      if (t.primitive_targets[k] >= 0) out.primitive_targets[k] = t.primitive_targets[k];
    for (std::size_t k = 0; k < t.transition_targets.size(); ++k)
      if (t.transition_targets[k] >= 0) out.transition_targets[k] = t.transition_targets[k];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Loss

struct LossBreakdown {
  double ctc = 0.0;
  double primitive = 0.0;
  double transition = 0.0;
  double lambda1 = 1.0;
  double lambda2 = 1.0;
  double total = 0.0;
};

struct LossWithGrad {
  LossBreakdown loss;
  Mat d_logits;  // classes x steps
};

/// Loss on log-probabilities (classes x steps); optionally the gradient w.r.t. the logits behind them.
inline LossWithGrad loss_from_log_probs(const Mat& log_probs, const PseudoTargets& targets, int blank,
                                        double lambda1, double lambda2, bool want_grad) {
  const Eigen::Index N = log_probs.cols();
  const auto K = static_cast<Eigen::Index>(targets.primitive_targets.size());
  require(N == 2 * K - 1, ErrorKind::ShapeMismatch, "posterior length does not match 2K-1");
  LossWithGrad out;
  out.loss.lambda1 = lambda1;
  out.loss.lambda2 = lambda2;
  const auto ctc = ctc_forward_backward(log_probs.transpose(), targets.label_sequence, blank, want_grad);
  out.loss.ctc = -ctc.log_prob;
  Mat probs;
  if (want_grad) {
    probs = log_probs.array().exp().matrix();
    out.d_logits = std::isfinite(ctc.log_prob) ? Mat(probs - ctc.occupancy.transpose())
                                                 : Mat(Mat::Zero(log_probs.rows(), N));
  }
  auto step_term = [&](Eigen::Index step, int target, double weight, double& acc) {
    acc -= log_probs(target, step);
    if (want_grad && weight != 0.0) {
      out.d_logits.col(step) += weight * probs.col(step);
      out.d_logits(target, step) -= weight;
    }
  };
  for (Eigen::Index k = 0; k < K; ++k)
    if (targets.primitive_targets[k] >= 0) step_term(2 * k, targets.primitive_targets[k], lambda1, out.loss.primitive);
  for (Eigen::Index k = 0; k + 1 < K; ++k)
    if (targets.transition_targets[k] >= 0)
      step_term(2 * k + 1, targets.transition_targets[k], lambda2, out.loss.transition);
  out.loss.total = out.loss.ctc + lambda1 * out.loss.primitive + lambda2 * out.loss.transition;
  return out;
}

/// Loss of a posterior against pseudo-targets.
inline LossBreakdown loss(const PosteriorSequence& post, const PseudoTargets& targets, double lambda1,
                          double lambda2) {
  const Mat log_probs = post.probs.array().log().matrix().transpose();
  return loss_from_log_probs(log_probs, targets, post.blank, lambda1, lambda2, false).loss;
}

struct TrainingExample {
  Mat features;  // standardized, F x K
  PseudoTargets targets;
};

struct BatchGradient {
  LossBreakdown loss;  // mean over the batch
  nn::ParameterSet grads;
};

/// Exact gradient of the mean batch loss.
inline BatchGradient grad(const Recognizer& model, const nn::ParameterSet& params,
                          const std::vector<const TrainingExample*>& batch, double lambda1, double lambda2) {
  require(!batch.empty(), ErrorKind::EmptyDataset, "empty batch");
  BatchGradient out;
  out.grads = params.zeros_like();
  out.loss.lambda1 = lambda1;
  out.loss.lambda2 = lambda2;
  const double scale = 1.0 / static_cast<double>(batch.size());
  for (const auto* ex : batch) {
    Recognizer::Cache cache;
    const Mat logits = model.forward_logits(params, ex->features, &cache);
    const Mat log_probs = nn::log_softmax_columns(logits);
    auto lg = loss_from_log_probs(log_probs, ex->targets, model.config().num_classes - 1, lambda1, lambda2, true);
    if (!std::isfinite(lg.loss.total)) fail(ErrorKind::NonFiniteLoss, "loss is not finite");
    model.backward(params, cache, scale * lg.d_logits, out.grads);
    out.loss.ctc += scale * lg.loss.ctc;
    out.loss.primitive += scale * lg.loss.primitive;
    out.loss.transition += scale * lg.loss.transition;
    out.loss.total += scale * lg.loss.total;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Trained model bundle

struct TrainedModel {
  ConceptVocabulary vocabulary;
  ModelConfig model_config;
  SegmentationConfig segmentation;
  FeatureStats stats;
  nn::ParameterSet params;

  Recognizer recognizer() const { return Recognizer(model_config); }
};

struct TrainingConfig {
  int epochs = 60;
  int warmup_epochs = -1;  // -1: half of epochs
  nn::AdamConfig adam;
  std::uint64_t seed = 0;
  double max_grad_norm = 0.0;  // 0 = no clipping
};

struct EpochRecord {
  int epoch = 0;
  LossBreakdown loss;
  std::optional<double> validation_seq_acc;
};

struct AnnotatedSequence {
  PrimitiveSequence primitives;
  std::vector<WeakAnnotation> annotations;
};

struct TrainingHistory {
  std::vector<EpochRecord> epochs;
};

/// Optional per-epoch validation hook returning SeqAcc in percent.
using ValidationHook = std::function<double(const TrainedModel&)>;

inline TrainedModel init_model(const ConceptVocabulary& vocab, const std::vector<AnnotatedSequence>& data,
                               ModelConfig mcfg, const SegmentationConfig& seg) {
  std::vector<const PrimitiveSequence*> seqs;
  for (const auto& d : data) seqs.push_back(&d.primitives);
  TrainedModel m;
  m.vocabulary = vocab;
  m.segmentation = seg;
  m.stats = compute_feature_stats(seqs);
  mcfg.feature_dim = static_cast<int>(m.stats.mean.size());
  mcfg.num_classes = vocab.num_classes();
  m.model_config = mcfg;
  m.params = Recognizer(mcfg).init_params();
  return m;
}

/// Minimizes L = L_CTC + l1 L_P + l2 L_T with l1 = l2 = 1 during warmup and 0 afterwards.
inline TrainedModel train(const ConceptVocabulary& vocab, const std::vector<AnnotatedSequence>& data,
                          const ModelConfig& mcfg, const SegmentationConfig& seg, const TrainingConfig& tcfg,
                          TrainingHistory* history = nullptr, const ValidationHook& validate_hook = {}) {
  require(!data.empty(), ErrorKind::EmptyDataset, "empty training set");
  validate(vocab);
  std::vector<int> support(vocab.labels.size(), 0);
  for (const auto& d : data)
    for (const auto& a : d.annotations) ++support[vocab.index_of(a.label)];
  for (std::size_t c = 0; c < support.size(); ++c) {
    require(support[c] > 0, ErrorKind::EmptyDataset, "concept '" + vocab.labels[c] + "' has no annotation");
  }

  TrainedModel model = init_model(vocab, data, mcfg, seg);
  const Recognizer net = model.recognizer();
  std::vector<TrainingExample> examples;
  for (const auto& d : data) {
    if (d.annotations.empty()) continue;
    TrainingExample ex;
    ex.features = featurize_sequence(d.primitives, model.stats);
    ex.targets = make_sequence_targets(d.annotations, d.primitives, vocab);
    if (min_alignment_steps(ex.targets.label_sequence) > 2 * d.primitives.size() - 1) {
      fail(ErrorKind::TargetTooLong, "pseudo label sequence of '" + d.primitives.source_id +
                                         "' does not fit its primitive count");
    }
    examples.push_back(std::move(ex));
  }

  const int warmup = tcfg.warmup_epochs >= 0 ? tcfg.warmup_epochs : tcfg.epochs / 2;
  nn::Adam adam(model.params, tcfg.adam);
  Rng rng(tcfg.seed);
  std::vector<std::size_t> order(examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < tcfg.epochs; ++epoch) {
    const double lam = epoch < warmup ? 1.0 : 0.0;
    rng.shuffle(std::span<std::size_t>(order));
    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss.lambda1 = rec.loss.lambda2 = lam;
    for (const auto idx : order) {
      auto g = grad(net, model.params, {&examples[idx]}, lam, lam);
      if (tcfg.max_grad_norm > 0.0) {
        const double norm = g.grads.flatten().norm();
        if (norm > tcfg.max_grad_norm) {
          for (auto& [_, t] : g.grads.tensors()) t *= tcfg.max_grad_norm / norm;
        }
      }
      adam.step(model.params, g.grads);
      const double w = 1.0 / static_cast<double>(examples.size());
      rec.loss.ctc += w * g.loss.ctc;
      rec.loss.primitive += w * g.loss.primitive;
      rec.loss.transition += w * g.loss.transition;
      rec.loss.total += w * g.loss.total;
    }
    if (!std::isfinite(rec.loss.total) || !model.params.all_finite()) {
      fail(ErrorKind::DivergedLoss, "training diverged at epoch " + std::to_string(epoch));
    }
    if (validate_hook) rec.validation_seq_acc = validate_hook(model);
    if (history != nullptr) history->epochs.push_back(rec);
  }
  return model;
}

// ---------------------------------------------------------------------------
// Inference

struct DescribeConfig {
  int beam_width = 16;
};

struct DescriptionResult {
  Description description;
  PrimitiveSequence primitives;
  PosteriorSequence posterior;
  LabelSequence alignment;
  std::vector<AlignedOccurrence> occurrences;
};

inline PosteriorSequence posterior_of(const TrainedModel& model, const PrimitiveSequence& prims) {
  return model.recognizer().forward(model.params, featurize_sequence(prims, model.stats));
}

/// Decode + align an already segmented sequence.
inline DescriptionResult describe_primitives(const PrimitiveSequence& prims, const TrainedModel& model,
                                             const DescribeConfig& cfg = {}) {
  DescriptionResult out;
  out.primitives = prims;
  out.posterior = posterior_of(model, prims);
  const auto decoded = decode(out.posterior, cfg.beam_width);
  out.alignment = viterbi_align(out.posterior, decoded.labels);
  out.occurrences = occurrences_of(out.alignment, out.posterior.blank);
  for (const auto& occ : out.occurrences) {
    out.description.labels.push_back(model.vocabulary.labels[occ.label]);
    FrameRange r;
    if (!occ.primitives.empty()) {
      r.start = prims.primitives[occ.primitives.front()].start_frame;
      const auto& last = prims.primitives[occ.primitives.back()];
      r.end = last.start_frame + last.n_frames;
    } else {
      // Transition-only occurrence: empty interval at the boundary it sits on.
      const int k = occ.steps.front() / 2 + 1;
      r.start = r.end = prims.primitives[k].start_frame;
    }
    out.description.intervals.push_back(r);
    double log_sum = 0.0;
    for (int s : occ.steps) log_sum += std::log(out.posterior.probs(s, occ.label));
    out.description.scores.push_back(std::exp(log_sum / static_cast<double>(occ.steps.size())));
  }
  return out;
}

/// segment -> forward -> decode -> align.
inline DescriptionResult describe(const PoseSequence& seq, const TrainedModel& model,
                                  const DescribeConfig& cfg = {}) {
  return describe_primitives(segment_primitives(seq, model.segmentation), model, cfg);
}

}  // namespace pmc
