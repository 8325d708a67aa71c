#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pmc/error.hpp"
#include "pmc/generator.hpp"
#include "pmc/metrics.hpp"
#include "pmc/nn.hpp"
#include "pmc/random.hpp"
#include "pmc/types.hpp"

namespace pmc {

/// Root-aligned (first-frame joint 0 at the origin), scale-normalized frames as a (2J x T) matrix.
inline Mat normalized_frames(const PoseSequence& clip) {
  require(clip.num_frames() >= 1, ErrorKind::EmptyInput, "empty clip");
  const auto J = clip.num_joints();
  const Point2 root = clip.at(0, 0);
  double scale = 0.0;
  for (std::size_t j = 0; j < J; ++j) scale = std::max(scale, distance(clip.at(0, j), root));
  if (scale < 1e-6) scale = 1.0;
  Mat out(static_cast<Eigen::Index>(2 * J), static_cast<Eigen::Index>(clip.num_frames()));
  for (std::size_t t = 0; t < clip.num_frames(); ++t)
    for (std::size_t j = 0; j < J; ++j) {
      out(static_cast<Eigen::Index>(2 * j), static_cast<Eigen::Index>(t)) = (clip.x(t, j) - root.x) / scale;
      out(static_cast<Eigen::Index>(2 * j + 1), static_cast<Eigen::Index>(t)) = (clip.y(t, j) - root.y) / scale;
    }
  return out;
}

struct ClassifierConfig {
  int hidden_dim = 32;
  int epochs = 40;
  int batch_size = 16;
  double learning_rate = 3e-3;
  std::uint64_t seed = 0;
};

/// Recurrent action classifier. The final hidden state is both the classification input
/// and the feature vector used by the generative metrics.
class ActionClassifier {
 public:
  ActionClassifier() = default;
  ActionClassifier(int input_dim, int num_classes, const ClassifierConfig& cfg)
      : cfg_(cfg), input_dim_(input_dim), num_classes_(num_classes), rnn_("cls.rnn", nn::CellKind::Gru) {
    Rng rng(cfg.seed);
    rnn_.init(params_, input_dim, cfg.hidden_dim, rng);
    params_["cls.head.w"] = nn::uniform_init(num_classes, cfg.hidden_dim, cfg.hidden_dim, rng);
    params_["cls.head.b"] = nn::uniform_init(num_classes, 1, cfg.hidden_dim, rng);
  }

  int hidden_dim() const { return cfg_.hidden_dim; }
  int num_classes() const { return num_classes_; }
  const nn::ParameterSet& params() const { return params_; }

  /// Final hidden states (H x N) for a batch of normalized clips of any lengths.
  Mat features(const std::vector<const Mat*>& clips, nn::RecurrentLayer::Cache* cache = nullptr) const {
    return rnn_.forward(params_, batch_input(clips), static_cast<Eigen::Index>(clips.size()), cache);
  }

  Mat features(const std::vector<PoseSequence>& clips) const {
    std::vector<Mat> frames;
    for (const auto& c : clips) frames.push_back(normalized_frames(c));
    std::vector<const Mat*> ptrs;
    for (const auto& f : frames) ptrs.push_back(&f);
    Mat out(cfg_.hidden_dim, static_cast<Eigen::Index>(clips.size()));
    constexpr std::size_t chunk = 256;
    for (std::size_t s = 0; s < ptrs.size(); s += chunk) {
      const std::size_t e = std::min(ptrs.size(), s + chunk);
      out.middleCols(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(e - s)) =
          features(std::vector<const Mat*>(ptrs.begin() + s, ptrs.begin() + e));
    }
    return out;
  }

  Mat logits_from_features(const Mat& h) const {
    Mat z = params_.at("cls.head.w") * h;
    z.colwise() += params_.at("cls.head.b").col(0);
    return z;
  }

  std::vector<int> classify_features(const Mat& h) const {
    const Mat z = logits_from_features(h);
    std::vector<int> out;
    for (Eigen::Index c = 0; c < z.cols(); ++c) {
      Eigen::Index best = 0;
      z.col(c).maxCoeff(&best);
      out.push_back(static_cast<int>(best));
    }
    return out;
  }

  std::vector<int> classify(const std::vector<PoseSequence>& clips) const { return classify_features(features(clips)); }

  /// Mean softmax cross-entropy of a batch and its parameter gradient.
  double loss_and_grad(const std::vector<const Mat*>& clips, const std::vector<int>& labels,
                       nn::ParameterSet* grads) const {
    nn::RecurrentLayer::Cache cache;
    const Mat h = features(clips, grads ? &cache : nullptr);
    const Mat logp = nn::log_softmax_columns(logits_from_features(h));
    const double n = static_cast<double>(clips.size());
    double loss = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) loss -= logp(labels[i], static_cast<Eigen::Index>(i));
    if (grads != nullptr) {
      Mat dz = logp.array().exp().matrix();
      for (std::size_t i = 0; i < labels.size(); ++i) dz(labels[i], static_cast<Eigen::Index>(i)) -= 1.0;
      dz /= n;
      (*grads)["cls.head.w"] += dz * h.transpose();
      (*grads)["cls.head.b"] += dz.rowwise().sum();
      rnn_.backward(params_, cache, params_.at("cls.head.w").transpose() * dz, *grads);
    }
    return loss / n;
  }

  /// Mini-batch Adam on normalized clips.
  void fit(const std::vector<PoseSequence>& clips, const std::vector<int>& labels) {
    require(!clips.empty() && clips.size() == labels.size(), ErrorKind::EmptyDataset,
            "classifier needs labelled clips");
    std::vector<int> support(num_classes_, 0);
    for (int l : labels) {
      require(l >= 0 && l < num_classes_, ErrorKind::ValidationError, "classifier label out of range");
      ++support[l];
    }
    for (int s : support) require(s > 0, ErrorKind::EmptyDataset, "classifier class without examples");
    std::vector<Mat> frames;
    for (const auto& c : clips) frames.push_back(normalized_frames(c));
    nn::Adam adam(params_, {cfg_.learning_rate});
    Rng rng = Rng::stream(cfg_.seed, 1);
    std::vector<std::size_t> order(clips.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (int epoch = 0; epoch < cfg_.epochs; ++epoch) {
      rng.shuffle(std::span<std::size_t>(order));
      for (std::size_t s = 0; s < order.size(); s += static_cast<std::size_t>(cfg_.batch_size)) {
        const std::size_t e = std::min(order.size(), s + static_cast<std::size_t>(cfg_.batch_size));
        std::vector<const Mat*> batch;
        std::vector<int> y;
        for (std::size_t i = s; i < e; ++i) {
          batch.push_back(&frames[order[i]]);
          y.push_back(labels[order[i]]);
        }
        auto grads = params_.zeros_like();
        loss_and_grad(batch, y, &grads);
        adam.step(params_, grads);
      }
    }
  }

  nn::ParameterSet& mutable_params() { return params_; }

 private:
  // Left-pads every clip to the longest one; padded steps are inactive.
  nn::RecurrentInput batch_input(const std::vector<const Mat*>& clips) const {
    Eigen::Index steps = 0;
    for (const auto* c : clips) {
      require(c->rows() == input_dim_, ErrorKind::ShapeMismatch, "clip joint count differs from classifier");
      steps = std::max(steps, c->cols());
    }
    const auto N = static_cast<Eigen::Index>(clips.size());
    nn::RecurrentInput in;
    for (Eigen::Index r = 0; r < steps; ++r) {
      Mat x = Mat::Zero(input_dim_, N);
      std::vector<char> act(static_cast<std::size_t>(N), 0);
      for (Eigen::Index n = 0; n < N; ++n) {
        const Eigen::Index offset = steps - clips[n]->cols();
        if (r < offset) continue;
        x.col(n) = clips[n]->col(r - offset);
        act[n] = 1;
      }
      in.steps.push_back(std::move(x));
      in.active.push_back(std::move(act));
    }
    return in;
  }

  ClassifierConfig cfg_;
  int input_dim_ = 0;
  int num_classes_ = 0;
  nn::RecurrentLayer rnn_;
  nn::ParameterSet params_;
};

inline ActionClassifier train_action_classifier(const std::vector<PoseSequence>& clips, const std::vector<int>& labels,
                                                int num_classes, const ClassifierConfig& cfg = {}) {
  require(num_classes >= 2, ErrorKind::EmptyDataset, "classifier needs at least two classes");
  require(!clips.empty(), ErrorKind::EmptyDataset, "classifier needs clips");
  ActionClassifier c(static_cast<int>(2 * clips.front().num_joints()), num_classes, cfg);
  c.fit(clips, labels);
  return c;
}

// ---------------------------------------------------------------------------
// Generative metrics

struct GenMetricsConfig {
  int runs = 20;
  int samples = 1000;
  int div_pairs = 200;
  int mm_pairs = 20;
  std::uint64_t seed = 0;
};

struct GenRun {
  double fid = 0.0;           // pooled generated vs real
  double class_fid = 0.0;     // mean over classes of FID(generated c, real c)
  double shuffled_fid = 0.0;  // same, with generated classes deranged against real classes
  double acc = 0.0;           // percent
  double div = 0.0;
  double mm = 0.0;
};

struct GenMetrics {
  GenRun mean;
  std::vector<GenRun> runs;
};

inline json to_json(const GenRun& r) {
  return {{"fid", r.fid}, {"class_fid", r.class_fid}, {"shuffled_fid", r.shuffled_fid},
          {"acc", r.acc}, {"div", r.div},             {"mm", r.mm}};
}

/// Single repetition sampled from a concept model, stitched and executed.
inline PoseSequence sample_clip(const ConceptModel& model, const PoseSequence& meta, Rng& rng) {
  return execute_primitives(stitch({sample_concept(model, rng)}), meta);
}

/// Acc / FID / Div / MM of class-balanced samples from `models` against real clips;
/// class c of the classifier is vocab.labels[c]. Real clips are drawn with replacement.
inline GenMetrics gen_metrics(const ConceptModels& models, const ConceptVocabulary& vocab,
                              const std::vector<PoseSequence>& real_clips, const std::vector<int>& real_labels,
                              const ActionClassifier& classifier, const PoseSequence& meta,
                              const GenMetricsConfig& cfg = {}) {
  const int C = static_cast<int>(vocab.labels.size());
  require(C >= 2, ErrorKind::EmptyDataset, "generative metrics need at least two classes");
  for (const auto& l : vocab.labels) model_for(models, l);
  std::vector<std::vector<Eigen::Index>> real_by_class(C);
  for (std::size_t i = 0; i < real_labels.size(); ++i) real_by_class[real_labels[i]].push_back(static_cast<Eigen::Index>(i));
  for (const auto& r : real_by_class) require(!r.empty(), ErrorKind::EmptyDataset, "class without real clips");
  const Mat real_features = classifier.features(real_clips);

  auto class_fid = [&](const Mat& gen, const std::vector<int>& gen_labels, const Mat& real,
                       const std::vector<int>& labels, int shift) {
    double total = 0.0;
    for (int c = 0; c < C; ++c) {
      const int g = (c + shift) % C;
      std::vector<Eigen::Index> gi, ri;
      for (std::size_t i = 0; i < gen_labels.size(); ++i)
        if (gen_labels[i] == g) gi.push_back(static_cast<Eigen::Index>(i));
      for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] == c) ri.push_back(static_cast<Eigen::Index>(i));
      total += fid(gen(gi, Eigen::all), real(ri, Eigen::all));
    }
    return total / C;
  };

  GenMetrics out;
  for (int run = 0; run < cfg.runs; ++run) {
    std::vector<PoseSequence> clips;
    std::vector<int> gen_labels;
    std::vector<int> real_pick_labels;
    std::vector<Eigen::Index> real_pick;
    Rng pick = Rng::stream(cfg.seed, 2 * static_cast<std::uint64_t>(run) + 1);
    for (int i = 0; i < cfg.samples; ++i) {
      const int c = i % C;
      Rng rng = Rng::stream(cfg.seed + 1, static_cast<std::uint64_t>(run) * cfg.samples + i);
      clips.push_back(sample_clip(models.at(vocab.labels[c]), meta, rng));
      gen_labels.push_back(c);
      const auto& pool = real_by_class[c];
      real_pick.push_back(pool[pick.below(pool.size())]);
      real_pick_labels.push_back(c);
    }
    const Mat gen_h = classifier.features(clips);
    const Mat gen = gen_h.transpose();
    const Mat real = real_features(Eigen::all, real_pick).transpose();
    const auto predicted = classifier.classify_features(gen_h);
    GenRun r;
    int correct = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i) correct += predicted[i] == gen_labels[i];
    r.acc = 100.0 * correct / static_cast<double>(predicted.size());
    r.fid = fid(gen, real);
    r.class_fid = class_fid(gen, gen_labels, real, real_pick_labels, 0);
    r.shuffled_fid = class_fid(gen, gen_labels, real, real_pick_labels, 1);
    Rng metric_rng = Rng::stream(cfg.seed, 2 * static_cast<std::uint64_t>(run) + 2);
    r.div = diversity(gen, metric_rng, cfg.div_pairs);
    r.mm = multimodality(gen, gen_labels, metric_rng, cfg.mm_pairs);
    out.runs.push_back(r);
  }
  const double n = static_cast<double>(out.runs.size());
  for (const auto& r : out.runs) {
    out.mean.fid += r.fid / n;
    out.mean.class_fid += r.class_fid / n;
    out.mean.shuffled_fid += r.shuffled_fid / n;
    out.mean.acc += r.acc / n;
    out.mean.div += r.div / n;
    out.mean.mm += r.mm / n;
  }
  return out;
}

}  // namespace pmc
