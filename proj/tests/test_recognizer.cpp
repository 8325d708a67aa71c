#include <gtest/gtest.h>

#include <cmath>

#include "pmc/recognizer.hpp"

using namespace pmc;

namespace {

PrimitiveSequence random_primitives(Rng& rng, const std::vector<int>& lengths, std::size_t joints = 2) {
  PrimitiveSequence seq;
  seq.source_id = "s";
  int start = 0;
  for (int n : lengths) {
    SplinePrimitive p;
    p.start_frame = start;
    p.n_frames = n;
    p.coeffs.resize(joints);
    for (auto& block : p.coeffs)
      for (double& v : block) v = rng.uniform(-20.0, 20.0);
    seq.primitives.push_back(p);
    start += n;
  }
  return seq;
}

PrimitiveSequence uniform_primitives(int count, int length) {
  Rng rng(0);
  return random_primitives(rng, std::vector<int>(count, length));
}

WeakAnnotation annotation(const std::string& label, FrameRange rep, std::array<FrameRange, 3> inst) {
  WeakAnnotation a;
  a.sequence_id = "s";
  a.label = label;
  a.repetition = rep;
  a.instances = inst;
  return a;
}

ModelConfig small_config(int feature_dim, int classes, nn::CellKind kind, int hidden = 8) {
  ModelConfig cfg;
  cfg.feature_dim = feature_dim;
  cfg.hidden_dim = hidden;
  cfg.num_classes = classes;
  cfg.cell_kind = kind;
  cfg.seed = 7;
  return cfg;
}

}  // namespace

TEST(Features, StandardizationMatchesTwoPassStatistics) {
  Rng rng(1);
  const auto a = random_primitives(rng, {5, 7, 9});
  const auto b = random_primitives(rng, {6, 12});
  const auto stats = compute_feature_stats({&a, &b});
  ASSERT_EQ(stats.mean.size(), 17);

  std::vector<std::vector<double>> rows;
  for (const auto* s : {&a, &b})
    for (const auto& p : s->primitives) {
      std::vector<double> r;
      for (const auto& block : p.coeffs) r.insert(r.end(), block.begin(), block.end());
      r.push_back(std::log(static_cast<double>(p.n_frames)));
      rows.push_back(r);
    }
  for (std::size_t d = 0; d < 17; ++d) {
    double mean = 0.0;
    for (const auto& r : rows) mean += r[d];
    mean /= rows.size();
    double var = 0.0;
    for (const auto& r : rows) var += (r[d] - mean) * (r[d] - mean);
    var /= rows.size();
    EXPECT_NEAR(stats.mean[d], mean, 1e-12);
    EXPECT_NEAR(stats.stddev[d], std::sqrt(var), 1e-12);
  }

  Vec sum = Vec::Zero(17);
  Vec sq = Vec::Zero(17);
  for (const auto* s : {&a, &b})
    for (const auto& p : s->primitives) {
      const Vec f = featurize(p, stats);
      sum += f;
      sq += f.cwiseAbs2();
    }
  EXPECT_LT(sum.cwiseAbs().maxCoeff() / 5.0, 1e-12);
  EXPECT_LT((sq / 5.0 - Vec::Ones(17)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Features, ConstantDimensionKeepsUnitScale) {
  const auto seq = uniform_primitives(3, 10);
  const auto stats = compute_feature_stats({&seq});
  EXPECT_EQ(stats.stddev[16], 1.0);
  EXPECT_EQ(featurize(seq.primitives[0], stats)[16], 0.0);
}

TEST(Features, JointCountMismatch) {
  Rng rng(2);
  const auto two = random_primitives(rng, {5}, 2);
  const auto three = random_primitives(rng, {5}, 3);
  const auto stats = compute_feature_stats({&two});
  try {
    featurize(three.primitives[0], stats);
    FAIL() << "expected ShapeMismatch";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ShapeMismatch);
  }
}

TEST(Forward, StepCountAndNormalization) {
  for (auto kind : {nn::CellKind::Gru, nn::CellKind::Lstm}) {
    const Recognizer net(small_config(17, 3, kind));
    const auto params = net.init_params();
    Rng rng(3);
    const auto one = net.forward(params, Mat::Random(17, 1));
    EXPECT_EQ(one.steps(), 1);
    const auto five = net.forward(params, Mat::Random(17, 5));
    EXPECT_EQ(five.steps(), 9);
    EXPECT_EQ(five.classes(), 3);
    EXPECT_EQ(five.blank, 2);
    for (Eigen::Index t = 0; t < five.steps(); ++t) EXPECT_NEAR(five.probs.row(t).sum(), 1.0, 1e-12);
  }
}

TEST(Forward, OutputDependsOnlyOnTheWindow) {
  const Recognizer net(small_config(17, 3, nn::CellKind::Gru));
  const auto params = net.init_params();
  Mat x = Mat::Random(17, 15);
  const auto base = net.forward(params, x);
  x.col(0).array() += 3.0;
  const auto moved = net.forward(params, x);
  // Primitive 0 feeds steps 0 and 1; a window of 13 reaches 6 steps further.
  for (Eigen::Index t = 0; t < base.steps(); ++t) {
    if (t > 7) {
      EXPECT_EQ(base.probs.row(t), moved.probs.row(t)) << "step " << t;
    } else {
      EXPECT_NE(base.probs.row(t), moved.probs.row(t)) << "step " << t;
    }
  }
}

TEST(PseudoTargets, BoundariesSnapToPrimitiveStarts) {
  const ConceptVocabulary vocab{{"jj", "squat"}};
  const auto prims = uniform_primitives(12, 10);
  const auto t = make_pseudo_targets(annotation("squat", {0, 120}, {{{0, 30}, {30, 60}, {90, 120}}}), prims, vocab);
  EXPECT_EQ(t.repetitions, 4);
  EXPECT_EQ(t.label_sequence, (LabelSequence{1, 1, 1, 1}));
  EXPECT_EQ(t.primitive_targets, std::vector<int>(12, 1));
  // Boundaries at frames 30, 60, 90 sit at primitives 3, 6, 9.
  const std::vector<int> expected = {1, 1, 2, 1, 1, 2, 1, 1, 2, 1, 1};
  EXPECT_EQ(t.transition_targets, expected);
}

TEST(PseudoTargets, RoundsHalfUpAndMasksOutsideSteps) {
  const ConceptVocabulary vocab{{"jj"}};
  const auto prims = uniform_primitives(12, 10);
  // 70 / 20 = 3.5 -> 4 repetitions; boundaries at 30, 50 and 70.
  const auto t = make_pseudo_targets(annotation("jj", {10, 80}, {{{10, 30}, {30, 50}, {60, 80}}}), prims, vocab);
  EXPECT_EQ(t.repetitions, 4);
  // Midpoints 15..75 fall inside [10, 80) for primitives 1..7.
  const std::vector<int> prim = {-1, 0, 0, 0, 0, 0, 0, 0, -1, -1, -1, -1};
  EXPECT_EQ(t.primitive_targets, prim);
  const std::vector<int> trans = {-1, 0, 1, 0, 1, 0, 1, -1, -1, -1, -1};
  EXPECT_EQ(t.transition_targets, trans);
}

TEST(PseudoTargets, TiesSnapToTheEarlierBoundary) {
  const ConceptVocabulary vocab{{"jj"}};
  const auto prims = uniform_primitives(6, 10);
  // avg 10 from rep start 5: boundaries at 15, 25, 35, 45 lie halfway between starts.
  const auto t = make_pseudo_targets(annotation("jj", {5, 55}, {{{5, 15}, {15, 25}, {45, 55}}}), prims, vocab);
  EXPECT_EQ(t.repetitions, 5);
  const std::vector<int> trans = {1, 1, 1, 1, -1};
  EXPECT_EQ(t.transition_targets, trans);
  const auto r = make_pseudo_targets(annotation("jj", {0, 60}, {{{0, 20}, {20, 40}, {40, 60}}}), prims, vocab);
  EXPECT_EQ(r.repetitions, 3);
  EXPECT_EQ(r.transition_targets, (std::vector<int>{0, 1, 0, 1, 0}));
}

TEST(PseudoTargets, RejectsUnknownConceptAndOutOfSpanRanges) {
  const ConceptVocabulary vocab{{"jj"}};
  const auto prims = uniform_primitives(3, 10);
  EXPECT_THROW(make_pseudo_targets(annotation("squat", {0, 30}, {{{0, 10}, {10, 20}, {20, 30}}}), prims, vocab),
               Error);
  EXPECT_THROW(make_pseudo_targets(annotation("jj", {0, 40}, {{{0, 10}, {10, 20}, {20, 40}}}), prims, vocab),
               Error);
}

TEST(Loss, CtcTermMatchesEnumeration) {
  Rng rng(4);
  PosteriorSequence post;
  post.blank = 2;
  post.probs.resize(5, 3);
  for (int t = 0; t < 5; ++t) {
    for (int c = 0; c < 3; ++c) post.probs(t, c) = 0.1 + rng.uniform();
    post.probs.row(t) /= post.probs.row(t).sum();
  }
  PseudoTargets targets;
  targets.label_sequence = {0, 1};
  targets.primitive_targets = {0, -1, 1};
  targets.transition_targets = {-1, 2};

  double p = 0.0;
  LabelSequence path(5, 0);
  for (int code = 0; code < 243; ++code) {
    int c = code;
    double q = 1.0;
    for (int t = 0; t < 5; ++t) {
      path[t] = c % 3;
      c /= 3;
      q *= post.probs(t, path[t]);
    }
    if (compress(path, 2) == targets.label_sequence) p += q;
  }
  const auto l0 = loss(post, targets, 0.0, 0.0);
  EXPECT_NEAR(l0.ctc, -std::log(p), 1e-12);
  EXPECT_DOUBLE_EQ(l0.total, l0.ctc);

  const auto l1 = loss(post, targets, 1.0, 0.5);
  EXPECT_NEAR(l1.primitive, -std::log(post.probs(0, 0)) - std::log(post.probs(4, 1)), 1e-12);
  EXPECT_NEAR(l1.transition, -std::log(post.probs(3, 2)), 1e-12);
  EXPECT_NEAR(l1.total, l1.ctc + l1.primitive + 0.5 * l1.transition, 1e-12);
}

namespace {

TrainingExample random_example(Rng& rng, int feature_dim, int labels) {
  const int K = 2 + static_cast<int>(rng.below(5));
  TrainingExample ex;
  ex.features.resize(feature_dim, K);
  for (Eigen::Index i = 0; i < ex.features.size(); ++i) ex.features.data()[i] = rng.normal();
  const int n = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(K)));
  for (int i = 0; i < n; ++i) ex.targets.label_sequence.push_back(static_cast<int>(rng.below(labels)));
  while (min_alignment_steps(ex.targets.label_sequence) > static_cast<std::size_t>(2 * K - 1))
    ex.targets.label_sequence.pop_back();
  for (int k = 0; k < K; ++k)
    ex.targets.primitive_targets.push_back(rng.uniform() < 0.3 ? -1 : static_cast<int>(rng.below(labels)));
  for (int k = 0; k + 1 < K; ++k)
    ex.targets.transition_targets.push_back(rng.uniform() < 0.3 ? -1 : static_cast<int>(rng.below(labels + 1)));
  return ex;
}

double batch_loss(const Recognizer& net, const nn::ParameterSet& params,
                  const std::vector<const TrainingExample*>& batch) {
  double total = 0.0;
  for (const auto* ex : batch) {
    const Mat lp = nn::log_softmax_columns(net.forward_logits(params, ex->features));
    total += loss_from_log_probs(lp, ex->targets, net.config().num_classes - 1, 1.0, 1.0, false).loss.total;
  }
  return total / static_cast<double>(batch.size());
}

void check_gradient(nn::CellKind kind) {
  const int F = 6;
  const int labels = 2;
  ModelConfig cfg = small_config(F, labels + 1, kind, 8);
  cfg.window_size = 5;
  const Recognizer net(cfg);
  Rng rng(kind == nn::CellKind::Gru ? 31 : 37);
  for (int b = 0; b < 20; ++b) {
    cfg.seed = static_cast<std::uint64_t>(b);
    const auto params = Recognizer(cfg).init_params();
    std::vector<TrainingExample> examples;
    for (int i = 0; i < 2; ++i) examples.push_back(random_example(rng, F, labels));
    const std::vector<const TrainingExample*> batch = {&examples[0], &examples[1]};
    const auto analytic = grad(net, params, batch, 1.0, 1.0).grads.flatten();
    EXPECT_NEAR(grad(net, params, batch, 1.0, 1.0).loss.total, batch_loss(net, params, batch), 1e-12);

    const Vec theta = params.flatten();
    Vec numeric(theta.size());
    auto probe = params;
    const double h = 1e-6;
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
      Vec t = theta;
      t[i] += h;
      probe.assign_flat(t);
      const double up = batch_loss(net, probe, batch);
      t[i] -= 2 * h;
      probe.assign_flat(t);
      const double down = batch_loss(net, probe, batch);
      numeric[i] = (up - down) / (2 * h);
    }
    const double rel = (numeric - analytic).norm() / std::max(1e-12, numeric.norm() + analytic.norm());
    EXPECT_LT(rel, 1e-4) << "batch " << b;
  }
}

}  // namespace

TEST(Gradient, GruMatchesFiniteDifferences) { check_gradient(nn::CellKind::Gru); }
TEST(Gradient, LstmMatchesFiniteDifferences) { check_gradient(nn::CellKind::Lstm); }

TEST(Gradient, MaskedStepsContributeNothing) {
  Rng rng(41);
  const Recognizer net(small_config(6, 3, nn::CellKind::Gru));
  const auto params = net.init_params();
  auto ex = random_example(rng, 6, 2);
  std::fill(ex.targets.primitive_targets.begin(), ex.targets.primitive_targets.end(), -1);
  std::fill(ex.targets.transition_targets.begin(), ex.targets.transition_targets.end(), -1);
  const auto with = grad(net, params, {&ex}, 1.0, 1.0);
  const auto without = grad(net, params, {&ex}, 0.0, 0.0);
  EXPECT_EQ(with.grads, without.grads);
  EXPECT_EQ(with.loss.total, without.loss.total);
}

namespace {

// Two concepts whose primitives differ in shape; each sequence repeats one concept.
std::vector<AnnotatedSequence> toy_dataset() {
  Rng rng(5);
  std::vector<AnnotatedSequence> data;
  for (int s = 0; s < 6; ++s) {
    const bool second = s % 2 == 1;
    AnnotatedSequence d;
    const int reps = 3 + s / 2;
    int start = 0;
    for (int r = 0; r < reps; ++r) {
      for (int half = 0; half < 2; ++half) {
        SplinePrimitive p;
        p.start_frame = start;
        p.n_frames = 10;
        p.coeffs.resize(2);
        for (auto& block : p.coeffs)
          for (int c = 0; c < 8; ++c) {
            const double sign = (half == 0) == second ? 1.0 : -1.0;
            block[c] = sign * (c + 1) + rng.normal(0.0, 0.3);
          }
        d.primitives.primitives.push_back(p);
        start += 10;
      }
    }
    d.primitives.source_id = "toy" + std::to_string(s);
    d.annotations.push_back(annotation(second ? "b" : "a", {0, start}, {{{0, 20}, {20, 40}, {start - 20, start}}}));
    d.annotations.back().sequence_id = d.primitives.source_id;
    data.push_back(std::move(d));
  }
  return data;
}

}  // namespace

TEST(Training, DeterministicForFixedSeeds) {
  const ConceptVocabulary vocab{{"a", "b"}};
  const auto data = toy_dataset();
  ModelConfig mcfg;
  mcfg.hidden_dim = 8;
  TrainingConfig tcfg;
  tcfg.epochs = 3;
  const auto m1 = train(vocab, data, mcfg, {}, tcfg);
  const auto m2 = train(vocab, data, mcfg, {}, tcfg);
  EXPECT_EQ(m1.params, m2.params);
  tcfg.seed = 1;
  const auto m3 = train(vocab, data, mcfg, {}, tcfg);
  EXPECT_FALSE(m1.params == m3.params);
}

TEST(Training, FitsASmallTrainingSet) {
  const ConceptVocabulary vocab{{"a", "b"}};
  const auto data = toy_dataset();
  ModelConfig mcfg;
  mcfg.hidden_dim = 16;
  TrainingConfig tcfg;
  tcfg.epochs = 300;
  tcfg.adam.learning_rate = 5e-3;
  TrainingHistory history;
  const auto model = train(vocab, data, mcfg, {}, tcfg, &history);
  ASSERT_EQ(history.epochs.size(), 300u);
  EXPECT_LT(history.epochs.back().loss.total, history.epochs.front().loss.total);
  for (const auto& d : data) {
    const auto result = describe_primitives(d.primitives, model);
    const auto targets = make_sequence_targets(d.annotations, d.primitives, vocab);
    std::vector<std::string> expected(static_cast<std::size_t>(targets.repetitions), d.annotations[0].label);
    EXPECT_EQ(result.description.labels, expected) << d.primitives.source_id;
    validate(result.description);
  }
}

TEST(Training, RejectsConceptWithoutAnnotations) {
  const ConceptVocabulary vocab{{"a", "b", "c"}};
  try {
    train(vocab, toy_dataset(), {}, {}, {});
    FAIL() << "expected EmptyDataset";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::EmptyDataset);
  }
  EXPECT_THROW(train(vocab, {}, {}, {}, {}), Error);
}
