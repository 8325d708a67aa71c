#include <cmath>
#include <functional>
#include <limits>

#include <gtest/gtest.h>

#include "pmc/primitives.hpp"
#include "pmc/random.hpp"

namespace pmc {
namespace {

PoseSequence make_sequence(std::size_t T, std::size_t J, const std::function<Point2(std::size_t, std::size_t)>& f) {
  PoseSequence s;
  s.id = "s";
  s.width = 640;
  s.height = 480;
  for (std::size_t j = 0; j < J; ++j) s.joint_names.push_back("j" + std::to_string(j));
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t j = 0; j < J; ++j) {
      const auto p = f(t, j);
      s.coords.push_back(p.x);
      s.coords.push_back(p.y);
    }
  return s;
}

// Independent oracle: normal equations in the same normalized time.
Eigen::Vector4d normal_equations_fit(const std::vector<double>& values) {
  const auto m = static_cast<double>(values.size());
  Eigen::Matrix4d ata = Eigen::Matrix4d::Zero();
  Eigen::Vector4d atb = Eigen::Vector4d::Zero();
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double u = static_cast<double>(i) / m;
    const Eigen::Vector4d row(u * u * u, u * u, u, 1.0);
    ata += row * row.transpose();
    atb += row * values[i];
  }
  return ata.ldlt().solve(atb);
}

double window_cost(const PoseSequence& s, FrameRange r) { return fit_spline(s, r).cost; }

// Exhaustive oracle over all segmentations with parts >= min_len.
void enumerate(const PoseSequence& s, int start, int T, int min_len, double lambda, std::vector<FrameRange>& cur,
               double acc, double& best, std::vector<FrameRange>& best_segs) {
  if (start == T) {
    if (acc < best) {
      best = acc;
      best_segs = cur;
    }
    return;
  }
  for (int end = start + min_len; end <= T; ++end) {
    if (T - end != 0 && T - end < min_len) continue;
    cur.push_back({start, end});
    enumerate(s, end, T, min_len, lambda, cur, acc + window_cost(s, {start, end}) + lambda, best, best_segs);
    cur.pop_back();
  }
}

TEST(FitSpline, ConstantTrajectory) {
  const auto s = make_sequence(10, 1, [](auto, auto) { return Point2{5, 7}; });
  const auto fit = fit_spline(s, {0, 10});
  const auto& c = fit.primitive.coeffs[0];
  const CoeffBlock expected{0, 0, 0, 5, 0, 0, 0, 7};
  for (int i = 0; i < 8; ++i) EXPECT_NEAR(c[i], expected[i], 1e-12);
  EXPECT_NEAR(fit.cost, 0.0, 1e-20);
  const auto out = execute_primitives(PrimitiveSequence{"s", {fit.primitive}}, s);
  for (std::size_t t = 0; t < 10; ++t) {
    EXPECT_NEAR(out.x(t, 0), 5.0, 1e-12);
    EXPECT_NEAR(out.y(t, 0), 7.0, 1e-12);
  }
}

TEST(FitSpline, ExactCubicIsInterpolated) {
  const auto s = make_sequence(10, 1, [](std::size_t t, auto) {
    const double x = static_cast<double>(t);
    return Point2{x * x * x - 2 * x + 1, 4 * x};
  });
  const auto fit = fit_spline(s, {0, 10});
  EXPECT_LT(fit.cost, 1e-9);
  for (int i = 0; i < 10; ++i) {
    const auto p = fit.primitive.eval_frame(0, i);
    EXPECT_LT(distance(p, s.at(i, 0)), 1e-6);
  }
}

TEST(FitSpline, MatchesNormalEquationsOnNoisyLine) {
  Rng rng(1);
  const auto s = make_sequence(25, 2, [&](std::size_t t, std::size_t j) {
    return Point2{3.0 * t + 10.0 * j + rng.normal(0, 2), -1.5 * t + rng.normal(0, 2)};
  });
  const auto fit = fit_spline(s, {0, 25});
  for (std::size_t j = 0; j < 2; ++j) {
    std::vector<double> xs, ys;
    for (std::size_t t = 0; t < 25; ++t) {
      xs.push_back(s.x(t, j));
      ys.push_back(s.y(t, j));
    }
    const auto ox = normal_equations_fit(xs);
    const auto oy = normal_equations_fit(ys);
    for (int p = 0; p < 4; ++p) {
      EXPECT_NEAR(fit.primitive.coeffs[j][p], ox[p], 1e-9 * std::max(1.0, std::abs(ox[p])));
      EXPECT_NEAR(fit.primitive.coeffs[j][4 + p], oy[p], 1e-9 * std::max(1.0, std::abs(oy[p])));
    }
  }
}

TEST(FitSpline, TooShortSegment) {
  const auto s = make_sequence(10, 1, [](auto, auto) { return Point2{}; });
  try {
    fit_spline(s, {0, 4});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::SegmentTooShort);
  }
}

TEST(Segment, SingleCubicIsOnePrimitive) {
  const auto s = make_sequence(40, 2, [](std::size_t t, std::size_t j) {
    const double u = t / 10.0;
    return Point2{u * u * u - u + 50.0 * j, 2.0 * u * u};
  });
  for (double lambda : {1e-3, 1.0, 100.0}) {
    const auto prims = segment_primitives(s, {lambda, 5, 0});
    ASSERT_EQ(prims.size(), 1u) << lambda;
    EXPECT_EQ(prims.primitives[0].range(), (FrameRange{0, 40}));
  }
}

TEST(Segment, TwoCubicsSplitAtTheJunction) {
  auto piece = [](std::size_t t) {
    const double u = t / 10.0;
    if (t < 30) return Point2{u * u * u - 4 * u * u + 100, 5 * u};
    const double v = (t - 30.0) / 10.0;
    return Point2{-3 * v * v * v + 8 * v + 200, 40 - 7 * v * v};
  };
  const auto s = make_sequence(60, 1, [&](std::size_t t, auto) { return piece(t); });
  const double lambda = 1.0;
  const auto result = segment_with_objective(s, {lambda, 5, 0});
  ASSERT_EQ(result.primitives.size(), 2u);
  EXPECT_EQ(result.primitives.primitives[1].start_frame, 30);

  // Brute force over every segmentation with at most 3 segments.
  double best = std::numeric_limits<double>::infinity();
  FrameRange best_a{}, best_b{};
  for (int a = 5; a <= 60; ++a) {
    const double c1 = window_cost(s, {0, a}) + lambda;
    if (a == 60) {
      if (c1 < best) best = c1, best_a = {0, 60}, best_b = {};
      continue;
    }
    for (int b = a + 5; b <= 60; ++b) {
      if (b != 60 && 60 - b < 5) continue;
      double c = c1 + window_cost(s, {a, b}) + lambda;
      if (b != 60) c += window_cost(s, {b, 60}) + lambda;
      if (c < best) best = c, best_a = {0, a}, best_b = {a, b};
    }
  }
  EXPECT_EQ(best_a.end, 30);
  EXPECT_NEAR(result.objective, best, 1e-9);
}

TEST(Segment, HugeLambdaGivesOnePrimitive) {
  Rng rng(2);
  const auto s = make_sequence(60, 3, [&](auto, auto) { return Point2{rng.uniform(0, 500), rng.uniform(0, 500)}; });
  EXPECT_EQ(segment_primitives(s, {1e9, 5, 0}).size(), 1u);
}

TEST(Segment, ErrorsOnShortSequenceAndBadConfig) {
  const auto s = make_sequence(4, 1, [](auto, auto) { return Point2{}; });
  try {
    segment_primitives(s, {1.0, 5, 0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::SequenceTooShort);
  }
  const auto t = make_sequence(20, 1, [](auto, auto) { return Point2{}; });
  EXPECT_THROW(segment_primitives(t, {-1.0, 5, 0}), Error);
  EXPECT_THROW(segment_primitives(t, {1.0, 4, 0}), Error);
}

TEST(Segment, MaxSegmentCapIsHonored) {
  const auto s = make_sequence(50, 1, [](std::size_t t, auto) { return Point2{double(t), 0}; });
  const auto prims = segment_primitives(s, {1.0, 5, 12});
  for (const auto& p : prims.primitives) EXPECT_LE(p.n_frames, 12);
  EXPECT_EQ(prims.total_frames(), 50);
}

// DP optimality against exhaustive enumeration on random short sequences.
TEST(Segment, DpMatchesExhaustiveEnumeration) {
  Rng rng(42);
  for (int trial = 0; trial < 40; ++trial) {
    const auto T = 10 + rng.below(21);
    const auto J = 1 + rng.below(3);
    std::vector<double> phase(J);
    for (auto& p : phase) p = rng.uniform(0, 6.28);
    const auto s = make_sequence(T, J, [&](std::size_t t, std::size_t j) {
      return Point2{40 * std::sin(0.4 * t + phase[j]) + rng.normal(0, 1), 30 * std::cos(0.3 * t) + rng.normal(0, 1)};
    });
    const double lambda = std::exp(rng.uniform(std::log(0.1), std::log(500.0)));
    const auto result = segment_with_objective(s, {lambda, 5, 0});
    double best = std::numeric_limits<double>::infinity();
    std::vector<FrameRange> cur, best_segs;
    enumerate(s, 0, static_cast<int>(T), 5, lambda, cur, 0.0, best, best_segs);
    EXPECT_NEAR(result.objective, best, 1e-9 * std::max(1.0, best)) << "T=" << T;
    ASSERT_EQ(result.primitives.size(), best_segs.size());
    for (std::size_t i = 0; i < best_segs.size(); ++i) {
      EXPECT_EQ(result.primitives.primitives[i].range(), best_segs[i]);
    }
  }
}

TEST(Segment, SegmentCountIsMonotoneInLambda) {
  Rng rng(9);
  const auto s = make_sequence(120, 2, [&](std::size_t t, std::size_t j) {
    return Point2{60 * std::sin(0.2 * t + j) + rng.normal(0, 1.5), 20 * std::sin(0.05 * t) + rng.normal(0, 1.5)};
  });
  const SegmentCostTable table(s, 5, 0);
  std::size_t prev = std::numeric_limits<std::size_t>::max();
  for (double lambda = 0.01; lambda < 1e7; lambda *= 1.6) {
    const auto n = solve_segmentation(table, lambda).segments.size();
    EXPECT_LE(n, prev) << lambda;
    prev = n;
  }
  EXPECT_EQ(prev, 1u);
}

TEST(Execute, PiecewiseCubicIsReconstructed) {
  const std::vector<int> breaks{0, 17, 40, 58, 80};
  auto value = [&](std::size_t t, std::size_t j) {
    int seg = 0;
    while (static_cast<int>(t) >= breaks[seg + 1]) ++seg;
    const double u = (t - breaks[seg]) / 10.0;
    const double sgn = seg % 2 ? -1.0 : 1.0;
    return Point2{sgn * (u * u * u - 3 * u) + 10 * seg + j, sgn * 2 * u * u + 5 * seg};
  };
  const auto s = make_sequence(80, 2, value);
  const auto prims = segment_primitives(s, {0.5, 5, 0});
  ASSERT_EQ(prims.size(), 4u);
  const auto out = execute_primitives(prims, s);
  ASSERT_EQ(out.num_frames(), s.num_frames());
  for (std::size_t t = 0; t < 80; ++t)
    for (std::size_t j = 0; j < 2; ++j) EXPECT_LT(distance(out.at(t, j), s.at(t, j)), 1e-6);
}

TEST(Execute, OutputLengthMatchesDuration) {
  SplinePrimitive p;
  p.n_frames = 5;
  p.coeffs = {CoeffBlock{1, 2, 3, 4, 5, 6, 7, 8}};
  const auto out = execute_primitives(PrimitiveSequence{"x", {p}});
  EXPECT_EQ(out.num_frames(), 5u);
  EXPECT_EQ(out.x(0, 0), 4.0);
}

// Dyadic coordinates keep the shifted differences exact, so segmentation is identical.
TEST(Execute, TranslationEquivariance) {
  Rng rng(4);
  const auto base = make_sequence(70, 3, [&](std::size_t t, std::size_t j) {
    return Point2{std::round(64 * (30 * std::sin(0.15 * t + j) + rng.normal(0, 1))) / 64,
                  std::round(64 * (20 * std::cos(0.1 * t) + rng.normal(0, 1))) / 64};
  });
  const Point2 v{37, -12};
  auto shifted = base;
  for (std::size_t t = 0; t < 70; ++t)
    for (std::size_t j = 0; j < 3; ++j) {
      shifted.x(t, j) += v.x;
      shifted.y(t, j) += v.y;
    }
  const SegmentationConfig cfg{20.0, 5, 0};
  const auto a = segment_primitives(base, cfg);
  const auto b = segment_primitives(shifted, cfg);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a.primitives[i].range(), b.primitives[i].range());
  const auto ea = execute_primitives(a, base);
  const auto eb = execute_primitives(b, base);
  for (std::size_t t = 0; t < 70; ++t)
    for (std::size_t j = 0; j < 3; ++j) {
      EXPECT_NEAR(eb.x(t, j) - ea.x(t, j), v.x, 1e-9);
      EXPECT_NEAR(eb.y(t, j) - ea.y(t, j), v.y, 1e-9);
    }
}

TEST(KeypointDifference, Examples) {
  const auto a = make_sequence(12, 3, [](std::size_t t, std::size_t j) { return Point2{double(t), double(j)}; });
  EXPECT_EQ(keypoint_difference(a, a, 500.0), 0.0);
  const auto b = make_sequence(12, 3, [](std::size_t t, std::size_t j) { return Point2{t + 3.0, j + 4.0}; });
  EXPECT_NEAR(keypoint_difference(b, a, 500.0), 1.0, 1e-12);
  const auto c = make_sequence(11, 3, [](auto, auto) { return Point2{}; });
  try {
    keypoint_difference(c, a, 500.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ShapeMismatch);
  }
  // Default normalization is the frame diagonal (640x480 -> 800 px).
  EXPECT_NEAR(keypoint_difference(b, a), 5.0 / 800.0 * 100.0, 1e-12);
}

TEST(Calibrate, HitsTargetMedian) {
  Rng rng(8);
  std::vector<PoseSequence> seqs;
  for (int i = 0; i < 3; ++i) {
    seqs.push_back(make_sequence(200, 2, [&](std::size_t t, std::size_t j) {
      return Point2{50 * std::sin(0.2 * t + j) + rng.normal(0, 1), 30 * std::sin(0.13 * t) + rng.normal(0, 1)};
    }));
  }
  const double lambda = calibrate_lambda(seqs, {1.0, 5, 0}, 15.0);
  std::vector<Segmentation> segs;
  for (const auto& s : seqs) segs.push_back(solve_segmentation(SegmentCostTable(s, 5, 0), lambda));
  const double med = median_segment_length(segs);
  EXPECT_GE(med, 12.0);
  EXPECT_LE(med, 20.0);
}

}  // namespace
}  // namespace pmc
