#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "pmc/error.hpp"
#include "pmc/types.hpp"

namespace pmc {

struct SegmentationConfig {
  double lambda = 50.0;        // per-segment penalty, pixels^2
  int min_segment_frames = 5;  // a cubic needs 4 points; 5 leaves one residual dof
  int max_segment_frames = 0;  // 0 = uncapped
};

inline void validate(const SegmentationConfig& cfg) {
  require(cfg.lambda >= 0.0 && std::isfinite(cfg.lambda), ErrorKind::ValidationError, "lambda must be >= 0");
  require(cfg.min_segment_frames >= 5, ErrorKind::ValidationError, "min_segment_frames must be >= 5");
  require(cfg.max_segment_frames == 0 || cfg.max_segment_frames >= cfg.min_segment_frames,
          ErrorKind::ValidationError, "max_segment_frames below min_segment_frames");
}

struct FitResult {
  SplinePrimitive primitive;
  double cost = 0.0;  // sum of squared residuals over joints and frames, pixels^2
};

/// Least-squares cubic per joint and axis over frames [window.start, window.end),
/// in normalized time u = (t - start) / n.
inline FitResult fit_spline(const PoseSequence& seq, FrameRange window, int min_segment_frames = 5) {
  const int m = window.length();
  if (m < min_segment_frames || m < 4) {
    fail(ErrorKind::SegmentTooShort, "segment of " + std::to_string(m) + " frames is too short");
  }
  require(window.start >= 0 && window.end <= static_cast<int>(seq.num_frames()), ErrorKind::ShapeMismatch,
          "fit window outside sequence");
  const auto J = static_cast<Eigen::Index>(seq.num_joints());

  Eigen::MatrixXd basis(m, 4);
  Eigen::MatrixXd targets(m, 2 * J);
  for (int i = 0; i < m; ++i) {
    const double u = static_cast<double>(i) / m;
    basis.row(i) << u * u * u, u * u, u, 1.0;
    for (Eigen::Index j = 0; j < J; ++j) {
      targets(i, 2 * j) = seq.x(window.start + i, j);
      targets(i, 2 * j + 1) = seq.y(window.start + i, j);
    }
  }
  const Eigen::MatrixXd sol = basis.colPivHouseholderQr().solve(targets);
  const Eigen::MatrixXd resid = basis * sol - targets;

  FitResult out;
  out.cost = resid.squaredNorm();
  out.primitive.start_frame = window.start;
  out.primitive.n_frames = m;
  out.primitive.coeffs.resize(J);
  for (Eigen::Index j = 0; j < J; ++j) {
    auto& c = out.primitive.coeffs[j];
    for (int p = 0; p < 4; ++p) {
      c[p] = sol(p, 2 * j);
      c[4 + p] = sol(p, 2 * j + 1);
    }
  }
  return out;
}

/// Fit costs of every admissible window [k, n). Moments are accumulated per start
/// frame relative to that frame's pose, so each window costs O(J) after the previous one.
class SegmentCostTable {
 public:
  SegmentCostTable(const PoseSequence& seq, int min_len, int max_len)
      : frames_(static_cast<int>(seq.num_frames())), min_len_(min_len) {
    max_len_ = max_len > 0 ? std::min(max_len, frames_) : frames_;
    const auto J = seq.num_joints();
    const int span = max_len_ - min_len_ + 1;
    costs_.assign(static_cast<std::size_t>(frames_) * std::max(span, 0),
                  std::numeric_limits<double>::infinity());
    if (span <= 0) return;

    // Inverse Gram matrices of the basis (u^3, u^2, u, 1), one per window length.
    // Extended precision: the quadratic form cancels against the sum of squares.
    using Real = long double;
    using Mat4 = Eigen::Matrix<Real, 4, 4>;
    using Vec4 = Eigen::Matrix<Real, 4, 1>;
    std::vector<Mat4> gram_inv(max_len_ + 1);
    std::array<Real, 7> power_sums{};
    for (int m = 1; m <= max_len_; ++m) {
      const Real tau = m - 1;
      Real tp = 1.0L;
      for (Real& s : power_sums) {
        s += tp;
        tp *= tau;
      }
      if (m < min_len_) continue;
      Mat4 g;
      for (int p = 0; p < 4; ++p)
        for (int q = 0; q < 4; ++q) g(p, q) = power_sums[6 - p - q] / std::pow(static_cast<Real>(m), 6 - p - q);
      gram_inv[m] = g.inverse();
    }

    std::vector<Vec4> moments(2 * J);
    std::vector<Real> sq(2 * J);
    std::vector<double> ref(2 * J);
    for (int k = 0; k + min_len_ <= frames_; ++k) {
      for (std::size_t j = 0; j < J; ++j) {
        ref[2 * j] = seq.x(k, j);
        ref[2 * j + 1] = seq.y(k, j);
      }
      std::fill(moments.begin(), moments.end(), Vec4::Zero());
      std::fill(sq.begin(), sq.end(), 0.0L);
      const int last = std::min(frames_, k + max_len_);
      for (int n = k + 1; n <= last; ++n) {
        const Real tau = n - 1 - k;
        const Real t2 = tau * tau;
        const Vec4 powers(t2 * tau, t2, tau, 1.0L);
        for (std::size_t j = 0; j < J; ++j) {
          const Real vals[2] = {static_cast<Real>(seq.x(n - 1, j)) - ref[2 * j],
                                static_cast<Real>(seq.y(n - 1, j)) - ref[2 * j + 1]};
          for (int a = 0; a < 2; ++a) {
            moments[2 * j + a] += powers * vals[a];
            sq[2 * j + a] += vals[a] * vals[a];
          }
        }
        const int m = n - k;
        if (m < min_len_) continue;
        const Real md = m;
        const Vec4 scale(1.0L / (md * md * md), 1.0L / (md * md), 1.0L / md, 1.0L);
        const auto& ginv = gram_inv[m];
        Real total = 0.0L;
        for (std::size_t d = 0; d < 2 * J; ++d) {
          const Vec4 b = moments[d].cwiseProduct(scale);
          total += std::max(Real{0}, sq[d] - b.dot(ginv * b));
        }
        at(k, n) = static_cast<double>(total);
      }
    }
  }

  int frames() const { return frames_; }
  int min_len() const { return min_len_; }
  int max_len() const { return max_len_; }

  /// Cost of window [k, n); +inf when the length is not admissible.
  double cost(int k, int n) const {
    const int m = n - k;
    if (m < min_len_ || m > max_len_ || k < 0 || n > frames_) return std::numeric_limits<double>::infinity();
    return costs_[index(k, n)];
  }

 private:
  std::size_t index(int k, int n) const {
    return static_cast<std::size_t>(k) * (max_len_ - min_len_ + 1) + (n - k - min_len_);
  }
  double& at(int k, int n) { return costs_[index(k, n)]; }

  int frames_;
  int min_len_;
  int max_len_;
  std::vector<double> costs_;
};

struct Segmentation {
  std::vector<FrameRange> segments;
  double objective = 0.0;  // sum of window costs + lambda per segment
};

/// DP over a precomputed cost table. Ties prefer fewer segments, then the earlier final boundary.
inline Segmentation solve_segmentation(const SegmentCostTable& table, double lambda) {
  const int T = table.frames();
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> best(T + 1, inf);
  std::vector<int> count(T + 1, 0);
  std::vector<int> back(T + 1, -1);
  best[0] = 0.0;
  for (int k = 0; k + table.min_len() <= T; ++k) {
    if (!std::isfinite(best[k])) continue;
    const int last = std::min(T, k + table.max_len());
    for (int n = k + table.min_len(); n <= last; ++n) {
      const double cand = best[k] + table.cost(k, n) + lambda;
      const int segs = count[k] + 1;
      if (cand < best[n] || (cand == best[n] && segs < count[n])) {
        best[n] = cand;
        count[n] = segs;
        back[n] = k;
      }
    }
  }
  if (!std::isfinite(best[T])) {
    fail(ErrorKind::ValidationError, "no admissible segmentation under the segment-length limits");
  }
  Segmentation out;
  out.objective = best[T];
  for (int n = T; n > 0; n = back[n]) out.segments.push_back({back[n], n});
  std::reverse(out.segments.begin(), out.segments.end());
  return out;
}

struct SegmentationResult {
  PrimitiveSequence primitives;
  double objective = 0.0;
};

inline SegmentationResult segment_with_objective(const PoseSequence& seq, const SegmentationConfig& cfg) {
  validate(cfg);
  if (static_cast<int>(seq.num_frames()) < cfg.min_segment_frames) {
    fail(ErrorKind::SequenceTooShort, "sequence shorter than min_segment_frames");
  }
  const SegmentCostTable table(seq, cfg.min_segment_frames, cfg.max_segment_frames);
  const auto seg = solve_segmentation(table, cfg.lambda);
  SegmentationResult out;
  out.objective = seg.objective;
  out.primitives.source_id = seq.id;
  for (const auto& r : seg.segments) {
    out.primitives.primitives.push_back(fit_spline(seq, r, cfg.min_segment_frames).primitive);
  }
  return out;
}

inline PrimitiveSequence segment_primitives(const PoseSequence& seq, const SegmentationConfig& cfg) {
  return segment_with_objective(seq, cfg).primitives;
}

/// Evaluates every primitive on its own frame grid; output frames follow back to back.
inline PoseSequence execute_primitives(const PrimitiveSequence& prims, const PoseSequence& meta) {
  validate(prims);
  PoseSequence out = meta.empty_like();
  const auto J = prims.primitives.front().num_joints();
  if (out.joint_names.size() != J) {
    out.joint_names.clear();
    for (std::size_t j = 0; j < J; ++j) out.joint_names.push_back("j" + std::to_string(j));
  }
  out.id = prims.source_id;
  out.coords.reserve(static_cast<std::size_t>(prims.total_frames()) * J * 2);
  for (const auto& p : prims.primitives) {
    for (int i = 0; i < p.n_frames; ++i) {
      for (std::size_t j = 0; j < J; ++j) {
        const auto pt = p.eval_frame(j, i);
        out.coords.push_back(pt.x);
        out.coords.push_back(pt.y);
      }
    }
  }
  return out;
}

inline PoseSequence execute_primitives(const PrimitiveSequence& prims) {
  return execute_primitives(prims, PoseSequence{});
}

/// Mean per-joint per-frame L2 error as a percentage of `norm` pixels.
inline double keypoint_difference(const PoseSequence& recon, const PoseSequence& gt, double norm) {
  require(recon.num_frames() == gt.num_frames() && recon.num_joints() == gt.num_joints(),
          ErrorKind::ShapeMismatch, "KD needs sequences of identical shape");
  require(norm > 0.0, ErrorKind::ValidationError, "KD normalization must be positive");
  double total = 0.0;
  const auto T = gt.num_frames();
  const auto J = gt.num_joints();
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t j = 0; j < J; ++j) total += distance(recon.at(t, j), gt.at(t, j));
  return total / static_cast<double>(T * J) / norm * 100.0;
}

/// KD normalized by the frame diagonal.
inline double keypoint_difference(const PoseSequence& recon, const PoseSequence& gt) {
  return keypoint_difference(recon, gt, gt.diagonal());
}

inline double median_segment_length(std::span<const Segmentation> segs) {
  std::vector<int> lengths;
  for (const auto& s : segs)
    for (const auto& r : s.segments) lengths.push_back(r.length());
  if (lengths.empty()) return 0.0;
  std::sort(lengths.begin(), lengths.end());
  const auto n = lengths.size();
  return n % 2 ? lengths[n / 2] : 0.5 * (lengths[n / 2 - 1] + lengths[n / 2]);
}

/// Bisects log(lambda) until the median segment length over `seqs` reaches `target_median` frames.
inline double calibrate_lambda(std::span<const PoseSequence> seqs, const SegmentationConfig& base,
                               double target_median = 15.0, double lo = 1e-3, double hi = 1e8,
                               int iterations = 40) {
  validate(base);
  std::vector<SegmentCostTable> tables;
  for (const auto& s : seqs) {
    if (static_cast<int>(s.num_frames()) >= base.min_segment_frames) {
      tables.emplace_back(s, base.min_segment_frames, base.max_segment_frames);
    }
  }
  require(!tables.empty(), ErrorKind::EmptyDataset, "no sequences to calibrate lambda on");
  auto median_at = [&](double lambda) {
    std::vector<Segmentation> segs;
    for (const auto& t : tables) segs.push_back(solve_segmentation(t, lambda));
    return median_segment_length(segs);
  };
  double a = std::log(lo);
  double b = std::log(hi);
  for (int i = 0; i < iterations; ++i) {
    const double mid = 0.5 * (a + b);
    if (median_at(std::exp(mid)) < target_median) {
      a = mid;
    } else {
      b = mid;
    }
  }
  return std::exp(b);
}

}  // namespace pmc
