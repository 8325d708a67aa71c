#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pmc/error.hpp"
#include "pmc/io.hpp"
#include "pmc/random.hpp"
#include "pmc/types.hpp"

namespace pmc {

// ---------------------------------------------------------------------------
// Label sequences

template <typename T>
std::size_t edit_distance(const std::vector<T>& a, const std::vector<T>& b) {
  std::vector<std::size_t> row(b.size() + 1);
  std::iota(row.begin(), row.end(), std::size_t{0});
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
      diag = up;
    }
  }
  return row[b.size()];
}

/// Levenshtein distance over the longer length; 0 when both are empty.
template <typename T>
double norm_edit_distance(const std::vector<T>& pred, const std::vector<T>& gt) {
  const auto m = std::max(pred.size(), gt.size());
  if (m == 0) return 0.0;
  return static_cast<double>(edit_distance(pred, gt)) / static_cast<double>(m);
}

template <typename T>
double seq_acc(const std::vector<T>& pred, const std::vector<T>& gt) {
  return (1.0 - norm_edit_distance(pred, gt)) * 100.0;
}

// ---------------------------------------------------------------------------
// Repetition localization

struct IntervalPrediction {
  std::string sequence_id;
  std::string label;
  FrameRange interval;
  double score = 1.0;
};

struct GroundTruthInterval {
  std::string sequence_id;
  std::string label;
  FrameRange interval;
};

inline double interval_iou(const FrameRange& a, const FrameRange& b) {
  const int inter = std::max(0, std::min(a.end, b.end) - std::max(a.start, b.start));
  const int uni = a.length() + b.length() - inter;
  return uni > 0 ? static_cast<double>(inter) / uni : 0.0;
}

inline std::vector<double> default_iou_thresholds() {
  std::vector<double> t;
  for (int i = 0; i < 10; ++i) t.push_back(0.5 + 0.05 * i);
  return t;
}

/// AP of one class at one IoU threshold: predictions ranked by score, each greedily matched to
/// the best-overlapping unmatched ground truth of its sequence; area under the precision envelope.
inline double average_precision(std::vector<const IntervalPrediction*> preds,
                                const std::vector<const GroundTruthInterval*>& gts, double threshold) {
  if (gts.empty()) return 0.0;
  std::stable_sort(preds.begin(), preds.end(), [](const auto* a, const auto* b) { return a->score > b->score; });
  std::vector<char> used(gts.size(), 0);
  std::vector<double> precision, recall;
  int tp = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const auto* p = preds[i];
    int best = -1;
    double best_iou = -1.0;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (used[g] || gts[g]->sequence_id != p->sequence_id) continue;
      const double iou = interval_iou(p->interval, gts[g]->interval);
      if (iou >= threshold && iou > best_iou) {
        best_iou = iou;
        best = static_cast<int>(g);
      }
    }
    if (best >= 0) {
      used[best] = 1;
      ++tp;
    }
    precision.push_back(static_cast<double>(tp) / static_cast<double>(i + 1));
    recall.push_back(static_cast<double>(tp) / static_cast<double>(gts.size()));
  }
  for (std::size_t i = precision.size(); i-- > 1;) precision[i - 1] = std::max(precision[i - 1], precision[i]);
  double ap = 0.0;
  double prev_recall = 0.0;
  for (std::size_t i = 0; i < precision.size(); ++i) {
    ap += (recall[i] - prev_recall) * precision[i];
    prev_recall = recall[i];
  }
  return ap;
}

/// mAP in [0,1]: mean over classes with ground truth, then over IoU thresholds.
/// Predictions with empty intervals cover no frames and are ignored.
inline double repetition_map(const std::vector<IntervalPrediction>& preds, const std::vector<GroundTruthInterval>& gts,
                             const std::vector<double>& thresholds = default_iou_thresholds()) {
  std::map<std::string, std::vector<const GroundTruthInterval*>> gt_by_class;
  for (const auto& g : gts) gt_by_class[g.label].push_back(&g);
  std::map<std::string, std::vector<const IntervalPrediction*>> pred_by_class;
  for (const auto& p : preds)
    if (p.interval.length() > 0) pred_by_class[p.label].push_back(&p);
  if (gt_by_class.empty() || thresholds.empty()) return 0.0;
  double total = 0.0;
  for (double t : thresholds) {
    double per_class = 0.0;
    for (const auto& [label, g] : gt_by_class) per_class += average_precision(pred_by_class[label], g, t);
    total += per_class / static_cast<double>(gt_by_class.size());
  }
  return total / static_cast<double>(thresholds.size());
}

// ---------------------------------------------------------------------------
// Pose-sequence distances

/// Mean over joints of the L2 distance between frame a of p and frame b of q.
inline double frame_distance(const PoseSequence& p, std::size_t a, const PoseSequence& q, std::size_t b) {
  double d = 0.0;
  for (std::size_t j = 0; j < p.num_joints(); ++j) d += distance(p.at(a, j), q.at(b, j));
  return d / static_cast<double>(p.num_joints());
}

struct DtwResult {
  std::vector<std::pair<std::size_t, std::size_t>> path;
  double cost = 0.0;
};

/// Minimal-cost monotone, continuous alignment from (0,0) to (T1-1,T2-1).
inline DtwResult dtw_align(const PoseSequence& p, const PoseSequence& q) {
  require(p.num_frames() >= 1 && q.num_frames() >= 1, ErrorKind::EmptyInput, "DTW needs non-empty sequences");
  require(p.num_joints() == q.num_joints(), ErrorKind::ShapeMismatch, "DTW needs equal joint counts");
  const auto n = p.num_frames();
  const auto m = q.num_frames();
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> acc((n + 1) * (m + 1), inf);
  auto at = [&](std::size_t i, std::size_t j) -> double& { return acc[i * (m + 1) + j]; };
  at(0, 0) = 0.0;
  for (std::size_t i = 1; i <= n; ++i)
    for (std::size_t j = 1; j <= m; ++j)
      at(i, j) = frame_distance(p, i - 1, q, j - 1) + std::min({at(i - 1, j - 1), at(i - 1, j), at(i, j - 1)});
  DtwResult out;
  out.cost = at(n, m);
  std::size_t i = n, j = m;
  while (i > 0 && j > 0) {
    out.path.emplace_back(i - 1, j - 1);
    if (i == 1 && j == 1) break;
    const double d = at(i - 1, j - 1), u = at(i - 1, j), l = at(i, j - 1);
    if (d <= u && d <= l) {
      --i;
      --j;
    } else if (u <= l) {
      --i;
    } else {
      --j;
    }
  }
  std::reverse(out.path.begin(), out.path.end());
  return out;
}

/// Average position error: mean joint L2 over frame pairs, DTW-aligned when lengths differ.
inline double ape(const PoseSequence& p, const PoseSequence& q) {
  require(p.num_frames() >= 1 && q.num_frames() >= 1, ErrorKind::EmptyInput, "APE needs non-empty sequences");
  require(p.num_joints() == q.num_joints(), ErrorKind::ShapeMismatch, "APE needs equal joint counts");
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  if (p.num_frames() == q.num_frames()) {
    for (std::size_t t = 0; t < p.num_frames(); ++t) pairs.emplace_back(t, t);
  } else {
    pairs = dtw_align(p, q).path;
  }
  double total = 0.0;
  for (const auto& [a, b] : pairs) total += frame_distance(p, a, q, b);
  return total / static_cast<double>(pairs.size());
}

/// sigma(j) = 1/(T-1) * sum_t |p_t^j - mean^j|.
inline std::vector<double> joint_spread(const PoseSequence& p) {
  const auto T = p.num_frames();
  if (T < 2) fail(ErrorKind::DegenerateLength, "AVE needs at least two frames");
  std::vector<double> out;
  for (std::size_t j = 0; j < p.num_joints(); ++j) {
    Point2 mu;
    for (std::size_t t = 0; t < T; ++t) {
      mu.x += p.x(t, j);
      mu.y += p.y(t, j);
    }
    mu.x /= static_cast<double>(T);
    mu.y /= static_cast<double>(T);
    double s = 0.0;
    for (std::size_t t = 0; t < T; ++t) s += distance(p.at(t, j), mu);
    out.push_back(s / static_cast<double>(T - 1));
  }
  return out;
}

/// Average variance error: mean over joints of |sigma(j) - sigma_bar(j)|.
inline double ave(const PoseSequence& p, const PoseSequence& q) {
  require(p.num_joints() == q.num_joints(), ErrorKind::ShapeMismatch, "AVE needs equal joint counts");
  const auto a = joint_spread(p);
  const auto b = joint_spread(q);
  double total = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) total += std::abs(a[j] - b[j]);
  return total / static_cast<double>(a.size());
}

// ---------------------------------------------------------------------------
// Feature-space metrics. Feature matrices hold one sample per row.

using FeatureMatrix = Eigen::MatrixXd;

inline Eigen::VectorXd feature_mean(const FeatureMatrix& x) { return x.colwise().mean().transpose(); }

/// Unbiased sample covariance.
inline Eigen::MatrixXd feature_covariance(const FeatureMatrix& x) {
  require(x.rows() >= 2, ErrorKind::EmptyInput, "covariance needs at least two samples");
  const Eigen::MatrixXd centered = x.rowwise() - x.colwise().mean();
  return centered.transpose() * centered / static_cast<double>(x.rows() - 1);
}

/// Square root of a symmetric PSD matrix; eigenvalues with |lambda| < 1e-10 (or negative) clamp to 0.
inline Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& s) {
  const Eigen::MatrixXd sym = 0.5 * (s + s.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  Eigen::VectorXd ev = es.eigenvalues();
  for (Eigen::Index i = 0; i < ev.size(); ++i) ev[i] = ev[i] < 1e-10 ? 0.0 : std::sqrt(ev[i]);
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

/// Tr((S1 S2)^{1/2}) through the symmetrized product S1^{1/2} S2 S1^{1/2}, which shares its spectrum.
inline double trace_sqrt_product(const Eigen::MatrixXd& s1, const Eigen::MatrixXd& s2) {
  const Eigen::MatrixXd r1 = psd_sqrt(s1);
  return psd_sqrt(r1 * s2 * r1).trace();
}

/// (S1 S2)^{1/2} for positive-definite S1, as S1^{1/2} M^{1/2} S1^{-1/2} with M = S1^{1/2} S2 S1^{1/2}.
inline Eigen::MatrixXd sqrt_product(const Eigen::MatrixXd& s1, const Eigen::MatrixXd& s2) {
  const Eigen::MatrixXd r1 = psd_sqrt(s1);
  return r1 * psd_sqrt(r1 * s2 * r1) * r1.inverse();
}

inline double fid_gaussian(const Eigen::VectorXd& mu1, const Eigen::MatrixXd& s1, const Eigen::VectorXd& mu2,
                           const Eigen::MatrixXd& s2) {
  require(mu1.size() == mu2.size() && s1.rows() == mu1.size() && s2.rows() == mu2.size(), ErrorKind::ShapeMismatch,
          "FID dimension mismatch");
  return (mu1 - mu2).squaredNorm() + s1.trace() + s2.trace() - 2.0 * trace_sqrt_product(s1, s2);
}

inline double fid(const FeatureMatrix& a, const FeatureMatrix& b) {
  return fid_gaussian(feature_mean(a), feature_covariance(a), feature_mean(b), feature_covariance(b));
}

/// Mean distance between `pairs` random sample pairs (drawn with replacement).
inline double diversity(const FeatureMatrix& x, Rng& rng, int pairs = 200) {
  require(x.rows() >= 1, ErrorKind::EmptyInput, "diversity needs samples");
  double total = 0.0;
  for (int n = 0; n < pairs; ++n) {
    const auto u = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(x.rows())));
    const auto v = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(x.rows())));
    total += (x.row(u) - x.row(v)).norm();
  }
  return total / pairs;
}

/// Mean within-class pair distance, `pairs` pairs per class.
inline double multimodality(const FeatureMatrix& x, const std::vector<int>& labels, Rng& rng, int pairs = 20) {
  require(static_cast<Eigen::Index>(labels.size()) == x.rows(), ErrorKind::ShapeMismatch, "label count mismatch");
  std::map<int, std::vector<Eigen::Index>> by_class;
  for (Eigen::Index i = 0; i < x.rows(); ++i) by_class[labels[i]].push_back(i);
  require(!by_class.empty(), ErrorKind::EmptyInput, "multimodality needs samples");
  double total = 0.0;
  for (const auto& [_, idx] : by_class) {
    for (int n = 0; n < pairs; ++n) {
      const auto u = idx[rng.below(idx.size())];
      const auto v = idx[rng.below(idx.size())];
      total += (x.row(u) - x.row(v)).norm();
    }
  }
  return total / static_cast<double>(by_class.size() * pairs);
}

// ---------------------------------------------------------------------------

struct MetricsReport {
  std::optional<double> norm_ed;   // [0,1]
  std::optional<double> seq_acc;   // percent
  std::optional<double> rep_map;   // [0,1]
  std::optional<double> ape;       // pixels
  std::optional<double> ave;       // pixels
  std::optional<double> fid;       // feature units squared
  std::optional<double> acc;       // percent
  std::optional<double> div;       // feature units
  std::optional<double> mm;        // feature units
  std::optional<double> kd;        // percent of frame diagonal
};

inline json to_json(const MetricsReport& r) {
  json j = json::object();
  auto put = [&](const char* key, const std::optional<double>& v) {
    j[key] = v ? json(*v) : json(nullptr);
  };
  put("norm_ed", r.norm_ed);
  put("seq_acc", r.seq_acc);
  put("rep_map", r.rep_map);
  put("ape", r.ape);
  put("ave", r.ave);
  put("fid", r.fid);
  put("acc", r.acc);
  put("div", r.div);
  put("mm", r.mm);
  put("kd", r.kd);
  return j;
}

}  // namespace pmc
