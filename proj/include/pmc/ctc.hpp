#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <vector>

#include <Eigen/Dense>

#include "pmc/error.hpp"
#include "pmc/types.hpp"

namespace pmc {

/// Per-step label distributions over the interleaved primitive/transition stream.
/// Row 2k is primitive k, row 2k+1 the transition between primitives k and k+1.
struct PosteriorSequence {
  Eigen::MatrixXd probs;  // steps x classes
  int blank = 0;

  Eigen::Index steps() const { return probs.rows(); }
  Eigen::Index classes() const { return probs.cols(); }
};

inline void validate(const PosteriorSequence& post) {
  require(post.steps() >= 1, ErrorKind::ValidationError, "empty posterior");
  require(post.blank >= 0 && post.blank < post.classes(), ErrorKind::ValidationError, "blank index out of range");
  for (Eigen::Index t = 0; t < post.steps(); ++t) {
    require(post.probs.row(t).minCoeff() >= 0.0 && post.probs.row(t).maxCoeff() <= 1.0,
            ErrorKind::ValidationError, "posterior entry outside [0,1]");
    require(std::abs(post.probs.row(t).sum() - 1.0) <= 1e-6, ErrorKind::ValidationError,
            "posterior row does not sum to 1");
  }
}

inline constexpr double kLogZero = -std::numeric_limits<double>::infinity();

inline double log_add(double a, double b) {
  if (a == kLogZero) return b;
  if (b == kLogZero) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

/// Merge runs of equal labels, then drop blanks.
inline LabelSequence compress(const LabelSequence& steps, int blank) {
  LabelSequence out;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (i > 0 && steps[i] == steps[i - 1]) continue;
    if (steps[i] != blank) out.push_back(steps[i]);
  }
  return out;
}

/// Fewest steps any alignment of `target` needs (repeats need a separating blank).
inline std::size_t min_alignment_steps(const LabelSequence& target) {
  std::size_t n = target.size();
  for (std::size_t i = 1; i < target.size(); ++i)
    if (target[i] == target[i - 1]) ++n;
  return n;
}

inline Eigen::MatrixXd log_of(const Eigen::MatrixXd& probs) { return probs.array().log().matrix(); }

struct CtcResult {
  double log_prob = kLogZero;
  Eigen::MatrixXd occupancy;  // steps x classes, expected label counts given the target
};

/// Blank-augmented forward-backward in log space. `log_probs` is steps x classes.
inline CtcResult ctc_forward_backward(const Eigen::MatrixXd& log_probs, const LabelSequence& target, int blank,
                                      bool want_occupancy = true) {
  const Eigen::Index T = log_probs.rows();
  CtcResult out;
  if (want_occupancy) out.occupancy = Eigen::MatrixXd::Zero(T, log_probs.cols());
  if (T == 0 || min_alignment_steps(target) > static_cast<std::size_t>(T)) return out;

  const auto S = static_cast<Eigen::Index>(2 * target.size() + 1);
  auto label = [&](Eigen::Index s) { return s % 2 == 0 ? blank : target[s / 2]; };
  auto can_skip = [&](Eigen::Index s) { return s >= 2 && label(s) != blank && label(s) != label(s - 2); };

  Eigen::MatrixXd alpha = Eigen::MatrixXd::Constant(T, S, kLogZero);
  alpha(0, 0) = log_probs(0, blank);
  if (S > 1) alpha(0, 1) = log_probs(0, label(1));
  for (Eigen::Index t = 1; t < T; ++t) {
    for (Eigen::Index s = 0; s < S; ++s) {
      double a = alpha(t - 1, s);
      if (s >= 1) a = log_add(a, alpha(t - 1, s - 1));
      if (can_skip(s)) a = log_add(a, alpha(t - 1, s - 2));
      alpha(t, s) = a == kLogZero ? kLogZero : a + log_probs(t, label(s));
    }
  }
  out.log_prob = alpha(T - 1, S - 1);
  if (S > 1) out.log_prob = log_add(out.log_prob, alpha(T - 1, S - 2));
  if (!want_occupancy || out.log_prob == kLogZero) return out;

  // beta(t, s): log prob of emitting steps t+1.. given state s at step t.
  Eigen::MatrixXd beta = Eigen::MatrixXd::Constant(T, S, kLogZero);
  beta(T - 1, S - 1) = 0.0;
  if (S > 1) beta(T - 1, S - 2) = 0.0;
  for (Eigen::Index t = T - 2; t >= 0; --t) {
    for (Eigen::Index s = 0; s < S; ++s) {
      double b = beta(t + 1, s) == kLogZero ? kLogZero : beta(t + 1, s) + log_probs(t + 1, label(s));
      if (s + 1 < S && beta(t + 1, s + 1) != kLogZero) {
        b = log_add(b, beta(t + 1, s + 1) + log_probs(t + 1, label(s + 1)));
      }
      if (s + 2 < S && can_skip(s + 2) && beta(t + 1, s + 2) != kLogZero) {
        b = log_add(b, beta(t + 1, s + 2) + log_probs(t + 1, label(s + 2)));
      }
      beta(t, s) = b;
    }
  }
  for (Eigen::Index t = 0; t < T; ++t) {
    for (Eigen::Index s = 0; s < S; ++s) {
      if (alpha(t, s) == kLogZero || beta(t, s) == kLogZero) continue;
      out.occupancy(t, label(s)) += std::exp(alpha(t, s) + beta(t, s) - out.log_prob);
    }
  }
  return out;
}

/// log p(target | posterior); -inf when the target cannot fit in the available steps.
inline double ctc_log_prob(const PosteriorSequence& post, const LabelSequence& target) {
  return ctc_forward_backward(log_of(post.probs), target, post.blank, false).log_prob;
}

struct DecodeResult {
  LabelSequence labels;
  double score = kLogZero;  // log p(labels | posterior)
};

/// Prefix beam search. Exact when the beam holds every prefix; width 1 is best-path decoding.
inline DecodeResult decode(const PosteriorSequence& post, int beam_width) {
  require(beam_width >= 1, ErrorKind::ValidationError, "beam width must be >= 1");
  const Eigen::MatrixXd lp = log_of(post.probs);
  const int blank = post.blank;
  const Eigen::Index T = lp.rows();
  const Eigen::Index C = lp.cols();

  if (beam_width == 1) {
    LabelSequence path(static_cast<std::size_t>(T));
    for (Eigen::Index t = 0; t < T; ++t) {
      Eigen::Index best = 0;
      lp.row(t).maxCoeff(&best);
      path[t] = static_cast<int>(best);
    }
    DecodeResult out;
    out.labels = compress(path, blank);
    out.score = ctc_forward_backward(lp, out.labels, blank, false).log_prob;
    return out;
  }

  struct Entry {
    double pb = kLogZero;   // ends in blank
    double pnb = kLogZero;  // ends in a label
    double total() const { return log_add(pb, pnb); }
  };
  std::map<LabelSequence, Entry> beams;
  beams[{}].pb = 0.0;
  for (Eigen::Index t = 0; t < T; ++t) {
    std::map<LabelSequence, Entry> next;
    for (const auto& [prefix, e] : beams) {
      const double tot = e.total();
      auto& same = next[prefix];
      same.pb = log_add(same.pb, tot + lp(t, blank));
      if (!prefix.empty()) same.pnb = log_add(same.pnb, e.pnb + lp(t, prefix.back()));
      for (Eigen::Index c = 0; c < C; ++c) {
        if (c == blank) continue;
        LabelSequence ext = prefix;
        ext.push_back(static_cast<int>(c));
        auto& target = next[ext];
        const double from = (!prefix.empty() && prefix.back() == c) ? e.pb : tot;
        target.pnb = log_add(target.pnb, from + lp(t, c));
      }
    }
    if (static_cast<int>(next.size()) > beam_width) {
      std::vector<std::pair<double, LabelSequence>> ranked;
      ranked.reserve(next.size());
      for (const auto& [prefix, e] : next) ranked.emplace_back(e.total(), prefix);
      std::stable_sort(ranked.begin(), ranked.end(),
                       [](const auto& a, const auto& b) { return a.first > b.first; });
      std::map<LabelSequence, Entry> kept;
      for (int i = 0; i < beam_width; ++i) kept[ranked[i].second] = next[ranked[i].second];
      beams = std::move(kept);
    } else {
      beams = std::move(next);
    }
  }
  DecodeResult out;
  for (const auto& [prefix, e] : beams) {
    const double tot = e.total();
    if (tot > out.score) {
      out.score = tot;
      out.labels = prefix;
    }
  }
  return out;
}

/// Most probable step labelling whose compress equals `target`.
inline LabelSequence viterbi_align(const PosteriorSequence& post, const LabelSequence& target) {
  const Eigen::MatrixXd lp = log_of(post.probs);
  const int blank = post.blank;
  const Eigen::Index T = lp.rows();
  if (min_alignment_steps(target) > static_cast<std::size_t>(T)) {
    fail(ErrorKind::TargetTooLong, "target needs more steps than the posterior provides");
  }
  const auto S = static_cast<Eigen::Index>(2 * target.size() + 1);
  auto label = [&](Eigen::Index s) { return s % 2 == 0 ? blank : target[s / 2]; };
  auto can_skip = [&](Eigen::Index s) { return s >= 2 && label(s) != blank && label(s) != label(s - 2); };

  Eigen::MatrixXd delta = Eigen::MatrixXd::Constant(T, S, kLogZero);
  Eigen::MatrixXi from = Eigen::MatrixXi::Constant(T, S, -1);
  delta(0, 0) = lp(0, blank);
  if (S > 1) delta(0, 1) = lp(0, label(1));
  for (Eigen::Index t = 1; t < T; ++t) {
    for (Eigen::Index s = 0; s < S; ++s) {
      double best = delta(t - 1, s);
      Eigen::Index arg = s;
      if (s >= 1 && delta(t - 1, s - 1) > best) {
        best = delta(t - 1, s - 1);
        arg = s - 1;
      }
      if (can_skip(s) && delta(t - 1, s - 2) > best) {
        best = delta(t - 1, s - 2);
        arg = s - 2;
      }
      if (best == kLogZero) continue;
      delta(t, s) = best + lp(t, label(s));
      from(t, s) = static_cast<int>(arg);
    }
  }
  Eigen::Index s = S - 1;
  if (S > 1 && delta(T - 1, S - 2) > delta(T - 1, S - 1)) s = S - 2;
  if (delta(T - 1, s) == kLogZero) {
    fail(ErrorKind::TargetTooLong, "target has zero probability under the posterior");
  }
  LabelSequence path(static_cast<std::size_t>(T));
  for (Eigen::Index t = T - 1; t >= 0; --t) {
    path[t] = label(s);
    if (t > 0) s = from(t, s);
  }
  return path;
}

/// One label occurrence inside an alignment: its label and the steps assigned to it.
struct AlignedOccurrence {
  int label = 0;
  std::vector<int> steps;       // all steps (primitive and transition)
  std::vector<int> primitives;  // primitive indices (steps 2k)
};

inline std::vector<AlignedOccurrence> occurrences_of(const LabelSequence& path, int blank) {
  std::vector<AlignedOccurrence> out;
  for (std::size_t t = 0; t < path.size(); ++t) {
    if (path[t] == blank) continue;
    if (t == 0 || path[t] != path[t - 1]) out.push_back({path[t], {}, {}});
    out.back().steps.push_back(static_cast<int>(t));
    if (t % 2 == 0) out.back().primitives.push_back(static_cast<int>(t / 2));
  }
  return out;
}

}  // namespace pmc
