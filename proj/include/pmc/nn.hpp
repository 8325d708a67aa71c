#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pmc/error.hpp"
#include "pmc/random.hpp"

namespace pmc::nn {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

/// Named parameter tensors, ordered by name so flattening is deterministic.
class ParameterSet {
 public:
  Mat& operator[](const std::string& name) { return tensors_[name]; }
  const Mat& at(const std::string& name) const {
    const auto it = tensors_.find(name);
    if (it == tensors_.end()) fail(ErrorKind::MalformedFile, "missing parameter tensor '" + name + "'");
    return it->second;
  }
  bool contains(const std::string& name) const { return tensors_.count(name) != 0; }

  const std::map<std::string, Mat>& tensors() const { return tensors_; }
  std::map<std::string, Mat>& tensors() { return tensors_; }

  std::size_t size() const {
    std::size_t n = 0;
    for (const auto& [_, t] : tensors_) n += static_cast<std::size_t>(t.size());
    return n;
  }

  ParameterSet zeros_like() const {
    ParameterSet out;
    for (const auto& [name, t] : tensors_) out.tensors_[name] = Mat::Zero(t.rows(), t.cols());
    return out;
  }

  Vec flatten() const {
    Vec out(static_cast<Eigen::Index>(size()));
    Eigen::Index off = 0;
    for (const auto& [_, t] : tensors_) {
      out.segment(off, t.size()) = t.reshaped();
      off += t.size();
    }
    return out;
  }

  void assign_flat(const Vec& v) {
    require(static_cast<std::size_t>(v.size()) == size(), ErrorKind::ShapeMismatch, "flat parameter size mismatch");
    Eigen::Index off = 0;
    for (auto& [_, t] : tensors_) {
      t.reshaped() = v.segment(off, t.size());
      off += t.size();
    }
  }

  void add_scaled(const ParameterSet& other, double scale) {
    for (auto& [name, t] : tensors_) t += scale * other.at(name);
  }

  bool all_finite() const {
    for (const auto& [_, t] : tensors_)
      if (!t.allFinite()) return false;
    return true;
  }

  friend bool operator==(const ParameterSet& a, const ParameterSet& b) {
    if (a.tensors_.size() != b.tensors_.size()) return false;
    for (const auto& [name, t] : a.tensors_) {
      const auto it = b.tensors_.find(name);
      if (it == b.tensors_.end() || it->second.rows() != t.rows() || it->second.cols() != t.cols()) return false;
      if (!(it->second.array() == t.array()).all()) return false;
    }
    return true;
  }

 private:
  std::map<std::string, Mat> tensors_;
};

/// Uniform in +-1/sqrt(fan_in).
inline Mat uniform_init(Eigen::Index rows, Eigen::Index cols, double fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(fan_in);
  Mat m(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = rng.uniform(-bound, bound);
  return m;
}

inline Mat sigmoid(const Mat& x) { return (1.0 + (-x.array()).exp()).inverse().matrix(); }

/// Column-wise softmax.
inline Mat softmax_columns(const Mat& logits) {
  Mat out(logits.rows(), logits.cols());
  for (Eigen::Index c = 0; c < logits.cols(); ++c) {
    const double mx = logits.col(c).maxCoeff();
    out.col(c) = (logits.col(c).array() - mx).exp().matrix();
    out.col(c) /= out.col(c).sum();
  }
  return out;
}

inline Mat log_softmax_columns(const Mat& logits) {
  Mat out(logits.rows(), logits.cols());
  for (Eigen::Index c = 0; c < logits.cols(); ++c) {
    const double mx = logits.col(c).maxCoeff();
    const double lse = mx + std::log((logits.col(c).array() - mx).exp().sum());
    out.col(c) = logits.col(c).array() - lse;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Two-layer perceptron with ReLU after both layers: relu(W2 relu(W1 x + b1) + b2).

class Mlp2 {
 public:
  Mlp2() = default;
  explicit Mlp2(std::string prefix) : prefix_(std::move(prefix)) {}

  void init(ParameterSet& params, Eigen::Index in, Eigen::Index hidden, Eigen::Index out, Rng& rng) const {
    params[prefix_ + ".w1"] = uniform_init(hidden, in, static_cast<double>(in), rng);
    params[prefix_ + ".b1"] = uniform_init(hidden, 1, static_cast<double>(in), rng);
    params[prefix_ + ".w2"] = uniform_init(out, hidden, static_cast<double>(hidden), rng);
    params[prefix_ + ".b2"] = uniform_init(out, 1, static_cast<double>(hidden), rng);
  }

  struct Cache {
    Mat x, z1, a1, z2;
  };

  Mat forward(const ParameterSet& params, const Mat& x, Cache* cache = nullptr) const {
    Mat z1 = params.at(prefix_ + ".w1") * x;
    z1.colwise() += params.at(prefix_ + ".b1").col(0);
    Mat a1 = z1.cwiseMax(0.0);
    Mat z2 = params.at(prefix_ + ".w2") * a1;
    z2.colwise() += params.at(prefix_ + ".b2").col(0);
    Mat out = z2.cwiseMax(0.0);
    if (cache != nullptr) *cache = {x, std::move(z1), std::move(a1), std::move(z2)};
    return out;
  }

  /// Accumulates parameter gradients; the input gradient is not needed by callers.
  void backward(const ParameterSet& params, const Cache& cache, const Mat& d_out, ParameterSet& grads) const {
    const Mat dz2 = (cache.z2.array() > 0.0).select(d_out, 0.0);
    grads[prefix_ + ".w2"] += dz2 * cache.a1.transpose();
    grads[prefix_ + ".b2"] += dz2.rowwise().sum();
    const Mat da1 = params.at(prefix_ + ".w2").transpose() * dz2;
    const Mat dz1 = (cache.z1.array() > 0.0).select(da1, 0.0);
    grads[prefix_ + ".w1"] += dz1 * cache.x.transpose();
    grads[prefix_ + ".b1"] += dz1.rowwise().sum();
  }

 private:
  std::string prefix_;
};

// ---------------------------------------------------------------------------
// Recurrent layer over a batch of left-padded sequences. Column n is inactive
// (state held at zero) until its sequence starts; all sequences end at the last step.

enum class CellKind { Gru, Lstm };

inline const char* to_string(CellKind k) { return k == CellKind::Gru ? "gru" : "lstm"; }

inline CellKind cell_kind_from_string(const std::string& s) {
  if (s == "gru") return CellKind::Gru;
  if (s == "lstm") return CellKind::Lstm;
  fail(ErrorKind::ValidationError, "unknown cell kind '" + s + "'");
}

struct RecurrentInput {
  std::vector<Mat> steps;                  // each in_dim x N
  std::vector<std::vector<char>> active;   // per step, per column
};

class RecurrentLayer {
 public:
  RecurrentLayer() = default;
  RecurrentLayer(std::string prefix, CellKind kind) : prefix_(std::move(prefix)), kind_(kind) {}

  CellKind kind() const { return kind_; }

  void init(ParameterSet& params, Eigen::Index in, Eigen::Index hidden, Rng& rng) const {
    const Eigen::Index gates = (kind_ == CellKind::Gru ? 3 : 4) * hidden;
    const double fan = static_cast<double>(hidden);
    params[prefix_ + ".wi"] = uniform_init(gates, in, fan, rng);
    params[prefix_ + ".wh"] = uniform_init(gates, hidden, fan, rng);
    params[prefix_ + ".bi"] = uniform_init(gates, 1, fan, rng);
    params[prefix_ + ".bh"] = uniform_init(gates, 1, fan, rng);
  }

  struct StepCache {
    Mat x, h_prev, c_prev;
    Mat g1, g2, g3, g4;  // gate activations: GRU r,z,n + (Wh h + bh)_n; LSTM i,f,g,o
    Mat c;               // LSTM cell after update
    std::vector<char> active;
  };
  struct Cache {
    std::vector<StepCache> steps;
  };

  /// Returns final hidden states (hidden x N).
  Mat forward(const ParameterSet& params, const RecurrentInput& input, Eigen::Index batch,
              Cache* cache = nullptr) const {
    const Mat& wi = params.at(prefix_ + ".wi");
    const Mat& wh = params.at(prefix_ + ".wh");
    const auto bi = params.at(prefix_ + ".bi").col(0);
    const auto bh = params.at(prefix_ + ".bh").col(0);
    const Eigen::Index H = wh.cols();
    Mat h = Mat::Zero(H, batch);
    Mat c = Mat::Zero(H, batch);
    if (cache != nullptr) cache->steps.clear();

    for (std::size_t s = 0; s < input.steps.size(); ++s) {
      const Mat& x = input.steps[s];
      const auto& act = input.active[s];
      Mat gi = wi * x;
      gi.colwise() += bi;
      Mat gh = wh * h;
      gh.colwise() += bh;
      StepCache sc;
      Mat h_new, c_new;
      if (kind_ == CellKind::Gru) {
        Mat r = sigmoid(gi.topRows(H) + gh.topRows(H));
        Mat z = sigmoid(gi.middleRows(H, H) + gh.middleRows(H, H));
        Mat hn = gh.bottomRows(H);
        Mat n = (gi.bottomRows(H).array() + r.array() * hn.array()).tanh().matrix();
        h_new = ((1.0 - z.array()) * n.array() + z.array() * h.array()).matrix();
        sc.g1 = std::move(r);
        sc.g2 = std::move(z);
        sc.g3 = std::move(n);
        sc.g4 = std::move(hn);
      } else {
        const Mat g = gi + gh;
        Mat ig = sigmoid(g.topRows(H));
        Mat fg = sigmoid(g.middleRows(H, H));
        Mat gg = g.middleRows(2 * H, H).array().tanh().matrix();
        Mat og = sigmoid(g.bottomRows(H));
        c_new = (fg.array() * c.array() + ig.array() * gg.array()).matrix();
        h_new = (og.array() * c_new.array().tanh()).matrix();
        sc.g1 = std::move(ig);
        sc.g2 = std::move(fg);
        sc.g3 = std::move(gg);
        sc.g4 = std::move(og);
      }
      for (Eigen::Index n = 0; n < batch; ++n) {
        if (!act[n]) {
          h_new.col(n) = h.col(n);
          if (kind_ == CellKind::Lstm) c_new.col(n) = c.col(n);
        }
      }
      if (cache != nullptr) {
        sc.x = x;
        sc.h_prev = h;
        sc.c_prev = c;
        sc.c = c_new;
        sc.active = act;
        cache->steps.push_back(std::move(sc));
      }
      h = std::move(h_new);
      if (kind_ == CellKind::Lstm) c = std::move(c_new);
    }
    return h;
  }

  /// Backpropagates d(final hidden); accumulates parameter gradients and returns input gradients per step.
  std::vector<Mat> backward(const ParameterSet& params, const Cache& cache, const Mat& d_final,
                            ParameterSet& grads) const {
    const Mat& wi = params.at(prefix_ + ".wi");
    const Mat& wh = params.at(prefix_ + ".wh");
    const Eigen::Index H = wh.cols();
    const Eigen::Index N = d_final.cols();
    Mat& dwi = grads[prefix_ + ".wi"];
    Mat& dwh = grads[prefix_ + ".wh"];
    Mat& dbi = grads[prefix_ + ".bi"];
    Mat& dbh = grads[prefix_ + ".bh"];

    std::vector<Mat> dxs(cache.steps.size());
    Mat dh = d_final;
    Mat dc = Mat::Zero(H, N);
    const Eigen::Index G = wi.rows();
    for (std::size_t s = cache.steps.size(); s-- > 0;) {
      const auto& sc = cache.steps[s];
      Mat dgi(G, N), dgh(G, N);
      Mat dh_prev(H, N), dc_prev;
      if (kind_ == CellKind::Gru) {
        const auto& r = sc.g1.array();
        const auto& z = sc.g2.array();
        const auto& n = sc.g3.array();
        const auto& hn = sc.g4.array();
        const Eigen::ArrayXXd dn_pre = dh.array() * (1.0 - z) * (1.0 - n * n);
        const Eigen::ArrayXXd dz_pre = dh.array() * (sc.h_prev.array() - n) * z * (1.0 - z);
        const Eigen::ArrayXXd dr_pre = dn_pre * hn * r * (1.0 - r);
        dgi.topRows(H) = dr_pre.matrix();
        dgi.middleRows(H, H) = dz_pre.matrix();
        dgi.bottomRows(H) = dn_pre.matrix();
        dgh.topRows(H) = dr_pre.matrix();
        dgh.middleRows(H, H) = dz_pre.matrix();
        dgh.bottomRows(H) = (dn_pre * r).matrix();
        dh_prev = (dh.array() * z).matrix();
      } else {
        const auto& ig = sc.g1.array();
        const auto& fg = sc.g2.array();
        const auto& gg = sc.g3.array();
        const auto& og = sc.g4.array();
        const Eigen::ArrayXXd tc = sc.c.array().tanh();
        const Eigen::ArrayXXd dct = dc.array() + dh.array() * og * (1.0 - tc * tc);
        dgi.topRows(H) = (dct * gg * ig * (1.0 - ig)).matrix();
        dgi.middleRows(H, H) = (dct * sc.c_prev.array() * fg * (1.0 - fg)).matrix();
        dgi.middleRows(2 * H, H) = (dct * ig * (1.0 - gg * gg)).matrix();
        dgi.bottomRows(H) = (dh.array() * tc * og * (1.0 - og)).matrix();
        dgh = dgi;
        dc_prev = (dct * fg).matrix();
        dh_prev.setZero();
      }
      for (Eigen::Index n = 0; n < N; ++n) {
        if (!sc.active[n]) {
          dgi.col(n).setZero();
          dgh.col(n).setZero();
          dh_prev.col(n) = dh.col(n);
          if (kind_ == CellKind::Lstm) dc_prev.col(n) = dc.col(n);
        }
      }
      dwi.noalias() += dgi * sc.x.transpose();
      dbi += dgi.rowwise().sum();
      dwh.noalias() += dgh * sc.h_prev.transpose();
      dbh += dgh.rowwise().sum();
      dxs[s] = wi.transpose() * dgi;
      dh_prev.noalias() += wh.transpose() * dgh;
      dh = std::move(dh_prev);
      if (kind_ == CellKind::Lstm) dc = std::move(dc_prev);
    }
    return dxs;
  }

 private:
  std::string prefix_;
  CellKind kind_ = CellKind::Gru;
};

// ---------------------------------------------------------------------------

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Gradient descent with adaptive per-parameter step sizes.
class Adam {
 public:
  Adam(const ParameterSet& like, AdamConfig cfg) : cfg_(cfg), m_(like.zeros_like()), v_(like.zeros_like()) {}

  void step(ParameterSet& params, const ParameterSet& grads) {
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, t_);
    const double c2 = 1.0 - std::pow(cfg_.beta2, t_);
    for (auto& [name, p] : params.tensors()) {
      const Mat& g = grads.at(name);
      Mat& m = m_[name];
      Mat& v = v_[name];
      m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * g;
      v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
      p.array() -= cfg_.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg_.epsilon);
    }
  }

 private:
  AdamConfig cfg_;
  ParameterSet m_;
  ParameterSet v_;
  int t_ = 0;
};

}  // namespace pmc::nn
