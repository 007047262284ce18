// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The tagmetric Authors

#pragma once

// Two-layer embedding branch: e = normalize(W2^T relu(W1^T x + b1) + b2),
// with exact gradients and an Adam optimizer.

#include <cmath>
#include <string>
#include <utility>

#include "tagmetric/core.hpp"

namespace tagmetric {

inline constexpr Eigen::Index kHiddenWidth = 512;
inline constexpr Eigen::Index kEmbeddingWidth = 256;

struct MlpBranch {
  std::string name;
  Mat w1;  // d_in x hidden
  Vec b1;  // hidden
  Mat w2;  // hidden x out
  Vec b2;  // out

  MlpBranch() = default;
  MlpBranch(std::string branch_name, Eigen::Index d_in, Eigen::Index hidden = kHiddenWidth,
            Eigen::Index out = kEmbeddingWidth)
      : name(std::move(branch_name)),
        w1(Mat::Zero(d_in, hidden)),
        b1(Vec::Zero(hidden)),
        w2(Mat::Zero(hidden, out)),
        b2(Vec::Zero(out)) {}

  Eigen::Index d_in() const noexcept { return w1.rows(); }
  Eigen::Index hidden() const noexcept { return w1.cols(); }
  Eigen::Index d_out() const noexcept { return w2.cols(); }

  bool operator==(const MlpBranch&) const = default;
};

/// Glorot-uniform weights, zero biases. W1 is filled before W2, row-major.
inline MlpBranch make_branch(std::string name, Eigen::Index d_in, Rng& rng, Eigen::Index hidden = kHiddenWidth,
                             Eigen::Index out = kEmbeddingWidth) {
  if (d_in < 1) throw ShapeError("make_branch: d_in must be >= 1");
  MlpBranch b(std::move(name), d_in, hidden, out);
  const auto fill = [&rng](Mat& w) {
    const double lim = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
    for (Eigen::Index i = 0; i < w.rows(); ++i)
      for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = rng.uniform(-lim, lim);
  };
  fill(b.w1);
  fill(b.w2);
  return b;
}

/// Parameter-shaped gradient (also used for Adam moments).
struct GradientSet {
  Mat w1;
  Vec b1;
  Mat w2;
  Vec b2;

  static GradientSet zeros_like(const MlpBranch& b) {
    return {Mat::Zero(b.w1.rows(), b.w1.cols()), Vec::Zero(b.b1.size()), Mat::Zero(b.w2.rows(), b.w2.cols()),
            Vec::Zero(b.b2.size())};
  }

  GradientSet& operator+=(const GradientSet& o) {
    w1 += o.w1;
    b1 += o.b1;
    w2 += o.w2;
    b2 += o.b2;
    return *this;
  }

  GradientSet& operator*=(double s) {
    w1 *= s;
    b1 *= s;
    w2 *= s;
    b2 *= s;
    return *this;
  }

  bool matches(const MlpBranch& b) const {
    return w1.rows() == b.w1.rows() && w1.cols() == b.w1.cols() && b1.size() == b.b1.size() &&
           w2.rows() == b.w2.rows() && w2.cols() == b.w2.cols() && b2.size() == b.b2.size();
  }

  bool operator==(const GradientSet&) const = default;
};

/// Intermediate activations for a batch (one input per row).
struct ForwardCache {
  RowMat input;
  RowMat pre_hidden;
  RowMat hidden;
  Vec norms;
  RowMat output;  // unit rows
};

inline ForwardCache forward_batch(const MlpBranch& b, RowMat x) {
  if (x.cols() != b.d_in()) {
    throw ShapeError("forward: input dimension " + std::to_string(x.cols()) + " != branch d_in " +
                     std::to_string(b.d_in()));
  }
  ForwardCache c;
  c.input = std::move(x);
  c.pre_hidden.noalias() = c.input * b.w1;
  c.pre_hidden.rowwise() += b.b1.transpose();
  c.hidden = c.pre_hidden.cwiseMax(0.0);
  c.output.noalias() = c.hidden * b.w2;
  c.output.rowwise() += b.b2.transpose();
  c.norms = c.output.rowwise().norm();
  for (Eigen::Index i = 0; i < c.output.rows(); ++i) {
    if (!std::isfinite(c.norms(i))) throw NumericalError("forward: non-finite output");
    if (!(c.norms(i) > 0.0)) throw DomainError("forward: pre-normalization output has zero norm");
    c.output.row(i) /= c.norms(i);
  }
  return c;
}

inline Vec forward(const MlpBranch& b, const Eigen::Ref<const Vec>& x) {
  RowMat row = x.transpose();
  return forward_batch(b, std::move(row)).output.row(0).transpose();
}

struct BatchGradients {
  GradientSet params;  // summed over rows
  RowMat input;        // per-row input gradients
};

/// Backpropagate `upstream` (d loss / d output, one row per batch item).
inline BatchGradients backward_batch(const MlpBranch& b, const ForwardCache& c, const RowMat& upstream) {
  if (upstream.rows() != c.output.rows() || upstream.cols() != c.output.cols()) {
    throw ShapeError("backward: upstream gradient shape does not match forward output");
  }
  // d normalize(z) = (I - e e^T) / |z|
  const Vec along = (upstream.array() * c.output.array()).rowwise().sum();
  RowMat dz = upstream - (c.output.array().colwise() * along.array()).matrix();
  dz.array().colwise() /= c.norms.array();

  BatchGradients g;
  g.params.w2.noalias() = c.hidden.transpose() * dz;
  g.params.b2 = dz.colwise().sum().transpose();
  RowMat dh = dz * b.w2.transpose();
  dh = (c.pre_hidden.array() > 0.0).select(dh, 0.0);
  g.params.w1.noalias() = c.input.transpose() * dh;
  g.params.b1 = dh.colwise().sum().transpose();
  g.input.noalias() = dh * b.w1.transpose();
  return g;
}

inline std::pair<GradientSet, Vec> backward(const MlpBranch& b, const Eigen::Ref<const Vec>& x,
                                            const Eigen::Ref<const Vec>& upstream) {
  if (upstream.size() != b.d_out()) throw ShapeError("backward: upstream gradient size");
  RowMat row = x.transpose();
  const auto cache = forward_batch(b, std::move(row));
  RowMat up = upstream.transpose();
  auto g = backward_batch(b, cache, up);
  return {std::move(g.params), g.input.row(0).transpose()};
}

struct AdamState {
  GradientSet m;
  GradientSet v;
  long long t = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState for_branch(const MlpBranch& b) {
    return {GradientSet::zeros_like(b), GradientSet::zeros_like(b), 0, 0.9, 0.999, 1e-8};
  }

  bool operator==(const AdamState&) const = default;
};

namespace detail {

template <class P, class G>
void adam_update(P& param, const G& grad, P& m, P& v, const AdamState& s, double lr, double weight_decay,
                 double bias1, double bias2) {
  const auto g = (grad.array() + weight_decay * param.array()).eval();
  m.array() = s.beta1 * m.array() + (1.0 - s.beta1) * g;
  v.array() = s.beta2 * v.array() + (1.0 - s.beta2) * g.square();
  param.array() -= lr * (m.array() / bias1) / ((v.array() / bias2).sqrt() + s.eps);
}

}  // namespace detail

/// One Adam step with L2 weight decay added to the gradient (g + wd * theta).
inline void adam_step(MlpBranch& b, const GradientSet& grads, AdamState& state, double lr, double weight_decay) {
  if (!grads.matches(b) || !state.m.matches(b) || !state.v.matches(b)) throw ShapeError("adam_step: shape mismatch");
  if (!(lr > 0.0)) throw DomainError("adam_step: lr must be > 0");
  state.t += 1;
  const double bias1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double bias2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  detail::adam_update(b.w1, grads.w1, state.m.w1, state.v.w1, state, lr, weight_decay, bias1, bias2);
  detail::adam_update(b.b1, grads.b1, state.m.b1, state.v.b1, state, lr, weight_decay, bias1, bias2);
  detail::adam_update(b.w2, grads.w2, state.m.w2, state.v.w2, state, lr, weight_decay, bias1, bias2);
  detail::adam_update(b.b2, grads.b2, state.m.b2, state.v.b2, state, lr, weight_decay, bias1, bias2);
}

}  // namespace tagmetric
