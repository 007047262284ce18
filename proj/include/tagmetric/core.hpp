// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The tagmetric Authors

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "tagmetric/errors.hpp"

namespace tagmetric {

/// Dense column vector of 64-bit reals.
using Vec = Eigen::VectorXd;
/// Dense matrix of 64-bit reals. Serialized row-major on disk.
using Mat = Eigen::MatrixXd;
/// Row-major matrix used where rows are items (embeddings, inputs).
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline void require_same_dim(Eigen::Index a, Eigen::Index b, const char* what) {
  if (a != b) {
    throw ShapeError(std::string(what) + ": dimension mismatch (" + std::to_string(a) +
                     " vs " + std::to_string(b) + ")");
  }
}

inline bool all_finite(const Eigen::Ref<const Mat>& m) { return m.allFinite(); }

/// 1 - cos(u, v). Symmetric, scale-invariant, in [0, 2].
inline double cosine_distance(const Eigen::Ref<const Vec>& u, const Eigen::Ref<const Vec>& v) {
  require_same_dim(u.size(), v.size(), "cosine_distance");
  const double nu = u.norm();
  const double nv = v.norm();
  if (!(nu > 0.0) || !(nv > 0.0)) {
    throw DomainError("cosine_distance: zero-norm input");
  }
  const double c = u.dot(v) / (nu * nv);
  return 1.0 - std::clamp(c, -1.0, 1.0);
}

inline Vec l2_normalize(const Eigen::Ref<const Vec>& v) {
  const double n = v.norm();
  if (!(n > 0.0)) {
    throw DomainError("l2_normalize: zero vector");
  }
  return v / n;
}

/// Deterministic random source.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the
/// standard. Distributions are implemented here rather than with <random>
/// distributions, which are implementation-defined, so a seed replays
/// bit-for-bit on any conforming toolchain:
///   uniform()      53 high bits of one draw, scaled to [0, 1)
///   uniform_int(n) rejection sampling on the top bits, unbiased
///   normal()       Box-Muller, one draw pair per call, no caching
/// split(i) derives child seed splitmix64(seed ^ splitmix64(i + 1)).
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next_u64() { return engine_(); }

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).
  std::uint64_t uniform_int(std::uint64_t n) {
    if (n == 0) throw DomainError("Rng::uniform_int: empty range");
    if (n == 1) return 0;
    const int bits = 64 - std::countl_zero(n - 1);
    for (;;) {
      const std::uint64_t r = bits == 64 ? engine_() : (engine_() >> (64 - bits));
      if (r < n) return r;
    }
  }

  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  /// Draw an index with probability proportional to weights[i] (all >= 0, sum > 0).
  std::size_t categorical(const std::vector<double>& weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    if (!(total > 0.0)) throw DomainError("Rng::categorical: weights sum to zero");
    const double r = uniform() * total;
    double acc = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      acc += weights[i];
      if (r < acc) return i;
    }
    // r landed in the rounding gap at the top; return the last positive entry.
    for (std::size_t i = weights.size(); i-- > 0;) {
      if (weights[i] > 0.0) return i;
    }
    return weights.size() - 1;
  }

  template <class It>
  void shuffle(It first, It last) {
    const auto n = static_cast<std::uint64_t>(last - first);
    for (std::uint64_t i = n; i > 1; --i) {
      const auto j = uniform_int(i);
      std::iter_swap(first + (i - 1), first + j);
    }
  }

  Rng split(std::uint64_t index) const { return Rng(splitmix64(seed_ ^ splitmix64(index + 1))); }

  static std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

/// Run body(i) for i in [0, n) on up to `threads` workers. Each index is
/// visited exactly once; the caller guarantees bodies touch disjoint state.
template <class Body>
void parallel_for(std::size_t n, unsigned threads, Body&& body) {
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(threads);
  const std::size_t chunk = (n + threads - 1) / threads;
  std::vector<std::exception_ptr> errors(threads);
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        const std::size_t lo = t * chunk;
        const std::size_t hi = std::min(n, lo + chunk);
        for (std::size_t i = lo; i < hi; ++i) body(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  pool.clear();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace tagmetric
