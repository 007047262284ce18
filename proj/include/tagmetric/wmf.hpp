// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The tagmetric Authors

#pragma once

// Weighted matrix factorization of implicit play counts, solved by
// alternating least squares.
//
// Objective over every (user, song) cell:
//   sum c_ui (p_ui - x_u . y_i)^2 + reg (sum |x_u|^2 + sum |y_i|^2)
// with p_ui = [r_ui > 0] and confidence c_ui = 1 + alpha r_ui (1 when unobserved).

#include <functional>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "tagmetric/core.hpp"
#include "tagmetric/text.hpp"

namespace tagmetric {

struct Interaction {
  std::size_t user;
  std::size_t song;
  std::uint32_t count;
};

/// User x song play counts in CSR form with a CSC copy for song-side sweeps.
class SparseInteractions {
 public:
  SparseInteractions() = default;

  SparseInteractions(std::size_t n_users, std::size_t n_songs, std::vector<Interaction> cells)
      : n_users_(n_users), n_songs_(n_songs) {
    for (const auto& c : cells) {
      if (c.user >= n_users || c.song >= n_songs) throw ShapeError("SparseInteractions: index out of range");
      if (c.count < 1) throw DomainError("SparseInteractions: play count must be >= 1");
    }
    std::sort(cells.begin(), cells.end(), [](const Interaction& a, const Interaction& b) {
      return a.user != b.user ? a.user < b.user : a.song < b.song;
    });
    for (std::size_t i = 1; i < cells.size(); ++i) {
      if (cells[i].user == cells[i - 1].user && cells[i].song == cells[i - 1].song) {
        throw DomainError("SparseInteractions: duplicate (user " + std::to_string(cells[i].user) + ", song " +
                          std::to_string(cells[i].song) + ")");
      }
    }
    build(cells, n_users_, row_ptr_, row_idx_, row_val_, /*by_user=*/true);
    build(cells, n_songs_, col_ptr_, col_idx_, col_val_, /*by_user=*/false);
  }

  std::size_t n_users() const noexcept { return n_users_; }
  std::size_t n_songs() const noexcept { return n_songs_; }
  std::size_t nnz() const noexcept { return row_idx_.size(); }

  /// Songs played by `user` and their counts.
  std::span<const std::size_t> user_songs(std::size_t user) const {
    return {row_idx_.data() + row_ptr_[user], row_ptr_[user + 1] - row_ptr_[user]};
  }
  std::span<const std::uint32_t> user_counts(std::size_t user) const {
    return {row_val_.data() + row_ptr_[user], row_ptr_[user + 1] - row_ptr_[user]};
  }
  /// Users who played `song` and their counts.
  std::span<const std::size_t> song_users(std::size_t song) const {
    return {col_idx_.data() + col_ptr_[song], col_ptr_[song + 1] - col_ptr_[song]};
  }
  std::span<const std::uint32_t> song_counts(std::size_t song) const {
    return {col_val_.data() + col_ptr_[song], col_ptr_[song + 1] - col_ptr_[song]};
  }

 private:
  static void build(const std::vector<Interaction>& cells, std::size_t n, std::vector<std::size_t>& ptr,
                    std::vector<std::size_t>& idx, std::vector<std::uint32_t>& val, bool by_user) {
    ptr.assign(n + 1, 0);
    for (const auto& c : cells) ++ptr[(by_user ? c.user : c.song) + 1];
    for (std::size_t i = 0; i < n; ++i) ptr[i + 1] += ptr[i];
    idx.resize(cells.size());
    val.resize(cells.size());
    std::vector<std::size_t> fill(ptr.begin(), ptr.end() - 1);
    // cells are sorted by (user, song), so each song column also comes out sorted by user.
    for (const auto& c : cells) {
      const std::size_t key = by_user ? c.user : c.song;
      idx[fill[key]] = by_user ? c.song : c.user;
      val[fill[key]] = c.count;
      ++fill[key];
    }
  }

  std::size_t n_users_ = 0;
  std::size_t n_songs_ = 0;
  std::vector<std::size_t> row_ptr_{0}, row_idx_;
  std::vector<std::uint32_t> row_val_;
  std::vector<std::size_t> col_ptr_{0}, col_idx_;
  std::vector<std::uint32_t> col_val_;
};

/// Factor matrices. Rows of `users` (n_users x k) and `songs` (n_songs x k).
/// Only `songs` feeds the retrieval model; user factors are kept so the
/// objective can be evaluated and may be discarded afterwards.
struct FactorModel {
  Mat users;
  Mat songs;
  double reg = 0.01;
  double alpha = 40.0;

  Eigen::Index k() const noexcept { return songs.cols(); }
};

inline double wmf_objective(const SparseInteractions& r, const FactorModel& m) {
  if (static_cast<std::size_t>(m.users.rows()) != r.n_users() ||
      static_cast<std::size_t>(m.songs.rows()) != r.n_songs() || m.users.cols() != m.songs.cols()) {
    throw ShapeError("wmf_objective: factor shapes do not match interactions");
  }
  // All cells as if unobserved: sum_ui (x_u . y_i)^2 = trace(UtU VtV).
  const Mat gu = m.users.transpose() * m.users;
  const Mat gv = m.songs.transpose() * m.songs;
  double total = (gu.array() * gv.array()).sum();
  for (std::size_t u = 0; u < r.n_users(); ++u) {
    const auto songs = r.user_songs(u);
    const auto counts = r.user_counts(u);
    for (std::size_t j = 0; j < songs.size(); ++j) {
      const double s = m.users.row(u).dot(m.songs.row(songs[j]));
      const double c = 1.0 + m.alpha * counts[j];
      total += c * (1.0 - s) * (1.0 - s) - s * s;
    }
  }
  total += m.reg * (m.users.squaredNorm() + m.songs.squaredNorm());
  return std::max(total, 0.0);
}

/// Observed entries of one row: column indices, confidences c, preferences p.
struct SparseRow {
  std::vector<std::size_t> index;
  std::vector<double> confidence;
  std::vector<double> preference;
};

/// Minimize sum_i c_i (p_i - x . y_i)^2 + reg |x|^2 over x, where y_i are rows
/// of `fixed` and unlisted columns have c = 1, p = 0. `gram` must equal
/// fixed^T fixed. Only observed rows are touched beyond the Gram matrix.
inline Vec als_solve_row(const Mat& fixed, const Mat& gram, const SparseRow& row, double reg) {
  const Eigen::Index k = fixed.cols();
  if (gram.rows() != k || gram.cols() != k) throw ShapeError("als_solve_row: gram shape");
  if (row.confidence.size() != row.index.size() || row.preference.size() != row.index.size()) {
    throw ShapeError("als_solve_row: ragged sparse row");
  }
  if (reg < 0.0) throw DomainError("als_solve_row: negative regularization");
  Mat a = gram;
  a.diagonal().array() += reg;
  Vec b = Vec::Zero(k);
  for (std::size_t j = 0; j < row.index.size(); ++j) {
    if (row.index[j] >= static_cast<std::size_t>(fixed.rows())) throw ShapeError("als_solve_row: index out of range");
    const auto y = fixed.row(row.index[j]).transpose();
    a.noalias() += (row.confidence[j] - 1.0) * y * y.transpose();
    b.noalias() += row.confidence[j] * row.preference[j] * y;
  }
  Eigen::LLT<Mat> llt(a);
  const double scale = std::max(1.0, a.diagonal().cwiseAbs().maxCoeff());
  if (llt.info() != Eigen::Success || !(llt.matrixLLT().diagonal().minCoeff() > 1e-12 * std::sqrt(scale))) {
    throw NumericalError("als_solve_row: normal matrix is singular; use reg > 0");
  }
  return llt.solve(b);
}

inline Vec als_solve_row(const Mat& fixed, const SparseRow& row, double reg) {
  return als_solve_row(fixed, Mat(fixed.transpose() * fixed), row, reg);
}

struct AlsOptions {
  Eigen::Index k = 200;
  double reg = 0.01;
  double alpha = 40.0;
  int sweeps = 15;
  unsigned threads = 1;
  /// Called after every half-sweep with (model, half_sweep_index), index 0 = first user half.
  std::function<void(const FactorModel&, int)> on_half_sweep;
};

namespace detail {

inline void als_half_sweep(const Mat& fixed, Mat& solved, std::size_t n_rows, double reg, double alpha,
                           unsigned threads, const std::function<std::span<const std::size_t>(std::size_t)>& idx,
                           const std::function<std::span<const std::uint32_t>(std::size_t)>& cnt) {
  const Mat gram = fixed.transpose() * fixed;
  parallel_for(n_rows, threads, [&](std::size_t r) {
    const auto cols = idx(r);
    const auto counts = cnt(r);
    SparseRow row;
    row.index.assign(cols.begin(), cols.end());
    row.confidence.resize(cols.size());
    row.preference.assign(cols.size(), 1.0);
    for (std::size_t j = 0; j < cols.size(); ++j) row.confidence[j] = 1.0 + alpha * counts[j];
    solved.row(r) = als_solve_row(fixed, gram, row, reg).transpose();
  });
}

}  // namespace detail

/// Factor `r` by ALS: each sweep solves all user rows, then all song rows.
/// Factors start i.i.d. uniform in [-0.01, 0.01] drawn from `rng` (users first).
inline FactorModel als_factorize(const SparseInteractions& r, const AlsOptions& opt, Rng& rng) {
  if (opt.k < 1) throw DomainError("als_factorize: k must be >= 1");
  if (opt.sweeps < 1) throw DomainError("als_factorize: sweeps must be >= 1");
  if (!(opt.alpha > 0.0)) throw DomainError("als_factorize: alpha must be > 0");
  if (opt.reg < 0.0) throw DomainError("als_factorize: reg must be >= 0");
  FactorModel m;
  m.reg = opt.reg;
  m.alpha = opt.alpha;
  m.users.resize(static_cast<Eigen::Index>(r.n_users()), opt.k);
  m.songs.resize(static_cast<Eigen::Index>(r.n_songs()), opt.k);
  for (Eigen::Index i = 0; i < m.users.rows(); ++i)
    for (Eigen::Index j = 0; j < opt.k; ++j) m.users(i, j) = rng.uniform(-0.01, 0.01);
  for (Eigen::Index i = 0; i < m.songs.rows(); ++i)
    for (Eigen::Index j = 0; j < opt.k; ++j) m.songs(i, j) = rng.uniform(-0.01, 0.01);

  for (int sweep = 0; sweep < opt.sweeps; ++sweep) {
    detail::als_half_sweep(
        m.songs, m.users, r.n_users(), opt.reg, opt.alpha, opt.threads,
        [&](std::size_t u) { return r.user_songs(u); }, [&](std::size_t u) { return r.user_counts(u); });
    if (opt.on_half_sweep) opt.on_half_sweep(m, 2 * sweep);
    detail::als_half_sweep(
        m.users, m.songs, r.n_songs(), opt.reg, opt.alpha, opt.threads,
        [&](std::size_t i) { return r.song_users(i); }, [&](std::size_t i) { return r.song_counts(i); });
    if (opt.on_half_sweep) opt.on_half_sweep(m, 2 * sweep + 1);
  }
  if (!m.users.allFinite() || !m.songs.allFinite()) throw NumericalError("als_factorize: non-finite factors");
  return m;
}

/// Play log with external ids mapped to dense indices (first-appearance order).
struct PlayLog {
  SparseInteractions interactions;
  std::vector<std::string> user_ids;
  std::vector<std::string> song_ids;
};

/// Parse `user_id<TAB>song_id<TAB>count` lines.
inline PlayLog read_plays(std::istream& in, const std::string& source = "plays") {
  PlayLog log;
  std::unordered_map<std::string, std::size_t> users, songs;
  std::vector<Interaction> cells;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto body = text::trim(line);
    if (body.empty() || body.front() == '#') continue;
    const auto f = text::split(body, '\t');
    if (f.size() != 3 || f[0].empty() || f[1].empty()) {
      throw ParseError(source, lineno, "expected user_id<TAB>song_id<TAB>count");
    }
    const auto count = text::parse_int<std::uint32_t>(text::trim(f[2]));
    if (!count || *count < 1) throw ParseError(source, lineno, "count must be a positive integer");
    auto [uit, unew] = users.try_emplace(std::string(f[0]), log.user_ids.size());
    if (unew) log.user_ids.emplace_back(f[0]);
    auto [sit, snew] = songs.try_emplace(std::string(f[1]), log.song_ids.size());
    if (snew) log.song_ids.emplace_back(f[1]);
    cells.push_back({uit->second, sit->second, *count});
  }
  try {
    log.interactions = SparseInteractions(log.user_ids.size(), log.song_ids.size(), std::move(cells));
  } catch (const DomainError& e) {
    throw ParseError(source + ": " + e.what());
  }
  return log;
}

inline PlayLog load_plays(const std::string& path) {
  auto in = text::open_in(path);
  return read_plays(in, path);
}

/// Song factor export: header `#wmf k=<k> reg=<reg> alpha=<alpha>`, then
/// `song_id v1 ... vk` per song.
inline void write_song_factors(std::ostream& out, const FactorModel& m, const std::vector<std::string>& song_ids) {
  if (static_cast<std::size_t>(m.songs.rows()) != song_ids.size()) throw ShapeError("write_song_factors: id count");
  out << "#wmf k=" << m.k() << " reg=" << text::format_real(m.reg) << " alpha=" << text::format_real(m.alpha)
      << '\n';
  for (std::size_t i = 0; i < song_ids.size(); ++i) {
    out << song_ids[i];
    for (Eigen::Index j = 0; j < m.k(); ++j) out << ' ' << text::format_exact(m.songs(static_cast<Eigen::Index>(i), j));
    out << '\n';
  }
}

}  // namespace tagmetric
