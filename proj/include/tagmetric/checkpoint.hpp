// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The tagmetric Authors

#pragma once

// Text checkpoints. Layout:
//
//   [branch <name> d_in=<d>]
//   w1 <rows> <cols>
//   <rows lines of cols values>
//   b1 <n>
//   <n values>
//   w2 <rows> <cols>
//   ...
//   b2 <n>
//   ...
//   [adam t=<t>]            optional, belongs to the preceding branch
//   m.w1 <rows> <cols>
//   ...
//   v.b2 <n>
//   ...
//
// Values carry 9 significant digits; lines starting with '#' are comments.

#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "tagmetric/net.hpp"
#include "tagmetric/text.hpp"

namespace tagmetric {

struct CheckpointEntry {
  MlpBranch branch;
  std::optional<AdamState> adam;
};

namespace detail {

inline void write_matrix(std::ostream& out, const std::string& label, const Mat& m) {
  out << label << ' ' << m.rows() << ' ' << m.cols() << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out << ' ';
      out << text::format_exact(m(i, j));
    }
    out << '\n';
  }
}

inline void write_vector(std::ostream& out, const std::string& label, const Vec& v) {
  out << label << ' ' << v.size() << '\n';
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) out << ' ';
    out << text::format_exact(v(i));
  }
  out << '\n';
}

inline void write_params(std::ostream& out, const std::string& prefix, const GradientSet& g) {
  write_matrix(out, prefix + "w1", g.w1);
  write_vector(out, prefix + "b1", g.b1);
  write_matrix(out, prefix + "w2", g.w2);
  write_vector(out, prefix + "b2", g.b2);
}

class CheckpointReader {
 public:
  CheckpointReader(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {}

  /// Next non-blank, non-comment line; false at EOF.
  bool next(std::string& line) {
    while (std::getline(in_, line)) {
      ++lineno_;
      const auto t = text::trim(line);
      if (t.empty() || t.front() == '#') continue;
      line = std::string(t);
      return true;
    }
    return false;
  }

  [[noreturn]] void fail(const std::string& what) const { throw ParseError(source_, lineno_, what); }

  std::vector<double> values(std::size_t expected) {
    std::string line;
    if (!next(line)) fail("unexpected end of file");
    const auto f = text::split_ws(line);
    if (f.size() != expected) {
      fail("expected " + std::to_string(expected) + " values, found " + std::to_string(f.size()));
    }
    std::vector<double> out;
    out.reserve(expected);
    for (auto s : f) {
      const auto v = text::parse_double(s);
      if (!v) fail("malformed number '" + std::string(s) + "'");
      out.push_back(*v);
    }
    return out;
  }

  Mat matrix(const std::string& label) {
    std::string line;
    if (!next(line)) fail("unexpected end of file, expected " + label);
    const auto f = text::split_ws(line);
    if (f.size() != 3 || f[0] != label) fail("expected '" + label + " <rows> <cols>'");
    const auto r = text::parse_int<Eigen::Index>(f[1]);
    const auto c = text::parse_int<Eigen::Index>(f[2]);
    if (!r || !c || *r < 1 || *c < 1) fail("bad matrix shape");
    Mat m(*r, *c);
    for (Eigen::Index i = 0; i < *r; ++i) {
      const auto row = values(static_cast<std::size_t>(*c));
      for (Eigen::Index j = 0; j < *c; ++j) m(i, j) = row[static_cast<std::size_t>(j)];
    }
    return m;
  }

  Vec vector(const std::string& label) {
    std::string line;
    if (!next(line)) fail("unexpected end of file, expected " + label);
    const auto f = text::split_ws(line);
    if (f.size() != 2 || f[0] != label) fail("expected '" + label + " <n>'");
    const auto n = text::parse_int<Eigen::Index>(f[1]);
    if (!n || *n < 1) fail("bad vector length");
    const auto vals = values(static_cast<std::size_t>(*n));
    return Eigen::Map<const Vec>(vals.data(), *n);
  }

  GradientSet params(const std::string& prefix) {
    GradientSet g;
    g.w1 = matrix(prefix + "w1");
    g.b1 = vector(prefix + "b1");
    g.w2 = matrix(prefix + "w2");
    g.b2 = vector(prefix + "b2");
    if (g.b1.size() != g.w1.cols() || g.w2.rows() != g.w1.cols() || g.b2.size() != g.w2.cols()) {
      fail("inconsistent parameter shapes in '" + prefix + "' block");
    }
    return g;
  }

 private:
  std::istream& in_;
  std::string source_;
  std::size_t lineno_ = 0;
};

}  // namespace detail

inline void write_checkpoint(std::ostream& out, const std::vector<CheckpointEntry>& entries) {
  for (const auto& e : entries) {
    const auto& b = e.branch;
    out << "[branch " << b.name << " d_in=" << b.d_in() << "]\n";
    detail::write_params(out, "", GradientSet{b.w1, b.b1, b.w2, b.b2});
    if (e.adam) {
      out << "[adam t=" << e.adam->t << "]\n";
      detail::write_params(out, "m.", e.adam->m);
      detail::write_params(out, "v.", e.adam->v);
    }
  }
}

inline std::vector<CheckpointEntry> read_checkpoint(std::istream& in, const std::string& source = "checkpoint") {
  detail::CheckpointReader rd(in, source);
  std::vector<CheckpointEntry> entries;
  std::string line;
  while (rd.next(line)) {
    if (line.starts_with("[branch ") && line.back() == ']') {
      const auto f = text::split_ws(std::string_view(line).substr(1, line.size() - 2));
      if (f.size() != 3 || !f[2].starts_with("d_in=")) rd.fail("expected '[branch <name> d_in=<d>]'");
      const auto d_in = text::parse_int<Eigen::Index>(f[2].substr(5));
      if (!d_in) rd.fail("bad d_in");
      auto p = rd.params("");
      if (p.w1.rows() != *d_in) rd.fail("w1 rows do not match d_in");
      MlpBranch b;
      b.name = std::string(f[1]);
      b.w1 = std::move(p.w1);
      b.b1 = std::move(p.b1);
      b.w2 = std::move(p.w2);
      b.b2 = std::move(p.b2);
      entries.push_back({std::move(b), std::nullopt});
    } else if (line.starts_with("[adam t=") && line.back() == ']') {
      if (entries.empty() || entries.back().adam) rd.fail("[adam] section without a preceding branch");
      const auto t = text::parse_int<long long>(std::string_view(line).substr(8, line.size() - 9));
      if (!t || *t < 0) rd.fail("bad adam step counter");
      AdamState s;
      s.t = *t;
      s.m = rd.params("m.");
      s.v = rd.params("v.");
      if (!s.m.matches(entries.back().branch) || !s.v.matches(entries.back().branch)) {
        rd.fail("adam moments do not match branch shape");
      }
      entries.back().adam = std::move(s);
    } else {
      rd.fail("unexpected line '" + line + "'");
    }
  }
  return entries;
}

inline void save_checkpoint(const std::string& path, const std::vector<CheckpointEntry>& entries) {
  auto out = text::open_out(path);
  write_checkpoint(out, entries);
  if (!out) throw IoError("failed writing '" + path + "'");
}

inline std::vector<CheckpointEntry> load_checkpoint(const std::string& path) {
  auto in = text::open_in(path);
  return read_checkpoint(in, path);
}

/// The branch named `name`; throws if absent.
inline const CheckpointEntry& find_branch(const std::vector<CheckpointEntry>& entries, const std::string& name) {
  for (const auto& e : entries) {
    if (e.branch.name == name) return e;
  }
  throw ParseError("checkpoint has no branch named '" + name + "'");
}

}  // namespace tagmetric
