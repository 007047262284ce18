// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The tagmetric Authors

#pragma once

// Pretrained word vectors in the plain-text interchange format:
//
//   <vocab_count> <dim>
//   <token> <v1> ... <v_dim>
//
// Tokens may be n-grams joined by underscores (deep_house).

#include <algorithm>
#include <istream>
#include <ostream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "tagmetric/core.hpp"
#include "tagmetric/text.hpp"

namespace tagmetric {

class WordVectorTable {
 public:
  WordVectorTable() = default;
  explicit WordVectorTable(Eigen::Index dim) : dim_(dim) {}

  Eigen::Index dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return tokens_.size(); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }
  const Vec& vector(std::size_t i) const { return vectors_[i]; }

  void add(std::string token, Vec v) {
    if (token.empty()) throw DomainError("WordVectorTable: empty token");
    require_same_dim(v.size(), dim_, "WordVectorTable::add");
    if (index_.contains(token)) throw DomainError("WordVectorTable: duplicate token '" + token + "'");
    index_.emplace(token, tokens_.size());
    tokens_.push_back(std::move(token));
    vectors_.push_back(std::move(v));
  }

  const Vec* find(const std::string& token) const {
    const auto it = index_.find(token);
    return it == index_.end() ? nullptr : &vectors_[it->second];
  }

 private:
  Eigen::Index dim_ = 0;
  std::vector<std::string> tokens_;
  std::vector<Vec> vectors_;
  std::unordered_map<std::string, std::size_t> index_;
};

inline WordVectorTable read_word_vectors(std::istream& in, const std::string& source = "vectors") {
  std::string line;
  std::size_t lineno = 0;
  auto next = [&]() -> bool {
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!text::trim(line).empty()) return true;
    }
    return false;
  };
  if (!next()) throw ParseError(source, lineno, "missing header '<vocab_count> <dim>'");
  const auto head = text::split_ws(line);
  std::optional<std::size_t> count;
  std::optional<Eigen::Index> dim;
  if (head.size() == 2) {
    count = text::parse_int<std::size_t>(head[0]);
    dim = text::parse_int<Eigen::Index>(head[1]);
  }
  if (!count || !dim || *dim < 1) throw ParseError(source, lineno, "malformed header, expected '<vocab_count> <dim>'");

  WordVectorTable table(*dim);
  while (next()) {
    const auto f = text::split(text::trim(line), ' ');
    if (f.empty() || f[0].empty()) throw ParseError(source, lineno, "missing token");
    if (f.size() != static_cast<std::size_t>(*dim) + 1) {
      throw ParseError(source, lineno,
                       "expected " + std::to_string(*dim) + " values, found " + std::to_string(f.size() - 1));
    }
    Vec v(*dim);
    for (Eigen::Index j = 0; j < *dim; ++j) {
      const auto x = text::parse_double(f[static_cast<std::size_t>(j) + 1]);
      if (!x) throw ParseError(source, lineno, "malformed value '" + std::string(f[static_cast<std::size_t>(j) + 1]) + "'");
      v(j) = *x;
    }
    std::string token(f[0]);
    if (table.find(token)) throw ParseError(source, lineno, "duplicate token '" + token + "'");
    table.add(std::move(token), std::move(v));
  }
  if (table.size() != *count) {
    throw ParseError(source, lineno,
                     "header declares " + std::to_string(*count) + " entries, found " + std::to_string(table.size()));
  }
  return table;
}

inline WordVectorTable load_word_vectors(const std::string& path) {
  auto in = text::open_in(path);
  return read_word_vectors(in, path);
}

inline void write_word_vectors(std::ostream& out, const WordVectorTable& table) {
  out << table.size() << ' ' << table.dim() << '\n';
  for (std::size_t i = 0; i < table.size(); ++i) {
    out << table.tokens()[i];
    const auto& v = table.vector(i);
    for (Eigen::Index j = 0; j < v.size(); ++j) out << ' ' << text::format_real(v(j));
    out << '\n';
  }
}

/// Lowercased tag words, split on whitespace and underscores.
inline std::vector<std::string> tag_words(std::string_view tag) {
  std::vector<std::string> words;
  std::string cur;
  for (char c : text::lowercase(tag)) {
    if (c == ' ' || c == '_' || c == '\t') {
      if (!cur.empty()) words.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) words.push_back(std::move(cur));
  return words;
}

/// Canonical lookup key: lowercase words joined by '_' ("Deep House" -> "deep_house").
inline std::string tag_key(std::string_view tag) {
  std::string key;
  for (const auto& w : tag_words(tag)) {
    if (!key.empty()) key.push_back('_');
    key += w;
  }
  return key;
}

/// Resolve a tag: joined n-gram first, then the mean of the word vectors
/// that exist. Throws OovError when nothing resolves.
inline Vec tag_to_vector(std::string_view tag, const WordVectorTable& table) {
  const auto words = tag_words(tag);
  if (words.empty()) throw DomainError("tag_to_vector: empty tag");
  if (const Vec* hit = table.find(tag_key(tag))) return *hit;
  Vec sum = Vec::Zero(table.dim());
  int found = 0;
  for (const auto& w : words) {
    if (const Vec* v = table.find(w)) {
      sum += *v;
      ++found;
    }
  }
  if (found == 0) throw OovError(std::string(tag));
  return sum / found;
}

struct WordNeighbor {
  std::string token;
  double similarity;
};

/// Top-k tokens by raw cosine similarity to the resolved query, excluding the
/// query's own token. Ties go to the lexicographically smaller token. Zero
/// vectors in the table have no defined similarity and are skipped.
inline std::vector<WordNeighbor> nearest_words(std::string_view token, const WordVectorTable& table, std::size_t k) {
  const Vec q = tag_to_vector(token, table);
  const double qn = q.norm();
  if (!(qn > 0.0)) throw DomainError("nearest_words: query vector has zero norm");
  const auto self = tag_key(token);
  std::vector<WordNeighbor> all;
  all.reserve(table.size());
  for (std::size_t i = 0; i < table.size(); ++i) {
    if (table.tokens()[i] == self) continue;
    const auto& v = table.vector(i);
    const double vn = v.norm();
    if (!(vn > 0.0)) continue;
    all.push_back({table.tokens()[i], q.dot(v) / (qn * vn)});
  }
  const auto better = [](const WordNeighbor& a, const WordNeighbor& b) {
    return a.similarity != b.similarity ? a.similarity > b.similarity : a.token < b.token;
  };
  k = std::min(k, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end(), better);
  all.resize(k);
  return all;
}

}  // namespace tagmetric
