// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The tagmetric Authors

#pragma once

// Annotation ingest, top-K tag filtering, artist-level splits, and binding
// of per-song input vectors and per-tag word vectors.
//
// File formats (tab-separated):
//   annotations.tsv  song_id<TAB>artist_id<TAB>tag1,tag2,...
//   categories.tsv   tag<TAB>category
//   features.tsv     song_id<TAB>v1 v2 ... vD
// Factor files written by `factorize` (space-separated, '#' header) are
// read by the same song-vector loader.

#include <algorithm>
#include <array>
#include <cmath>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "tagmetric/core.hpp"
#include "tagmetric/text.hpp"
#include "tagmetric/wordvec.hpp"

namespace tagmetric {

struct AnnotationRecord {
  std::string song_id;
  std::string artist_id;
  std::vector<std::string> tags;
};

inline std::vector<AnnotationRecord> read_annotations(std::istream& in, const std::string& source = "annotations") {
  std::vector<AnnotationRecord> records;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (text::trim(line).empty() || line.front() == '#') continue;
    const auto f = text::split(line, '\t');
    if (f.size() != 3) throw ParseError(source, lineno, "expected song_id<TAB>artist_id<TAB>tags");
    AnnotationRecord r{std::string(text::trim(f[0])), std::string(text::trim(f[1])), {}};
    if (r.song_id.empty()) throw ParseError(source, lineno, "empty song_id");
    if (r.artist_id.empty()) throw ParseError(source, lineno, "empty artist_id");
    for (auto raw : text::split(f[2], ',')) {
      auto tag = text::lowercase(text::trim(raw));
      if (tag.empty()) continue;
      if (std::find(r.tags.begin(), r.tags.end(), tag) == r.tags.end()) r.tags.push_back(std::move(tag));
    }
    if (r.tags.empty()) throw ParseError(source, lineno, "song '" + r.song_id + "' has no tags");
    if (!seen.insert(r.song_id).second) {
      throw ParseError(source, lineno, "duplicate song_id '" + r.song_id + "' (merge annotations first)");
    }
    records.push_back(std::move(r));
  }
  return records;
}

inline std::vector<AnnotationRecord> load_annotations(const std::string& path) {
  auto in = text::open_in(path);
  return read_annotations(in, path);
}

inline void write_annotations(std::ostream& out, const std::vector<AnnotationRecord>& records) {
  for (const auto& r : records) {
    out << r.song_id << '\t' << r.artist_id << '\t';
    for (std::size_t i = 0; i < r.tags.size(); ++i) out << (i ? "," : "") << r.tags[i];
    out << '\n';
  }
}

struct FilteredAnnotations {
  std::vector<AnnotationRecord> records;
  std::vector<std::string> tag_vocab;  // most frequent first
};

/// Keep the K tags carried by the most songs (ties: lexicographically
/// smaller tag wins), strip other tags, drop songs left without tags.
inline FilteredAnnotations topk_tag_filter(const std::vector<AnnotationRecord>& records, std::size_t k) {
  if (k < 1) throw DomainError("topk_tag_filter: K must be >= 1");
  std::map<std::string, std::size_t> freq;
  for (const auto& r : records)
    for (const auto& t : r.tags) ++freq[t];
  if (freq.size() < k) {
    throw DomainError("topk_tag_filter: only " + std::to_string(freq.size()) + " distinct tags, K = " +
                      std::to_string(k));
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(freq.begin(), freq.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  FilteredAnnotations out;
  std::unordered_set<std::string> keep;
  for (std::size_t i = 0; i < k; ++i) {
    out.tag_vocab.push_back(ranked[i].first);
    keep.insert(ranked[i].first);
  }
  for (const auto& r : records) {
    AnnotationRecord f{r.song_id, r.artist_id, {}};
    for (const auto& t : r.tags)
      if (keep.contains(t)) f.tags.push_back(t);
    if (!f.tags.empty()) out.records.push_back(std::move(f));
  }
  return out;
}

enum class SplitPart { train, valid, test };

struct SplitAssignment {
  std::vector<std::size_t> train;
  std::vector<std::size_t> valid;
  std::vector<std::size_t> test;
  std::array<double, 3> ratios{0.8, 0.1, 0.1};
  std::uint64_t seed = 0;

  const std::vector<std::size_t>& part(SplitPart p) const {
    return p == SplitPart::train ? train : p == SplitPart::valid ? valid : test;
  }
};

/// Artist-level split over songs whose artist is artists[i].
///
/// Distinct artists (first-appearance order) are shuffled by the seeded Rng,
/// then walked in order. With running song count `before`, an artist with n
/// songs goes to the first split whose cumulative quota boundary exceeds
/// before + n/2, so each boundary is missed by at most half an artist.
inline SplitAssignment artist_level_split(const std::vector<std::string>& artists, std::array<double, 3> ratios,
                                          std::uint64_t seed) {
  for (double r : ratios) {
    if (!(r > 0.0)) throw DomainError("artist_level_split: ratios must be positive");
  }
  if (std::abs(ratios[0] + ratios[1] + ratios[2] - 1.0) > 1e-9) {
    throw DomainError("artist_level_split: ratios must sum to 1");
  }
  std::vector<std::string> order;
  std::unordered_map<std::string, std::vector<std::size_t>> songs_of;
  for (std::size_t i = 0; i < artists.size(); ++i) {
    auto& list = songs_of[artists[i]];
    if (list.empty()) order.push_back(artists[i]);
    list.push_back(i);
  }
  Rng rng(seed);
  rng.shuffle(order.begin(), order.end());

  const double n = static_cast<double>(artists.size());
  const std::array<double, 2> bounds{ratios[0] * n, (ratios[0] + ratios[1]) * n};
  SplitAssignment s;
  s.ratios = ratios;
  s.seed = seed;
  double before = 0.0;
  for (const auto& a : order) {
    const auto& songs = songs_of[a];
    const double mid = before + static_cast<double>(songs.size()) / 2.0;
    auto& dst = mid < bounds[0] ? s.train : mid < bounds[1] ? s.valid : s.test;
    dst.insert(dst.end(), songs.begin(), songs.end());
    before += static_cast<double>(songs.size());
  }
  for (auto* part : {&s.train, &s.valid, &s.test}) std::sort(part->begin(), part->end());
  if (s.train.empty() || s.valid.empty() || s.test.empty()) {
    throw SplitError("artist_level_split: a split came out empty (" + std::to_string(order.size()) +
                     " artists); try a different seed or ratios");
  }
  return s;
}

inline SplitAssignment artist_level_split(const std::vector<AnnotationRecord>& records,
                                          std::array<double, 3> ratios = {0.8, 0.1, 0.1}, std::uint64_t seed = 0) {
  std::vector<std::string> artists;
  artists.reserve(records.size());
  for (const auto& r : records) artists.push_back(r.artist_id);
  return artist_level_split(artists, ratios, seed);
}

/// Per-song vectors keyed by song id, read from a features.tsv or a factor file.
struct SongVectors {
  Eigen::Index dim = 0;
  std::unordered_map<std::string, Vec> by_id;
};

inline SongVectors read_song_vectors(std::istream& in, const std::string& source = "song vectors") {
  SongVectors sv;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto body = text::trim(line);
    if (body.empty() || body.front() == '#') continue;
    auto cut = body.find('\t');
    if (cut == std::string_view::npos) cut = body.find(' ');
    if (cut == std::string_view::npos || cut == 0) throw ParseError(source, lineno, "expected song_id followed by values");
    const std::string id(body.substr(0, cut));
    const auto f = text::split_ws(body.substr(cut + 1));
    if (f.empty()) throw ParseError(source, lineno, "no values for '" + id + "'");
    if (sv.dim == 0) sv.dim = static_cast<Eigen::Index>(f.size());
    if (static_cast<Eigen::Index>(f.size()) != sv.dim) {
      throw ParseError(source, lineno,
                       "expected " + std::to_string(sv.dim) + " values, found " + std::to_string(f.size()));
    }
    Vec v(sv.dim);
    for (Eigen::Index j = 0; j < sv.dim; ++j) {
      const auto x = text::parse_double(f[static_cast<std::size_t>(j)]);
      if (!x || !std::isfinite(*x)) throw ParseError(source, lineno, "malformed value");
      v(j) = *x;
    }
    if (!sv.by_id.emplace(id, std::move(v)).second) throw ParseError(source, lineno, "duplicate song_id '" + id + "'");
  }
  return sv;
}

inline SongVectors load_song_vectors(const std::string& path) {
  auto in = text::open_in(path);
  return read_song_vectors(in, path);
}

inline const std::array<std::string_view, 7> kTagCategories{"genre",      "mood",     "location", "language",
                                                             "instrument", "activity", "decade"};

inline std::map<std::string, std::string> read_categories(std::istream& in, const std::string& source = "categories") {
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty() || line.front() == '#') continue;
    const auto f = text::split(text::trim(line), '\t');
    if (f.size() != 2) throw ParseError(source, lineno, "expected tag<TAB>category");
    const auto tag = text::lowercase(text::trim(f[0]));
    const auto cat = text::lowercase(text::trim(f[1]));
    if (std::find(kTagCategories.begin(), kTagCategories.end(), cat) == kTagCategories.end()) {
      throw ParseError(source, lineno, "unknown category '" + cat + "'");
    }
    out[tag] = cat;
  }
  return out;
}

inline std::map<std::string, std::string> load_categories(const std::string& path) {
  auto in = text::open_in(path);
  return read_categories(in, path);
}

enum class InputSource { cultural, acoustic, concat };

inline InputSource parse_input_source(std::string_view s) {
  if (s == "cultural") return InputSource::cultural;
  if (s == "acoustic") return InputSource::acoustic;
  if (s == "concat") return InputSource::concat;
  throw DomainError("unknown source '" + std::string(s) + "' (expected cultural, acoustic or concat)");
}

struct Song {
  std::string id;
  std::string artist;
  std::vector<std::size_t> tags;  // sorted vocab indices
};

/// Songs with tags, per-song input vectors (rows of `inputs`) and per-tag word
/// vectors (rows of `tag_vectors`, filled by bind_tag_vectors).
struct RetrievalDataset {
  std::vector<Song> songs;
  RowMat inputs;
  std::vector<std::string> tag_vocab;
  RowMat tag_vectors;
  std::map<std::string, std::string> tag_categories;

  std::size_t n_songs() const noexcept { return songs.size(); }
  std::size_t n_tags() const noexcept { return tag_vocab.size(); }
  Eigen::Index input_dim() const noexcept { return inputs.cols(); }

  bool has_tag(std::size_t song, std::size_t tag) const {
    const auto& t = songs[song].tags;
    return std::binary_search(t.begin(), t.end(), tag);
  }

  std::vector<std::string> artists() const {
    std::vector<std::string> a;
    a.reserve(songs.size());
    for (const auto& s : songs) a.push_back(s.artist);
    return a;
  }
};

/// Attach input vectors: cultural factors, acoustic features, or their
/// concatenation (cultural first).
inline RetrievalDataset bind_inputs(const FilteredAnnotations& filtered, InputSource source,
                                    const SongVectors* cultural, const SongVectors* acoustic) {
  const bool need_c = source != InputSource::acoustic;
  const bool need_a = source != InputSource::cultural;
  if (need_c && !cultural) throw BindingError("bind_inputs: source requires a cultural factor file");
  if (need_a && !acoustic) throw BindingError("bind_inputs: source requires an acoustic feature file");
  const Eigen::Index dc = need_c ? cultural->dim : 0;
  const Eigen::Index da = need_a ? acoustic->dim : 0;

  std::vector<std::string> missing;
  std::size_t n_missing = 0;
  for (const auto& r : filtered.records) {
    const bool miss = (need_c && !cultural->by_id.contains(r.song_id)) || (need_a && !acoustic->by_id.contains(r.song_id));
    if (miss) {
      ++n_missing;
      if (missing.size() < 10) missing.push_back(r.song_id);
    }
  }
  if (n_missing) {
    std::string msg = "bind_inputs: " + std::to_string(n_missing) + " song(s) have no input vector:";
    for (const auto& id : missing) msg += " " + id;
    if (n_missing > missing.size()) msg += " ...";
    throw BindingError(msg);
  }

  RetrievalDataset ds;
  ds.tag_vocab = filtered.tag_vocab;
  std::unordered_map<std::string, std::size_t> tag_index;
  for (std::size_t i = 0; i < ds.tag_vocab.size(); ++i) {
    if (!tag_index.emplace(ds.tag_vocab[i], i).second) throw BindingError("bind_inputs: duplicate vocab tag");
  }
  ds.inputs.resize(static_cast<Eigen::Index>(filtered.records.size()), dc + da);
  for (std::size_t i = 0; i < filtered.records.size(); ++i) {
    const auto& r = filtered.records[i];
    Song s{r.song_id, r.artist_id, {}};
    for (const auto& t : r.tags) {
      const auto it = tag_index.find(t);
      if (it == tag_index.end()) throw BindingError("bind_inputs: tag '" + t + "' not in vocabulary");
      s.tags.push_back(it->second);
    }
    std::sort(s.tags.begin(), s.tags.end());
    s.tags.erase(std::unique(s.tags.begin(), s.tags.end()), s.tags.end());
    if (s.tags.empty()) throw BindingError("bind_inputs: song '" + r.song_id + "' has no tags");
    const auto row = static_cast<Eigen::Index>(i);
    if (need_c) ds.inputs.row(row).head(dc) = cultural->by_id.at(r.song_id).transpose();
    if (need_a) ds.inputs.row(row).tail(da) = acoustic->by_id.at(r.song_id).transpose();
    ds.songs.push_back(std::move(s));
  }
  return ds;
}

/// Resolve every vocab tag through the word-vector table.
inline void bind_tag_vectors(RetrievalDataset& ds, const WordVectorTable& table) {
  ds.tag_vectors.resize(static_cast<Eigen::Index>(ds.n_tags()), table.dim());
  for (std::size_t t = 0; t < ds.n_tags(); ++t) {
    ds.tag_vectors.row(static_cast<Eigen::Index>(t)) = tag_to_vector(ds.tag_vocab[t], table).transpose();
  }
}

inline void write_split(std::ostream& out, const RetrievalDataset& ds, const SplitAssignment& s) {
  std::vector<const char*> label(ds.n_songs(), nullptr);
  for (auto i : s.train) label[i] = "train";
  for (auto i : s.valid) label[i] = "valid";
  for (auto i : s.test) label[i] = "test";
  for (std::size_t i = 0; i < ds.n_songs(); ++i) {
    if (label[i]) out << ds.songs[i].id << '\t' << label[i] << '\n';
  }
}

/// Read `song_id<TAB>train|valid|test` lines back into indices of `ds`.
/// Songs of `ds` not listed are left out of every part.
inline SplitAssignment read_split(std::istream& in, const RetrievalDataset& ds, const std::string& source = "split") {
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < ds.n_songs(); ++i) index.emplace(ds.songs[i].id, i);
  SplitAssignment s;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    const auto f = text::split(text::trim(line), '\t');
    if (f.size() != 2) throw ParseError(source, lineno, "expected song_id<TAB>part");
    const auto it = index.find(std::string(f[0]));
    if (it == index.end()) continue;
    if (f[1] == "train") s.train.push_back(it->second);
    else if (f[1] == "valid") s.valid.push_back(it->second);
    else if (f[1] == "test") s.test.push_back(it->second);
    else throw ParseError(source, lineno, "unknown split part '" + std::string(f[1]) + "'");
  }
  for (auto* part : {&s.train, &s.valid, &s.test}) std::sort(part->begin(), part->end());
  return s;
}

}  // namespace tagmetric
