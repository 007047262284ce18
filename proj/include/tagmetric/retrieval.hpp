// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The tagmetric Authors

#pragma once

// Exhaustive tag-to-song retrieval and ranking metrics.
//
// MAP is the unweighted mean over tags of full-ranking average precision.
// P@10 is hits in the top 10 divided by 10, also averaged over tags.

#include <algorithm>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "tagmetric/core.hpp"
#include "tagmetric/dataset.hpp"
#include "tagmetric/net.hpp"
#include "tagmetric/text.hpp"
#include "tagmetric/wordvec.hpp"

namespace tagmetric {

struct SongIndex {
  RowMat embeddings;  // unit rows
  std::vector<std::string> song_ids;

  std::size_t size() const noexcept { return song_ids.size(); }
};

inline SongIndex build_song_index(const MlpBranch& song_branch, const RetrievalDataset& ds,
                                  std::span<const std::size_t> subset) {
  if (song_branch.d_in() != ds.input_dim()) {
    throw ShapeError("build_song_index: branch d_in " + std::to_string(song_branch.d_in()) +
                     " != dataset input dimension " + std::to_string(ds.input_dim()));
  }
  SongIndex idx;
  idx.embeddings.resize(0, song_branch.d_out());
  if (subset.empty()) return idx;
  RowMat x(static_cast<Eigen::Index>(subset.size()), ds.input_dim());
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < subset.size(); ++i) {
    if (subset[i] >= ds.n_songs()) throw ShapeError("build_song_index: song index out of range");
    x.row(static_cast<Eigen::Index>(i)) = ds.inputs.row(static_cast<Eigen::Index>(subset[i]));
    if (!seen.insert(ds.songs[subset[i]].id).second) throw DomainError("build_song_index: duplicate song in subset");
    idx.song_ids.push_back(ds.songs[subset[i]].id);
  }
  idx.embeddings = forward_batch(song_branch, std::move(x)).output;
  return idx;
}

struct RetrievalHit {
  std::string song_id;
  double distance;
};

/// Index rows ordered by ascending cosine distance to `query`, ties by song id.
inline std::vector<std::size_t> rank_songs(const SongIndex& index, const Eigen::Ref<const Vec>& query,
                                           std::vector<double>* distances = nullptr) {
  require_same_dim(query.size(), index.embeddings.cols(), "rank_songs");
  const double qn = query.norm();
  if (!(qn > 0.0)) throw DomainError("rank_songs: zero-norm query");
  const Vec q = query / qn;
  std::vector<double> dist(index.size());
  const Vec dots = index.embeddings * q;
  for (std::size_t i = 0; i < dist.size(); ++i) dist[i] = 1.0 - std::clamp(dots(static_cast<Eigen::Index>(i)), -1.0, 1.0);
  std::vector<std::size_t> order(index.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return dist[a] != dist[b] ? dist[a] < dist[b] : index.song_ids[a] < index.song_ids[b];
  });
  if (distances) *distances = std::move(dist);
  return order;
}

inline std::vector<RetrievalHit> retrieve_embedding(const Eigen::Ref<const Vec>& tag_embedding, const SongIndex& index,
                                                    std::size_t k) {
  std::vector<double> dist;
  const auto order = rank_songs(index, tag_embedding, &dist);
  std::vector<RetrievalHit> hits;
  for (std::size_t r = 0; r < std::min(k, order.size()); ++r) hits.push_back({index.song_ids[order[r]], dist[order[r]]});
  return hits;
}

/// Top-k songs for a free-text tag resolved through the word-vector table.
inline std::vector<RetrievalHit> retrieve(std::string_view tag, const MlpBranch& tag_branch,
                                          const WordVectorTable& table, const SongIndex& index, std::size_t k) {
  return retrieve_embedding(forward(tag_branch, tag_to_vector(tag, table)), index, k);
}

/// (1 / n_relevant_total) * sum of precision@i over ranks i holding a hit.
inline double average_precision(std::span<const bool> ranked_relevance, std::size_t n_relevant_total) {
  if (n_relevant_total == 0) throw DomainError("average_precision: no relevant items");
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < ranked_relevance.size(); ++i) {
    if (ranked_relevance[i]) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(i + 1);
    }
  }
  if (hits > n_relevant_total) throw DomainError("average_precision: more hits than relevant items");
  return sum / static_cast<double>(n_relevant_total);
}

/// Hits among the first 10 ranks divided by 10.
inline double precision_at_10(std::span<const bool> ranked_relevance) {
  const std::size_t n = std::min<std::size_t>(10, ranked_relevance.size());
  return static_cast<double>(std::count(ranked_relevance.begin(), ranked_relevance.begin() + static_cast<std::ptrdiff_t>(n), true)) / 10.0;
}

struct TagScore {
  std::string tag;
  double ap;
  double p_at_10;
  std::size_t n_relevant;
};

struct EvalReport {
  double map = 0.0;
  double p_at_10 = 0.0;
  std::vector<TagScore> per_tag;
  std::vector<std::pair<std::string, double>> per_category;  // category, mean AP
  std::vector<std::string> excluded_tags;                    // no relevant song in the subset
};

/// Rank every subset song for every vocab tag and score the rankings. Tags
/// without a relevant song in the subset are excluded and listed.
inline EvalReport evaluate_embeddings(const RowMat& tag_embeddings, const SongIndex& index, const RetrievalDataset& ds,
                                      std::span<const std::size_t> subset, unsigned threads = 1) {
  if (subset.empty()) throw DomainError("evaluate: empty song subset");
  if (index.size() != subset.size()) throw ShapeError("evaluate: index does not match subset");
  const std::size_t n_tags = ds.n_tags();
  std::vector<std::optional<TagScore>> scores(n_tags);
  parallel_for(n_tags, threads, [&](std::size_t t) {
    std::vector<bool> rel_by_row(subset.size());
    std::size_t n_rel = 0;
    for (std::size_t i = 0; i < subset.size(); ++i) {
      rel_by_row[i] = ds.has_tag(subset[i], t);
      n_rel += rel_by_row[i];
    }
    if (n_rel == 0) return;
    const auto order = rank_songs(index, tag_embeddings.row(static_cast<Eigen::Index>(t)).transpose());
    std::unique_ptr<bool[]> ranked(new bool[order.size()]);
    for (std::size_t r = 0; r < order.size(); ++r) ranked[r] = rel_by_row[order[r]];
    const std::span<const bool> rel(ranked.get(), order.size());
    scores[t] = TagScore{ds.tag_vocab[t], average_precision(rel, n_rel), precision_at_10(rel), n_rel};
  });
  EvalReport rep;
  std::map<std::string, std::pair<double, std::size_t>> cat;
  for (std::size_t t = 0; t < n_tags; ++t) {
    if (!scores[t]) {
      rep.excluded_tags.push_back(ds.tag_vocab[t]);
      continue;
    }
    rep.per_tag.push_back(*scores[t]);
    const auto it = ds.tag_categories.find(ds.tag_vocab[t]);
    if (it != ds.tag_categories.end()) {
      cat[it->second].first += scores[t]->ap;
      cat[it->second].second += 1;
    }
  }
  if (rep.per_tag.empty()) throw DomainError("evaluate: no tag has a relevant song in the subset");
  double ap_sum = 0.0;
  double p_sum = 0.0;
  for (const auto& s : rep.per_tag) {
    ap_sum += s.ap;
    p_sum += s.p_at_10;
  }
  rep.map = ap_sum / static_cast<double>(rep.per_tag.size());
  rep.p_at_10 = p_sum / static_cast<double>(rep.per_tag.size());
  for (const auto& [name, acc] : cat) rep.per_category.emplace_back(name, acc.first / static_cast<double>(acc.second));
  return rep;
}

/// Embed the vocabulary's tag vectors and the subset's songs, then score.
inline EvalReport evaluate(const MlpBranch& tag_branch, const MlpBranch& song_branch, const RetrievalDataset& ds,
                           std::span<const std::size_t> subset, unsigned threads = 1) {
  if (subset.empty()) throw DomainError("evaluate: empty song subset");
  if (ds.tag_vectors.rows() != static_cast<Eigen::Index>(ds.n_tags())) {
    throw DomainError("evaluate: tag vectors are not bound");
  }
  const auto index = build_song_index(song_branch, ds, subset);
  const RowMat tags = forward_batch(tag_branch, ds.tag_vectors).output;
  return evaluate_embeddings(tags, index, ds, subset, threads);
}

/// Summary line, per-tag lines, then per-category lines.
inline void write_eval_report(std::ostream& out, const EvalReport& rep) {
  out << "summary\tmap=" << text::format_real(rep.map) << "\tp10=" << text::format_real(rep.p_at_10)
      << "\ttags=" << rep.per_tag.size() << '\n';
  out << "tag\tap\tp10\tn_relevant\n";
  for (const auto& s : rep.per_tag) {
    out << s.tag << '\t' << text::format_real(s.ap) << '\t' << text::format_real(s.p_at_10) << '\t' << s.n_relevant
        << '\n';
  }
  for (const auto& [name, ap] : rep.per_category) out << "category\t" << name << '\t' << text::format_real(ap) << '\n';
}

inline void write_hits(std::ostream& out, const std::vector<RetrievalHit>& hits) {
  for (std::size_t r = 0; r < hits.size(); ++r) {
    out << r + 1 << '\t' << hits[r].song_id << '\t' << text::format_real(hits[r].distance) << '\n';
  }
}

}  // namespace tagmetric
