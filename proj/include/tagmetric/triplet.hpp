// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The tagmetric Authors

#pragma once

// Triplet hinge loss over cosine distance and the three triplet samplers:
// random, balanced (uniform anchor tag, in-batch negatives) and
// balanced-weighted (in-batch negatives drawn by distance weighting).

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "tagmetric/core.hpp"
#include "tagmetric/dataset.hpp"
#include "tagmetric/net.hpp"

namespace tagmetric {

inline double triplet_loss(const Eigen::Ref<const Vec>& anchor, const Eigen::Ref<const Vec>& positive,
                           const Eigen::Ref<const Vec>& negative, double margin) {
  return std::max(0.0, cosine_distance(anchor, positive) - cosine_distance(anchor, negative) + margin);
}

/// Gradients of cosine_distance(u, v) with respect to u and v.
inline std::pair<Vec, Vec> cosine_distance_grad(const Eigen::Ref<const Vec>& u, const Eigen::Ref<const Vec>& v) {
  require_same_dim(u.size(), v.size(), "cosine_distance_grad");
  const double nu = u.norm();
  const double nv = v.norm();
  if (!(nu > 0.0) || !(nv > 0.0)) throw DomainError("cosine_distance_grad: zero-norm input");
  const double c = u.dot(v) / (nu * nv);
  Vec du = -(v / (nu * nv) - c * u / (nu * nu));
  Vec dv = -(u / (nu * nv) - c * v / (nv * nv));
  return {std::move(du), std::move(dv)};
}

struct TripletGrad {
  double loss = 0.0;
  Vec anchor;
  Vec positive;
  Vec negative;
};

/// Loss and its gradients. The hinge is active only when
/// D_ap - D_an + margin > 0; otherwise all gradients are zero.
inline TripletGrad triplet_loss_grad(const Eigen::Ref<const Vec>& anchor, const Eigen::Ref<const Vec>& positive,
                                     const Eigen::Ref<const Vec>& negative, double margin) {
  const double d_ap = cosine_distance(anchor, positive);
  const double d_an = cosine_distance(anchor, negative);
  const double z = d_ap - d_an + margin;
  TripletGrad g;
  if (!(z > 0.0)) {
    g.anchor = Vec::Zero(anchor.size());
    g.positive = Vec::Zero(positive.size());
    g.negative = Vec::Zero(negative.size());
    return g;
  }
  g.loss = z;
  auto [da_p, dp] = cosine_distance_grad(anchor, positive);
  auto [da_n, dn] = cosine_distance_grad(anchor, negative);
  g.anchor = da_p - da_n;
  g.positive = std::move(dp);
  g.negative = -dn;
  return g;
}

struct Triplet {
  std::size_t anchor_tag;
  std::size_t positive_song;
  std::size_t negative_song;

  bool operator==(const Triplet&) const = default;
};

struct TripletBatch {
  std::vector<Triplet> triplets;

  bool operator==(const TripletBatch&) const = default;
};

enum class SamplingStrategy { random, balanced, balanced_weighted };

inline SamplingStrategy parse_strategy(std::string_view s) {
  if (s == "random") return SamplingStrategy::random;
  if (s == "balanced") return SamplingStrategy::balanced;
  if (s == "balanced_weighted") return SamplingStrategy::balanced_weighted;
  throw DomainError("unknown sampler '" + std::string(s) + "' (valid: random, balanced, balanced_weighted)");
}

inline const char* to_string(SamplingStrategy s) {
  switch (s) {
    case SamplingStrategy::random: return "random";
    case SamplingStrategy::balanced: return "balanced";
    case SamplingStrategy::balanced_weighted: return "balanced_weighted";
  }
  return "?";
}

struct SamplerConfig {
  SamplingStrategy strategy = SamplingStrategy::balanced_weighted;
  /// Cap on the inverse-density weight, in unnormalized weight units.
  double lambda_clip = 1e6;
  /// Unit-sphere Euclidean distances below this are clipped up to it.
  double cutoff_d_min = 0.5;
  /// Redraws allowed per batch slot before giving up.
  int max_attempts = 100;

  void validate() const {
    if (!(lambda_clip > 0.0) || !std::isfinite(lambda_clip)) throw DomainError("lambda_clip must be finite and > 0");
    if (!(cutoff_d_min > 0.0) || !(cutoff_d_min < std::sqrt(2.0))) {
      throw DomainError("cutoff_d_min must lie in (0, sqrt(2))");
    }
    if (max_attempts < 1) throw DomainError("max_attempts must be >= 1");
  }
};

/// Distance-weighted sampling probabilities.
///
/// Cosine distances are mapped to unit-sphere chord lengths d = sqrt(2 D),
/// clipped below at cutoff_d_min. Pairwise distances between uniform points on
/// the unit sphere in R^n have density q(d) ~ d^(n-2) (1 - d^2/4)^((n-3)/2);
/// each weight is min(lambda_clip, 1/q(d)) with q unnormalized, evaluated in
/// log space. The result is normalized to sum to 1.
inline std::vector<double> dw_weights(std::span<const double> cosine_distances, Eigen::Index embed_dim,
                                      const SamplerConfig& config) {
  if (cosine_distances.empty()) throw DomainError("dw_weights: empty input");
  if (embed_dim < 3) throw DomainError("dw_weights: embedding dimension must be >= 3");
  config.validate();
  const double n = static_cast<double>(embed_dim);
  const double log_cap = std::log(config.lambda_clip);
  std::vector<double> logw(cosine_distances.size());
  for (std::size_t i = 0; i < cosine_distances.size(); ++i) {
    const double dc = cosine_distances[i];
    if (!(dc >= 0.0 && dc <= 2.0)) throw DomainError("dw_weights: cosine distance outside [0, 2]");
    const double d = std::max(std::sqrt(2.0 * dc), config.cutoff_d_min);
    const double rest = 1.0 - d * d / 4.0;
    double log_q = (n - 2.0) * std::log(d);
    if (n > 3.0) log_q += (n - 3.0) / 2.0 * (rest > 0.0 ? std::log(rest) : -std::numeric_limits<double>::infinity());
    logw[i] = std::min(log_cap, -log_q);
  }
  const double top = *std::max_element(logw.begin(), logw.end());
  double total = 0.0;
  for (auto& w : logw) {
    w = std::exp(w - top);
    total += w;
  }
  for (auto& w : logw) w /= total;
  return logw;
}

/// Train-split view of a dataset: songs, per-tag positives and negatives.
class TripletPool {
 public:
  TripletPool(const RetrievalDataset& ds, std::span<const std::size_t> subset)
      : ds_(&ds), songs_(subset.begin(), subset.end()), positives_(ds.n_tags()), negatives_(ds.n_tags()) {
    for (auto s : songs_) {
      if (s >= ds.n_songs()) throw ShapeError("TripletPool: song index out of range");
      if (ds.songs[s].tags.empty()) throw SamplingError("TripletPool: song '" + ds.songs[s].id + "' has no tags");
    }
    for (std::size_t t = 0; t < ds.n_tags(); ++t) {
      for (auto s : songs_) (ds.has_tag(s, t) ? positives_[t] : negatives_[t]).push_back(s);
    }
  }

  const RetrievalDataset& dataset() const noexcept { return *ds_; }
  const std::vector<std::size_t>& songs() const noexcept { return songs_; }
  const std::vector<std::size_t>& positives(std::size_t tag) const { return positives_[tag]; }
  const std::vector<std::size_t>& negatives(std::size_t tag) const { return negatives_[tag]; }
  std::size_t n_tags() const noexcept { return positives_.size(); }

 private:
  const RetrievalDataset* ds_;
  std::vector<std::size_t> songs_;
  std::vector<std::vector<std::size_t>> positives_;
  std::vector<std::vector<std::size_t>> negatives_;
};

/// Song uniform over the pool, anchor uniform over its tags, negative uniform
/// over pool songs lacking the anchor.
inline TripletBatch sample_random(const TripletPool& pool, std::size_t batch_size, Rng& rng) {
  if (pool.songs().empty()) throw SamplingError("sample_random: empty song pool");
  for (std::size_t t = 0; t < pool.n_tags(); ++t) {
    if (!pool.positives(t).empty() && pool.negatives(t).empty()) {
      throw SamplingError("sample_random: tag '" + pool.dataset().tag_vocab[t] + "' is carried by every song");
    }
  }
  TripletBatch batch;
  batch.triplets.reserve(batch_size);
  for (std::size_t i = 0; i < batch_size; ++i) {
    const auto song = pool.songs()[rng.uniform_int(pool.songs().size())];
    const auto& tags = pool.dataset().songs[song].tags;
    const auto tag = tags[rng.uniform_int(tags.size())];
    const auto& neg = pool.negatives(tag);
    batch.triplets.push_back({tag, song, neg[rng.uniform_int(neg.size())]});
  }
  return batch;
}

/// Embeds tag and song indices (rows of the result are unit embeddings).
struct EmbeddingSource {
  std::function<RowMat(std::span<const std::size_t>)> tags;
  std::function<RowMat(std::span<const std::size_t>)> songs;
};

inline EmbeddingSource branch_embeddings(const RetrievalDataset& ds, const MlpBranch& tag_branch,
                                         const MlpBranch& song_branch) {
  return {
      [&ds, &tag_branch](std::span<const std::size_t> idx) {
        RowMat x(static_cast<Eigen::Index>(idx.size()), ds.tag_vectors.cols());
        for (std::size_t i = 0; i < idx.size(); ++i) x.row(static_cast<Eigen::Index>(i)) = ds.tag_vectors.row(static_cast<Eigen::Index>(idx[i]));
        return forward_batch(tag_branch, std::move(x)).output;
      },
      [&ds, &song_branch](std::span<const std::size_t> idx) {
        RowMat x(static_cast<Eigen::Index>(idx.size()), ds.inputs.cols());
        for (std::size_t i = 0; i < idx.size(); ++i) x.row(static_cast<Eigen::Index>(i)) = ds.inputs.row(static_cast<Eigen::Index>(idx[i]));
        return forward_batch(song_branch, std::move(x)).output;
      },
  };
}

namespace detail {

/// Distinct positives of the batch, in slot order.
inline std::vector<std::size_t> distinct_positives(const std::vector<Triplet>& slots) {
  std::vector<std::size_t> out;
  for (const auto& t : slots) {
    if (std::find(out.begin(), out.end(), t.positive_song) == out.end()) out.push_back(t.positive_song);
  }
  return out;
}

/// Anchors uniform over the vocabulary, positives uniform among the anchor's
/// songs; slots whose in-batch negative pool is empty are redrawn.
inline std::vector<Triplet> balanced_anchors(const TripletPool& pool, std::size_t batch_size,
                                             const SamplerConfig& config, Rng& rng) {
  if (pool.n_tags() == 0) throw SamplingError("balanced sampling: empty tag vocabulary");
  for (std::size_t t = 0; t < pool.n_tags(); ++t) {
    if (pool.positives(t).empty()) {
      throw SamplingError("balanced sampling: tag '" + pool.dataset().tag_vocab[t] + "' has no positive songs");
    }
  }
  const auto& ds = pool.dataset();
  const auto draw = [&](Triplet& slot) {
    slot.anchor_tag = rng.uniform_int(pool.n_tags());
    const auto& pos = pool.positives(slot.anchor_tag);
    slot.positive_song = pos[rng.uniform_int(pos.size())];
  };
  std::vector<Triplet> slots(batch_size);
  for (auto& s : slots) draw(s);
  std::vector<int> attempts(batch_size, 0);
  for (;;) {
    const auto distinct = distinct_positives(slots);
    std::size_t bad = batch_size;
    for (std::size_t j = 0; j < batch_size && bad == batch_size; ++j) {
      const bool empty = std::all_of(distinct.begin(), distinct.end(),
                                     [&](std::size_t s) { return ds.has_tag(s, slots[j].anchor_tag); });
      if (empty) bad = j;
    }
    if (bad == batch_size) break;
    if (++attempts[bad] > config.max_attempts) {
      throw SamplingError("balanced sampling: no in-batch negative for tag '" + ds.tag_vocab[slots[bad].anchor_tag] +
                          "' after " + std::to_string(config.max_attempts) + " attempts");
    }
    draw(slots[bad]);
  }
  return slots;
}

inline std::vector<std::size_t> negative_pool(const RetrievalDataset& ds, const std::vector<std::size_t>& distinct,
                                              std::size_t anchor) {
  std::vector<std::size_t> out;
  for (auto s : distinct)
    if (!ds.has_tag(s, anchor)) out.push_back(s);
  return out;
}

}  // namespace detail

/// Uniform anchor tag, uniform positive, negative uniform over the batch's
/// distinct positive songs that lack the anchor.
inline TripletBatch sample_balanced(const TripletPool& pool, std::size_t batch_size, Rng& rng,
                                    const SamplerConfig& config = {}) {
  auto slots = detail::balanced_anchors(pool, batch_size, config, rng);
  const auto distinct = detail::distinct_positives(slots);
  for (auto& s : slots) {
    const auto cand = detail::negative_pool(pool.dataset(), distinct, s.anchor_tag);
    s.negative_song = cand[rng.uniform_int(cand.size())];
  }
  return {std::move(slots)};
}

/// Pick one candidate index with dw_weights over anchor-candidate cosine distances.
inline std::size_t pick_weighted_negative(const Eigen::Ref<const Vec>& anchor, const RowMat& candidates,
                                          const SamplerConfig& config, Rng& rng) {
  std::vector<double> dist(static_cast<std::size_t>(candidates.rows()));
  for (Eigen::Index i = 0; i < candidates.rows(); ++i) {
    dist[static_cast<std::size_t>(i)] = cosine_distance(anchor, candidates.row(i).transpose());
  }
  if (dist.size() == 1) return 0;
  return rng.categorical(dw_weights(dist, anchor.size(), config));
}

/// As sample_balanced, but each negative is drawn from the in-batch pool with
/// dw_weights on current-model distances to the anchor tag embedding.
inline TripletBatch sample_balanced_weighted(const TripletPool& pool, std::size_t batch_size,
                                             const EmbeddingSource& embed, const SamplerConfig& config, Rng& rng) {
  config.validate();
  auto slots = detail::balanced_anchors(pool, batch_size, config, rng);
  const auto distinct = detail::distinct_positives(slots);
  std::vector<std::size_t> anchors;
  for (const auto& s : slots)
    if (std::find(anchors.begin(), anchors.end(), s.anchor_tag) == anchors.end()) anchors.push_back(s.anchor_tag);
  const RowMat tag_emb = embed.tags(anchors);
  const RowMat song_emb = embed.songs(distinct);
  for (auto& s : slots) {
    const auto a = static_cast<Eigen::Index>(std::find(anchors.begin(), anchors.end(), s.anchor_tag) - anchors.begin());
    std::vector<Eigen::Index> rows;
    for (std::size_t i = 0; i < distinct.size(); ++i) {
      if (!pool.dataset().has_tag(distinct[i], s.anchor_tag)) rows.push_back(static_cast<Eigen::Index>(i));
    }
    RowMat cand(static_cast<Eigen::Index>(rows.size()), song_emb.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) cand.row(static_cast<Eigen::Index>(i)) = song_emb.row(rows[i]);
    const auto pick = pick_weighted_negative(tag_emb.row(a).transpose(), cand, config, rng);
    s.negative_song = distinct[static_cast<std::size_t>(rows[pick])];
  }
  return {std::move(slots)};
}

inline TripletBatch sample_balanced_weighted(const TripletPool& pool, std::size_t batch_size,
                                             const MlpBranch& tag_branch, const MlpBranch& song_branch,
                                             const SamplerConfig& config, Rng& rng) {
  return sample_balanced_weighted(pool, batch_size, branch_embeddings(pool.dataset(), tag_branch, song_branch),
                                  config, rng);
}

}  // namespace tagmetric
