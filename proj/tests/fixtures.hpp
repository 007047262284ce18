// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The tagmetric Authors

#pragma once

#include <string>
#include <vector>

#include "tagmetric/dataset.hpp"

namespace tagmetric::testing {

/// Dataset with the given per-song tag indices, one artist per song, and
/// Gaussian inputs and tag vectors.
inline RetrievalDataset make_dataset(const std::vector<std::vector<std::size_t>>& song_tags, std::size_t n_tags,
                                     Eigen::Index input_dim = 4, Eigen::Index word_dim = 6, std::uint64_t seed = 1) {
  Rng rng(seed);
  RetrievalDataset ds;
  for (std::size_t t = 0; t < n_tags; ++t) ds.tag_vocab.push_back("t" + std::to_string(t));
  ds.inputs.resize(static_cast<Eigen::Index>(song_tags.size()), input_dim);
  ds.tag_vectors.resize(static_cast<Eigen::Index>(n_tags), word_dim);
  for (std::size_t s = 0; s < song_tags.size(); ++s) {
    auto tags = song_tags[s];
    std::sort(tags.begin(), tags.end());
    ds.songs.push_back({"s" + std::to_string(s), "a" + std::to_string(s), tags});
    for (Eigen::Index j = 0; j < input_dim; ++j) ds.inputs(static_cast<Eigen::Index>(s), j) = rng.normal();
  }
  for (Eigen::Index t = 0; t < ds.tag_vectors.rows(); ++t)
    for (Eigen::Index j = 0; j < word_dim; ++j) ds.tag_vectors(t, j) = rng.normal();
  return ds;
}

inline std::vector<std::size_t> all_songs(const RetrievalDataset& ds) {
  std::vector<std::size_t> v(ds.n_songs());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = i;
  return v;
}

inline double total_variation(const std::vector<double>& p, const std::vector<double>& q) {
  double tv = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) tv += std::abs(p[i] - q[i]);
  return tv / 2.0;
}

}  // namespace tagmetric::testing
