// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The tagmetric Authors

#pragma once

// Planted-structure generator for end-to-end tests.
//
//  * every tag t has a latent vector z_t ~ N(0, I) of size latent_dim
//  * tag popularity follows Zipf: P(t) ~ (t + 1)^-zipf_exponent
//  * each song carries 1-3 distinct tags; song s in [0, 4 * tags) is forced to
//    carry tag s mod tags so every tag has at least four songs
//  * acoustic feature = P_f (mean of its tags' z + N(0, noise^2 I)),
//    P_f a fixed Gaussian feature_dim x latent_dim projection
//  * tag word vector = P_w z_t + N(0, word_noise^2 I), P_w word_dim x latent_dim;
//    single-word tags also get a plural token near their vector
//  * users favor one or two Zipf-drawn tags; 80% of their plays come from
//    songs carrying those tags; a song nobody played gets one play from user
//    (song mod users) so every song has a factor row

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "tagmetric/core.hpp"
#include "tagmetric/dataset.hpp"
#include "tagmetric/text.hpp"
#include "tagmetric/wordvec.hpp"

namespace tagmetric {

struct SynthConfig {
  std::size_t songs = 2000;
  std::size_t tags = 50;
  Eigen::Index latent_dim = 16;
  double noise = 0.3;
  double word_noise = 0.1;
  double zipf_exponent = 1.2;
  Eigen::Index feature_dim = 64;
  Eigen::Index word_dim = 300;
  std::size_t songs_per_artist = 4;
  std::size_t users = 0;  // 0: songs / 2
  std::size_t plays_per_user = 20;
  std::uint64_t seed = 0;

  void validate() const {
    if (tags < 2) throw DomainError("synth: retrieval needs at least 2 tags");
    if (songs < 2 * tags) throw DomainError("synth: need at least 2 songs per tag");
    if (latent_dim < 1 || feature_dim < 1 || word_dim < 1) throw DomainError("synth: dimensions must be >= 1");
    if (noise < 0.0 || word_noise < 0.0) throw DomainError("synth: noise must be >= 0");
    if (songs_per_artist < 1) throw DomainError("synth: songs_per_artist must be >= 1");
  }
};

struct SynthPlay {
  std::string user_id;
  std::string song_id;
  std::uint32_t count;
};

struct SynthData {
  std::vector<AnnotationRecord> records;
  SongVectors features;
  std::vector<std::string> feature_order;
  std::vector<SynthPlay> plays;
  WordVectorTable words;
};

inline std::vector<std::string> synth_tag_names(std::size_t n) {
  static const char* const kNames[] = {
      "rock",     "pop",      "jazz",     "electronic", "indie",      "metal",        "folk",
      "blues",    "punk",     "soul",     "classical",  "ambient",    "country",      "reggae",
      "funk",     "hip hop",  "deep house", "smooth jazz", "drum n bass", "acoustic",  "chillout",
      "happy",    "sad",      "mellow",   "energetic",  "romantic",   "dark",         "relaxing",
      "party",    "workout",  "driving",  "sleep",      "guitar",     "piano",        "synth",
      "violin",   "saxophone", "female vocalists", "male vocalists", "instrumental", "80s", "90s",
      "60s",      "70s",      "00s",      "british",    "french",     "german",       "spanish",
      "japanese"};
  constexpr std::size_t kCount = sizeof(kNames) / sizeof(kNames[0]);
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(i < kCount ? std::string(kNames[i]) : "tag" + std::to_string(i));
  }
  return out;
}

inline SynthData generate_synthetic(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  const auto gaussian = [&rng](Eigen::Index rows, Eigen::Index cols, double sd) {
    Mat m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.normal(0.0, sd);
    return m;
  };
  const Eigen::Index nt = static_cast<Eigen::Index>(cfg.tags);
  const Mat latents = gaussian(nt, cfg.latent_dim, 1.0);  // row per tag
  const double proj_sd = 1.0 / std::sqrt(static_cast<double>(cfg.latent_dim));
  const Mat feature_proj = gaussian(cfg.feature_dim, cfg.latent_dim, proj_sd);
  const Mat word_proj = gaussian(cfg.word_dim, cfg.latent_dim, proj_sd);

  std::vector<double> popularity(cfg.tags);
  for (std::size_t t = 0; t < cfg.tags; ++t) popularity[t] = std::pow(static_cast<double>(t + 1), -cfg.zipf_exponent);
  const auto names = synth_tag_names(cfg.tags);

  SynthData out;
  std::vector<std::vector<std::size_t>> song_tags(cfg.songs);
  std::vector<std::vector<std::size_t>> tag_songs(cfg.tags);
  out.features.dim = cfg.feature_dim;
  for (std::size_t s = 0; s < cfg.songs; ++s) {
    auto& tags = song_tags[s];
    if (s < 4 * cfg.tags) tags.push_back(s % cfg.tags);
    const std::size_t want = std::min<std::size_t>(1 + rng.uniform_int(3), cfg.tags);
    while (tags.size() < want) {
      const auto t = rng.categorical(popularity);
      if (std::find(tags.begin(), tags.end(), t) == tags.end()) tags.push_back(t);
    }
    Vec z = Vec::Zero(cfg.latent_dim);
    for (auto t : tags) z += latents.row(static_cast<Eigen::Index>(t)).transpose();
    z /= static_cast<double>(tags.size());
    for (Eigen::Index j = 0; j < z.size(); ++j) z(j) += rng.normal(0.0, cfg.noise);

    AnnotationRecord rec;
    char id[32];
    std::snprintf(id, sizeof id, "S%06zu", s);
    rec.song_id = id;
    std::snprintf(id, sizeof id, "A%05zu", rng.uniform_int(std::max<std::size_t>(1, cfg.songs / cfg.songs_per_artist)));
    rec.artist_id = id;
    for (auto t : tags) {
      rec.tags.push_back(names[t]);
      tag_songs[t].push_back(s);
    }
    out.features.by_id.emplace(rec.song_id, feature_proj * z);
    out.feature_order.push_back(rec.song_id);
    out.records.push_back(std::move(rec));
  }

  WordVectorTable words(cfg.word_dim);
  std::vector<std::pair<std::string, Vec>> plurals;
  for (std::size_t t = 0; t < cfg.tags; ++t) {
    Vec w = word_proj * latents.row(static_cast<Eigen::Index>(t)).transpose();
    for (Eigen::Index j = 0; j < w.size(); ++j) w(j) += rng.normal(0.0, cfg.word_noise);
    const auto key = tag_key(names[t]);
    if (key.find('_') == std::string::npos && !key.ends_with('s') && !std::isdigit(static_cast<unsigned char>(key[0]))) {
      Vec p = w;
      for (Eigen::Index j = 0; j < p.size(); ++j) p(j) += rng.normal(0.0, cfg.word_noise / 2.0);
      plurals.emplace_back(key + "s", std::move(p));
    }
    words.add(key, std::move(w));
  }
  for (auto& [token, v] : plurals) {
    if (!words.find(token)) words.add(std::move(token), std::move(v));
  }
  out.words = std::move(words);

  const std::size_t n_users = cfg.users ? cfg.users : cfg.songs / 2;
  std::vector<bool> played(cfg.songs, false);
  for (std::size_t u = 0; u < n_users; ++u) {
    std::vector<std::size_t> fav{rng.categorical(popularity)};
    if (rng.uniform() < 0.5) fav.push_back(rng.categorical(popularity));
    std::map<std::size_t, std::uint32_t> counts;
    for (std::size_t k = 0; k < cfg.plays_per_user; ++k) {
      std::size_t song;
      if (rng.uniform() < 0.8) {
        const auto& pool = tag_songs[fav[rng.uniform_int(fav.size())]];
        song = pool[rng.uniform_int(pool.size())];
      } else {
        song = rng.uniform_int(cfg.songs);
      }
      std::uint32_t c = 1;
      while (rng.uniform() < 0.5 && c < 50) ++c;
      counts[song] += c;
    }
    char uid[32];
    std::snprintf(uid, sizeof uid, "U%06zu", u);
    for (const auto& [song, c] : counts) {
      out.plays.push_back({uid, out.records[song].song_id, c});
      played[song] = true;
    }
  }
  for (std::size_t s = 0; s < cfg.songs; ++s) {
    if (played[s]) continue;
    char uid[32];
    std::snprintf(uid, sizeof uid, "U%06zu", s % n_users);
    out.plays.push_back({uid, out.records[s].song_id, 1});
  }
  return out;
}

/// Write annotations.tsv, features.tsv, plays.tsv and vectors.txt to `dir`.
inline void write_synthetic(const SynthData& data, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const auto path = [&](const char* name) { return (std::filesystem::path(dir) / name).string(); };
  {
    auto out = text::open_out(path("annotations.tsv"));
    write_annotations(out, data.records);
  }
  {
    auto out = text::open_out(path("features.tsv"));
    for (const auto& id : data.feature_order) {
      const auto& v = data.features.by_id.at(id);
      out << id << '\t';
      for (Eigen::Index j = 0; j < v.size(); ++j) out << (j ? " " : "") << text::format_real(v(j));
      out << '\n';
    }
  }
  {
    auto out = text::open_out(path("plays.tsv"));
    for (const auto& p : data.plays) out << p.user_id << '\t' << p.song_id << '\t' << p.count << '\n';
  }
  {
    auto out = text::open_out(path("vectors.txt"));
    write_word_vectors(out, data.words);
  }
}

/// Filter, bind acoustic inputs and word vectors: the in-memory path used by tests.
inline RetrievalDataset synthetic_dataset(const SynthData& data) {
  auto filtered = topk_tag_filter(data.records, [&] {
    std::set<std::string> distinct;
    for (const auto& r : data.records) distinct.insert(r.tags.begin(), r.tags.end());
    return distinct.size();
  }());
  auto ds = bind_inputs(filtered, InputSource::acoustic, nullptr, &data.features);
  bind_tag_vectors(ds, data.words);
  return ds;
}

}  // namespace tagmetric
