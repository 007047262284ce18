// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The tagmetric Authors

#pragma once

#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "tagmetric/checkpoint.hpp"
#include "tagmetric/dataset.hpp"
#include "tagmetric/net.hpp"
#include "tagmetric/retrieval.hpp"
#include "tagmetric/triplet.hpp"

namespace tagmetric {

struct TrainConfig {
  int epochs = 200;
  std::size_t triplets_per_epoch = 10000;
  std::size_t batch_size = 128;
  double lr = 1e-4;
  double weight_decay = 1e-4;
  double margin = 0.2;
  SamplerConfig sampler;
  std::uint64_t seed = 0;
  int validation_every = 10;
  /// When set, checkpoints are written here at every validation report.
  std::string checkpoint_dir;
  unsigned threads = 1;

  void validate() const {
    if (epochs < 0) throw DomainError("epochs must be >= 0");
    if (triplets_per_epoch < 1) throw DomainError("triplets_per_epoch must be >= 1");
    if (batch_size < 1) throw DomainError("batch size must be >= 1");
    if (!(lr > 0.0)) throw DomainError("lr must be > 0");
    if (weight_decay < 0.0) throw DomainError("weight decay must be >= 0");
    if (!(margin > 0.0)) throw DomainError("margin must be > 0");
    if (validation_every < 1) throw DomainError("validation_every must be >= 1");
    sampler.validate();
  }
};

struct ReportRow {
  int epoch;
  double loss;
  double map;
  double p_at_10;
  double seconds;
};

struct TrainReport {
  std::vector<ReportRow> rows;
  /// Epoch of the highest validation MAP, -1 when nothing was reported.
  int best_epoch = -1;
};

struct TrainResult {
  MlpBranch tag_branch;
  MlpBranch song_branch;
  AdamState tag_adam;
  AdamState song_adam;
  TrainReport report;
};

struct TrainHooks {
  std::function<void(const TripletBatch&)> on_batch;
  std::function<void(int epoch, double batch_loss)> on_batch_loss;
};

inline std::vector<CheckpointEntry> make_checkpoint(const TrainResult& r) {
  return {{r.tag_branch, r.tag_adam}, {r.song_branch, r.song_adam}};
}

/// One optimizer step on a batch. Loss and gradients are averaged over the
/// batch's triplets; each branch receives exactly one Adam update.
/// Returns the mean batch loss.
inline double train_step(const RetrievalDataset& ds, const TripletBatch& batch, MlpBranch& tag_branch,
                         MlpBranch& song_branch, AdamState& tag_adam, AdamState& song_adam, const TrainConfig& cfg) {
  if (batch.triplets.empty()) return 0.0;
  std::vector<std::size_t> tags, songs;
  std::vector<Eigen::Index> tag_row(ds.n_tags(), -1), song_row(ds.n_songs(), -1);
  const auto slot = [](std::vector<std::size_t>& list, std::vector<Eigen::Index>& row, std::size_t id) {
    if (row[id] < 0) {
      row[id] = static_cast<Eigen::Index>(list.size());
      list.push_back(id);
    }
    return row[id];
  };
  for (const auto& t : batch.triplets) {
    slot(tags, tag_row, t.anchor_tag);
    slot(songs, song_row, t.positive_song);
    slot(songs, song_row, t.negative_song);
  }
  RowMat tx(static_cast<Eigen::Index>(tags.size()), ds.tag_vectors.cols());
  for (std::size_t i = 0; i < tags.size(); ++i) tx.row(static_cast<Eigen::Index>(i)) = ds.tag_vectors.row(static_cast<Eigen::Index>(tags[i]));
  RowMat sx(static_cast<Eigen::Index>(songs.size()), ds.inputs.cols());
  for (std::size_t i = 0; i < songs.size(); ++i) sx.row(static_cast<Eigen::Index>(i)) = ds.inputs.row(static_cast<Eigen::Index>(songs[i]));
  const auto tc = forward_batch(tag_branch, std::move(tx));
  const auto sc = forward_batch(song_branch, std::move(sx));

  RowMat tag_up = RowMat::Zero(tc.output.rows(), tc.output.cols());
  RowMat song_up = RowMat::Zero(sc.output.rows(), sc.output.cols());
  const double scale = 1.0 / static_cast<double>(batch.triplets.size());
  double loss = 0.0;
  for (const auto& t : batch.triplets) {
    const auto a = tag_row[t.anchor_tag];
    const auto p = song_row[t.positive_song];
    const auto n = song_row[t.negative_song];
    const auto g = triplet_loss_grad(tc.output.row(a).transpose(), sc.output.row(p).transpose(),
                                     sc.output.row(n).transpose(), cfg.margin);
    loss += g.loss;
    tag_up.row(a) += scale * g.anchor.transpose();
    song_up.row(p) += scale * g.positive.transpose();
    song_up.row(n) += scale * g.negative.transpose();
  }
  loss *= scale;
  if (!std::isfinite(loss)) return loss;
  const auto tg = backward_batch(tag_branch, tc, tag_up);
  const auto sg = backward_batch(song_branch, sc, song_up);
  adam_step(tag_branch, tg.params, tag_adam, cfg.lr, cfg.weight_decay);
  adam_step(song_branch, sg.params, song_adam, cfg.lr, cfg.weight_decay);
  return loss;
}

/// Initial branches for `ds` under `seed`: tag branch from stream 0, song
/// branch from stream 1 of Rng(seed). Sampling uses stream 2.
inline TrainResult init_model(const RetrievalDataset& ds, std::uint64_t seed) {
  const Rng root(seed);
  Rng tag_rng = root.split(0);
  Rng song_rng = root.split(1);
  TrainResult r;
  r.tag_branch = make_branch("tag", ds.tag_vectors.cols(), tag_rng);
  r.song_branch = make_branch("song", ds.input_dim(), song_rng);
  r.tag_adam = AdamState::for_branch(r.tag_branch);
  r.song_adam = AdamState::for_branch(r.song_branch);
  return r;
}

inline TrainResult train(const RetrievalDataset& ds, const SplitAssignment& split, const TrainConfig& cfg,
                         const TrainHooks& hooks = {}) {
  cfg.validate();
  if (ds.tag_vectors.rows() != static_cast<Eigen::Index>(ds.n_tags()) || ds.n_tags() == 0) {
    throw DomainError("train: tag vectors are not bound for the vocabulary");
  }
  if (split.train.empty()) throw DomainError("train: empty training split");
  TrainResult r = init_model(ds, cfg.seed);
  if (cfg.epochs == 0) return r;

  const TripletPool pool(ds, split.train);
  Rng sample_rng = Rng(cfg.seed).split(2);
  const auto start = std::chrono::steady_clock::now();
  double best_map = -1.0;
  const bool save = !cfg.checkpoint_dir.empty();
  if (save) std::filesystem::create_directories(cfg.checkpoint_dir);
  const auto ckpt_path = [&](const std::string& name) {
    return (std::filesystem::path(cfg.checkpoint_dir) / name).string();
  };

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    double loss_sum = 0.0;
    std::size_t remaining = cfg.triplets_per_epoch;
    while (remaining > 0) {
      const std::size_t b = std::min(cfg.batch_size, remaining);
      remaining -= b;
      const auto diverged = [&](const std::string& why) {
        if (save) save_checkpoint(ckpt_path("diverged.ckpt"), make_checkpoint(r));
        return NumericalError("train: " + why + " at epoch " + std::to_string(epoch) +
                              (save ? "; diagnostic checkpoint written to " + ckpt_path("diverged.ckpt") : ""));
      };
      double loss;
      try {
        TripletBatch batch;
        switch (cfg.sampler.strategy) {
          case SamplingStrategy::random: batch = sample_random(pool, b, sample_rng); break;
          case SamplingStrategy::balanced: batch = sample_balanced(pool, b, sample_rng, cfg.sampler); break;
          case SamplingStrategy::balanced_weighted:
            batch = sample_balanced_weighted(pool, b, r.tag_branch, r.song_branch, cfg.sampler, sample_rng);
            break;
        }
        if (hooks.on_batch) hooks.on_batch(batch);
        loss = train_step(ds, batch, r.tag_branch, r.song_branch, r.tag_adam, r.song_adam, cfg);
      } catch (const NumericalError& e) {
        throw diverged(e.what());
      }
      if (!std::isfinite(loss)) throw diverged("non-finite loss");
      if (hooks.on_batch_loss) hooks.on_batch_loss(epoch, loss);
      loss_sum += loss * static_cast<double>(b);
    }
    if (epoch % cfg.validation_every == 0 || epoch == cfg.epochs) {
      ReportRow row{epoch, loss_sum / static_cast<double>(cfg.triplets_per_epoch), 0.0, 0.0, 0.0};
      if (!split.valid.empty()) {
        const auto rep = evaluate(r.tag_branch, r.song_branch, ds, split.valid, cfg.threads);
        row.map = rep.map;
        row.p_at_10 = rep.p_at_10;
      }
      row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      r.report.rows.push_back(row);
      if (save) save_checkpoint(ckpt_path("epoch_" + std::to_string(epoch) + ".ckpt"), make_checkpoint(r));
      if (row.map > best_map) {
        best_map = row.map;
        r.report.best_epoch = epoch;
        if (save) save_checkpoint(ckpt_path("best.ckpt"), make_checkpoint(r));
      }
    }
  }
  return r;
}

inline void write_train_report(std::ostream& out, const TrainReport& rep) {
  out << "epoch\tloss\tmap\tp10\tseconds\n";
  for (const auto& row : rep.rows) {
    out << row.epoch << '\t' << text::format_real(row.loss) << '\t' << text::format_real(row.map) << '\t'
        << text::format_real(row.p_at_10) << '\t' << text::format_real(row.seconds) << '\n';
  }
}

}  // namespace tagmetric
