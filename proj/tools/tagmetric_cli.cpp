// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The tagmetric Authors

// Command-line front end. Exit codes: 0 success, 1 runtime error, 2 usage error.

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tagmetric/tagmetric.hpp"

namespace fs = std::filesystem;
using namespace tagmetric;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InputFlags {
  std::string annotations;
  std::string vectors;
  std::string source = "acoustic";
  std::string factors;
  std::string features;
  std::string categories;
  std::size_t top_k = 0;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--annotations", annotations, "annotations.tsv (song_id, artist_id, tags)")->required();
    cmd->add_option("--vectors", vectors, "word-vector text file")->required();
    cmd->add_option("--source", source, "song representation")
        ->check(CLI::IsMember({"cultural", "acoustic", "concat"}))
        ->capture_default_str();
    cmd->add_option("--factors", factors, "song factor file from `factorize` (cultural, concat)");
    cmd->add_option("--features", features, "features.tsv (acoustic, concat)");
    cmd->add_option("--categories", categories, "categories.tsv for per-category MAP");
    cmd->add_option("--top-k", top_k, "keep the K most frequent tags; 0 keeps all [artifact default; published runs used 100]")
        ->capture_default_str();
  }

  void check() const {
    const auto src = parse_input_source(source);
    if (src != InputSource::acoustic && factors.empty()) throw UsageError("--source " + source + " requires --factors");
    if (src != InputSource::cultural && features.empty()) throw UsageError("--source " + source + " requires --features");
  }

  RetrievalDataset load() const {
    const auto records = load_annotations(annotations);
    std::size_t k = top_k;
    if (k == 0) {
      std::set<std::string> distinct;
      for (const auto& r : records) distinct.insert(r.tags.begin(), r.tags.end());
      k = distinct.size();
    }
    const auto filtered = topk_tag_filter(records, k);
    const auto src = parse_input_source(source);
    std::optional<SongVectors> cultural, acoustic;
    if (src != InputSource::acoustic) cultural = load_song_vectors(factors);
    if (src != InputSource::cultural) acoustic = load_song_vectors(features);
    auto ds = bind_inputs(filtered, src, cultural ? &*cultural : nullptr, acoustic ? &*acoustic : nullptr);
    bind_tag_vectors(ds, load_word_vectors(vectors));
    if (!categories.empty()) ds.tag_categories = load_categories(categories);
    return ds;
  }
};

std::string in_dir(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

int run_factorize(const std::string& plays, const AlsOptions& opt, std::uint64_t seed, const std::string& out_path) {
  const auto log = load_plays(plays);
  Rng rng(seed);
  const auto model = als_factorize(log.interactions, opt, rng);
  auto out = text::open_out(out_path);
  write_song_factors(out, model, log.song_ids);
  std::cerr << "factorized " << log.user_ids.size() << " users x " << log.song_ids.size() << " songs ("
            << log.interactions.nnz() << " plays), objective " << wmf_objective(log.interactions, model) << '\n';
  return 0;
}

int run_train(const InputFlags& in, TrainConfig cfg, std::array<double, 3> ratios, std::uint64_t split_seed,
              const std::string& out_dir) {
  in.check();
  const auto ds = in.load();
  const auto split = artist_level_split(ds.artists(), ratios, split_seed);
  fs::create_directories(out_dir);
  {
    auto out = text::open_out(in_dir(out_dir, "split.tsv"));
    write_split(out, ds, split);
  }
  cfg.checkpoint_dir = out_dir;
  std::cerr << "training on " << split.train.size() << " songs, " << ds.n_tags() << " tags, sampler "
            << to_string(cfg.sampler.strategy) << '\n';
  const auto result = train(ds, split, cfg);
  save_checkpoint(in_dir(out_dir, "final.ckpt"), make_checkpoint(result));
  {
    auto out = text::open_out(in_dir(out_dir, "report.tsv"));
    write_train_report(out, result.report);
  }
  write_train_report(std::cout, result.report);
  if (result.report.best_epoch > 0) std::cerr << "best validation epoch " << result.report.best_epoch << '\n';
  return 0;
}

int run_evaluate(const InputFlags& in, const std::string& checkpoint, const std::string& split_file,
                 const std::string& subset, const std::string& out_path, unsigned threads) {
  in.check();
  const auto ds = in.load();
  const auto ckpt = load_checkpoint(checkpoint);
  std::vector<std::size_t> songs;
  if (subset == "all" || split_file.empty()) {
    songs.resize(ds.n_songs());
    std::iota(songs.begin(), songs.end(), 0);
  } else {
    auto f = text::open_in(split_file);
    const auto split = read_split(f, ds, split_file);
    songs = split.part(subset == "train" ? SplitPart::train : subset == "valid" ? SplitPart::valid : SplitPart::test);
  }
  const auto rep = evaluate(find_branch(ckpt, "tag").branch, find_branch(ckpt, "song").branch, ds, songs, threads);
  for (const auto& t : rep.excluded_tags) std::cerr << "warning: tag '" << t << "' has no relevant song; excluded\n";
  if (out_path.empty()) {
    write_eval_report(std::cout, rep);
  } else {
    auto out = text::open_out(out_path);
    write_eval_report(out, rep);
    std::cout << "map\t" << text::format_real(rep.map) << "\np10\t" << text::format_real(rep.p_at_10) << '\n';
  }
  return 0;
}

int run_query(const std::string& checkpoint, const std::string& vectors, const std::vector<std::string>& index_from,
              const std::string& tag, std::size_t k) {
  const auto ckpt = load_checkpoint(checkpoint);
  const auto& tag_branch = find_branch(ckpt, "tag").branch;
  const auto& song_branch = find_branch(ckpt, "song").branch;
  const auto table = load_word_vectors(vectors);
  const Vec query = tag_to_vector(tag, table);

  std::vector<SongVectors> files;
  for (const auto& p : index_from) files.push_back(load_song_vectors(p));
  std::vector<std::string> ids;
  for (const auto& [id, _] : files.front().by_id) {
    if (std::all_of(files.begin(), files.end(), [&](const SongVectors& f) { return f.by_id.contains(id); })) {
      ids.push_back(id);
    }
  }
  std::sort(ids.begin(), ids.end());
  Eigen::Index dim = 0;
  for (const auto& f : files) dim += f.dim;
  RetrievalDataset ds;
  ds.inputs.resize(static_cast<Eigen::Index>(ids.size()), dim);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    Eigen::Index off = 0;
    for (const auto& f : files) {
      ds.inputs.row(static_cast<Eigen::Index>(i)).segment(off, f.dim) = f.by_id.at(ids[i]).transpose();
      off += f.dim;
    }
    ds.songs.push_back({ids[i], "", {}});
  }
  std::vector<std::size_t> all(ids.size());
  std::iota(all.begin(), all.end(), 0);
  const auto index = build_song_index(song_branch, ds, all);
  write_hits(std::cout, retrieve_embedding(forward(tag_branch, query), index, k));
  return 0;
}

int run_nearest(const std::string& vectors, const std::string& word, std::size_t k) {
  const auto table = load_word_vectors(vectors);
  const auto hits = nearest_words(word, table, k);
  for (std::size_t r = 0; r < hits.size(); ++r) {
    std::cout << r + 1 << '\t' << hits[r].token << '\t' << text::format_real(hits[r].similarity) << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tagmetric: tag/song metric learning for tag-based music retrieval"};
  app.require_subcommand(1);

  // factorize
  auto* fac = app.add_subcommand("factorize", "WMF-ALS factorization of plays.tsv into song factors");
  std::string plays, fac_out;
  AlsOptions als;
  std::uint64_t fac_seed = 0;
  fac->add_option("--plays", plays, "plays.tsv (user_id, song_id, count)")->required();
  fac->add_option("--k", als.k, "latent dimension [published default]")->check(CLI::Range(1, 100000))->capture_default_str();
  fac->add_option("--reg", als.reg, "L2 regularization [artifact default]")->check(CLI::NonNegativeNumber)->capture_default_str();
  fac->add_option("--alpha", als.alpha, "confidence slope, c = 1 + alpha * r [artifact default]")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  fac->add_option("--sweeps", als.sweeps, "ALS sweeps [artifact default]")->check(CLI::Range(1, 100000))->capture_default_str();
  fac->add_option("--seed", fac_seed, "initialization seed")->capture_default_str();
  fac->add_option("--out", fac_out, "output factor file")->required();
  fac->add_option("--threads", als.threads, "worker threads")->check(CLI::Range(1u, 1024u))->capture_default_str();

  // train
  auto* tr = app.add_subcommand("train", "train tag and song branches with triplet loss");
  InputFlags tr_in;
  tr_in.add_to(tr);
  TrainConfig cfg;
  std::string sampler = "balanced_weighted", tr_out;
  std::vector<double> ratios{0.8, 0.1, 0.1};
  std::optional<std::uint64_t> split_seed;
  tr->add_option("--sampler", sampler, "triplet sampler")
      ->check(CLI::IsMember({"random", "balanced", "balanced_weighted"}))
      ->capture_default_str();
  tr->add_option("--margin", cfg.margin, "triplet margin [artifact default]")->check(CLI::PositiveNumber)->capture_default_str();
  tr->add_option("--epochs", cfg.epochs, "epochs [published default]")->check(CLI::Range(0, 1000000))->capture_default_str();
  tr->add_option("--triplets-per-epoch", cfg.triplets_per_epoch, "triplets per epoch [published default]")
      ->check(CLI::Range(std::size_t{1}, std::size_t{1} << 40))
      ->capture_default_str();
  tr->add_option("--batch", cfg.batch_size, "triplets per batch [artifact default]")
      ->check(CLI::Range(std::size_t{1}, std::size_t{1} << 20))
      ->capture_default_str();
  tr->add_option("--lr", cfg.lr, "Adam learning rate [published default]")->check(CLI::PositiveNumber)->capture_default_str();
  tr->add_option("--wd", cfg.weight_decay, "weight decay [published default]")->check(CLI::NonNegativeNumber)->capture_default_str();
  tr->add_option("--lambda-clip", cfg.sampler.lambda_clip, "distance-weighting cap [artifact default]")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  tr->add_option("--cutoff", cfg.sampler.cutoff_d_min, "distance-weighting lower clip [artifact default]")
      ->check(CLI::Range(1e-9, 1.41421356))
      ->capture_default_str();
  tr->add_option("--seed", cfg.seed, "training seed")->capture_default_str();
  tr->add_option("--split-seed", split_seed, "artist split seed (defaults to --seed)");
  tr->add_option("--split-ratios", ratios, "train valid test ratios [artifact default]")->expected(3)->capture_default_str();
  tr->add_option("--validation-every", cfg.validation_every, "epochs between validation reports")
      ->check(CLI::Range(1, 1000000))
      ->capture_default_str();
  tr->add_option("--threads", cfg.threads, "worker threads for evaluation")->check(CLI::Range(1u, 1024u))->capture_default_str();
  tr->add_option("--out-dir", tr_out, "output directory for checkpoints and report.tsv")->required();

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "MAP and P@10 of a checkpoint on a split");
  InputFlags ev_in;
  ev_in.add_to(ev);
  std::string ev_ckpt, ev_split, ev_subset = "test", ev_out;
  unsigned ev_threads = 1;
  ev->add_option("--checkpoint", ev_ckpt, "checkpoint file")->required();
  ev->add_option("--split-file", ev_split, "split.tsv written by train");
  ev->add_option("--subset", ev_subset, "split part to evaluate")
      ->check(CLI::IsMember({"train", "valid", "test", "all"}))
      ->capture_default_str();
  ev->add_option("--out", ev_out, "write the report TSV here instead of stdout");
  ev->add_option("--threads", ev_threads, "worker threads")->check(CLI::Range(1u, 1024u))->capture_default_str();

  // query
  auto* q = app.add_subcommand("query", "retrieve songs for a free-text tag");
  std::string q_ckpt, q_vectors, q_tag;
  std::vector<std::string> q_index;
  std::size_t q_k = 10;
  q->add_option("--checkpoint", q_ckpt, "checkpoint file")->required();
  q->add_option("--vectors", q_vectors, "word-vector text file")->required();
  q->add_option("--index-from", q_index, "song vector file(s); repeat to concatenate in order")->required();
  q->add_option("--tag", q_tag, "query tag")->required();
  q->add_option("--k", q_k, "results to print")->check(CLI::Range(std::size_t{1}, std::size_t{1} << 40))->capture_default_str();

  // nearest-words
  auto* nw = app.add_subcommand("nearest-words", "nearest tokens in a word-vector table");
  std::string nw_vectors, nw_word;
  std::size_t nw_k = 10;
  nw->add_option("--vectors", nw_vectors, "word-vector text file")->required();
  nw->add_option("--word", nw_word, "query word or phrase")->required();
  nw->add_option("--k", nw_k, "neighbors to print")->check(CLI::Range(std::size_t{1}, std::size_t{1} << 40))->capture_default_str();

  // synth
  auto* sy = app.add_subcommand("synth", "write a planted-structure synthetic dataset");
  SynthConfig sc;
  std::string sy_out;
  sy->add_option("--songs", sc.songs, "songs")->check(CLI::Range(std::size_t{4}, std::size_t{1} << 30))->capture_default_str();
  sy->add_option("--tags", sc.tags, "tags (>= 2)")->check(CLI::Range(std::size_t{2}, std::size_t{1} << 20))->capture_default_str();
  sy->add_option("--latent-dim", sc.latent_dim, "latent tag dimension")->check(CLI::Range(1, 100000))->capture_default_str();
  sy->add_option("--feature-dim", sc.feature_dim, "acoustic feature dimension")->check(CLI::Range(1, 100000))->capture_default_str();
  sy->add_option("--noise", sc.noise, "feature noise sd")->check(CLI::NonNegativeNumber)->capture_default_str();
  sy->add_option("--zipf", sc.zipf_exponent, "tag popularity exponent")->check(CLI::NonNegativeNumber)->capture_default_str();
  sy->add_option("--users", sc.users, "users in plays.tsv (0: songs / 2)")->capture_default_str();
  sy->add_option("--seed", sc.seed, "generator seed")->capture_default_str();
  sy->add_option("--out-dir", sy_out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*fac) return run_factorize(plays, als, fac_seed, fac_out);
    if (*tr) {
      cfg.sampler.strategy = parse_strategy(sampler);
      return run_train(tr_in, cfg, {ratios[0], ratios[1], ratios[2]}, split_seed.value_or(cfg.seed), tr_out);
    }
    if (*ev) return run_evaluate(ev_in, ev_ckpt, ev_split, ev_subset, ev_out, ev_threads);
    if (*q) return run_query(q_ckpt, q_vectors, q_index, q_tag, q_k);
    if (*nw) return run_nearest(nw_vectors, nw_word, nw_k);
    if (*sy) {
      write_synthetic(generate_synthetic(sc), sy_out);
      return 0;
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const OovError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
