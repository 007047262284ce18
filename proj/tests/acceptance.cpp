// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The tagmetric Authors

// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero when any criterion fails. Pass criterion numbers as
// arguments to run a subset.

#include <boost/math/distributions/chi_squared.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "grad_check.hpp"
#include "oracles.hpp"
#include "tagmetric/tagmetric.hpp"

using namespace tagmetric;
using namespace tagmetric::testing;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Vec random_vec(Rng& rng, Eigen::Index n) {
  Vec v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = rng.normal();
  return v;
}

RowMat random_rows(Rng& rng, Eigen::Index n, Eigen::Index d, bool unit) {
  RowMat m(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    m.row(i) = random_vec(rng, d).transpose();
    if (unit) m.row(i).normalize();
  }
  return m;
}

struct SynthSetup {
  RetrievalDataset ds;
  SplitAssignment split;
};

SynthSetup synth_setup(SynthConfig cfg) {
  SynthSetup s{synthetic_dataset(generate_synthetic(cfg)), {}};
  s.split = artist_level_split(s.ds.artists(), {0.8, 0.1, 0.1}, cfg.seed);
  return s;
}

// 1: sampling-strategy ordering on the default synthetic generator.
Outcome sampling_ordering() {
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<double> maps[3];
  const SamplingStrategy order[3] = {SamplingStrategy::random, SamplingStrategy::balanced,
                                     SamplingStrategy::balanced_weighted};
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    SynthConfig sc;
    sc.seed = seed;
    const auto setup = synth_setup(sc);
    for (int k = 0; k < 3; ++k) {
      TrainConfig cfg;
      cfg.epochs = 30;
      cfg.triplets_per_epoch = 2000;
      cfg.validation_every = 30;
      cfg.sampler.strategy = order[k];
      cfg.seed = seed;
      const auto r = train(setup.ds, setup.split, cfg);
      maps[k].push_back(r.report.rows.back().map);
    }
  }
  const double mr = median(maps[0]), mb = median(maps[1]), mw = median(maps[2]);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool pass = mw >= mb && mb >= mr - 0.01 && secs < 600.0;
  return {pass, fmt("median MAP random=%.4f balanced=%.4f balanced_weighted=%.4f, %.0fs", mr, mb, mw, secs)};
}

// 2: analytic gradients against central differences.
Outcome gradient_check() {
  Rng rng(2);
  double worst = 0.0;
  int done = 0;
  while (done < 20) {
    const Eigen::Index dt = 3 + static_cast<Eigen::Index>(rng.uniform_int(4));
    const Eigen::Index ds = 3 + static_cast<Eigen::Index>(rng.uniform_int(4));
    auto tb = make_branch("tag", dt, rng, 6, 4);
    auto sb = make_branch("song", ds, rng, 6, 4);
    tb.b1 = 0.3 * random_vec(rng, 6);
    sb.b1 = 0.3 * random_vec(rng, 6);
    tb.b2 = 0.3 * random_vec(rng, 4);
    sb.b2 = 0.3 * random_vec(rng, 4);
    Vec xa = random_vec(rng, dt), xp = random_vec(rng, ds), xn = random_vec(rng, ds);
    const double margin = 1.0;
    // Finite differences are meaningless across a ReLU or hinge kink.
    const auto near_kink = [](const MlpBranch& b, const Vec& x) {
      return ((b.w1.transpose() * x + b.b1).cwiseAbs().array() < 1e-4).any();
    };
    if (near_kink(tb, xa) || near_kink(sb, xp) || near_kink(sb, xn)) continue;
    const auto loss = [&] { return triplet_loss(forward(tb, xa), forward(sb, xp), forward(sb, xn), margin); };
    if (loss() < 1e-3) continue;
    ++done;

    const Vec ea = forward(tb, xa), ep = forward(sb, xp), en = forward(sb, xn);
    auto g = triplet_loss_grad(ea, ep, en, margin);
    {
      Vec a = ea, p = ep, n = en;
      const std::function<double()> f = [&] { return triplet_loss(a, p, n, margin); };
      worst = std::max({worst, max_relative_error(g.anchor, central_difference(a, f)),
                        max_relative_error(g.positive, central_difference(p, f)),
                        max_relative_error(g.negative, central_difference(n, f))});
    }
    const auto [gt, gxa] = backward(tb, xa, g.anchor);
    auto gs = backward(sb, xp, g.positive).first;
    gs += backward(sb, xn, g.negative).first;
    const std::function<double()> f = loss;
    worst = std::max({worst, max_relative_error(gt.w1, central_difference(tb.w1, f)),
                      max_relative_error(gt.b1, central_difference(tb.b1, f)),
                      max_relative_error(gt.w2, central_difference(tb.w2, f)),
                      max_relative_error(gt.b2, central_difference(tb.b2, f)),
                      max_relative_error(gs.w1, central_difference(sb.w1, f)),
                      max_relative_error(gs.b1, central_difference(sb.b1, f)),
                      max_relative_error(gs.w2, central_difference(sb.w2, f)),
                      max_relative_error(gs.b2, central_difference(sb.b2, f)),
                      max_relative_error(gxa, central_difference(xa, f))});
  }
  return {worst < 1e-5, fmt("20 instances, max relative error %.3g", worst)};
}

// 3: ALS monotonicity and row solve against the dense oracle.
Outcome als_soundness() {
  Rng rng(3);
  std::size_t increases = 0;
  for (int trial = 0; trial < 10; ++trial) {
    const auto r = random_interactions(rng, 15 + rng.uniform_int(20), 10 + rng.uniform_int(20), 0.2);
    AlsOptions opt;
    opt.k = 2 + static_cast<Eigen::Index>(rng.uniform_int(5));
    opt.sweeps = 10;
    std::vector<double> trace;
    opt.on_half_sweep = [&](const FactorModel& m, int) { trace.push_back(wmf_objective(r, m)); };
    Rng init = rng.split(static_cast<std::uint64_t>(trial));
    als_factorize(r, opt, init);
    for (std::size_t i = 1; i < trace.size(); ++i) increases += trace[i] > trace[i - 1] * (1.0 + 1e-12);
  }
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::Index n = 5 + static_cast<Eigen::Index>(rng.uniform_int(40));
    const Eigen::Index k = 1 + static_cast<Eigen::Index>(rng.uniform_int(8));
    const Mat fixed = random_mat(rng, n, k);
    SparseRow row;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (rng.uniform() < 0.3) {
        row.index.push_back(static_cast<std::size_t>(i));
        row.confidence.push_back(1.0 + 40.0 * static_cast<double>(1 + rng.uniform_int(10)));
        row.preference.push_back(1.0);
      }
    }
    const double reg = 0.01;
    const Vec got = als_solve_row(fixed, row, reg);
    const Vec want = dense_row_oracle(fixed, row, reg);
    worst = std::max(worst, (got - want).norm() / std::max(want.norm(), 1e-300));
  }
  return {increases == 0 && worst < 1e-10,
          fmt("%zu objective increases over 10 instances x 20 half-sweeps; row solve rel. error %.3g", increases, worst)};
}

// 4: evaluate against the from-definition metric oracle.
Outcome metric_oracles() {
  const bool ex[] = {false, true, true};
  const double ap_ex = average_precision(ex, 2);
  Rng rng(4);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n_songs = 2 + rng.uniform_int(199);
    const std::size_t n_tags = 1 + rng.uniform_int(20);
    std::vector<std::vector<std::size_t>> tags;
    for (std::size_t s = 0; s < n_songs; ++s) {
      std::set<std::size_t> t{rng.uniform_int(n_tags)};
      if (rng.uniform() < 0.3) t.insert(rng.uniform_int(n_tags));
      tags.emplace_back(t.begin(), t.end());
    }
    const auto ds = make_dataset(tags, n_tags, 3, 3, rng.next_u64());
    const Eigen::Index d = 2 + static_cast<Eigen::Index>(rng.uniform_int(6));
    const RowMat tag_emb = random_rows(rng, static_cast<Eigen::Index>(n_tags), d, false);
    SongIndex idx;
    idx.embeddings = random_rows(rng, static_cast<Eigen::Index>(n_songs), d, true);
    for (const auto& s : ds.songs) idx.song_ids.push_back(s.id);
    const auto rep = evaluate_embeddings(tag_emb, idx, ds, all_songs(ds));
    double map = 0.0, p10 = 0.0;
    std::size_t counted = 0;
    for (std::size_t t = 0; t < n_tags; ++t) {
      std::vector<bool> rel(n_songs);
      bool any = false;
      for (std::size_t s = 0; s < n_songs; ++s) any |= (rel[s] = ds.has_tag(s, t));
      if (!any) continue;
      const auto o = score_oracle(tag_emb.row(static_cast<Eigen::Index>(t)).transpose(), idx.embeddings, idx.song_ids, rel);
      map += o.ap;
      p10 += o.p10;
      ++counted;
    }
    worst = std::max({worst, std::abs(rep.map - map / static_cast<double>(counted)),
                      std::abs(rep.p_at_10 - p10 / static_cast<double>(counted))});
  }
  const bool pass = worst <= 1e-12 && std::abs(ap_ex - 0.58333) < 5e-6;
  return {pass, fmt("50 instances, max |MAP or P@10 - oracle| %.3g; AP([0,1,1], 2) = %.5f", worst, ap_ex)};
}

// 5: sampler distributions and membership invariants.
Outcome sampler_distributions() {
  const auto t0 = std::chrono::steady_clock::now();
  // balanced: anchor uniformity over 50 skewed tags.
  Rng gen(5);
  std::vector<std::vector<std::size_t>> tags;
  for (std::size_t s = 0; s < 1000; ++s)
    tags.push_back({static_cast<std::size_t>(std::min<double>(49, std::floor(50 * std::pow(gen.uniform(), 3.0))))});
  for (std::size_t t = 0; t < 50; ++t) tags.push_back({t});
  const auto skewed = make_dataset(tags, 50);
  const TripletPool pool(skewed, all_songs(skewed));
  Rng rng(6);
  std::vector<double> counts(50, 0.0);
  std::size_t violations = 0;
  const auto check = [&](const RetrievalDataset& ds, const TripletBatch& b) {
    for (const auto& t : b.triplets)
      violations += !ds.has_tag(t.positive_song, t.anchor_tag) || ds.has_tag(t.negative_song, t.anchor_tag);
  };
  for (int i = 0; i < 800; ++i) {
    const auto b = sample_balanced(pool, 125, rng);
    check(skewed, b);
    for (const auto& t : b.triplets) counts[t.anchor_tag] += 1.0;
  }
  double chi2 = 0.0;
  for (double c : counts) chi2 += (c - 2000.0) * (c - 2000.0) / 2000.0;
  const double p = boost::math::cdf(boost::math::complement(boost::math::chi_squared(49), chi2));

  // balanced_weighted: planted 8-d geometry, tag 0 only on song 0.
  const auto planted = make_dataset({{0}, {1}, {1}, {1}, {1}, {1}}, 2);
  const TripletPool ppool(planted, all_songs(planted));
  const Eigen::Index dim = 8;
  RowMat tag_emb = RowMat::Zero(2, dim), song_emb = RowMat::Zero(6, dim);
  tag_emb(0, 0) = 1.0;
  tag_emb(1, 6) = 1.0;
  song_emb(0, 7) = 1.0;
  song_emb.row(1) = (Vec::Unit(dim, 0) + 0.05 * Vec::Unit(dim, 1)).normalized().transpose();
  for (Eigen::Index s = 2; s <= 5; ++s) song_emb(s, s) = 1.0;
  const auto gather = [](const RowMat& m) {
    return [&m](std::span<const std::size_t> idx) {
      RowMat out(static_cast<Eigen::Index>(idx.size()), m.cols());
      for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(idx[i]));
      return out;
    };
  };
  const EmbeddingSource source{gather(tag_emb), gather(song_emb)};
  const SamplerConfig cfg;
  std::vector<double> dist;
  for (Eigen::Index s = 1; s <= 5; ++s) dist.push_back(cosine_distance(tag_emb.row(0).transpose(), song_emb.row(s).transpose()));
  const auto expected = dw_weights(dist, dim, cfg);
  std::vector<double> picks(5, 0.0);
  double total = 0.0;
  while (total < 1e5) {
    const auto b = sample_balanced_weighted(ppool, 64, source, cfg, rng);
    check(planted, b);
    std::set<std::size_t> positives;
    for (const auto& t : b.triplets) positives.insert(t.positive_song);
    if (positives.size() != 6) continue;
    for (const auto& t : b.triplets) {
      if (t.anchor_tag != 0) continue;
      picks[t.negative_song - 1] += 1.0;
      total += 1.0;
    }
  }
  for (auto& x : picks) x /= total;
  const double tv = total_variation(picks, expected);

  // random: invariants.
  for (int i = 0; i < 800; ++i) check(skewed, sample_random(pool, 125, rng));
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {p > 0.01 && tv < 0.05 && violations == 0 && secs < 60.0,
          fmt("balanced chi-square p=%.3f; weighted TV=%.4f; %zu membership violations; %.1fs", p, tv, violations, secs)};
}

// 6: word-vector semantics.
Outcome word_vectors() {
  Vec v(3);
  WordVectorTable t(3);
  v << 1, 2, 3;
  t.add("deep_house", v);
  v << 0, 1, 0;
  t.add("deep", v);
  v << 0, 0, 1;
  t.add("house", v);
  const Vec ref = tag_to_vector("deep_house", t);
  bool idem = true;
  for (const auto* s : {"Deep House", "deep house", "DEEP_HOUSE", " deep  house "}) idem &= tag_to_vector(s, t) == ref;
  const bool ngram = ref == *t.find("deep_house") && tag_to_vector("deep_house", t) != (*t.find("deep") + *t.find("house")) / 2;

  Rng rng(6);
  std::size_t mismatches = 0;
  for (int trial = 0; trial < 20; ++trial) {
    WordVectorTable r(5);
    for (int i = 0; i < 50; ++i) r.add("w" + std::to_string(i), random_vec(rng, 5));
    const auto q = "w" + std::to_string(rng.uniform_int(50));
    const auto got = nearest_words(q, r, 10);
    const auto want = nearest_oracle(q, r, 10);
    for (std::size_t i = 0; i < want.size(); ++i) mismatches += got.size() != want.size() || got[i].token != want[i].token;
  }
  return {idem && ngram && mismatches == 0,
          fmt("case/underscore idempotent=%s, n-gram precedence=%s, nearest_words oracle mismatches=%zu",
              idem ? "yes" : "no", ngram ? "yes" : "no", mismatches)};
}

// 7: same-seed training is bitwise reproducible; splits never leak artists.
Outcome determinism_and_splits() {
  SynthConfig sc;
  sc.songs = 300;
  sc.tags = 10;
  sc.seed = 7;
  const auto setup = synth_setup(sc);
  bool identical = true;
  for (auto s : {SamplingStrategy::random, SamplingStrategy::balanced}) {
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.triplets_per_epoch = 500;
    cfg.sampler.strategy = s;
    cfg.seed = 99;
    std::string text[2];
    for (auto& out : text) {
      const auto r = train(setup.ds, setup.split, cfg);
      std::ostringstream os;
      write_checkpoint(os, make_checkpoint(r));
      out = os.str();
    }
    identical &= text[0] == text[1];
  }

  Rng rng(7);
  std::size_t leaks = 0, bad_partitions = 0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::string> artists;
    const auto n_artists = 10 + rng.uniform_int(90);
    for (std::size_t a = 0; a < n_artists; ++a)
      for (std::size_t k = 0, n = 1 + rng.uniform_int(8); k < n; ++k) artists.push_back("a" + std::to_string(a));
    rng.shuffle(artists.begin(), artists.end());
    const auto split = artist_level_split(artists, {0.8, 0.1, 0.1}, rng.next_u64());
    std::vector<int> part(artists.size(), -1);
    int p = 0;
    for (const auto* set : {&split.train, &split.valid, &split.test}) {
      for (auto i : *set) {
        bad_partitions += part[i] != -1;
        part[i] = p;
      }
      ++p;
    }
    std::map<std::string, std::set<int>> where;
    for (std::size_t i = 0; i < artists.size(); ++i) {
      bad_partitions += part[i] == -1;
      where[artists[i]].insert(part[i]);
    }
    for (const auto& [a, parts] : where) leaks += parts.size() > 1;
  }
  return {identical && leaks == 0 && bad_partitions == 0,
          fmt("bitwise-identical checkpoints=%s; 100 splits: %zu leaking artists, %zu partition errors",
              identical ? "yes" : "no", leaks, bad_partitions)};
}

// 8: training beats the untrained model on separable synthetic data.
Outcome learning_sanity() {
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<double> before, after;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    SynthConfig sc;
    sc.songs = 600;
    sc.tags = 10;
    sc.noise = 0.1;
    sc.seed = 100 + seed;
    const auto setup = synth_setup(sc);
    TrainConfig cfg;
    cfg.epochs = 10;
    cfg.triplets_per_epoch = 2000;
    cfg.validation_every = 10;
    cfg.seed = seed;
    const auto fresh = init_model(setup.ds, seed);
    before.push_back(evaluate(fresh.tag_branch, fresh.song_branch, setup.ds, setup.split.valid).map);
    after.push_back(train(setup.ds, setup.split, cfg).report.rows.back().map);
  }
  const double mb = median(before), ma = median(after);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {ma > mb && secs < 300.0, fmt("median validation MAP untrained=%.4f trained=%.4f, %.0fs", mb, ma, secs)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"sampling-strategy ordering", sampling_ordering},
      {"gradient correctness", gradient_check},
      {"ALS soundness", als_soundness},
      {"metric oracles", metric_oracles},
      {"sampler distributions", sampler_distributions},
      {"word-vector semantics", word_vectors},
      {"determinism and splits", determinism_and_splits},
      {"learning sanity", learning_sanity},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.contains(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("criterion %d %s: %s (%s)\n", id, criteria[i].first, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
    failed += !o.pass;
  }
  return failed ? 1 : 0;
}
