// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The tagmetric Authors

#include <catch_amalgamated.hpp>

#include "tagmetric/core.hpp"

using namespace tagmetric;
using Catch::Matchers::WithinAbs;

namespace {

Vec vec(std::initializer_list<double> v) {
  Vec out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

Vec random_vec(Rng& rng, Eigen::Index n) {
  Vec v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = rng.normal();
  return v;
}

}  // namespace

TEST_CASE("cosine_distance fixed cases", "[core]") {
  CHECK(cosine_distance(vec({1, 0, 0}), vec({1, 0, 0})) == 0.0);
  CHECK_THAT(cosine_distance(vec({1, 0}), vec({0, 1})), WithinAbs(1.0, 1e-15));
  CHECK_THAT(cosine_distance(vec({2, 0}), vec({-1, 0})), WithinAbs(2.0, 1e-15));
}

TEST_CASE("cosine_distance errors", "[core]") {
  CHECK_THROWS_AS(cosine_distance(vec({0, 0}), vec({1, 0})), DomainError);
  CHECK_THROWS_AS(cosine_distance(vec({1, 0}), vec({1, 0, 0})), ShapeError);
}

TEST_CASE("cosine_distance is symmetric and scale invariant", "[core][property]") {
  Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const Vec u = random_vec(rng, 1 + static_cast<Eigen::Index>(rng.uniform_int(20)));
    const Vec v = random_vec(rng, u.size());
    const double a = std::exp(rng.uniform(-5, 5));
    const double b = std::exp(rng.uniform(-5, 5));
    const double d = cosine_distance(u, v);
    CHECK(d >= 0.0);
    CHECK(d <= 2.0);
    CHECK_THAT(cosine_distance(v, u), WithinAbs(d, 1e-15));
    CHECK_THAT(cosine_distance(a * u, b * v), WithinAbs(d, 1e-12));
  }
}

TEST_CASE("unit vectors: squared chord equals twice cosine distance", "[core][property]") {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const Vec u = l2_normalize(random_vec(rng, 8));
    const Vec v = l2_normalize(random_vec(rng, 8));
    CHECK_THAT((u - v).squaredNorm(), WithinAbs(2.0 * cosine_distance(u, v), 1e-10));
  }
}

TEST_CASE("l2_normalize", "[core]") {
  const Vec a = l2_normalize(vec({3, 4}));
  CHECK_THAT(a(0), WithinAbs(0.6, 1e-15));
  CHECK_THAT(a(1), WithinAbs(0.8, 1e-15));
  CHECK(l2_normalize(vec({1, 0, 0})) == vec({1, 0, 0}));
  CHECK_THROWS_AS(l2_normalize(vec({0, 0})), DomainError);
  Rng rng(3);
  for (int i = 0; i < 100; ++i) {
    const Vec v = random_vec(rng, 5) * std::exp(rng.uniform(-20, 20));
    CHECK_THAT(l2_normalize(v).norm(), WithinAbs(1.0, 1e-12));
  }
}

TEST_CASE("Rng replays from its seed", "[core][rng]") {
  Rng a(12345), b(12345);
  for (int i = 0; i < 100000; ++i) REQUIRE(a.next_u64() == b.next_u64());
  Rng c(1), d(1);
  for (int i = 0; i < 1000; ++i) {
    REQUIRE(c.uniform() == d.uniform());
    REQUIRE(c.normal() == d.normal());
    REQUIRE(c.uniform_int(37) == d.uniform_int(37));
  }
}

TEST_CASE("Rng split streams differ and are reproducible", "[core][rng]") {
  const Rng root(99);
  Rng s0 = root.split(0), s1 = root.split(1), s0b = root.split(0);
  int equal = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto x = s0.next_u64();
    equal += x == s1.next_u64();
    REQUIRE(x == s0b.next_u64());
  }
  CHECK(equal == 0);
}

TEST_CASE("Rng distributions", "[core][rng]") {
  Rng rng(5);
  std::vector<int> counts(7, 0);
  double sum = 0.0, sq = 0.0;
  const int n = 70000;
  for (int i = 0; i < n; ++i) {
    ++counts[rng.uniform_int(7)];
    const double z = rng.normal();
    sum += z;
    sq += z * z;
    const double u = rng.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
  }
  for (int c : counts) CHECK(std::abs(c - n / 7) < 400);
  CHECK(std::abs(sum / n) < 0.02);
  CHECK(std::abs(sq / n - 1.0) < 0.03);
  CHECK_THROWS_AS(rng.uniform_int(0), DomainError);
}

TEST_CASE("parallel_for visits every index once", "[core]") {
  std::vector<int> hits(1000, 0);
  parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i] += 1; });
  for (int h : hits) CHECK(h == 1);
  CHECK_THROWS_AS(parallel_for(10, 3, [](std::size_t i) {
                    if (i == 7) throw DomainError("boom");
                  }),
                  DomainError);
}
