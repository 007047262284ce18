// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The tagmetric Authors

#include <catch_amalgamated.hpp>

#include <algorithm>
#include <sstream>

#include "oracles.hpp"
#include "tagmetric/wordvec.hpp"

using namespace tagmetric;
using namespace tagmetric::testing;

namespace {

Vec v3(double a, double b, double c) {
  Vec v(3);
  v << a, b, c;
  return v;
}

WordVectorTable random_table(Rng& rng, std::size_t n, Eigen::Index dim) {
  WordVectorTable t(dim);
  for (std::size_t i = 0; i < n; ++i) {
    Vec v(dim);
    for (Eigen::Index j = 0; j < dim; ++j) v(j) = rng.normal();
    t.add("w" + std::to_string(i), v);
  }
  return t;
}

}  // namespace

TEST_CASE("read_word_vectors parses header and rows", "[wordvec]") {
  std::istringstream in("2 3\njazz 1 0 0\nrock 0 1 0.5\n");
  const auto t = read_word_vectors(in);
  CHECK(t.size() == 2);
  CHECK(t.dim() == 3);
  CHECK(*t.find("rock") == v3(0, 1, 0.5));
  CHECK(t.find("pop") == nullptr);
}

TEST_CASE("read_word_vectors errors carry line numbers", "[wordvec]") {
  const auto line_of = [](const std::string& body) -> std::size_t {
    std::istringstream in(body);
    try {
      read_word_vectors(in);
    } catch (const ParseError& e) {
      return e.line();
    }
    return 0;
  };
  CHECK(line_of("2 3\njazz 1 0 0\nrock 0 1\n") == 3);
  CHECK(line_of("2 3\njazz 1 0 0\njazz 0 1 0\n") == 3);
  CHECK(line_of("two 3\n") == 1);
  CHECK(line_of("2 3\njazz 1 x 0\nrock 0 1 0\n") == 2);
  CHECK(line_of("3 3\njazz 1 0 0\nrock 0 1 0\n") > 0);
}

TEST_CASE("word vector round trip", "[wordvec]") {
  Rng rng(1);
  const auto t = random_table(rng, 20, 7);
  std::stringstream a;
  write_word_vectors(a, t);
  const auto back = read_word_vectors(a);
  std::stringstream b;
  write_word_vectors(b, back);
  CHECK(a.str() == b.str());
  REQUIRE(back.size() == t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    CHECK(back.tokens()[i] == t.tokens()[i]);
    CHECK((back.vector(i) - t.vector(i)).cwiseAbs().maxCoeff() <= 1e-8 * (1 + t.vector(i).cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("tag_to_vector resolution order", "[wordvec]") {
  WordVectorTable t(3);
  t.add("jazz", v3(1, 0, 0));
  t.add("deep", v3(0, 2, 0));
  t.add("house", v3(0, 0, 4));
  CHECK(tag_to_vector("jazz", t) == v3(1, 0, 0));
  CHECK(tag_to_vector("deep house", t) == v3(0, 1, 2));
  CHECK(tag_to_vector("deep unknownword", t) == v3(0, 2, 0));
  t.add("deep_house", v3(7, 7, 7));
  CHECK(tag_to_vector("deep house", t) == v3(7, 7, 7));
  CHECK_THROWS_AS(tag_to_vector("zzqx", t), OovError);
  try {
    tag_to_vector("zzqx blorp", t);
  } catch (const OovError& e) {
    CHECK(e.tag() == "zzqx blorp");
  }
  CHECK_THROWS_AS(tag_to_vector("  ", t), DomainError);
}

TEST_CASE("tag_to_vector ignores case and space/underscore variants", "[wordvec][property]") {
  WordVectorTable t(3);
  t.add("deep_house", v3(1, 2, 3));
  t.add("smooth", v3(0, 1, 0));
  t.add("jazz", v3(0, 0, 1));
  for (const auto* tag : {"Deep House", "deep house", "deep_house", "DEEP_HOUSE", "  deep   house "})
    CHECK(tag_to_vector(tag, t) == v3(1, 2, 3));
  for (const auto* tag : {"Smooth Jazz", "smooth jazz", "smooth_jazz"}) CHECK(tag_to_vector(tag, t) == v3(0, 0.5, 0.5));
  CHECK(tag_key("Deep  House") == "deep_house");
}

TEST_CASE("nearest_words tie-break and near duplicate", "[wordvec]") {
  WordVectorTable t(3);
  t.add("c", v3(0, 0, 1));
  t.add("a", v3(1, 0, 0));
  t.add("b", v3(0, 1, 0));
  const auto nn = nearest_words("a", t, 2);
  REQUIRE(nn.size() == 2);
  CHECK(nn[0].token == "b");
  CHECK(nn[1].token == "c");
  CHECK(nn[0].similarity == 0.0);

  t.add("a2", v3(1, 0.01, 0));
  CHECK(nearest_words("a", t, 1).front().token == "a2");
  CHECK(nearest_words("a", t, 100).size() == 3);
  CHECK_THROWS_AS(nearest_words("zz", t, 1), OovError);
}

TEST_CASE("nearest_words equals the full-sort oracle", "[wordvec][property]") {
  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const auto t = random_table(rng, 50, 5);
    const auto q = "w" + std::to_string(rng.uniform_int(50));
    for (std::size_t k : {1u, 10u, 49u, 60u}) {
      const auto got = nearest_words(q, t, k);
      const auto want = nearest_oracle(q, t, k);
      REQUIRE(got.size() == want.size());
      for (std::size_t i = 0; i < got.size(); ++i) {
        CHECK(got[i].token == want[i].token);
        CHECK(got[i].similarity == Catch::Approx(want[i].similarity).epsilon(1e-14));
      }
    }
  }
}
