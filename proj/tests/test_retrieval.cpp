#include <cmath>

#include "doctest.h"
#include "hiret/errors.hpp"
#include "hiret/llr.hpp"
#include "hiret/retrieval.hpp"
#include "hiret/vlr.hpp"
#include "oracles.hpp"

using namespace hiret;

namespace {

struct RandomPool {
  std::vector<std::vector<double>> embeddings;
  std::vector<std::int64_t> ids;
  RetrievalPool pool{4};
};

// Coarse values so that exact ties in the inner product are common.
RandomPool random_pool(Rng& rng, std::size_t n, std::size_t dim) {
  RandomPool p;
  p.pool = RetrievalPool(dim);
  std::vector<std::int64_t> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = static_cast<std::int64_t>(i) * 3 + 1;
  rng.shuffle(ids);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> e(dim);
    for (double& x : e) x = static_cast<double>(static_cast<int>(rng.index(5)) - 2);
    p.pool.add({ids[i], ids[i], {}}, e);
    p.embeddings.push_back(e);
    p.ids.push_back(ids[i]);
  }
  return p;
}

std::vector<std::int64_t> hit_ids(const std::vector<Hit>& hits) {
  std::vector<std::int64_t> out;
  for (const Hit& h : hits) out.push_back(h.id);
  return out;
}

}  // namespace

TEST_CASE("top_k matches the brute-force oracle on random pools") {
  Rng rng(1234);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng.index(500);
    const std::size_t dim = 1 + rng.index(4);
    RandomPool p = random_pool(rng, n, dim);
    std::vector<double> q(dim);
    for (double& x : q) x = static_cast<double>(static_cast<int>(rng.index(3)) - 1);
    const std::size_t k = 1 + rng.index(std::min<std::size_t>(n, 10));
    const auto expect = oracle::brute_topk(p.embeddings, p.ids, q, k);
    CHECK(hit_ids(retrieve_reports(q, p.pool, k)) == expect);
    CHECK(hit_ids(retrieve_sentences(q, p.pool, k)) == expect);
  }
}

TEST_CASE("top_k details") {
  RetrievalPool pool(2);
  pool.add({10, 10, {}}, std::vector<double>{1.0, 0.0});
  pool.add({5, 5, {}}, std::vector<double>{0.0, 1.0});
  pool.add({7, 7, {}}, std::vector<double>{1.0, 0.0});
  const std::vector<double> q{1.0, 0.0};

  SUBCASE("ties go to the lower id") {
    CHECK(hit_ids(top_k(pool, q, 3)) == std::vector<std::int64_t>{7, 10, 5});
  }
  SUBCASE("k equal to the pool returns everything sorted") {
    const auto hits = top_k(pool, q, 3);
    CHECK(hits.size() == 3);
    CHECK(hits[0].logit >= hits[1].logit);
    CHECK(hits[1].logit >= hits[2].logit);
    CHECK(hits[0].score == doctest::Approx(oracle::sigmoid(1.0)));
  }
  SUBCASE("exclusion by id") {
    CHECK(hit_ids(top_k(pool, q, 2, std::int64_t{7})) == std::vector<std::int64_t>{10, 5});
    CHECK(eligible_count(pool, std::int64_t{7}) == 2);
  }
  SUBCASE("k beyond the eligible entries") {
    CHECK_THROWS_AS(top_k(pool, q, 4), ValidationError);
    CHECK_THROWS_AS(top_k(pool, q, 3, std::int64_t{7}), ValidationError);
  }
  SUBCASE("a scaled copy of a stored embedding ranks first") {
    const std::vector<double> big{0.0, 10.0};
    CHECK(top_k(pool, big, 1)[0].id == 5);
  }
}

TEST_CASE("retrieve_sentences clamps k and excludes a source report") {
  RetrievalPool pool(1);
  pool.add({sentence_id(1, 0), 1, {{4}}}, std::vector<double>{3.0});
  pool.add({sentence_id(1, 1), 1, {{5}}}, std::vector<double>{2.0});
  pool.add({sentence_id(2, 0), 2, {{6}}}, std::vector<double>{1.0});
  const std::vector<double> q{1.0};
  CHECK(retrieve_sentences(q, pool, 10).size() == 3);
  const auto hits = retrieve_sentences(q, pool, 5, std::int64_t{1});
  REQUIRE(hits.size() == 1);
  CHECK(hits[0].id == sentence_id(2, 0));
}

TEST_CASE("retrieve_reports excludes the query's own report") {
  RetrievalPool pool(2);
  pool.add({0, 0, {}}, std::vector<double>{1.0, 1.0});
  pool.add({1, 1, {}}, std::vector<double>{1.0, 0.0});
  const std::vector<double> q{1.0, 1.0};
  CHECK(retrieve_reports(q, pool, 1)[0].id == 0);
  CHECK(retrieve_reports(q, pool, 1, std::int64_t{0})[0].id == 1);
}

TEST_CASE("matching scores") {
  const std::vector<double> a{1.0, 0.0};
  const std::vector<double> b{0.0, 1.0};
  CHECK(match_score(a, b) == 0.5);
  CHECK(sentence_match(a, b) == 0.5);
  Rng rng(3);
  for (int i = 0; i < 50; ++i) {
    std::vector<double> x(6), y(6);
    for (double& v : x) v = rng.uniform(-2, 2);
    for (double& v : y) v = rng.uniform(-2, 2);
    CHECK(sentence_match(x, y) == sentence_match(y, x));
    double dot = 0.0;
    for (std::size_t j = 0; j < 6; ++j) dot += x[j] * y[j];
    CHECK(match_score(x, y) == doctest::Approx(oracle::sigmoid(dot)).epsilon(1e-14));
  }
}

TEST_CASE("pool bookkeeping") {
  RetrievalPool pool(2);
  pool.add({3, 3, {}}, std::vector<double>{1.0, 2.0});
  CHECK(pool.find(3).value() == 0);
  CHECK_FALSE(pool.find(4).has_value());
  CHECK_THROWS_AS(pool.add({3, 3, {}}, std::vector<double>{0.0, 0.0}), ValidationError);
  CHECK_THROWS_AS(pool.add({4, 4, {}}, std::vector<double>{0.0}), DimensionError);
  pool.freeze();
  CHECK_THROWS(pool.add({5, 5, {}}, std::vector<double>{0.0, 0.0}));
}
