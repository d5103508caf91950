#include <cmath>

#include "doctest.h"
#include "hiret/errors.hpp"
#include "hiret/metrics.hpp"
#include "hiret/rng.hpp"
#include "oracles.hpp"

using namespace hiret;

namespace {

Tokens words(const std::string& text) {
  Tokens out;
  std::string cur;
  for (char c : text) {
    if (c == ' ') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

Tokens random_tokens(Rng& rng, std::size_t max_len) {
  static const char* pool[] = {"a", "b", "c", "d", "e"};
  Tokens t(1 + rng.index(max_len));
  for (auto& w : t) w = pool[rng.index(5)];
  return t;
}

}  // namespace

TEST_CASE("bleu") {
  const Tokens ref = words("the heart is normal in size");
  for (int n = 1; n <= 4; ++n) CHECK(bleu(ref, ref, n) == doctest::Approx(1.0));
  CHECK(bleu(words("x y z"), words("a b c"), 1) == 0.0);

  // Clipped counts by hand: 2 of 3 unigrams and 1 of 2 bigrams match, equal
  // lengths so BP = 1.
  CHECK(bleu(words("a b c"), words("a b d"), 1) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(bleu(words("a b c"), words("a b d"), 2) == doctest::Approx(std::sqrt(1.0 / 3.0)).epsilon(1e-12));
  // Short candidate: BP = exp(1 - 4/2).
  CHECK(bleu(words("a b"), words("a b c d"), 1) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
  // "a a a" against "a b": a is clipped to one match.
  CHECK(bleu(words("a a a"), words("a b"), 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

  SUBCASE("corpus BLEU pools counts") {
    const std::vector<Tokens> cand{words("a b c"), words("x y")};
    const std::vector<Tokens> refs{words("a b d"), words("x y")};
    // unigrams 4/5, bigrams 2/3, lengths equal.
    CHECK(corpus_bleu(cand, refs, 1) == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(corpus_bleu(cand, refs, 2) == doctest::Approx(std::sqrt(0.8 * 2.0 / 3.0)).epsilon(1e-12));
  }
}

TEST_CASE("rouge_l") {
  CHECK(rouge_l(words("a b c"), words("a b c")) == doctest::Approx(1.0));
  CHECK(rouge_l(words("a b"), words("c d")) == 0.0);
  // LCS 2, P = R = 2/3 so F = 2/3 for any beta.
  CHECK(rouge_l(words("a b c"), words("a d b")) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  // P = 1, R = 1/2, beta 1.2: (1 + b^2) P R / (R + b^2 P).
  const double b2 = 1.44;
  CHECK(rouge_l(words("a b"), words("a x b y")) == doctest::Approx((1 + b2) * 0.5 / (0.5 + b2)).epsilon(1e-12));

  Rng rng(99);
  for (int i = 0; i < 200; ++i) {
    const Tokens a = random_tokens(rng, 12);
    const Tokens b = random_tokens(rng, 12);
    CHECK(lcs_length(a, b) == oracle::lcs(a, b));
  }
}

TEST_CASE("cider") {
  SUBCASE("toy corpus against independently computed tf-idf cosines") {
    const std::vector<Tokens> cand{words("a b c"), words("a a b"), words("x y")};
    const std::vector<Tokens> refs{words("a b d"), words("a b b"), words("x y")};
    const auto scores = cider_scores(cand, refs);
    CHECK(scores[0] == doctest::Approx(0.551085637791).epsilon(1e-9));
    CHECK(scores[1] == doctest::Approx(1.694723312138).epsilon(1e-9));
    CHECK(scores[2] == doctest::Approx(5.0).epsilon(1e-9));
    CHECK(cider(cand, refs) == doctest::Approx(2.415269649976).epsilon(1e-9));
  }
  SUBCASE("an exact unique match scores highest") {
    const std::vector<Tokens> refs{words("small left effusion is seen"), words("lungs are clear"),
                                   words("heart size is normal")};
    std::vector<Tokens> cand = refs;
    cand[1] = words("heart is clear");
    cand[2] = words("size normal");
    const auto s = cider_scores(cand, refs);
    CHECK(s[0] > s[1]);
    CHECK(s[0] > s[2]);
  }
  SUBCASE("no shared n-grams") {
    CHECK(cider({words("p q r")}, {words("a b c")}) == 0.0);
  }
  CHECK_THROWS_AS(cider({words("a")}, {}), ValidationError);
}

TEST_CASE("roc_auc") {
  CHECK(roc_auc({0.1, 0.2, 0.8, 0.9}, {0, 0, 1, 1}) == 1.0);
  CHECK(roc_auc({0.5, 0.5, 0.5, 0.5}, {0, 1, 0, 1}) == doctest::Approx(0.5));
  // Hand-built 10-sample case with a tie across the classes.
  const std::vector<double> s{0.9, 0.8, 0.7, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1};
  const std::vector<int> y{1, 1, 0, 1, 0, 1, 0, 0, 1, 0};
  // Wins per positive: 5, 5, 4.5, 3, 1 over 5 negatives each.
  CHECK(roc_auc(s, y) == doctest::Approx(18.5 / 25.0).epsilon(1e-12));
  CHECK(roc_auc(s, y) == doctest::Approx(oracle::pairwise_auc(s, y)).epsilon(1e-12));

  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> scores(20);
    std::vector<int> labels(20);
    for (std::size_t i = 0; i < 20; ++i) {
      scores[i] = std::round(rng.uniform() * 5.0) / 5.0;  // plenty of ties
      labels[i] = static_cast<int>(i % 2);
    }
    CHECK(roc_auc(scores, labels) == doctest::Approx(oracle::pairwise_auc(scores, labels)).epsilon(1e-12));
  }
  CHECK_THROWS_AS(roc_auc({0.1, 0.2}, {1, 1}), ValidationError);
}

TEST_CASE("clinical_auc") {
  const SyntheticWorld world = SyntheticWorld::make(3);
  const auto corpus = generate_corpus(3, 300, world);
  std::vector<Tokens> reports;
  std::vector<std::vector<int>> labels;
  for (const auto& s : corpus) {
    reports.push_back(flatten(s.sentences));
    labels.push_back(s.labels);
  }
  SUBCASE("ground truth scores 1 on every class") {
    const auto auc = clinical_auc(reports, labels, world);
    CHECK(auc.skipped.empty());
    CHECK(auc.mean == doctest::Approx(1.0));
  }
  SUBCASE("a constant report scores one half") {
    const std::vector<Tokens> same(reports.size(), reports.front());
    CHECK(clinical_auc(same, labels, world).mean == doctest::Approx(0.5));
  }
}
