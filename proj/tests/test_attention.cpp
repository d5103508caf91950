#include <cmath>

#include "doctest.h"
#include "hiret/attention.hpp"
#include "hiret/gradcheck.hpp"
#include "hiret/ops.hpp"
#include "oracles.hpp"

using namespace hiret;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (double& x : t.values()) x = rng.uniform(-scale, scale);
  return t;
}

}  // namespace

TEST_CASE("spatial attention") {
  ParameterStore store;
  Rng rng(21);
  init_spatial_attention(store, "att.", 3, 2, 4, rng);

  SUBCASE("identical cells give uniform weights") {
    Tensor map({2, 2, 3});
    for (std::size_t c = 0; c < 4; ++c)
      for (std::size_t i = 0; i < 3; ++i) map[c * 3 + i] = 0.1 * static_cast<double>(i + 1);
    Graph g(store, false);
    auto r = spatial_attention(g, g.constant(map), g.constant(Tensor::vector({0.3, -0.2})), "att.");
    for (double a : r.alpha.value()) CHECK(a == doctest::Approx(0.25).epsilon(1e-14));
  }
  SUBCASE("scores match the formula") {
    const Tensor map = random_tensor({2, 2, 3}, rng);
    const Tensor cond = Tensor::vector({0.4, -0.7});
    Graph g(store, false);
    Var scores = spatial_scores(g, g.constant(map), g.constant(cond), "att.");
    const Tensor& Wv = store.at("att.Wv");
    const Tensor& Wc = store.at("att.Wc");
    const Tensor& Wa = store.at("att.Wa");
    for (std::size_t cell = 0; cell < 4; ++cell) {
      double s = 0.0;
      for (std::size_t a = 0; a < 4; ++a) {
        double z = 0.0;
        for (std::size_t i = 0; i < 3; ++i) z += Wv.at(a, i) * map[cell * 3 + i];
        for (std::size_t i = 0; i < 2; ++i) z += Wc.at(a, i) * cond[i];
        s += Wa.at(0, a) * std::tanh(z);
      }
      CHECK(scores.value()[cell] == doctest::Approx(s).epsilon(1e-12));
    }
  }
  SUBCASE("weights are shift invariant") {
    Graph g(store, false);
    const Tensor s = Tensor::vector({0.5, -1.0, 2.0, 0.0});
    Tensor shifted = s;
    for (double& v : shifted.values()) v += 3.0;
    const auto a = spatial_weights(g.constant(s)).value();
    const auto b = spatial_weights(g.constant(shifted)).value();
    for (std::size_t i = 0; i < 4; ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
  }
  SUBCASE("aggregation") {
    Graph g(store, false);
    const Tensor map = random_tensor({2, 2, 3}, rng);
    Var one_hot = g.constant(Tensor::vector({0, 0, 1, 0}));
    const auto picked = attend_spatial(g.constant(map), one_hot).value();
    for (std::size_t i = 0; i < 3; ++i) CHECK(picked[i] == map[2 * 3 + i]);

    const Tensor alpha = Tensor::vector({0.1, 0.2, 0.3, 0.4});
    const auto mixed = attend_spatial(g.constant(map), g.constant(alpha)).value();
    for (std::size_t i = 0; i < 3; ++i) {
      double s = 0.0;
      for (std::size_t c = 0; c < 4; ++c) s += alpha[c] * map[c * 3 + i];
      CHECK(mixed[i] == doctest::Approx(s).epsilon(1e-12));
    }

    Tensor constant({2, 2, 3}, 1.5);
    for (double v : attend_spatial(g.constant(constant), g.constant(alpha)).value()) CHECK(v == doctest::Approx(1.5));
  }
  SUBCASE("finite-difference check through scores and aggregation") {
    const Tensor map = random_tensor({2, 2, 3}, rng);
    const Tensor cond = random_tensor({2}, rng);
    const auto report = check_gradients(store, [&](Graph& g) {
      auto r = spatial_attention(g, g.constant(map), g.constant(cond), "att.");
      return sum(tanh(r.attended));
    });
    CHECK(report.max_rel_error <= 1e-4);
  }
}

TEST_CASE("view fusion") {
  ParameterStore store;
  Rng rng(2);
  init_view_fusion(store, "fuse.", 3, 1, rng);
  Graph g(store, false);
  SUBCASE("identity passthrough for one view") {
    Tensor& W = store.at("fuse.Wf");
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 3; ++j) W.at(i, j) = i == j ? 1.0 : 0.0;
    const Var v = g.constant(Tensor::vector({1, -2, 3}));
    const auto out = fuse_views(g, std::span<const Var>(&v, 1), "fuse.", 1).value();
    CHECK(out[0] == 1);
    CHECK(out[1] == -2);
    CHECK(out[2] == 3);
  }
  SUBCASE("zero inputs give zero output") {
    const Var v = g.constant(Tensor({3}));
    for (double x : fuse_views(g, std::span<const Var>(&v, 1), "fuse.", 1).value()) CHECK(x == 0.0);
  }
  SUBCASE("finite-difference check with two views") {
    ParameterStore two;
    init_view_fusion(two, "fuse.", 3, 2, rng);
    const Tensor a = random_tensor({3}, rng);
    const Tensor b = random_tensor({3}, rng);
    const auto report = check_gradients(two, [&](Graph& gg) {
      std::vector<Var> views{gg.constant(a), gg.constant(b)};
      return sum(tanh(fuse_views(gg, views, "fuse.", 2)));
    });
    CHECK(report.max_rel_error <= 1e-4);
  }
}

TEST_CASE("multi-query attention") {
  const std::size_t d = 3;
  ParameterStore store;
  Rng rng(17);
  init_multi_query(store, "mq.", d, 2, rng);

  SUBCASE("a single value item is returned by every query") {
    Graph g(store, false);
    const Tensor value = random_tensor({1, d}, rng);
    auto r = multi_query_attention(g, g.constant(random_tensor({2, d}, rng)), g.constant(random_tensor({d}, rng)),
                                   g.constant(value), "mq.");
    for (double w : r.weights.value()) CHECK(w == doctest::Approx(1.0));
    // Both per-query results equal WV value, so the output is WO applied to
    // that vector twice.
    const auto v = oracle::linear(value, store.at("mq.WV"), Tensor({d}));
    Tensor twice({1, 2 * d});
    for (std::size_t i = 0; i < d; ++i) twice[i] = twice[d + i] = v[i];
    const auto expect = oracle::linear(twice, store.at("mq.WO"), Tensor({d}));
    for (std::size_t i = 0; i < d; ++i) CHECK(r.output.value()[i] == doctest::Approx(expect[i]).epsilon(1e-12));
  }
  SUBCASE("zero queries attend uniformly") {
    Graph g(store, false);
    auto r = multi_query_attention(g, g.constant(Tensor({2, d})), g.constant(random_tensor({d}, rng)),
                                   g.constant(random_tensor({4, d}, rng)), "mq.");
    for (double w : r.weights.value()) CHECK(w == doctest::Approx(0.25).epsilon(1e-14));
  }
  SUBCASE("2-query / 3-value case matches the formula") {
    const Tensor q = random_tensor({2, d}, rng);
    const Tensor anchor = random_tensor({d}, rng);
    const Tensor values = random_tensor({3, d}, rng);
    Graph g(store, false);
    auto r = multi_query_attention(g, g.constant(q), g.constant(anchor), g.constant(values), "mq.");

    const Tensor& WK = store.at("mq.WK");
    const Tensor& WV = store.at("mq.WV");
    std::vector<std::vector<double>> keys(3, std::vector<double>(d));
    std::vector<std::vector<double>> vals(3, std::vector<double>(d));
    for (std::size_t j = 0; j < 3; ++j) {
      for (std::size_t o = 0; o < d; ++o) {
        double k = 0.0;
        double v = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
          k += WK.at(o, i) * (values.at(j, i) + anchor[i]);
          v += WV.at(o, i) * values.at(j, i);
        }
        keys[j][o] = std::tanh(k);
        vals[j][o] = v;
      }
    }
    Tensor cat({1, 2 * d});
    for (std::size_t qi = 0; qi < 2; ++qi) {
      std::vector<double> logits(3);
      for (std::size_t j = 0; j < 3; ++j) {
        for (std::size_t i = 0; i < d; ++i) logits[j] += q.at(qi, i) * keys[j][i];
        logits[j] /= std::sqrt(static_cast<double>(d));
      }
      const auto w = oracle::softmax(logits);
      for (std::size_t j = 0; j < 3; ++j) CHECK(r.weights.value()[qi * 3 + j] == doctest::Approx(w[j]).epsilon(1e-10));
      for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < 3; ++j) cat[qi * d + i] += w[j] * vals[j][i];
    }
    const auto expect = oracle::linear(cat, store.at("mq.WO"), Tensor({d}));
    for (std::size_t i = 0; i < d; ++i) CHECK(r.output.value()[i] == doctest::Approx(expect[i]).epsilon(1e-10));
  }
  SUBCASE("prepared values give the same result") {
    const Tensor q = random_tensor({2, d}, rng);
    const Tensor anchor = random_tensor({d}, rng);
    const Tensor values = random_tensor({3, d}, rng);
    Graph g(store, false);
    auto direct = multi_query_attention(g, g.constant(q), g.constant(anchor), g.constant(values), "mq.");
    auto prepared = prepare_multi_query(g, g.constant(values), "mq.");
    auto reused = multi_query_attention(g, g.constant(q), g.constant(anchor), prepared, "mq.");
    for (std::size_t i = 0; i < d; ++i) CHECK(direct.output.value()[i] == reused.output.value()[i]);
  }
  SUBCASE("finite-difference check") {
    const Tensor q = random_tensor({2, d}, rng);
    const Tensor anchor = random_tensor({d}, rng);
    const Tensor values = random_tensor({3, d}, rng);
    const auto report = check_gradients(store, [&](Graph& g) {
      return sum(tanh(multi_query_attention(g, g.constant(q), g.constant(anchor), g.constant(values), "mq.").output));
    });
    CHECK(report.max_rel_error <= 1e-4);
  }
}
