#include "helpers.hpp"

#include "sgdgp/sampling.hpp"

#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>

using namespace sgdgp;
using testing::normal_matrix;

TEST_CASE("counter rng is reproducible and roughly standard") {
  CounterRng a(42), b(42), c(43);
  for (int i = 0; i < 10; ++i) CHECK(a() == b());
  CHECK(a() != c());
  CHECK(derive_seed(1, "fit") != derive_seed(1, "data"));
  CHECK(derive_seed(1, "fit", 0) != derive_seed(1, "fit", 1));
  CHECK(derive_seed(1, "fit", 3) == derive_seed(1, "fit", 3));

  CounterRng r(5);
  double s = 0, ss = 0;
  const int N = 100000;
  for (int i = 0; i < N; ++i) {
    const double z = r.normal();
    s += z;
    ss += z * z;
  }
  CHECK(std::abs(s / N) < 5.0 / std::sqrt(N));
  CHECK(std::abs(ss / N - 1.0) < 5.0 * std::sqrt(2.0 / N));
  for (int i = 0; i < 1000; ++i) CHECK(r.below(7) < 7);
}

TEST_CASE("uniform minibatch") {
  CounterRng rng(1);
  const auto full = uniform_minibatch(10, 10, rng);
  CHECK(full.indices == std::vector<Index>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9});

  CounterRng r1(derive_seed(9, "t")), r2(derive_seed(9, "t"));
  const auto t1 = uniform_minibatch(10, 3, r1);
  const auto t2 = uniform_minibatch(10, 3, r2);
  CHECK(t1.indices == t2.indices);
  CHECK(std::set<Index>(t1.indices.begin(), t1.indices.end()).size() == 3);
  CHECK(std::is_sorted(t1.indices.begin(), t1.indices.end()));

  CHECK_THROWS_AS(uniform_minibatch(5, 6, rng), std::invalid_argument);
  CHECK_THROWS_AS(uniform_minibatch(5, 0, rng), std::invalid_argument);
}

TEST_CASE("uniform minibatch frequencies") {
  CounterRng rng(derive_seed(3, "freq"));
  const int draws = 50000;
  std::vector<int> counts(6, 0);
  for (int i = 0; i < draws; ++i) ++counts[static_cast<std::size_t>(uniform_minibatch(6, 1, rng).indices[0])];
  const double p = 1.0 / 6.0;
  const double sd = std::sqrt(draws * p * (1 - p));
  for (int c : counts) CHECK(std::abs(c - draws * p) < 5 * sd);

  // pairs for m = 2 of n = 4: all six subsets equally likely
  std::map<std::pair<Index, Index>, int> pairs;
  for (int i = 0; i < 60000; ++i) {
    const auto b = uniform_minibatch(4, 2, rng);
    ++pairs[{b.indices[0], b.indices[1]}];
  }
  CHECK(pairs.size() == 6);
  for (const auto& [k, c] : pairs) CHECK(std::abs(c - 10000) < 5 * std::sqrt(60000 * (1.0 / 6) * (5.0 / 6)));
}

TEST_CASE("kd tree matches brute force") {
  MatrixXd one(1, 2);
  one << 0.3, -0.2;
  const KdTree t1(one);
  CHECK(t1.query(VectorXd::Zero(2), 1) == std::vector<Index>{0});

  MatrixXd grid(100, 2);
  for (Index i = 0; i < 100; ++i) grid.row(i) << static_cast<double>(i % 10), static_cast<double>(i / 10);
  const KdTree tg(grid);
  VectorXd q(2);
  q << 4.3, 6.6;
  CHECK(tg.query(q, 4) == brute_force_knn(grid, q.data(), 4));

  CounterRng rng(17);
  for (int rep = 0; rep < 100; ++rep) {
    const Index n = 1 + static_cast<Index>(rng.below(500));
    const Index d = 1 + static_cast<Index>(rng.below(10));
    const MatrixXd X = normal_matrix(rng, n, d);
    const KdTree tree(X);
    const VectorXd point = testing::normal_vector(rng, d);
    const Index k = 1 + static_cast<Index>(rng.below(static_cast<std::uint64_t>(std::min<Index>(n, 20))));
    CHECK(tree.query(point, k) == brute_force_knn(X, point.data(), k));
    const Index row = static_cast<Index>(rng.below(static_cast<std::uint64_t>(n)));
    if (n > 1) {
      const Index kk = std::min<Index>(k, n - 1);
      CHECK(tree.neighbors_of(row, kk) == brute_force_knn(X, X.row(row).transpose().eval().data(), kk, row));
    }
  }
}

TEST_CASE("kd tree breaks ties by lowest index") {
  MatrixXd X(6, 1);
  X << 1.0, 0.0, 1.0, 1.0, 0.0, 1.0;
  const KdTree tree(X, 2);
  VectorXd q(1);
  q << 1.0;
  CHECK(tree.query(q, 3) == std::vector<Index>{0, 2, 3});
  CHECK(tree.query(q, 5) == std::vector<Index>{0, 2, 3, 5, 1});
  CHECK(tree.query(q, 3, Index{2}) == std::vector<Index>{0, 3, 5});
}

TEST_CASE("nearby minibatch") {
  MatrixXd X(10, 1);
  for (Index i = 0; i < 10; ++i) X(i, 0) = static_cast<double>(i);
  const KdTree tree(X);
  CHECK(nearby_minibatch_at(tree, 5, 3).indices == std::vector<Index>{5, 4, 6});
  CHECK(nearby_minibatch_at(tree, 7, 1).indices == std::vector<Index>{7});
  CHECK(nearby_minibatch_at(tree, 5, 3).center == Index{5});

  CounterRng rng(21);
  const MatrixXd Y = normal_matrix(rng, 200, 2);
  const KdTree ty(Y);
  for (int rep = 0; rep < 20; ++rep) {
    const auto b = nearby_minibatch(ty, 12, rng);
    REQUIRE(b.center);
    std::vector<Index> expect{*b.center};
    const auto nn = brute_force_knn(Y, Y.row(*b.center).transpose().eval().data(), 11, *b.center);
    expect.insert(expect.end(), nn.begin(), nn.end());
    CHECK(b.indices == expect);
  }
}

TEST_CASE("nearby batches are geometrically tighter than uniform ones") {
  CounterRng rng(31);
  const MatrixXd X = normal_matrix(rng, 1000, 1, 5.0);
  const KdTree tree(X);
  auto spread = [&](const Minibatch& b) {
    double s = 0;
    for (Index a : b.indices)
      for (Index c : b.indices) s += std::abs(X(a, 0) - X(c, 0));
    return s / static_cast<double>(b.size() * b.size());
  };
  double uni = 0, near = 0;
  for (int rep = 0; rep < 60; ++rep) {
    uni += spread(uniform_minibatch(1000, 32, rng));
    near += spread(nearby_minibatch(tree, 32, rng));
  }
  CHECK(near < uni);
}

TEST_CASE("draw_minibatch is a pure function of seed and iteration") {
  CounterRng rng(41);
  const MatrixXd X = normal_matrix(rng, 100, 1);
  const KdTree tree(X);
  for (auto scheme : {SamplingScheme::Uniform, SamplingScheme::Nearby}) {
    const auto a = draw_minibatch(scheme, 100, 10, 5, 3, &tree);
    const auto b = draw_minibatch(scheme, 100, 10, 5, 3, &tree);
    const auto c = draw_minibatch(scheme, 100, 10, 5, 4, &tree);
    CHECK(a.indices == b.indices);
    CHECK(a.indices != c.indices);
  }
  CHECK_THROWS(draw_minibatch(SamplingScheme::Nearby, 100, 10, 5, 3, nullptr));
  CHECK(sampling_scheme_from_string("nearby") == SamplingScheme::Nearby);
  CHECK(sampling_scheme_from_string("uniform") == SamplingScheme::Uniform);
  CHECK_THROWS(sampling_scheme_from_string("mixed-up"));
}
