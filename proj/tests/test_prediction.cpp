#include "helpers.hpp"

#include "sgdgp/data.hpp"
#include "sgdgp/prediction.hpp"

#include <doctest.h>

#include <limits>
#include <sstream>

using namespace sgdgp;
using testing::normal_matrix;

namespace {

Dataset smooth_data(std::uint64_t seed, Index n) {
  return simulate_gp(KernelSpec<double>::rbf(1.0), HyperParams<double>{2.0, 0.05}, n, InputDistribution::gaussian(3.0), 1,
                     seed);
}

} // namespace

TEST_CASE("near-noiseless interpolation") {
  CounterRng rng(1);
  const MatrixXd X = normal_matrix(rng, 30, 2);
  VectorXd y(30);
  for (Index i = 0; i < 30; ++i) y[i] = std::cos(X(i, 0)) * X(i, 1);
  Vector<double> ls(2);
  ls << 1.0, 1.0;
  const auto r = predict(HyperParams<double>{1.0, 1e-12}, KernelSpec<double>::rbf(ls), X, y, X);
  CHECK((r.mean - y).cwiseAbs().maxCoeff() < 1e-4);
}

TEST_CASE("single training point closed form") {
  MatrixXd X(1, 1), Xs(1, 1);
  X << 0.2;
  Xs << 0.9;
  VectorXd y(1);
  y << 1.7;
  const auto k = KernelSpec<double>::rbf(0.8);
  const double kx = eval_kernel(k, X.row(0), Xs.row(0));
  const auto r = predict(HyperParams<double>{3.0, 0.5}, k, X, y, Xs);
  CHECK(r.mean[0] == doctest::Approx(3.0 * kx * 1.7 / 3.5));
  CHECK(r.variance[0] == doctest::Approx(3.0 - 9.0 * kx * kx / 3.5));
}

TEST_CASE("prior variance is recovered far from the data and never exceeded") {
  CounterRng rng(2);
  const MatrixXd X = normal_matrix(rng, 50, 1);
  const VectorXd y = testing::normal_vector(rng, 50);
  MatrixXd far(1, 1);
  far << 1e3;
  const MultiKernel<double> k(
      std::vector<KernelSpec<double>>{KernelSpec<double>::rbf(0.5), KernelSpec<double>::matern(2.5, 1.0)});
  const HyperParams<double> theta{2.5, 0.5, 0.3};
  CHECK(predict(theta, k, X, y, far).variance[0] == doctest::Approx(3.0).epsilon(1e-6));
  const MatrixXd Xs = normal_matrix(rng, 200, 1, 2.0);
  const auto r = predict(theta, k, X, y, Xs);
  CHECK((r.variance.array() <= 3.0 + 1e-8).all());
  CHECK((r.variance.array() >= 0.0).all());
}

TEST_CASE("exact and conjugate gradient strategies agree") {
  const Dataset d = smooth_data(3, 600);
  const auto [train, test] = train_test_split(d, 0.8, 4);
  const HyperParams<double> theta{2.0, 0.05};
  const auto k = KernelSpec<double>::rbf(1.0);
  PredictOptions ex{PredictStrategy::Exact};
  ex.full_covariance = true;
  const auto a = predict(theta, k, train.X, train.y, test.X, ex);
  for (bool jacobi : {false, true}) {
    PredictOptions cg{PredictStrategy::Cg};
    cg.cg_tol = 1e-8;
    cg.jacobi = jacobi;
    const auto b = predict(theta, k, train.X, train.y, test.X, cg);
    CHECK(b.strategy == PredictStrategy::Cg);
    CHECK(!b.cg_iterations.empty());
    CHECK((a.mean - b.mean).norm() / a.mean.norm() <= 10 * cg.cg_tol);
    CHECK((a.variance - b.variance).cwiseAbs().maxCoeff() <= 1e-5);
  }
  REQUIRE(a.covariance);
  CHECK((a.covariance->diagonal() - a.variance).cwiseAbs().maxCoeff() < 1e-12);

  PredictOptions auto_opts;
  CHECK(predict(theta, k, train.X, train.y, test.X, auto_opts).strategy == PredictStrategy::Exact);
  auto_opts.exact_threshold = 10;
  CHECK(predict(theta, k, train.X, train.y, test.X, auto_opts).strategy == PredictStrategy::Cg);

  PredictOptions starved{PredictStrategy::Cg};
  starved.cg_tol = 1e-14;
  starved.cg_max_iter = 2;
  CHECK_THROWS_AS(predict(theta, k, train.X, train.y, test.X, starved), CgNotConverged);
}

TEST_CASE("nearest-neighbour prediction") {
  const Dataset d = smooth_data(5, 300);
  const auto [train, test] = train_test_split(d, 0.8, 6);
  const HyperParams<double> theta{2.0, 0.05};
  const auto k = KernelSpec<double>::rbf(1.0);
  const KdTree index(train.X);
  const auto exact = predict(theta, k, train.X, train.y, test.X);
  const auto all = predict_nn(theta, k, train.X, train.y, test.X, train.size(), index);
  CHECK((all.mean - exact.mean).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((all.variance - exact.variance).cwiseAbs().maxCoeff() < 1e-10);

  const auto one = predict_nn(theta, k, train.X, train.y, test.X, 1, index);
  for (Index t = 0; t < test.size(); ++t) {
    const Index nb = index.query(VectorXd(test.X.row(t).transpose()), 1)[0];
    const double kx = eval_kernel(k, train.X.row(nb), test.X.row(t));
    CHECK(one.mean[t] == doctest::Approx(2.0 * kx * train.y[nb] / 2.05));
  }

  double prev = std::numeric_limits<double>::infinity();
  for (Index nt : {1, 2, 4, 8, 16, 32, 64, 128, 240}) {
    const auto r = predict_nn(theta, k, train.X, train.y, test.X, nt, index);
    const double diff = (r.mean - exact.mean).cwiseAbs().maxCoeff();
    CHECK(diff <= prev + 1e-10);
    prev = diff;
  }
  CHECK_THROWS_AS(predict_nn(theta, k, train.X, train.y, test.X, 0, index), std::invalid_argument);
}

TEST_CASE("larger conditioning sets predict better on average") {
  double small = 0, large = 0;
  for (std::uint64_t s = 0; s < 5; ++s) {
    const Dataset d = simulate_gp(KernelSpec<double>::rbf(1.0), HyperParams<double>{2.0, 0.05}, 1200,
                                  InputDistribution::gaussian(10.0), 1, derive_seed(s, "nn-data"));
    const auto [train, test] = train_test_split(d, 0.75, derive_seed(s, "nn-split"));
    const KdTree index(train.X);
    const HyperParams<double> theta{2.0, 0.05};
    small += rmse(predict_nn(theta, KernelSpec<double>::rbf(1.0), train.X, train.y, test.X, 16, index).mean, test.y);
    large += rmse(predict_nn(theta, KernelSpec<double>::rbf(1.0), train.X, train.y, test.X, 256, index).mean, test.y);
  }
  CHECK(large <= small);
}

TEST_CASE("rmse") {
  VectorXd a(2), b(2);
  a << 0, 0;
  b << 3, 4;
  CHECK(rmse(a, a) == 0.0);
  CHECK(rmse(a, b) == doctest::Approx(3.535534).epsilon(1e-6));
  VectorXd p(3), q(3), pp(3), qq(3);
  p << 1, 2, 3;
  q << 2, 0, 7;
  pp << 3, 1, 2;
  qq << 7, 2, 0;
  CHECK(rmse(p, q) == rmse(pp, qq));
  CHECK_THROWS_AS(rmse(p, a), std::invalid_argument);
}

TEST_CASE("predictions csv") {
  PredictionResult r;
  r.mean = VectorXd::LinSpaced(2, 0.5, 1.5);
  r.variance = VectorXd::Constant(2, 0.25);
  std::ostringstream s;
  write_predictions_csv(r, VectorXd::Ones(2), s);
  CHECK(s.str() == "index,mean,variance,truth,abs_err\n0,0.5,0.25,1,0.5\n1,1.5,0.25,1,0.5\n");
}
