#include "helpers.hpp"

#include "sgdgp/diagnostics.hpp"

#include <doctest.h>

#include <algorithm>
#include <sstream>

using namespace sgdgp;
using testing::normal_matrix;

namespace {

// Eigenvalues of the unit RBF operator under N(0, σ²) inputs in the
// parametrization a = 1/(4σ²), b = 1/(2l²): λ_j = √(2a/A)·B^{j−1}.
std::pair<double, double> reference_law(double sigma, double l) {
  const double a = 1.0 / (4 * sigma * sigma);
  const double b = 1.0 / (2 * l * l);
  const double c = std::sqrt(a * a + 2 * a * b);
  const double A = a + b + c;
  return {std::sqrt(2 * a / A), b / A};
}

} // namespace

TEST_CASE("expected gradient vanishes at the truth") {
  CounterRng rng(1);
  const MatrixXd Xb = normal_matrix(rng, 24, 1, 3.0);
  const MultiKernel<double> k(
      std::vector<KernelSpec<double>>{KernelSpec<double>::rbf(0.5), KernelSpec<double>::matern(1.5, 2.0)});
  const HyperParams<double> truth{3.0, 1.0, 0.7};
  const VectorXd g = conditional_expected_gradient(truth, truth, k, Xb, ScalingPolicy::log_scaled(3.0));
  CHECK(g.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("expected gradient scalar case") {
  MatrixXd x(1, 1);
  x << 0.0;
  const HyperParams<double> theta{2.0, 2.0}, truth{1.0, 1.0};
  const VectorXd g = conditional_expected_gradient(theta, truth, KernelSpec<double>::rbf(1.0), x, ScalingPolicy::linear());
  CHECK(g[1] == doctest::Approx(1.0 / 16.0));
  CHECK(g[0] == doctest::Approx(1.0 / 16.0));
  const VectorXd ge = conditional_expected_gradient_eigen(theta.variances, truth.variances, {VectorXd::Ones(1)},
                                                          ScalingPolicy::linear());
  CHECK(ge[1] == doctest::Approx(0.0625));
}

TEST_CASE("eigenvalue and trace forms of the expected gradient agree") {
  CounterRng rng(2);
  const KernelSpec<double> kernel = KernelSpec<double>::rbf(0.7);
  const MatrixXd Xb = normal_matrix(rng, 40, 1, 3.0);
  const HyperParams<double> theta{5.0, 3.0}, truth{4.0, 1.0};
  const auto scaling = ScalingPolicy::log_scaled(3.0);
  const VectorXd direct = conditional_expected_gradient(theta, truth, kernel, Xb, scaling);
  const VectorXd eig = sym_eigenvalues(kernel_matrix(kernel, Xb)).values;
  const VectorXd viaeig = conditional_expected_gradient_eigen(theta.variances, truth.variances, {eig}, scaling);
  CHECK((direct - viaeig).norm() / direct.norm() < 1e-10);
}

TEST_CASE("curvature closed forms") {
  CHECK(curvature(4.0, 1.0, VectorXd::Ones(1)) == doctest::Approx(0.02));
  CHECK(curvature(4.0, 0.5, VectorXd::Zero(7)) == doctest::Approx(1.0 / (2 * 0.25)));

  CounterRng rng(3);
  const MatrixXd Xb = normal_matrix(rng, 30, 1, 2.0);
  const MatrixXd Kf = kernel_matrix(KernelSpec<double>::rbf(0.5), Xb);
  const MatrixXd K = 4.0 * Kf + MatrixXd::Identity(30, 30);
  const MatrixXd Kinv = K.inverse();
  const double by_trace = (Kinv * Kinv).trace() / (2.0 * 30.0);
  CHECK(testing::rel_err(curvature(4.0, 1.0, sym_eigenvalues(Kf).values), by_trace) < 1e-8);
  CHECK(testing::rel_err(batch_curvature(4.0, 1.0, KernelSpec<double>::rbf(0.5), Xb), by_trace) < 1e-8);
}

TEST_CASE("curvature is the derivative of the expected noise gradient") {
  CounterRng rng(4);
  const MatrixXd pool = normal_matrix(rng, 500, 1, 10.0);
  for (int rep = 0; rep < 10; ++rep) {
    const Minibatch b = uniform_minibatch(500, 16 + static_cast<Index>(rng.below(40)), rng);
    const MatrixXd Xb = pool(b.indices, Eigen::all);
    const KernelSpec<double> k = KernelSpec<double>::rbf(0.5);
    const HyperParams<double> truth{4.0, 1.0};
    const double h = 1e-4;
    const double fd = (conditional_expected_gradient(HyperParams<double>{4.0, 1.0 + h}, truth, k, Xb,
                                                     ScalingPolicy::linear())[1] -
                       conditional_expected_gradient(HyperParams<double>{4.0, 1.0 - h}, truth, k, Xb,
                                                     ScalingPolicy::linear())[1]) /
                      (2 * h);
    CHECK(testing::rel_err(curvature(4.0, 1.0, sym_eigenvalues(kernel_matrix(k, Xb)).values), fd) < 1e-4);
  }
}

TEST_CASE("curvature surrogate") {
  CHECK(curvature_surrogate(4.0, 0.5, VectorXd::Zero(10), 10) == doctest::Approx(4.0));
  CHECK(curvature_surrogate(1.0, 1.0, VectorXd::Ones(1), 1) == doctest::Approx(0.25));
  const double a = curvature_surrogate(4.0, 1.0, analytic_gaussian_eigenvalues(10.0, 0.5, 2048), 2048);
  const double b = curvature_surrogate(4.0, 1.0, analytic_gaussian_eigenvalues(10.0, 1.0, 2048), 2048);
  const double c = curvature_surrogate(4.0, 1.0, analytic_gaussian_eigenvalues(10.0, 2.0, 2048), 2048);
  CHECK(a < b);
  CHECK(b < c);
}

TEST_CASE("analytic Gaussian eigenvalues") {
  for (double l : {0.3, 0.5, 1.0, 2.5}) {
    const auto [lead, ratio] = reference_law(10.0, l);
    CHECK(gaussian_eigen_ratio(10.0, l) == doctest::Approx(ratio).epsilon(1e-12));
    CHECK(analytic_gaussian_eigenvalues(10.0, l, 1)[0] == doctest::Approx(lead).epsilon(1e-12));
  }
  const double beta = gaussian_eigen_ratio(10.0, 0.5);
  const VectorXd lam = analytic_gaussian_eigenvalues(10.0, 0.5, 40);
  for (Index J : {1, 5, 40}) CHECK(lam.head(J).sum() == doctest::Approx(1.0 - std::pow(beta, J)).epsilon(1e-12));
  double prev = 1.0;
  for (double l = 0.1; l < 5.0; l += 0.1) {
    const double r = gaussian_eigen_ratio(10.0, l);
    CHECK(r < prev);
    prev = r;
  }
  CHECK_THROWS_AS(gaussian_eigen_ratio(0.0, 1.0), std::invalid_argument);
}

TEST_CASE("eigendecay fit on synthetic spectra") {
  const Index n = 100;
  EigenSpectrum<double> geo;
  geo.values.resize(30);
  for (Index j = 1; j <= 30; ++j) geo.values[j - 1] = n * 0.1 * std::exp(-0.7 * j);
  const auto e = eigendecay_fit(geo, n, DecayFamily::Exponential);
  CHECK(e.rate == doctest::Approx(0.7).epsilon(1e-10));
  CHECK(e.scale == doctest::Approx(0.1 * std::exp(-0.7)).epsilon(1e-10));
  CHECK(e.residual < 1e-10);

  EigenSpectrum<double> poly;
  poly.values.resize(30);
  for (Index j = 1; j <= 30; ++j) poly.values[j - 1] = n * std::pow(static_cast<double>(j), -4.0);
  const auto p = eigendecay_fit(poly, n, DecayFamily::Polynomial);
  CHECK(2 * p.rate == doctest::Approx(4.0).epsilon(1e-10));
  CHECK(p.scale == doctest::Approx(1.0).epsilon(1e-10));

  EigenSpectrum<double> tiny;
  tiny.values = VectorXd::Zero(10);
  tiny.values[0] = 1.0;
  tiny.values[1] = 0.5;
  CHECK_THROWS_AS(eigendecay_fit(tiny, 10, DecayFamily::Exponential), std::invalid_argument);
}

TEST_CASE("eigendecay fit recovers the analytic law on a kernel matrix") {
  CounterRng rng(5);
  const Index n = 1024;
  const MatrixXd X = normal_matrix(rng, n, 1, 10.0);
  const auto spec = sym_eigenvalues(kernel_matrix(KernelSpec<double>::rbf(0.5), X));
  const auto fit = eigendecay_fit(spec, n, DecayFamily::Exponential, 10);
  const double beta = gaussian_eigen_ratio(10.0, 0.5);
  CHECK(testing::rel_err(fit.rate, -std::log(beta)) < 0.15);
  CHECK(testing::rel_err(fit.scale, 1.0 - beta) < 0.15);
  CHECK(fit.last_index == 10);
}

TEST_CASE("curvature experiment") {
  CurvatureExperimentConfig c;
  c.pool_size = 64;
  c.batch_sizes = {8, 64};
  c.replicates = 6;
  c.seed = 3;
  const auto reports = curvature_experiment(c);
  REQUIRE(reports.size() == 4);
  CHECK(reports[0].scheme == SamplingScheme::Uniform);
  CHECK(reports[1].scheme == SamplingScheme::Nearby);
  CHECK(reports[0].sd > 0.0);
  CHECK(reports[1].sd > 0.0);
  // m = n: both schemes see the whole pool
  CHECK(reports[2].mean == doctest::Approx(reports[3].mean).epsilon(1e-12));

  c.replicates = 1;
  const auto single = curvature_experiment(c);
  for (const auto& r : single) CHECK(r.sd == 0.0);

  std::ostringstream s;
  write_curvature_csv(reports, s);
  const std::string csv = s.str();
  CHECK(csv.rfind("batch_size,scheme,replicates,theta_1,theta_2,mean,sd,min,max\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
}

TEST_CASE("monte carlo gradient error shrinks at the root-draws rate") {
  CounterRng rng(6);
  const MatrixXd Xb = normal_matrix(rng, 32, 1, 5.0);
  const HyperParams<double> theta{5.0, 3.0}, truth{4.0, 1.0};
  const auto scaling = ScalingPolicy::log_scaled(3.0);
  const auto small = monte_carlo_gradient(theta, truth, KernelSpec<double>::rbf(0.5), Xb, scaling, 2000, 11);
  const auto large = monte_carlo_gradient(theta, truth, KernelSpec<double>::rbf(0.5), Xb, scaling, 18000, 12);
  const VectorXd gstar = conditional_expected_gradient(theta, truth, KernelSpec<double>::rbf(0.5), Xb, scaling);
  for (Index l = 0; l < 2; ++l) {
    CHECK(small.standard_error[l] / large.standard_error[l] == doctest::Approx(3.0).epsilon(0.1));
    CHECK(std::abs(small.mean[l] - gstar[l]) < 4 * small.standard_error[l]);
    CHECK(std::abs(large.mean[l] - gstar[l]) < 4 * large.standard_error[l]);
  }
}

TEST_CASE("eigenvalue ratio sums grow logarithmically and linearly") {
  CounterRng rng(7);
  std::vector<std::pair<double, double>> sums;
  for (Index n : {512, 1024, 2048}) {
    const MatrixXd X = normal_matrix(rng, n, 1, 10.0);
    sums.push_back(eigen_ratio_sums(4.0, 1.0, sym_eigenvalues(kernel_matrix(KernelSpec<double>::rbf(0.5), X)).values));
  }
  for (std::size_t i = 1; i < sums.size(); ++i) {
    const double weighted = sums[i].first / sums[i - 1].first;
    const double plain = sums[i].second / sums[i - 1].second;
    CHECK(weighted < 1.5);
    CHECK(plain == doctest::Approx(2.0).epsilon(0.1));
  }
}
