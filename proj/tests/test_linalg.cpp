#include "helpers.hpp"

#include "sgdgp/linalg.hpp"

#include <doctest.h>

#include <Eigen/Eigenvalues>

using namespace sgdgp;
using testing::normal_vector;
using testing::random_spd;

TEST_CASE("cholesky examples") {
  MatrixXd four(1, 1);
  four << 4.0;
  CHECK(cholesky(four).lower()(0, 0) == 2.0);
  const MatrixXd I = MatrixXd::Identity(5, 5);
  CHECK(MatrixXd(cholesky(I).lower()) == I);

  CounterRng rng(1);
  const MatrixXd A = random_spd(rng, 8);
  CHECK((cholesky(A).reconstruct() - A).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("cholesky rejects indefinite and non-finite input") {
  MatrixXd bad(2, 2);
  bad << 1.0, 2.0, 2.0, 1.0;
  CHECK_THROWS_AS(cholesky(bad), NotPositiveDefinite);
  MatrixXd nan(1, 1);
  nan << std::nan("");
  CHECK_THROWS(cholesky(nan));
}

TEST_CASE("solve") {
  const MatrixXd I = MatrixXd::Identity(3, 3);
  VectorXd b(3);
  b << 1, -2, 3;
  CHECK(solve_vec(cholesky(I), b) == b);
  MatrixXd five(1, 1);
  five << 5.0;
  VectorXd ten(1);
  ten << 10.0;
  CHECK(solve_vec(cholesky(five), ten)[0] == doctest::Approx(2.0));

  CounterRng rng(2);
  for (Index n : {16, 64, 256}) {
    const MatrixXd A = random_spd(rng, n);
    const VectorXd rhs = normal_vector(rng, n);
    const VectorXd x = solve_vec(cholesky(A), rhs);
    CHECK((A * x - rhs).norm() / rhs.norm() < 1e-8);
  }
}

TEST_CASE("log_det") {
  CHECK(log_det(cholesky(MatrixXd::Identity(4, 4).eval())) == 0.0);
  MatrixXd e(1, 1);
  e << std::exp(1.0);
  CHECK(log_det(cholesky(e)) == doctest::Approx(1.0).epsilon(1e-15));

  CounterRng rng(3);
  const MatrixXd A = random_spd(rng, 8);
  const VectorXd ev = Eigen::SelfAdjointEigenSolver<MatrixXd>(A).eigenvalues();
  CHECK(log_det(cholesky(A)) == doctest::Approx(ev.array().log().sum()).epsilon(1e-8));
}

TEST_CASE("sym_eigenvalues") {
  MatrixXd D = VectorXd::LinSpaced(3, 3, 1).asDiagonal();
  D(1, 1) = 1.0;
  D(2, 2) = 2.0;
  const auto s = sym_eigenvalues(D);
  CHECK(s.values[0] == doctest::Approx(3.0));
  CHECK(s.values[1] == doctest::Approx(2.0));
  CHECK(s.values[2] == doctest::Approx(1.0));

  const double rho = 0.3;
  MatrixXd R(2, 2);
  R << 1, rho, rho, 1;
  const auto r = sym_eigenvalues(R);
  CHECK(r.values[0] == doctest::Approx(1 + rho));
  CHECK(r.values[1] == doctest::Approx(1 - rho));

  CounterRng rng(4);
  MatrixXd B = testing::normal_matrix(rng, 32, 32);
  const MatrixXd S = B + B.transpose();
  const auto es = sym_eigenvalues(S);
  CHECK(es.values.sum() == doctest::Approx(S.trace()).epsilon(1e-10));
  for (Index j = 1; j < es.values.size(); ++j) CHECK(es.values[j] <= es.values[j - 1]);
}

TEST_CASE("log_det matches eigenvalue sum on moderately conditioned matrices") {
  CounterRng rng(5);
  for (int rep = 0; rep < 5; ++rep) {
    const MatrixXd A = random_spd(rng, 30);
    CHECK(log_det(cholesky(A)) == doctest::Approx(sym_eigenvalues(A).values.array().log().sum()).epsilon(1e-6));
  }
}

TEST_CASE("cg_solve") {
  const LinearOperator<double> identity = [](const VectorXd& v) { return v; };
  VectorXd b(4);
  b << 1, 2, 3, 4;
  const auto r1 = cg_solve<double>(identity, b, 1e-12, 10);
  CHECK(r1.iterations == 1);
  CHECK((r1.x - b).norm() < 1e-14);

  const VectorXd diag = VectorXd::LinSpaced(8, 1, 8);
  const LinearOperator<double> D = [&](const VectorXd& v) { return VectorXd(diag.cwiseProduct(v)); };
  const auto r2 = cg_solve<double>(D, VectorXd::Ones(8), 1e-10, 100);
  CHECK(r2.converged);
  CHECK((r2.x - diag.cwiseInverse()).cwiseAbs().maxCoeff() < 1e-9);

  CounterRng rng(6);
  MatrixXd A = random_spd(rng, 64) / 64.0;
  A.diagonal().array() += 0.5;
  const LinearOperator<double> Aop = [&](const VectorXd& v) { return VectorXd(A * v); };
  const VectorXd rhs = normal_vector(rng, 64);
  const auto r3 = cg_solve<double>(Aop, rhs, 1e-8, 1000);
  CHECK(r3.converged);
  CHECK(r3.iterations <= 64 + 5);
  const VectorXd direct = solve_vec(cholesky(A), rhs);
  CHECK((r3.x - direct).norm() / direct.norm() <= 10 * 1e-8 * (A.norm() * A.inverse().norm()));
}

TEST_CASE("cg agrees with cholesky within 10 tol on a kernel-like system") {
  CounterRng rng(7);
  const Index n = 200;
  MatrixXd A = random_spd(rng, n) / static_cast<double>(n);
  A.diagonal().array() += 1.0;
  const LinearOperator<double> Aop = [&](const VectorXd& v) { return VectorXd(A * v); };
  const VectorXd rhs = normal_vector(rng, n);
  const double tol = 1e-8;
  const auto cg = cg_solve<double>(Aop, rhs, tol, 1000);
  const auto pcg = cg_solve<double>(Aop, rhs, tol, 1000, jacobi_preconditioner<double>(A.diagonal()));
  const VectorXd direct = solve_vec(cholesky(A), rhs);
  CHECK((cg.x - direct).norm() / direct.norm() <= 10 * tol);
  CHECK((pcg.x - direct).norm() / direct.norm() <= 10 * tol);
}

TEST_CASE("cg reports breakdown and non-convergence") {
  const LinearOperator<double> neg = [](const VectorXd& v) { return VectorXd(-v); };
  CHECK_THROWS_AS(cg_solve<double>(neg, VectorXd::Ones(3), 1e-8, 10), CgBreakdown);
  const VectorXd diag = VectorXd::LinSpaced(50, 1, 1000);
  const LinearOperator<double> D = [&](const VectorXd& v) { return VectorXd(diag.cwiseProduct(v)); };
  const auto r = cg_solve<double>(D, VectorXd::Ones(50), 1e-14, 2);
  CHECK_FALSE(r.converged);
  CHECK(r.iterations == 2);
}
