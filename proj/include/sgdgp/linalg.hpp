#ifndef SGDGP_LINALG_HPP
#define SGDGP_LINALG_HPP

#include "sgdgp/types.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <functional>
#include <optional>
#include <string>

namespace sgdgp {

/// Lower-triangular L with K = L Lᵀ.
template <typename Scalar>
class CholeskyFactor {
public:
  explicit CholeskyFactor(Matrix<Scalar> lower) : L_(std::move(lower)) {}

  const Matrix<Scalar>& lower() const { return L_; }
  Index size() const { return L_.rows(); }

  /// Reassembles L Lᵀ.
  Matrix<Scalar> reconstruct() const { return L_ * L_.transpose(); }

private:
  Matrix<Scalar> L_;
};

template <typename Derived>
CholeskyFactor<typename Derived::Scalar> cholesky(const Eigen::MatrixBase<Derived>& K) {
  using Scalar = typename Derived::Scalar;
  if (K.rows() != K.cols()) throw std::invalid_argument("cholesky: matrix is not square");
  Eigen::LLT<Matrix<Scalar>> llt(K);
  if (llt.info() != Eigen::Success)
    throw NotPositiveDefinite("Cholesky pivot <= 0 (n=" + std::to_string(K.rows()) + ")");
  Matrix<Scalar> L = llt.matrixL();
  for (Index i = 0; i < L.rows(); ++i) {
    if (!(L(i, i) > Scalar(0)) || !std::isfinite(static_cast<double>(L(i, i))))
      throw NotPositiveDefinite("non-positive Cholesky diagonal at row " + std::to_string(i));
  }
  return CholeskyFactor<Scalar>(std::move(L));
}

/// Solves K X = B for a vector or a multi-column right-hand side.
template <typename Scalar, typename Derived>
Matrix<Scalar> solve(const CholeskyFactor<Scalar>& factor, const Eigen::MatrixBase<Derived>& b) {
  if (b.rows() != factor.size()) throw std::invalid_argument("solve: dimension mismatch");
  Matrix<Scalar> x = b;
  factor.lower().template triangularView<Eigen::Lower>().solveInPlace(x);
  factor.lower().transpose().template triangularView<Eigen::Upper>().solveInPlace(x);
  return x;
}

template <typename Scalar, typename Derived>
Vector<Scalar> solve_vec(const CholeskyFactor<Scalar>& factor, const Eigen::MatrixBase<Derived>& b) {
  return solve(factor, b).col(0);
}

/// Solves L Z = B (half solve); ‖Z‖² gives quadratic forms bᵀK⁻¹b.
template <typename Scalar, typename Derived>
Matrix<Scalar> solve_lower(const CholeskyFactor<Scalar>& factor, const Eigen::MatrixBase<Derived>& b) {
  if (b.rows() != factor.size()) throw std::invalid_argument("solve_lower: dimension mismatch");
  Matrix<Scalar> z = b;
  factor.lower().template triangularView<Eigen::Lower>().solveInPlace(z);
  return z;
}

template <typename Scalar>
Scalar log_det(const CholeskyFactor<Scalar>& factor) {
  return Scalar(2) * factor.lower().diagonal().array().log().sum();
}

/// Eigenvalues of a symmetric matrix, sorted descending.
template <typename Scalar>
struct EigenSpectrum {
  Vector<Scalar> values;

  Index size() const { return values.size(); }
  Scalar operator[](Index j) const { return values[j]; }
};

inline constexpr Index kDefaultEigenCap = 4096;

template <typename Derived>
EigenSpectrum<typename Derived::Scalar> sym_eigenvalues(const Eigen::MatrixBase<Derived>& K,
                                                        Index cap = kDefaultEigenCap) {
  using Scalar = typename Derived::Scalar;
  if (K.rows() != K.cols()) throw std::invalid_argument("sym_eigenvalues: matrix is not square");
  if (K.rows() > cap)
    throw std::invalid_argument("sym_eigenvalues: n=" + std::to_string(K.rows()) + " exceeds cap " +
                                std::to_string(cap));
  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> solver(K, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw std::runtime_error("sym_eigenvalues: QR iteration did not converge");
  return EigenSpectrum<Scalar>{solver.eigenvalues().reverse()};
}

template <typename Scalar>
using LinearOperator = std::function<Vector<Scalar>(const Vector<Scalar>&)>;

template <typename Scalar>
struct CgResult {
  Vector<Scalar> x;
  int iterations = 0;
  Scalar relative_residual = Scalar(0);
  bool converged = false;
};

/// Raised when CG meets a direction with pᵀAp <= 0.
class CgBreakdown : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Conjugate gradients for A x = b with A symmetric positive definite.
/// Stops once ‖Ax − b‖/‖b‖ <= tol (recurrence residual) or after max_iter.
template <typename Scalar>
CgResult<Scalar> cg_solve(const LinearOperator<Scalar>& matvec, const Vector<Scalar>& b, Scalar tol, int max_iter,
                          const std::optional<LinearOperator<Scalar>>& precond = std::nullopt) {
  if (!(tol > Scalar(0))) throw std::invalid_argument("cg_solve: tol must be positive");
  const Index n = b.size();
  CgResult<Scalar> out;
  out.x = Vector<Scalar>::Zero(n);
  const Scalar bnorm = b.norm();
  if (bnorm == Scalar(0)) {
    out.converged = true;
    return out;
  }
  Vector<Scalar> r = b;
  Vector<Scalar> z = precond ? (*precond)(r) : r;
  Vector<Scalar> p = z;
  Scalar rz = r.dot(z);
  for (int it = 1; it <= max_iter; ++it) {
    const Vector<Scalar> Ap = matvec(p);
    const Scalar curvature = p.dot(Ap);
    if (!(curvature > Scalar(0))) throw CgBreakdown("cg_solve: non-positive curvature at iteration " + std::to_string(it));
    const Scalar step = rz / curvature;
    out.x.noalias() += step * p;
    r.noalias() -= step * Ap;
    out.iterations = it;
    out.relative_residual = r.norm() / bnorm;
    if (out.relative_residual <= tol) {
      out.converged = true;
      return out;
    }
    z = precond ? (*precond)(r) : r;
    const Scalar rz_next = r.dot(z);
    p = z + (rz_next / rz) * p;
    rz = rz_next;
  }
  return out;
}

/// Jacobi preconditioner z = r ./ diag(A).
template <typename Scalar>
LinearOperator<Scalar> jacobi_preconditioner(const Vector<Scalar>& diagonal) {
  return [inv = diagonal.cwiseInverse().eval()](const Vector<Scalar>& r) -> Vector<Scalar> {
    return inv.cwiseProduct(r);
  };
}

} // namespace sgdgp

#endif // SGDGP_LINALG_HPP
