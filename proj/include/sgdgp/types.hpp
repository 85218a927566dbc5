#ifndef SGDGP_TYPES_HPP
#define SGDGP_TYPES_HPP

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace sgdgp {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using MatrixXd = Matrix<double>;
using VectorXd = Vector<double>;
using Index = Eigen::Index;

/// Raised when a covariance matrix fails Cholesky factorization.
class NotPositiveDefinite : public std::runtime_error {
public:
  explicit NotPositiveDefinite(const std::string& what)
      : std::runtime_error("matrix is not positive definite: " + what) {}
};

} // namespace sgdgp

#endif // SGDGP_TYPES_HPP
