#ifndef SGDGP_TESTS_HELPERS_HPP
#define SGDGP_TESTS_HELPERS_HPP

#include "sgdgp/random.hpp"
#include "sgdgp/types.hpp"

#include <cmath>

namespace testing {

using sgdgp::Index;
using sgdgp::MatrixXd;
using sgdgp::VectorXd;

inline MatrixXd normal_matrix(sgdgp::CounterRng& rng, Index rows, Index cols, double sd = 1.0) {
  MatrixXd A(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) A(i, j) = sd * rng.normal();
  return A;
}

inline VectorXd normal_vector(sgdgp::CounterRng& rng, Index n, double sd = 1.0) {
  return normal_matrix(rng, n, 1, sd).col(0);
}

/// B Bᵀ + I.
inline MatrixXd random_spd(sgdgp::CounterRng& rng, Index n) {
  const MatrixXd B = normal_matrix(rng, n, n);
  return B * B.transpose() + MatrixXd::Identity(n, n);
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

} // namespace testing

#endif // SGDGP_TESTS_HELPERS_HPP
