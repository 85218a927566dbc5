#ifndef SGDGP_KERNELS_HPP
#define SGDGP_KERNELS_HPP

#include "sgdgp/types.hpp"

#include <cmath>
#include <string>
#include <utility>
#include <vector>

namespace sgdgp {

enum class KernelFamily { Rbf, Matern };

/// Half-integer Matérn smoothness orders with closed forms.
enum class MaternOrder { OneHalf, ThreeHalves, FiveHalves };

inline double matern_nu(MaternOrder order) {
  switch (order) {
    case MaternOrder::OneHalf: return 0.5;
    case MaternOrder::ThreeHalves: return 1.5;
    case MaternOrder::FiveHalves: return 2.5;
  }
  return 0.0;
}

inline MaternOrder matern_order_from_nu(double nu) {
  if (nu == 0.5) return MaternOrder::OneHalf;
  if (nu == 1.5) return MaternOrder::ThreeHalves;
  if (nu == 2.5) return MaternOrder::FiveHalves;
  throw std::invalid_argument("unsupported Matern order " + std::to_string(nu) +
                              " (supported: 0.5, 1.5, 2.5)");
}

/// Unit-diagonal stationary base kernel k0. RBF carries one lengthscale per
/// input dimension; Matérn carries a single scale h and accepts any dimension.
template <typename Scalar>
struct KernelSpec {
  KernelFamily family = KernelFamily::Rbf;
  Vector<Scalar> lengthscales;
  MaternOrder order = MaternOrder::FiveHalves;

  static KernelSpec rbf(Vector<Scalar> ls) {
    KernelSpec spec;
    spec.family = KernelFamily::Rbf;
    spec.lengthscales = std::move(ls);
    spec.validate();
    return spec;
  }

  static KernelSpec rbf(Scalar l) { return rbf(Vector<Scalar>::Constant(1, l)); }

  static KernelSpec matern(double nu, Scalar h) {
    KernelSpec spec;
    spec.family = KernelFamily::Matern;
    spec.order = matern_order_from_nu(nu);
    spec.lengthscales = Vector<Scalar>::Constant(1, h);
    spec.validate();
    return spec;
  }

  Index lengthscale_count() const { return lengthscales.size(); }

  void validate() const {
    if (lengthscales.size() == 0) throw std::invalid_argument("kernel needs at least one lengthscale");
    if (family == KernelFamily::Matern && lengthscales.size() != 1)
      throw std::invalid_argument("Matern kernel takes a single lengthscale h");
    for (Index j = 0; j < lengthscales.size(); ++j) {
      if (!(lengthscales[j] > Scalar(0)) || !std::isfinite(static_cast<double>(lengthscales[j])))
        throw std::invalid_argument("kernel lengthscales must be finite and strictly positive");
    }
  }

  /// Throws unless inputs of dimension `dim` are acceptable.
  void check_input_dim(Index dim) const {
    if (family == KernelFamily::Rbf && dim != lengthscales.size())
      throw std::invalid_argument("input dimension " + std::to_string(dim) +
                                  " does not match " + std::to_string(lengthscales.size()) +
                                  " RBF lengthscales");
  }
};

/// Ordered list of components; component l is weighted by θ_l.
template <typename Scalar>
struct MultiKernel {
  std::vector<KernelSpec<Scalar>> components;

  MultiKernel() = default;
  explicit MultiKernel(std::vector<KernelSpec<Scalar>> c) : components(std::move(c)) {
    if (components.empty()) throw std::invalid_argument("MultiKernel needs at least one component");
  }
  MultiKernel(KernelSpec<Scalar> single) : components{std::move(single)} {}  // NOLINT(implicit)

  Index size() const { return static_cast<Index>(components.size()); }

  Index lengthscale_slot_count() const {
    Index count = 0;
    for (const auto& c : components) count += c.lengthscale_count();
    return count;
  }

  Vector<Scalar> lengthscales() const {
    Vector<Scalar> out(lengthscale_slot_count());
    Index pos = 0;
    for (const auto& c : components) {
      out.segment(pos, c.lengthscale_count()) = c.lengthscales;
      pos += c.lengthscale_count();
    }
    return out;
  }

  MultiKernel with_lengthscales(const Vector<Scalar>& ls) const {
    if (ls.size() != lengthscale_slot_count())
      throw std::invalid_argument("lengthscale vector does not match kernel slots");
    MultiKernel out = *this;
    Index pos = 0;
    for (auto& c : out.components) {
      c.lengthscales = ls.segment(pos, c.lengthscale_count());
      c.validate();
      pos += c.lengthscale_count();
    }
    return out;
  }

  /// Maps a flat lengthscale slot to (component, position within component).
  std::pair<Index, Index> locate_slot(Index slot) const {
    Index pos = 0;
    for (Index c = 0; c < size(); ++c) {
      const Index count = components[c].lengthscale_count();
      if (slot < pos + count) return {c, slot - pos};
      pos += count;
    }
    throw std::out_of_range("lengthscale slot out of range");
  }
};

/// θ = (signal variances θ_1..θ_M, noise variance θ_{M+1}), plus optional
/// lengthscales overriding the kernel's own (empty when not learned).
template <typename Scalar>
struct HyperParams {
  Vector<Scalar> variances;
  Vector<Scalar> lengthscales;

  HyperParams() = default;
  explicit HyperParams(Vector<Scalar> v, Vector<Scalar> ls = {})
      : variances(std::move(v)), lengthscales(std::move(ls)) {
    validate();
  }
  HyperParams(std::initializer_list<Scalar> v) : variances(static_cast<Index>(v.size())) {
    Index i = 0;
    for (Scalar s : v) variances[i++] = s;
    validate();
  }

  Index signal_count() const { return variances.size() - 1; }
  Scalar noise() const { return variances[variances.size() - 1]; }
  Index parameter_count() const { return variances.size() + lengthscales.size(); }
  bool has_lengthscales() const { return lengthscales.size() > 0; }

  Vector<Scalar> flatten() const {
    Vector<Scalar> out(parameter_count());
    out << variances, lengthscales;
    return out;
  }

  HyperParams with_flat(const Vector<Scalar>& flat) const {
    if (flat.size() != parameter_count()) throw std::invalid_argument("flat parameter size mismatch");
    HyperParams out;
    out.variances = flat.head(variances.size());
    out.lengthscales = flat.tail(lengthscales.size());
    return out;
  }

  void validate() const {
    if (variances.size() < 2) throw std::invalid_argument("need at least one signal variance and a noise variance");
    for (Index i = 0; i < variances.size(); ++i)
      if (!(variances[i] > Scalar(0))) throw std::invalid_argument("variance parameters must be strictly positive");
    for (Index i = 0; i < lengthscales.size(); ++i)
      if (!(lengthscales[i] > Scalar(0))) throw std::invalid_argument("lengthscales must be strictly positive");
  }
};

/// Kernel set actually in effect for θ (θ's lengthscales win when present).
template <typename Scalar>
MultiKernel<Scalar> effective_kernels(const MultiKernel<Scalar>& kernels, const HyperParams<Scalar>& theta) {
  if (theta.variances.size() != kernels.size() + 1)
    throw std::invalid_argument("theta has " + std::to_string(theta.variances.size()) +
                                " variances, kernel list needs " + std::to_string(kernels.size() + 1));
  return theta.has_lengthscales() ? kernels.with_lengthscales(theta.lengthscales) : kernels;
}

namespace detail {

template <typename Scalar>
Scalar matern_of_distance(MaternOrder order, Scalar r, Scalar h) {
  using std::exp;
  using std::sqrt;
  switch (order) {
    case MaternOrder::OneHalf: return exp(-r / h);
    case MaternOrder::ThreeHalves: {
      const Scalar s = sqrt(Scalar(3)) * r / h;
      return (Scalar(1) + s) * exp(-s);
    }
    case MaternOrder::FiveHalves: {
      const Scalar s = sqrt(Scalar(5)) * r / h;
      return (Scalar(1) + s + s * s / Scalar(3)) * exp(-s);
    }
  }
  return Scalar(0);
}

/// dk/dh at distance r.
template <typename Scalar>
Scalar matern_dh(MaternOrder order, Scalar r, Scalar h) {
  using std::exp;
  using std::sqrt;
  switch (order) {
    case MaternOrder::OneHalf: {
      const Scalar s = r / h;
      return s * exp(-s) / h;
    }
    case MaternOrder::ThreeHalves: {
      const Scalar s = sqrt(Scalar(3)) * r / h;
      return s * s * exp(-s) / h;
    }
    case MaternOrder::FiveHalves: {
      const Scalar s = sqrt(Scalar(5)) * r / h;
      return s * s * (Scalar(1) + s) * exp(-s) / (Scalar(3) * h);
    }
  }
  return Scalar(0);
}

template <typename Scalar, typename DA, typename DB>
Scalar eval_unchecked(const KernelSpec<Scalar>& spec, const Eigen::MatrixBase<DA>& x,
                      const Eigen::MatrixBase<DB>& x2) {
  if (spec.family == KernelFamily::Rbf) {
    Scalar r2(0);
    for (Index j = 0; j < x.size(); ++j) {
      const Scalar d = (x(j) - x2(j)) / spec.lengthscales[j];
      r2 += d * d;
    }
    return std::exp(-r2 / Scalar(2));
  }
  Scalar r2(0);
  for (Index j = 0; j < x.size(); ++j) {
    const Scalar d = x(j) - x2(j);
    r2 += d * d;
  }
  return matern_of_distance(spec.order, std::sqrt(r2), spec.lengthscales[0]);
}

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& m, const char* what) {
  if (!m.allFinite()) throw std::invalid_argument(std::string(what) + " contains non-finite entries");
}

} // namespace detail

template <typename Scalar, typename DA, typename DB>
Scalar eval_kernel(const KernelSpec<Scalar>& spec, const Eigen::MatrixBase<DA>& x,
                   const Eigen::MatrixBase<DB>& x2) {
  if (x.size() != x2.size()) throw std::invalid_argument("kernel arguments differ in dimension");
  spec.check_input_dim(x.size());
  detail::require_finite(x, "kernel argument");
  detail::require_finite(x2, "kernel argument");
  return detail::eval_unchecked(spec, x.derived(), x2.derived());
}

/// K_{f,n} with (K)_{ij} = k0(x_i, x_j) over the rows of X.
template <typename Scalar, typename Derived>
Matrix<Scalar> kernel_matrix(const KernelSpec<Scalar>& spec, const Eigen::MatrixBase<Derived>& X) {
  if (X.rows() < 1) throw std::invalid_argument("kernel_matrix needs at least one input row");
  spec.check_input_dim(X.cols());
  detail::require_finite(X, "input matrix");
  const Index n = X.rows();
  Matrix<Scalar> K(n, n);
  for (Index j = 0; j < n; ++j) {
    K(j, j) = Scalar(1);
    for (Index i = j + 1; i < n; ++i) {
      const Scalar v = detail::eval_unchecked(spec, X.row(i), X.row(j));
      K(i, j) = v;
      K(j, i) = v;
    }
  }
  return K;
}

/// Rectangular cross-kernel k0(a_i, b_j).
template <typename Scalar, typename DA, typename DB>
Matrix<Scalar> cross_kernel_matrix(const KernelSpec<Scalar>& spec, const Eigen::MatrixBase<DA>& A,
                                   const Eigen::MatrixBase<DB>& B) {
  if (A.cols() != B.cols()) throw std::invalid_argument("cross_kernel_matrix: dimension mismatch");
  spec.check_input_dim(A.cols());
  detail::require_finite(A, "input matrix");
  detail::require_finite(B, "input matrix");
  Matrix<Scalar> K(A.rows(), B.rows());
  for (Index j = 0; j < B.rows(); ++j)
    for (Index i = 0; i < A.rows(); ++i) K(i, j) = detail::eval_unchecked(spec, A.row(i), B.row(j));
  return K;
}

/// One base kernel matrix per component.
template <typename Scalar, typename Derived>
std::vector<Matrix<Scalar>> component_matrices(const MultiKernel<Scalar>& kernels,
                                               const Eigen::MatrixBase<Derived>& X) {
  std::vector<Matrix<Scalar>> out;
  out.reserve(kernels.components.size());
  for (const auto& c : kernels.components) out.push_back(kernel_matrix(c, X));
  return out;
}

/// K_n(θ) = Σ θ_l K^{(l)} + θ_{M+1} I from precomputed component matrices.
template <typename Scalar>
Matrix<Scalar> combine_components(const std::vector<Matrix<Scalar>>& comps, const Vector<Scalar>& variances) {
  if (static_cast<Index>(comps.size()) + 1 != variances.size())
    throw std::invalid_argument("variance vector does not match component count");
  const Index n = comps.front().rows();
  Matrix<Scalar> K = variances[variances.size() - 1] * Matrix<Scalar>::Identity(n, n);
  for (std::size_t l = 0; l < comps.size(); ++l) K.noalias() += variances[static_cast<Index>(l)] * comps[l];
  return K;
}

template <typename Scalar, typename Derived>
Matrix<Scalar> marginal_covariance(const MultiKernel<Scalar>& kernels, const HyperParams<Scalar>& theta,
                                   const Eigen::MatrixBase<Derived>& X) {
  const auto eff = effective_kernels(kernels, theta);
  return combine_components(component_matrices(eff, X), theta.variances);
}

/// Derivative of the base kernel matrix of `spec` with respect to its
/// lengthscale `pos`, given the already-evaluated matrix K.
template <typename Scalar, typename Derived>
Matrix<Scalar> base_lengthscale_grad(const KernelSpec<Scalar>& spec, const Matrix<Scalar>& K,
                                     const Eigen::MatrixBase<Derived>& X, Index pos) {
  const Index n = X.rows();
  Matrix<Scalar> G(n, n);
  if (spec.family == KernelFamily::Rbf) {
    const Scalar l = spec.lengthscales[pos];
    const Scalar l3 = l * l * l;
    for (Index j = 0; j < n; ++j) {
      G(j, j) = Scalar(0);
      for (Index i = j + 1; i < n; ++i) {
        const Scalar d = X(i, pos) - X(j, pos);
        const Scalar v = K(i, j) * d * d / l3;
        G(i, j) = v;
        G(j, i) = v;
      }
    }
    return G;
  }
  const Scalar h = spec.lengthscales[0];
  for (Index j = 0; j < n; ++j) {
    G(j, j) = Scalar(0);
    for (Index i = j + 1; i < n; ++i) {
      const Scalar r = (X.row(i) - X.row(j)).norm();
      const Scalar v = detail::matern_dh(spec.order, r, h);
      G(i, j) = v;
      G(j, i) = v;
    }
  }
  return G;
}

/// ∂K_n(θ)/∂θ_p. Index layout: [0, M) signal variances, M noise variance,
/// M+1+s lengthscale slot s (flattened over components).
template <typename Scalar, typename Derived>
Matrix<Scalar> kernel_matrix_grad(const MultiKernel<Scalar>& kernels, const HyperParams<Scalar>& theta,
                                  const Eigen::MatrixBase<Derived>& X, Index param_index) {
  const auto eff = effective_kernels(kernels, theta);
  const Index M = eff.size();
  const Index n = X.rows();
  if (param_index < 0 || param_index > M + eff.lengthscale_slot_count())
    throw std::out_of_range("param_index " + std::to_string(param_index) + " out of range");
  if (param_index < M) return kernel_matrix(eff.components[param_index], X);
  if (param_index == M) return Matrix<Scalar>::Identity(n, n);
  const auto [comp, pos] = eff.locate_slot(param_index - M - 1);
  const auto& spec = eff.components[comp];
  const Matrix<Scalar> K = kernel_matrix(spec, X);
  return theta.variances[comp] * base_lengthscale_grad(spec, K, X, pos);
}

} // namespace sgdgp

#endif // SGDGP_KERNELS_HPP
