#ifndef SGDGP_TRAINING_HPP
#define SGDGP_TRAINING_HPP

#include "sgdgp/data.hpp"
#include "sgdgp/kernels.hpp"
#include "sgdgp/linalg.hpp"
#include "sgdgp/sampling.hpp"

#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <numbers>
#include <optional>
#include <vector>

namespace sgdgp {

enum class ScaleMode { Linear, LogScaled };

/// Per-slot divisors s_l(m) of the stochastic gradient. Signal-variance slots
/// follow `signal_mode` (optionally overridden per slot); the noise slot and
/// lengthscale slots always use s(m) = m.
struct ScalingPolicy {
  ScaleMode signal_mode = ScaleMode::Linear;
  std::vector<ScaleMode> signal_overrides;
  double tau = 1.0;

  static ScalingPolicy linear() { return {}; }
  static ScalingPolicy log_scaled(double tau) { return {ScaleMode::LogScaled, {}, tau}; }

  ScaleMode mode(Index slot) const {
    return slot < static_cast<Index>(signal_overrides.size()) ? signal_overrides[static_cast<std::size_t>(slot)]
                                                               : signal_mode;
  }

  bool uses_log(Index signal_count) const {
    for (Index l = 0; l < signal_count; ++l)
      if (mode(l) == ScaleMode::LogScaled) return true;
    return false;
  }

  /// s_l(m) for flat parameter slot `slot` of a model with M signal slots.
  double factor(Index slot, Index signal_count, Index m) const {
    if (slot < signal_count && mode(slot) == ScaleMode::LogScaled) {
      if (m < 3) throw std::invalid_argument("log-scaled slots need minibatch size m >= 3");
      if (!(tau > 0.0)) throw std::invalid_argument("scaling tau must be positive");
      return tau * std::log(static_cast<double>(m));
    }
    return static_cast<double>(m);
  }
};

/// Unscaled gradient terms t_l = tr[K⁻¹ ∂K_l] − αᵀ ∂K_l α with α = K⁻¹y, i.e.
/// tr[K⁻¹(I − y yᵀ K⁻¹) ∂K_l]. Lengthscale slots are included when θ carries
/// lengthscales.
template <typename Scalar, typename DX, typename DY>
Vector<Scalar> gradient_traces(const MultiKernel<Scalar>& kernels, const HyperParams<Scalar>& theta,
                               const Eigen::MatrixBase<DX>& X, const Eigen::MatrixBase<DY>& y) {
  if (X.rows() != y.size()) throw std::invalid_argument("gradient: X and y differ in row count");
  const auto eff = effective_kernels(kernels, theta);
  const Index n = X.rows();
  const Index M = eff.size();
  const auto comps = component_matrices(eff, X);
  const auto factor = cholesky(combine_components(comps, theta.variances));
  const Vector<Scalar> alpha = solve_vec(factor, y);

  Vector<Scalar> out(theta.parameter_count());
  // Small systems: one explicit inverse serves every slot. Larger systems
  // take one solve per slot instead.
  const bool explicit_inverse = n <= 64;
  Matrix<Scalar> Kinv;
  if (explicit_inverse) Kinv = solve(factor, Matrix<Scalar>::Identity(n, n));
  auto trace_term = [&](const Matrix<Scalar>& dK) -> Scalar {
    const Scalar tr = explicit_inverse ? Kinv.cwiseProduct(dK).sum() : solve(factor, dK).trace();
    return tr - alpha.dot(dK * alpha);
  };

  for (Index l = 0; l < M; ++l) out[l] = trace_term(comps[static_cast<std::size_t>(l)]);
  {
    const Scalar tr = explicit_inverse ? Kinv.trace()
                                       : solve_lower(factor, Matrix<Scalar>::Identity(n, n)).squaredNorm();
    out[M] = tr - alpha.squaredNorm();
  }
  if (theta.has_lengthscales()) {
    for (Index s = 0; s < theta.lengthscales.size(); ++s) {
      const auto [comp, pos] = eff.locate_slot(s);
      const Matrix<Scalar> dK = theta.variances[comp] *
                                base_lengthscale_grad(eff.components[static_cast<std::size_t>(comp)],
                                                      comps[static_cast<std::size_t>(comp)], X, pos);
      out[M + 1 + s] = trace_term(dK);
    }
  }
  return out;
}

/// ℓ(θ) = (1/2n)[yᵀK⁻¹y + log|K| + n log 2π].
template <typename Scalar, typename DX, typename DY>
Scalar nll_loss(const HyperParams<Scalar>& theta, const MultiKernel<Scalar>& kernels, const Eigen::MatrixBase<DX>& X,
                const Eigen::MatrixBase<DY>& y) {
  if (X.rows() != y.size()) throw std::invalid_argument("nll_loss: X and y differ in row count");
  const Index n = X.rows();
  const auto factor = cholesky(marginal_covariance(kernels, theta, X));
  const Scalar quad = solve_lower(factor, y).squaredNorm();
  return (quad + log_det(factor) + Scalar(n) * std::log(Scalar(2) * std::numbers::pi_v<Scalar>)) /
         (Scalar(2) * Scalar(n));
}

/// ∇ℓ(θ): entry l = (1/2n) tr[K⁻¹(I − y yᵀ K⁻¹) ∂K/∂θ_l].
template <typename Scalar, typename DX, typename DY>
Vector<Scalar> full_gradient(const HyperParams<Scalar>& theta, const MultiKernel<Scalar>& kernels,
                             const Eigen::MatrixBase<DX>& X, const Eigen::MatrixBase<DY>& y) {
  return gradient_traces(kernels, theta, X, y) / (Scalar(2) * Scalar(X.rows()));
}

/// Stochastic gradient on an already-gathered minibatch (X_ξ, y_ξ).
template <typename Scalar, typename DX, typename DY>
Vector<Scalar> batch_gradient(const HyperParams<Scalar>& theta, const MultiKernel<Scalar>& kernels,
                              const Eigen::MatrixBase<DX>& Xb, const Eigen::MatrixBase<DY>& yb,
                              const ScalingPolicy& scaling) {
  const Index m = Xb.rows();
  const Index M = theta.signal_count();
  Vector<Scalar> g = gradient_traces(kernels, theta, Xb, yb);
  for (Index l = 0; l < g.size(); ++l) g[l] /= Scalar(2) * Scalar(scaling.factor(l, M, m));
  return g;
}

/// g(θ; X_ξ, y_ξ): entry l = (1/2 s_l(m)) tr[K_ξ⁻¹(I − y_ξ y_ξᵀ K_ξ⁻¹) ∂K_ξ/∂θ_l].
template <typename Scalar>
Vector<Scalar> stochastic_gradient(const HyperParams<Scalar>& theta, const MultiKernel<Scalar>& kernels,
                                   const Minibatch& batch, const Matrix<Scalar>& X, const Vector<Scalar>& y,
                                   const ScalingPolicy& scaling) {
  for (Index i : batch.indices)
    if (i < 0 || i >= X.rows()) throw std::out_of_range("minibatch index out of range");
  const Matrix<Scalar> Xb = X(batch.indices, Eigen::all);
  const Vector<Scalar> yb = y(batch.indices);
  return batch_gradient(theta, kernels, Xb, yb, scaling);
}

// ---------------------------------------------------------------------------
// Fitting loops

struct Bounds {
  double lo = 1e-4;
  double hi = 1e4;
};

struct AdamSettings {
  double learning_rate = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct SgdConfig {
  Index batch_size = 128;
  Index iterations = 1;
  double alpha1 = 9.0;
  SamplingScheme scheme = SamplingScheme::Uniform;
  ScalingPolicy scaling;
  std::optional<Bounds> clamp = Bounds{};
  std::optional<double> clip;
  std::uint64_t seed = 0;
  /// Record ‖∇ℓ(θ^{(k)})‖² at k = 0, every `grad_norm_every` iterations and
  /// at k = K; 0 disables.
  Index grad_norm_every = 0;
  AdamSettings adam;

  void validate() const;
};

/// K = epochs · ⌈n/m⌉.
Index iterations_for_epochs(Index n, Index m, Index epochs);

struct TraceRecord {
  Index k = 0;
  double alpha = 0.0;
  VectorXd params;    // θ^{(k)} flattened: variances then lengthscales
  VectorXd gradient;  // stochastic gradient used for the step into θ^{(k)}; empty at k = 0
  std::uint64_t batch_seed = 0;
  double elapsed_ms = 0.0;
  std::optional<double> grad_norm_sq;
};

struct FitTrace {
  Index signal_count = 1;
  Index lengthscale_count = 0;
  std::vector<TraceRecord> records;
  HyperParams<double> final_params;
  Index clamp_events = 0;
  Index clip_events = 0;
};

/// Carries the trace recorded up to the failure.
class FitError : public std::runtime_error {
public:
  FitError(const std::string& what, FitTrace partial) : std::runtime_error(what), partial_(std::move(partial)) {}
  const FitTrace& partial() const { return partial_; }

private:
  FitTrace partial_;
};

/// Minibatch SGD with α_k = α₁/k. Lengthscales are learned when θ⁰ carries them.
FitTrace sgd_fit(const Dataset& data, const MultiKernel<double>& kernels, const SgdConfig& config,
                 const HyperParams<double>& theta0);

/// Adam on raw parameters, positivity kept by clamping at the lower bound.
FitTrace adam_fit(const Dataset& data, const MultiKernel<double>& kernels, const SgdConfig& config,
                  const HyperParams<double>& theta0, bool learn_lengthscales);

/// CSV header `iter,alpha,theta_1..theta_{M+1}[,lengthscale_*][,grad_norm_sq][,elapsed_ms]`.
void write_trace_csv(const FitTrace& trace, std::ostream& out, bool include_timing);

} // namespace sgdgp

#endif // SGDGP_TRAINING_HPP
