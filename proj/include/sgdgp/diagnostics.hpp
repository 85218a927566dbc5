#ifndef SGDGP_DIAGNOSTICS_HPP
#define SGDGP_DIAGNOSTICS_HPP

#include "sgdgp/data.hpp"
#include "sgdgp/training.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

namespace sgdgp {

/// g*(θ) = E[g(θ) | X_ξ] under y_ξ ~ N(0, K_ξ(θ*)):
///   g*_l = (1/2s_l) tr[K_ξ(θ)⁻¹ (I − K_ξ(θ*) K_ξ(θ)⁻¹) ∂K_ξ/∂θ_l].
/// Lengthscale slots are included when θ carries lengthscales; θ* may carry
/// its own lengthscales for the data-generating covariance.
VectorXd conditional_expected_gradient(const HyperParams<double>& theta, const HyperParams<double>& theta_true,
                                       const MultiKernel<double>& kernels, const MatrixXd& batch_X,
                                       const ScalingPolicy& scaling);

/// Variance-slot g* from eigenvalues when the component kernel matrices share
/// an eigenbasis (always the case for M = 1). `component_eigs[l][j]` pairs the
/// j-th eigenvalue of every component in the common basis.
VectorXd conditional_expected_gradient_eigen(const VectorXd& theta, const VectorXd& theta_true,
                                             const std::vector<VectorXd>& component_eigs,
                                             const ScalingPolicy& scaling);

/// γ(θ) = (1/2m) Σ_j (θ₁λ_j + θ₂)⁻², λ_j the eigenvalues of K_{f,ξ}.
double curvature(double signal, double noise, const VectorXd& eigs);

/// γ̃(θ) = (1/m) Σ_{j≤m} (θ₁ m λ*_j + θ₂)⁻² with population eigenvalues λ*.
double curvature_surrogate(double signal, double noise, const VectorXd& population_eigs, Index m);

/// β = 2σ²/(2σ² + l² + l√(l² + 4σ²)) for the unit RBF kernel with N(0, σ²) inputs.
double gaussian_eigen_ratio(double input_sd, double lengthscale);

/// λ*_j = (1 − β) β^{j−1}, j = 1..count.
VectorXd analytic_gaussian_eigenvalues(double input_sd, double lengthscale, Index count);

enum class DecayFamily { Exponential, Polynomial };

DecayFamily decay_family_from_string(const std::string& name);
const char* to_string(DecayFamily family);

/// Exponential: λ_j/n ≈ C e^{−b(j−1)} (C is the leading value). Polynomial:
/// λ_j/n ≈ C j^{−2b}. Fitted by least squares in log space over the leading
/// indices whose value exceeds the floor.
struct EigendecayFit {
  DecayFamily family = DecayFamily::Exponential;
  double rate = 0.0;   // b
  double scale = 0.0;  // C
  Index first_index = 1;
  Index last_index = 0;
  double residual = 0.0;  // RMS of log-space residuals
};

inline constexpr double kEigenFloor = 1e-12;

EigendecayFit eigendecay_fit(const EigenSpectrum<double>& spectrum, Index n, DecayFamily family,
                             std::optional<Index> max_index = std::nullopt, double relative_floor = kEigenFloor);

/// Σ_j λ_j/(θ₁λ_j+θ₂)² and Σ_j 1/(θ₁λ_j+θ₂)².
std::pair<double, double> eigen_ratio_sums(double signal, double noise, const VectorXd& eigs);

struct CurvatureReport {
  Index batch_size = 0;
  SamplingScheme scheme = SamplingScheme::Uniform;
  Index replicates = 0;
  std::vector<double> values;
  double mean = 0.0;
  double sd = 0.0;
  double signal = 0.0;
  double noise = 0.0;
  std::vector<VectorXd> eigenvalues;  // kept only on request
};

struct CurvatureExperimentConfig {
  Index pool_size = 2048;
  std::vector<Index> batch_sizes{16, 32, 64, 128};
  Index replicates = 50;
  double signal = 4.0;
  double noise = 1.0;
  KernelSpec<double> kernel = KernelSpec<double>::rbf(0.5);
  InputDistribution input = InputDistribution::gaussian(10.0);
  Index dim = 1;
  std::uint64_t seed = 0;
  bool keep_eigenvalues = false;
};

/// Draws one input pool, then for each m and each scheme computes γ over
/// `replicates` minibatches. Reports are ordered by m, then Uniform before Nearby.
std::vector<CurvatureReport> curvature_experiment(const CurvatureExperimentConfig& config);

/// γ for one minibatch of inputs.
double batch_curvature(double signal, double noise, const KernelSpec<double>& kernel, const MatrixXd& batch_X);

struct MonteCarloGradient {
  VectorXd mean;
  VectorXd standard_error;
  Index draws = 0;
};

/// Averages stochastic gradients at fixed X_ξ over y_ξ ~ N(0, K_ξ(θ*)) drawn
/// through the Cholesky factor of the true covariance.
MonteCarloGradient monte_carlo_gradient(const HyperParams<double>& theta, const HyperParams<double>& theta_true,
                                        const MultiKernel<double>& kernels, const MatrixXd& batch_X,
                                        const ScalingPolicy& scaling, Index draws, std::uint64_t seed);

void write_curvature_csv(const std::vector<CurvatureReport>& reports, std::ostream& out);
void write_eigendecay_csv(const std::vector<EigendecayFit>& fits, std::ostream& out);

} // namespace sgdgp

#endif // SGDGP_DIAGNOSTICS_HPP
