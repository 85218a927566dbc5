#ifndef SGDGP_PREDICTION_HPP
#define SGDGP_PREDICTION_HPP

#include "sgdgp/kernels.hpp"
#include "sgdgp/linalg.hpp"
#include "sgdgp/sampling.hpp"

#include <iosfwd>
#include <optional>
#include <vector>

namespace sgdgp {

enum class PredictStrategy { Auto, Exact, Cg };

PredictStrategy predict_strategy_from_string(const std::string& name);
const char* to_string(PredictStrategy strategy);

struct PredictOptions {
  PredictStrategy strategy = PredictStrategy::Auto;
  double cg_tol = 1e-6;
  int cg_max_iter = 1000;
  bool jacobi = false;
  bool compute_variance = true;
  bool full_covariance = false;
  /// Auto picks Exact below this many training points, CG otherwise.
  Index exact_threshold = 10000;
};

struct PredictionResult {
  VectorXd mean;
  VectorXd variance;  // empty when not requested
  std::optional<MatrixXd> covariance;
  PredictStrategy strategy = PredictStrategy::Exact;
  std::vector<int> cg_iterations;
};

class CgNotConverged : public std::runtime_error {
public:
  CgNotConverged(const std::string& what, double residual) : std::runtime_error(what), residual_(residual) {}
  double residual() const { return residual_; }

private:
  double residual_;
};

/// μ(x*) = k_{X x*}ᵀ K_n⁻¹ y,  k(x*, x*') − k_{X x*}ᵀ K_n⁻¹ k_{X x*'} with
/// k = Σ θ_l k_l and K_n the noisy marginal covariance.
PredictionResult predict(const HyperParams<double>& theta, const MultiKernel<double>& kernels,
                         const MatrixXd& X_train, const VectorXd& y_train, const MatrixXd& X_test,
                         const PredictOptions& options = {});

/// Applies the predictive equations per test point on its ñ nearest training
/// points only (always exact on the subset).
PredictionResult predict_nn(const HyperParams<double>& theta, const MultiKernel<double>& kernels,
                            const MatrixXd& X_train, const VectorXd& y_train, const MatrixXd& X_test,
                            Index n_tilde, const KdTree& index, const PredictOptions& options = {});

double rmse(const VectorXd& predicted, const VectorXd& truth);

/// `index,mean,variance[,truth,abs_err]`.
void write_predictions_csv(const PredictionResult& result, const std::optional<VectorXd>& truth, std::ostream& out);

} // namespace sgdgp

#endif // SGDGP_PREDICTION_HPP
