#include "sgdgp/prediction.hpp"

#include "sgdgp/data.hpp"

#include <cmath>
#include <ostream>

namespace sgdgp {

PredictStrategy predict_strategy_from_string(const std::string& name) {
  if (name == "auto") return PredictStrategy::Auto;
  if (name == "exact") return PredictStrategy::Exact;
  if (name == "cg") return PredictStrategy::Cg;
  throw std::invalid_argument("unknown prediction strategy '" + name + "' (expected auto, exact or cg)");
}

const char* to_string(PredictStrategy strategy) {
  switch (strategy) {
    case PredictStrategy::Auto: return "auto";
    case PredictStrategy::Exact: return "exact";
    case PredictStrategy::Cg: return "cg";
  }
  return "?";
}

namespace {

MatrixXd weighted_cross(const MultiKernel<double>& eff, const VectorXd& variances, const MatrixXd& A,
                        const MatrixXd& B) {
  MatrixXd out = MatrixXd::Zero(A.rows(), B.rows());
  for (Index l = 0; l < eff.size(); ++l)
    out.noalias() += variances[l] * cross_kernel_matrix(eff.components[static_cast<std::size_t>(l)], A, B);
  return out;
}

} // namespace

PredictionResult predict(const HyperParams<double>& theta, const MultiKernel<double>& kernels,
                         const MatrixXd& X_train, const VectorXd& y_train, const MatrixXd& X_test,
                         const PredictOptions& options) {
  if (X_train.rows() != y_train.size()) throw std::invalid_argument("predict: X_train and y_train differ in rows");
  if (X_train.cols() != X_test.cols()) throw std::invalid_argument("predict: train and test dimensions differ");
  const auto eff = effective_kernels(kernels, theta);
  const Index M = eff.size();
  const double prior = theta.variances.head(M).sum();
  const MatrixXd K = marginal_covariance(kernels, theta, X_train);
  const MatrixXd Kx = weighted_cross(eff, theta.variances, X_train, X_test);

  PredictionResult out;
  out.strategy = options.strategy;
  if (out.strategy == PredictStrategy::Auto)
    out.strategy = X_train.rows() < options.exact_threshold ? PredictStrategy::Exact : PredictStrategy::Cg;

  MatrixXd projected;  // columns K⁻¹ k_{X x*}, or L⁻¹ k_{X x*} for Exact
  if (out.strategy == PredictStrategy::Exact) {
    const auto factor = cholesky(K);
    out.mean = Kx.transpose() * solve_vec(factor, y_train);
    if (options.compute_variance || options.full_covariance) projected = solve_lower(factor, Kx);
    if (options.compute_variance) out.variance = (prior - projected.colwise().squaredNorm().array()).matrix().transpose();
    if (options.full_covariance) {
      MatrixXd C = weighted_cross(eff, theta.variances, X_test, X_test);
      C.noalias() -= projected.transpose() * projected;
      out.covariance = std::move(C);
    }
    return out;
  }

  const LinearOperator<double> matvec = [&K](const VectorXd& v) -> VectorXd { return K * v; };
  std::optional<LinearOperator<double>> precond;
  if (options.jacobi) precond = jacobi_preconditioner<double>(K.diagonal());
  auto run = [&](const VectorXd& rhs) {
    auto res = cg_solve<double>(matvec, rhs, options.cg_tol, options.cg_max_iter, precond);
    if (!res.converged)
      throw CgNotConverged("CG did not reach tol " + format_double(options.cg_tol) + " in " +
                               std::to_string(options.cg_max_iter) + " iterations (residual " +
                               format_double(res.relative_residual) + ")",
                           res.relative_residual);
    out.cg_iterations.push_back(res.iterations);
    return res.x;
  };
  out.mean = Kx.transpose() * run(y_train);
  if (options.compute_variance || options.full_covariance) {
    projected.resize(Kx.rows(), Kx.cols());
    for (Index j = 0; j < Kx.cols(); ++j) projected.col(j) = run(Kx.col(j));
  }
  if (options.compute_variance) {
    out.variance.resize(X_test.rows());
    for (Index j = 0; j < X_test.rows(); ++j) out.variance[j] = prior - Kx.col(j).dot(projected.col(j));
  }
  if (options.full_covariance) {
    MatrixXd C = weighted_cross(eff, theta.variances, X_test, X_test);
    MatrixXd reduction = Kx.transpose() * projected;
    C -= (reduction + reduction.transpose()) / 2.0;
    out.covariance = std::move(C);
  }
  return out;
}

PredictionResult predict_nn(const HyperParams<double>& theta, const MultiKernel<double>& kernels,
                            const MatrixXd& X_train, const VectorXd& y_train, const MatrixXd& X_test,
                            Index n_tilde, const KdTree& index, const PredictOptions& options) {
  if (n_tilde < 1 || n_tilde > X_train.rows())
    throw std::invalid_argument("predict_nn: n_tilde must lie in [1, n]");
  if (index.size() != X_train.rows()) throw std::invalid_argument("predict_nn: index was built on different data");
  PredictOptions local = options;
  local.strategy = PredictStrategy::Exact;
  local.full_covariance = false;
  PredictionResult out;
  out.strategy = PredictStrategy::Exact;
  out.mean.resize(X_test.rows());
  if (options.compute_variance) out.variance.resize(X_test.rows());
  for (Index t = 0; t < X_test.rows(); ++t) {
    const VectorXd point = X_test.row(t).transpose();
    const auto nb = index.query(point, n_tilde);
    const MatrixXd Xs = X_train(nb, Eigen::all);
    const VectorXd ys = y_train(nb);
    const auto single = predict(theta, kernels, Xs, ys, X_test.row(t), local);
    out.mean[t] = single.mean[0];
    if (options.compute_variance) out.variance[t] = single.variance[0];
  }
  return out;
}

double rmse(const VectorXd& predicted, const VectorXd& truth) {
  if (predicted.size() != truth.size()) throw std::invalid_argument("rmse: length mismatch");
  if (predicted.size() == 0) throw std::invalid_argument("rmse: empty input");
  return std::sqrt((predicted - truth).squaredNorm() / static_cast<double>(predicted.size()));
}

void write_predictions_csv(const PredictionResult& result, const std::optional<VectorXd>& truth, std::ostream& out) {
  out << "index,mean,variance";
  if (truth) out << ",truth,abs_err";
  out << '\n';
  for (Index i = 0; i < result.mean.size(); ++i) {
    out << i << ',' << format_double(result.mean[i]) << ',';
    if (result.variance.size() > 0) out << format_double(result.variance[i]);
    if (truth) out << ',' << format_double((*truth)[i]) << ',' << format_double(std::abs(result.mean[i] - (*truth)[i]));
    out << '\n';
  }
}

} // namespace sgdgp
