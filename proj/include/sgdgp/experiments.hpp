#ifndef SGDGP_EXPERIMENTS_HPP
#define SGDGP_EXPERIMENTS_HPP

#include "sgdgp/diagnostics.hpp"
#include "sgdgp/training.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <vector>

namespace sgdgp {

/// One simulate-then-fit protocol: a fresh data pool per repetition, SGD from
/// a fixed initial point.
struct SimulationProtocol {
  Index n = 1024;
  Index dim = 1;
  InputDistribution input = InputDistribution::gaussian(5.0);
  MultiKernel<double> kernels{KernelSpec<double>::rbf(0.5)};
  HyperParams<double> theta_true{4.0, 1.0};
  HyperParams<double> theta0{5.0, 3.0};
  SgdConfig sgd;  // sgd.seed acts as the root seed
  Index epochs = 25;
  bool use_adam = false;
  bool learn_lengthscales = false;
};

/// Default protocol: n = 1024, x ~ N(0, 5²), RBF l = 0.5, θ* = (4, 1),
/// m = 128, s₁ = 3 log m, s₂ = m, α₁ = 9, 25 epochs, uniform sampling.
SimulationProtocol default_protocol(std::uint64_t seed);

/// Repetition r uses pool seed derive(root, "pool", r) and minibatch seed
/// derive(root, "fit", r).
FitTrace run_repetition(const SimulationProtocol& protocol, Index repetition);

/// Runs repetitions [0, count) on up to `jobs` threads; results are in
/// repetition order regardless of scheduling.
std::vector<FitTrace> run_repetitions(const SimulationProtocol& protocol, Index count, int jobs);

/// Runs tasks [0, count) on up to `jobs` threads, rethrowing the first failure.
void parallel_for(Index count, int jobs, const std::function<void(Index)>& task);

/// Per-iteration mean and sample sd across traces of equal length.
struct TraceAggregate {
  std::vector<Index> iter;
  std::vector<double> alpha;
  MatrixXd param_mean;  // rows: iterations, cols: parameters
  MatrixXd param_sd;
  std::vector<std::optional<std::pair<double, double>>> grad_norm;  // (mean, sd)
};

TraceAggregate aggregate_traces(const std::vector<FitTrace>& traces);
void write_aggregate_csv(const TraceAggregate& agg, Index signal_count, std::ostream& out,
                         const std::string& prefix_header = {}, const std::string& prefix_value = {});

/// γ̃ over a lengthscale grid using analytic Gaussian-kernel eigenvalues.
struct SurrogateCurve {
  std::vector<double> lengthscales;
  std::vector<double> betas;
  std::vector<double> values;
  bool nondecreasing = true;
};

SurrogateCurve lemma1_curve(const std::vector<double>& lengthscales, double input_sd, double signal, double noise,
                            Index m);

/// Writes `contents` to `path` through a temporary file and a rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

} // namespace sgdgp

#endif // SGDGP_EXPERIMENTS_HPP
