#include "sgdgp/experiments.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <ostream>
#include <thread>

namespace sgdgp {

SimulationProtocol default_protocol(std::uint64_t seed) {
  SimulationProtocol p;
  p.sgd.batch_size = 128;
  p.sgd.alpha1 = 9.0;
  p.sgd.scaling = ScalingPolicy::log_scaled(3.0);
  p.sgd.scheme = SamplingScheme::Uniform;
  p.sgd.seed = seed;
  p.sgd.iterations = iterations_for_epochs(p.n, p.sgd.batch_size, p.epochs);
  return p;
}

FitTrace run_repetition(const SimulationProtocol& protocol, Index repetition) {
  const auto rep = static_cast<std::uint64_t>(repetition);
  const Dataset data = simulate_gp(protocol.kernels, protocol.theta_true, protocol.n, protocol.input, protocol.dim,
                                   derive_seed(protocol.sgd.seed, "pool", rep));
  SgdConfig cfg = protocol.sgd;
  cfg.seed = derive_seed(protocol.sgd.seed, "fit", rep);
  if (cfg.iterations <= 0) cfg.iterations = iterations_for_epochs(protocol.n, cfg.batch_size, protocol.epochs);
  if (protocol.use_adam) return adam_fit(data, protocol.kernels, cfg, protocol.theta0, protocol.learn_lengthscales);
  return sgd_fit(data, protocol.kernels, cfg, protocol.theta0);
}

void parallel_for(Index count, int jobs, const std::function<void(Index)>& task) {
  const Index workers = std::max<Index>(1, std::min<Index>(jobs, count));
  if (workers <= 1) {
    for (Index i = 0; i < count; ++i) task(i);
    return;
  }
  std::atomic<Index> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::jthread> pool;
  for (Index w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (Index i = next++; i < count; i = next++) {
        try {
          task(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  pool.clear();  // joins
  if (failure) std::rethrow_exception(failure);
}

std::vector<FitTrace> run_repetitions(const SimulationProtocol& protocol, Index count, int jobs) {
  std::vector<FitTrace> traces(static_cast<std::size_t>(count));
  parallel_for(count, jobs, [&](Index r) { traces[static_cast<std::size_t>(r)] = run_repetition(protocol, r); });
  return traces;
}

TraceAggregate aggregate_traces(const std::vector<FitTrace>& traces) {
  if (traces.empty()) throw std::invalid_argument("aggregate_traces: no traces");
  const std::size_t len = traces.front().records.size();
  const Index p = traces.front().records.front().params.size();
  for (const auto& t : traces)
    if (t.records.size() != len) throw std::invalid_argument("aggregate_traces: traces differ in length");
  const auto reps = static_cast<double>(traces.size());
  TraceAggregate agg;
  agg.param_mean = MatrixXd::Zero(static_cast<Index>(len), p);
  agg.param_sd = MatrixXd::Zero(static_cast<Index>(len), p);
  for (std::size_t k = 0; k < len; ++k) {
    const auto row = static_cast<Index>(k);
    agg.iter.push_back(traces.front().records[k].k);
    agg.alpha.push_back(traces.front().records[k].alpha);
    for (const auto& t : traces) agg.param_mean.row(row) += t.records[k].params.transpose() / reps;
    if (traces.size() > 1) {
      for (const auto& t : traces)
        agg.param_sd.row(row) += (t.records[k].params.transpose() - agg.param_mean.row(row)).cwiseAbs2();
      agg.param_sd.row(row) = (agg.param_sd.row(row) / (reps - 1.0)).cwiseSqrt();
    }
    std::vector<double> norms;
    for (const auto& t : traces)
      if (t.records[k].grad_norm_sq) norms.push_back(*t.records[k].grad_norm_sq);
    if (norms.size() == traces.size()) {
      double mean = 0.0;
      for (double v : norms) mean += v / reps;
      double ss = 0.0;
      for (double v : norms) ss += (v - mean) * (v - mean);
      agg.grad_norm.emplace_back(std::pair{mean, norms.size() > 1 ? std::sqrt(ss / (reps - 1.0)) : 0.0});
    } else {
      agg.grad_norm.emplace_back(std::nullopt);
    }
  }
  return agg;
}

void write_aggregate_csv(const TraceAggregate& agg, Index signal_count, std::ostream& out,
                         const std::string& prefix_header, const std::string& prefix_value) {
  bool has_grad = false;
  for (const auto& g : agg.grad_norm) has_grad = has_grad || g.has_value();
  const Index p = agg.param_mean.cols();
  if (!prefix_header.empty()) out << prefix_header << ',';
  out << "iter,alpha";
  for (Index c = 0; c < p; ++c) {
    const std::string name = c <= signal_count ? "theta_" + std::to_string(c + 1)
                                               : "lengthscale_" + std::to_string(c - signal_count);
    out << ',' << name << "_mean," << name << "_sd";
  }
  if (has_grad) out << ",grad_norm_sq_mean,grad_norm_sq_sd";
  out << '\n';
  for (std::size_t k = 0; k < agg.iter.size(); ++k) {
    if (has_grad && !agg.grad_norm[k]) continue;  // keep rows aligned with gradient evaluations
    const auto row = static_cast<Index>(k);
    if (!prefix_value.empty()) out << prefix_value << ',';
    out << agg.iter[k] << ',' << format_double(agg.alpha[k]);
    for (Index c = 0; c < p; ++c)
      out << ',' << format_double(agg.param_mean(row, c)) << ',' << format_double(agg.param_sd(row, c));
    if (has_grad) out << ',' << format_double(agg.grad_norm[k]->first) << ',' << format_double(agg.grad_norm[k]->second);
    out << '\n';
  }
}

SurrogateCurve lemma1_curve(const std::vector<double>& lengthscales, double input_sd, double signal, double noise,
                            Index m) {
  SurrogateCurve curve;
  for (double l : lengthscales) {
    curve.lengthscales.push_back(l);
    curve.betas.push_back(gaussian_eigen_ratio(input_sd, l));
    curve.values.push_back(curvature_surrogate(signal, noise, analytic_gaussian_eigenvalues(input_sd, l, m), m));
  }
  for (std::size_t i = 1; i < curve.values.size(); ++i)
    if (curve.lengthscales[i] > curve.lengthscales[i - 1] && curve.values[i] < curve.values[i - 1])
      curve.nondecreasing = false;
  return curve;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp);
    out << contents;
    if (!out) throw std::runtime_error("write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

} // namespace sgdgp
