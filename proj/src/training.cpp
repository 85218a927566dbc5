#include "sgdgp/training.hpp"

#include <chrono>
#include <limits>
#include <memory>
#include <ostream>

namespace sgdgp {

void SgdConfig::validate() const {
  if (batch_size < 1) throw std::invalid_argument("batch size m must be >= 1");
  if (iterations < 0) throw std::invalid_argument("iteration count must be >= 0");
  if (!(alpha1 > 0.0)) throw std::invalid_argument("initial step size alpha1 must be > 0");
  if (clamp && !(clamp->lo > 0.0 && clamp->lo < clamp->hi))
    throw std::invalid_argument("clamp bounds must satisfy 0 < theta_min < theta_max");
  if (clip && !(*clip > 0.0)) throw std::invalid_argument("gradient clip threshold must be > 0");
  if (!(adam.learning_rate > 0.0)) throw std::invalid_argument("Adam learning rate must be > 0");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0 && adam.beta2 >= 0.0 && adam.beta2 < 1.0))
    throw std::invalid_argument("Adam betas must lie in [0, 1)");
  if (!(adam.eps > 0.0)) throw std::invalid_argument("Adam epsilon must be > 0");
  if (grad_norm_every < 0) throw std::invalid_argument("grad_norm_every must be >= 0");
}

Index iterations_for_epochs(Index n, Index m, Index epochs) {
  if (n < 1 || m < 1 || epochs < 0) throw std::invalid_argument("iterations_for_epochs: invalid arguments");
  return epochs * ((n + m - 1) / m);
}

namespace {

using Clock = std::chrono::steady_clock;

/// State shared by both optimizers: batch drawing, trace bookkeeping and the
/// projection onto the admissible box.
class FitLoop {
public:
  FitLoop(const Dataset& data, const MultiKernel<double>& kernels, const SgdConfig& config,
          const HyperParams<double>& theta0)
      : data_(data), kernels_(kernels), config_(config), theta_(theta0), start_(Clock::now()) {
    data.validate();
    config.validate();
    theta0.validate();
    effective_kernels(kernels, theta0);  // shape check
    if (config.batch_size > data.size())
      throw std::invalid_argument("batch size m=" + std::to_string(config.batch_size) + " exceeds n=" +
                                  std::to_string(data.size()));
    if (config.scaling.uses_log(theta0.signal_count()) && config.batch_size < 3)
      throw std::invalid_argument("log-scaled slots need minibatch size m >= 3");
    if (config.scheme == SamplingScheme::Nearby) index_ = std::make_unique<KdTree>(data.X);
    trace_.signal_count = theta0.signal_count();
    trace_.lengthscale_count = theta0.lengthscales.size();
    trace_.final_params = theta0;
  }

  const HyperParams<double>& theta() const { return theta_; }

  void record(Index k, double alpha, const VectorXd& gradient, std::uint64_t batch_seed) {
    TraceRecord rec;
    rec.k = k;
    rec.alpha = alpha;
    rec.params = theta_.flatten();
    rec.gradient = gradient;
    rec.batch_seed = batch_seed;
    rec.elapsed_ms = std::chrono::duration<double, std::milli>(Clock::now() - start_).count();
    const Index every = config_.grad_norm_every;
    if (every > 0 && (k % every == 0 || k == config_.iterations)) {
      try {
        rec.grad_norm_sq = full_gradient(theta_, kernels_, data_.X, data_.y).squaredNorm();
      } catch (const NotPositiveDefinite& e) {
        fail(k, e.what());
      }
    }
    trace_.records.push_back(std::move(rec));
    trace_.final_params = theta_;
  }

  /// Stochastic gradient for iteration k (1-based), clipped when configured.
  VectorXd gradient(Index k, std::uint64_t& batch_seed, const ScalingPolicy& scaling) {
    batch_seed = derive_seed(config_.seed, "minibatch", static_cast<std::uint64_t>(k));
    const Minibatch batch = draw_minibatch(config_.scheme, data_.size(), config_.batch_size, config_.seed,
                                           static_cast<std::uint64_t>(k), index_.get());
    VectorXd g;
    try {
      g = stochastic_gradient(theta_, kernels_, batch, data_.X, data_.y, scaling);
    } catch (const NotPositiveDefinite& e) {
      fail(k, e.what());
    }
    if (config_.clip) {
      const double norm = g.norm();
      if (norm > *config_.clip) {
        g *= *config_.clip / norm;
        ++trace_.clip_events;
      }
    }
    return g;
  }

  /// Replaces θ with `flat`, projecting onto [floor, ceil].
  void update(Index k, VectorXd flat, double floor, double ceil) {
    for (Index i = 0; i < flat.size(); ++i) {
      if (!std::isfinite(flat[i])) fail(k, "parameter " + std::to_string(i + 1) + " became non-finite");
      if (flat[i] < floor) {
        flat[i] = floor;
        ++trace_.clamp_events;
      } else if (flat[i] > ceil) {
        flat[i] = ceil;
        ++trace_.clamp_events;
      }
      if (!(flat[i] > 0.0))
        fail(k, "parameter " + std::to_string(i + 1) + " left (0, inf) (value " + format_double(flat[i]) + ")");
    }
    theta_ = theta_.with_flat(flat);
  }

  [[noreturn]] void fail(Index k, const std::string& why) {
    throw FitError("iteration " + std::to_string(k) + ": " + why, trace_);
  }

  FitTrace finish() { return std::move(trace_); }

private:
  const Dataset& data_;
  const MultiKernel<double>& kernels_;
  const SgdConfig& config_;
  HyperParams<double> theta_;
  Clock::time_point start_;
  std::unique_ptr<KdTree> index_;
  FitTrace trace_;
};

} // namespace

FitTrace sgd_fit(const Dataset& data, const MultiKernel<double>& kernels, const SgdConfig& config,
                 const HyperParams<double>& theta0) {
  FitLoop loop(data, kernels, config, theta0);
  loop.record(0, 0.0, VectorXd(), 0);
  const double lo = config.clamp ? config.clamp->lo : -std::numeric_limits<double>::infinity();
  const double hi = config.clamp ? config.clamp->hi : std::numeric_limits<double>::infinity();
  for (Index k = 1; k <= config.iterations; ++k) {
    std::uint64_t batch_seed = 0;
    const VectorXd g = loop.gradient(k, batch_seed, config.scaling);
    const double alpha = config.alpha1 / static_cast<double>(k);
    loop.update(k, loop.theta().flatten() - alpha * g, lo, hi);
    loop.record(k, alpha, g, batch_seed);
  }
  return loop.finish();
}

FitTrace adam_fit(const Dataset& data, const MultiKernel<double>& kernels, const SgdConfig& config,
                  const HyperParams<double>& theta0, bool learn_lengthscales) {
  // Fold fixed lengthscales into the kernel so only learned slots remain in θ.
  MultiKernel<double> fixed = kernels;
  HyperParams<double> start = theta0;
  if (learn_lengthscales) {
    if (!start.has_lengthscales()) start.lengthscales = kernels.lengthscales();
  } else {
    fixed = effective_kernels(kernels, theta0);
    start.lengthscales = VectorXd();
  }
  FitLoop loop(data, fixed, config, start);
  loop.record(0, 0.0, VectorXd(), 0);

  const AdamSettings& a = config.adam;
  const double lo = config.clamp ? config.clamp->lo : Bounds{}.lo;
  const double hi = config.clamp ? config.clamp->hi : std::numeric_limits<double>::infinity();
  VectorXd first = VectorXd::Zero(start.parameter_count());
  VectorXd second = VectorXd::Zero(start.parameter_count());
  double beta1_pow = 1.0;
  double beta2_pow = 1.0;
  for (Index k = 1; k <= config.iterations; ++k) {
    std::uint64_t batch_seed = 0;
    const VectorXd g = loop.gradient(k, batch_seed, config.scaling);
    first = a.beta1 * first + (1.0 - a.beta1) * g;
    second = a.beta2 * second + (1.0 - a.beta2) * g.cwiseAbs2();
    beta1_pow *= a.beta1;
    beta2_pow *= a.beta2;
    const VectorXd m_hat = first / (1.0 - beta1_pow);
    const VectorXd v_hat = second / (1.0 - beta2_pow);
    const VectorXd step = a.learning_rate * (m_hat.array() / (v_hat.array().sqrt() + a.eps)).matrix();
    loop.update(k, loop.theta().flatten() - step, lo, hi);
    loop.record(k, a.learning_rate, g, batch_seed);
  }
  return loop.finish();
}

void write_trace_csv(const FitTrace& trace, std::ostream& out, bool include_timing) {
  bool has_grad_norm = false;
  for (const auto& r : trace.records) has_grad_norm = has_grad_norm || r.grad_norm_sq.has_value();
  out << "iter,alpha";
  for (Index l = 0; l <= trace.signal_count; ++l) out << ",theta_" << (l + 1);
  for (Index s = 0; s < trace.lengthscale_count; ++s) out << ",lengthscale_" << (s + 1);
  if (has_grad_norm) out << ",grad_norm_sq";
  if (include_timing) out << ",elapsed_ms";
  out << '\n';
  for (const auto& r : trace.records) {
    out << r.k << ',' << format_double(r.alpha);
    for (Index i = 0; i < r.params.size(); ++i) out << ',' << format_double(r.params[i]);
    if (has_grad_norm) {
      out << ',';
      if (r.grad_norm_sq) out << format_double(*r.grad_norm_sq);
    }
    if (include_timing) out << ',' << format_double(r.elapsed_ms);
    out << '\n';
  }
}

} // namespace sgdgp
