#include "sgdgp/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace sgdgp {

VectorXd conditional_expected_gradient(const HyperParams<double>& theta, const HyperParams<double>& theta_true,
                                       const MultiKernel<double>& kernels, const MatrixXd& batch_X,
                                       const ScalingPolicy& scaling) {
  const auto eff = effective_kernels(kernels, theta);
  const Index m = batch_X.rows();
  const Index M = eff.size();
  const auto comps = component_matrices(eff, batch_X);
  const auto factor = cholesky(combine_components(comps, theta.variances));
  const MatrixXd K_true = marginal_covariance(kernels, theta_true, batch_X);
  // tr[K⁻¹(I − K* K⁻¹) ∂K] = tr[K⁻¹∂K] − tr[(K⁻¹K*)(K⁻¹∂K)]
  const MatrixXd KinvKtrue = solve(factor, K_true);
  auto slot_value = [&](const MatrixXd& dK) {
    const MatrixXd KinvDk = solve(factor, dK);
    return KinvDk.trace() - (KinvKtrue.transpose().cwiseProduct(KinvDk)).sum();
  };

  VectorXd g(theta.parameter_count());
  for (Index l = 0; l < M; ++l) g[l] = slot_value(comps[static_cast<std::size_t>(l)]);
  g[M] = slot_value(MatrixXd::Identity(m, m));
  for (Index s = 0; s < theta.lengthscales.size(); ++s) {
    const auto [comp, pos] = eff.locate_slot(s);
    g[M + 1 + s] = slot_value(theta.variances[comp] *
                              base_lengthscale_grad(eff.components[static_cast<std::size_t>(comp)],
                                                    comps[static_cast<std::size_t>(comp)], batch_X, pos));
  }
  for (Index l = 0; l < g.size(); ++l) g[l] /= 2.0 * scaling.factor(l, M, m);
  return g;
}

VectorXd conditional_expected_gradient_eigen(const VectorXd& theta, const VectorXd& theta_true,
                                             const std::vector<VectorXd>& component_eigs,
                                             const ScalingPolicy& scaling) {
  const auto M = static_cast<Index>(component_eigs.size());
  if (M < 1 || theta.size() != M + 1 || theta_true.size() != M + 1)
    throw std::invalid_argument("conditional_expected_gradient_eigen: parameter/eigenvalue count mismatch");
  const Index m = component_eigs.front().size();
  for (const auto& e : component_eigs)
    if (e.size() != m) throw std::invalid_argument("component eigenvalue lists differ in length");
  auto lambda = [&](Index l, Index j) { return l < M ? component_eigs[static_cast<std::size_t>(l)][j] : 1.0; };

  VectorXd g = VectorXd::Zero(M + 1);
  for (Index j = 0; j < m; ++j) {
    double denom = 0.0;
    double shift = 0.0;
    for (Index h = 0; h <= M; ++h) {
      denom += theta[h] * lambda(h, j);
      shift += (theta[h] - theta_true[h]) * lambda(h, j);
    }
    for (Index l = 0; l <= M; ++l) g[l] += shift * lambda(l, j) / (denom * denom);
  }
  for (Index l = 0; l <= M; ++l) g[l] /= 2.0 * scaling.factor(l, M, m);
  return g;
}

double curvature(double signal, double noise, const VectorXd& eigs) {
  if (eigs.size() < 1) throw std::invalid_argument("curvature needs at least one eigenvalue");
  double sum = 0.0;
  for (Index j = 0; j < eigs.size(); ++j) {
    const double d = signal * eigs[j] + noise;
    sum += 1.0 / (d * d);
  }
  return sum / (2.0 * static_cast<double>(eigs.size()));
}

double curvature_surrogate(double signal, double noise, const VectorXd& population_eigs, Index m) {
  if (m < 1 || population_eigs.size() < m)
    throw std::invalid_argument("curvature_surrogate needs at least m population eigenvalues");
  const auto md = static_cast<double>(m);
  double sum = 0.0;
  for (Index j = 0; j < m; ++j) {
    const double d = signal * population_eigs[j] * md + noise;
    sum += 1.0 / (d * d);
  }
  return sum / md;
}

double gaussian_eigen_ratio(double input_sd, double lengthscale) {
  if (!(input_sd > 0.0 && lengthscale > 0.0)) throw std::invalid_argument("input sd and lengthscale must be positive");
  const double s2 = input_sd * input_sd;
  const double l = lengthscale;
  return 2.0 * s2 / (2.0 * s2 + l * l + l * std::sqrt(l * l + 4.0 * s2));
}

VectorXd analytic_gaussian_eigenvalues(double input_sd, double lengthscale, Index count) {
  const double beta = gaussian_eigen_ratio(input_sd, lengthscale);
  VectorXd out(count);
  double power = 1.0;
  for (Index j = 0; j < count; ++j) {
    out[j] = (1.0 - beta) * power;
    power *= beta;
  }
  return out;
}

DecayFamily decay_family_from_string(const std::string& name) {
  if (name == "exponential") return DecayFamily::Exponential;
  if (name == "polynomial") return DecayFamily::Polynomial;
  throw std::invalid_argument("unknown decay family '" + name + "' (expected exponential or polynomial)");
}

const char* to_string(DecayFamily family) {
  return family == DecayFamily::Exponential ? "exponential" : "polynomial";
}

EigendecayFit eigendecay_fit(const EigenSpectrum<double>& spectrum, Index n, DecayFamily family,
                             std::optional<Index> max_index, double relative_floor) {
  if (n < 1) throw std::invalid_argument("eigendecay_fit: n must be >= 1");
  const Index limit = std::min(spectrum.size(), max_index.value_or(spectrum.size()));
  if (spectrum.size() < 1 || !(spectrum[0] > 0.0)) throw std::invalid_argument("eigendecay_fit: spectrum has no positive eigenvalues");
  const double floor = relative_floor * spectrum[0];
  Index usable = 0;
  while (usable < limit && spectrum[usable] > floor) ++usable;
  if (usable < 3) throw std::invalid_argument("eigendecay_fit: fewer than 3 eigenvalues above the floor");

  // least squares of v = log(λ_j/n) on u = (j−1) or log j
  const auto nd = static_cast<double>(n);
  VectorXd u(usable), v(usable);
  for (Index i = 0; i < usable; ++i) {
    u[i] = family == DecayFamily::Exponential ? static_cast<double>(i) : std::log(static_cast<double>(i + 1));
    v[i] = std::log(spectrum[i] / nd);
  }
  const double u_mean = u.mean();
  const double v_mean = v.mean();
  const double slope = ((u.array() - u_mean) * (v.array() - v_mean)).sum() / (u.array() - u_mean).square().sum();
  const double intercept = v_mean - slope * u_mean;
  const double residual =
      std::sqrt((v.array() - (intercept + slope * u.array())).square().sum() / static_cast<double>(usable));

  EigendecayFit fit;
  fit.family = family;
  fit.rate = family == DecayFamily::Exponential ? -slope : -slope / 2.0;
  fit.scale = std::exp(intercept);
  fit.first_index = 1;
  fit.last_index = usable;
  fit.residual = residual;
  if (!(fit.rate > 0.0)) throw std::runtime_error("eigendecay_fit: spectrum does not decay (fitted rate <= 0)");
  return fit;
}

std::pair<double, double> eigen_ratio_sums(double signal, double noise, const VectorXd& eigs) {
  double weighted = 0.0;
  double plain = 0.0;
  for (Index j = 0; j < eigs.size(); ++j) {
    const double d = signal * eigs[j] + noise;
    weighted += eigs[j] / (d * d);
    plain += 1.0 / (d * d);
  }
  return {weighted, plain};
}

double batch_curvature(double signal, double noise, const KernelSpec<double>& kernel, const MatrixXd& batch_X) {
  return curvature(signal, noise, sym_eigenvalues(kernel_matrix(kernel, batch_X)).values);
}

std::vector<CurvatureReport> curvature_experiment(const CurvatureExperimentConfig& config) {
  if (config.replicates < 1) throw std::invalid_argument("curvature_experiment: replicates must be >= 1");
  CounterRng pool_rng(derive_seed(config.seed, "curvature.pool"));
  MatrixXd pool(config.pool_size, config.dim);
  for (Index i = 0; i < pool.rows(); ++i)
    for (Index j = 0; j < pool.cols(); ++j)
      pool(i, j) = config.input.kind == InputDistribution::Kind::Gaussian
                       ? config.input.sd * pool_rng.normal()
                       : pool_rng.uniform(config.input.low, config.input.high);
  const KdTree index(pool);

  std::vector<CurvatureReport> reports;
  for (Index m : config.batch_sizes) {
    for (SamplingScheme scheme : {SamplingScheme::Uniform, SamplingScheme::Nearby}) {
      CurvatureReport rep;
      rep.batch_size = m;
      rep.scheme = scheme;
      rep.replicates = config.replicates;
      rep.signal = config.signal;
      rep.noise = config.noise;
      for (Index r = 0; r < config.replicates; ++r) {
        const auto stream = static_cast<std::uint64_t>(m) * 1000003ULL + static_cast<std::uint64_t>(r);
        CounterRng rng(derive_seed(config.seed, scheme == SamplingScheme::Uniform ? "curvature.uniform"
                                                                                  : "curvature.nearby",
                                   stream));
        const Minibatch batch = scheme == SamplingScheme::Uniform ? uniform_minibatch(config.pool_size, m, rng)
                                                                  : nearby_minibatch(index, m, rng);
        const MatrixXd Xb = pool(batch.indices, Eigen::all);
        const VectorXd eigs = sym_eigenvalues(kernel_matrix(config.kernel, Xb)).values;
        rep.values.push_back(curvature(config.signal, config.noise, eigs));
        if (config.keep_eigenvalues) rep.eigenvalues.push_back(eigs);
      }
      const auto cnt = static_cast<double>(rep.values.size());
      double sum = 0.0;
      for (double v : rep.values) sum += v;
      rep.mean = sum / cnt;
      double ss = 0.0;
      for (double v : rep.values) ss += (v - rep.mean) * (v - rep.mean);
      rep.sd = rep.values.size() > 1 ? std::sqrt(ss / (cnt - 1.0)) : 0.0;
      reports.push_back(std::move(rep));
    }
  }
  return reports;
}

MonteCarloGradient monte_carlo_gradient(const HyperParams<double>& theta, const HyperParams<double>& theta_true,
                                        const MultiKernel<double>& kernels, const MatrixXd& batch_X,
                                        const ScalingPolicy& scaling, Index draws, std::uint64_t seed) {
  if (draws < 2) throw std::invalid_argument("monte_carlo_gradient needs at least 2 draws");
  const Index m = batch_X.rows();
  const auto truth = cholesky(marginal_covariance(kernels, theta_true, batch_X));
  CounterRng rng(derive_seed(seed, "monte-carlo"));
  VectorXd sum = VectorXd::Zero(theta.parameter_count());
  VectorXd sum_sq = VectorXd::Zero(theta.parameter_count());
  VectorXd z(m);
  for (Index d = 0; d < draws; ++d) {
    for (Index i = 0; i < m; ++i) z[i] = rng.normal();
    const VectorXd y = truth.lower().triangularView<Eigen::Lower>() * z;
    const VectorXd g = batch_gradient(theta, kernels, batch_X, y, scaling);
    sum += g;
    sum_sq += g.cwiseAbs2();
  }
  const auto nd = static_cast<double>(draws);
  MonteCarloGradient out;
  out.draws = draws;
  out.mean = sum / nd;
  const VectorXd var = ((sum_sq / nd - out.mean.cwiseAbs2()) * (nd / (nd - 1.0))).cwiseMax(0.0);
  out.standard_error = (var / nd).cwiseSqrt();
  return out;
}

void write_curvature_csv(const std::vector<CurvatureReport>& reports, std::ostream& out) {
  out << "batch_size,scheme,replicates,theta_1,theta_2,mean,sd,min,max\n";
  for (const auto& r : reports) {
    const auto [lo, hi] = std::minmax_element(r.values.begin(), r.values.end());
    out << r.batch_size << ',' << to_string(r.scheme) << ',' << r.replicates << ',' << format_double(r.signal) << ','
        << format_double(r.noise) << ',' << format_double(r.mean) << ',' << format_double(r.sd) << ','
        << format_double(*lo) << ',' << format_double(*hi) << '\n';
  }
}

void write_eigendecay_csv(const std::vector<EigendecayFit>& fits, std::ostream& out) {
  out << "family,rate,scale,first_index,last_index,residual\n";
  for (const auto& f : fits)
    out << to_string(f.family) << ',' << format_double(f.rate) << ',' << format_double(f.scale) << ','
        << f.first_index << ',' << f.last_index << ',' << format_double(f.residual) << '\n';
}

} // namespace sgdgp
