#ifndef SGDGP_DATA_HPP
#define SGDGP_DATA_HPP

#include "sgdgp/kernels.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>

namespace sgdgp {

/// Per-column standardization statistics of a training portion (sample sd,
/// divisor n−1).
struct Normalization {
  VectorXd x_mean;
  VectorXd x_sd;
  double y_mean = 0.0;
  double y_sd = 1.0;
};

struct Provenance {
  std::string generator;  // "gp", "levy", "griewank"
  VectorXd theta_true;
  std::optional<MultiKernel<double>> kernels;
  double noise_sd = 0.0;
  std::uint64_t seed = 0;
};

struct Dataset {
  MatrixXd X;
  VectorXd y;
  std::optional<Provenance> provenance;
  std::optional<Normalization> normalization;

  Index size() const { return X.rows(); }
  Index dim() const { return X.cols(); }
  void validate() const;
  Dataset subset(const std::vector<Index>& rows) const;
};

struct InputDistribution {
  enum class Kind { Gaussian, Uniform };
  Kind kind = Kind::Gaussian;
  double sd = 1.0;     // Gaussian
  double low = 0.0;    // Uniform
  double high = 1.0;   // Uniform

  static InputDistribution gaussian(double sd) { return {Kind::Gaussian, sd, 0.0, 1.0}; }
  static InputDistribution uniform(double lo, double hi) { return {Kind::Uniform, 1.0, lo, hi}; }
};

/// y = L z at fixed inputs, L the Cholesky factor of K_n(θ_true).
VectorXd sample_gp(const MultiKernel<double>& kernels, const HyperParams<double>& theta_true, const MatrixXd& X,
                   std::uint64_t seed);

/// Inputs drawn i.i.d. per coordinate from `input`, y = L z with L the
/// Cholesky factor of K_n(θ_true) and z standard normal.
Dataset simulate_gp(const MultiKernel<double>& kernels, const HyperParams<double>& theta_true, Index n,
                    const InputDistribution& input, Index dim, std::uint64_t seed);

enum class TestFunction { Levy, Griewank };

TestFunction test_function_from_string(const std::string& name);
const char* to_string(TestFunction f);
double evaluate(TestFunction f, const VectorXd& x);
/// Conventional search box for the function: Levy [-10,10]^D, Griewank [-600,600]^D.
InputDistribution default_domain(TestFunction f);

/// Closed-form test function plus additive N(0, noise_sd²) noise.
Dataset simulate_function(TestFunction f, Index n, Index dim, double noise_sd, std::uint64_t seed,
                          std::optional<InputDistribution> input = std::nullopt);

/// Random split with ⌊fraction·n⌋ training rows.
std::pair<Dataset, Dataset> train_test_split(const Dataset& data, double train_fraction, std::uint64_t seed);

struct NormalizedPair {
  Dataset train;
  Dataset test;
  Normalization stats;
};

/// Standardizes train columns and y to mean 0, sd 1; test uses train stats.
NormalizedPair normalize(const Dataset& train, const Dataset& test);
Dataset apply_normalization(const Dataset& data, const Normalization& stats);
Dataset invert_normalization(const Dataset& data, const Normalization& stats);

class CsvError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Header `x1,...,xD,y`; last column is the response.
Dataset load_csv(const std::filesystem::path& path);
void save_csv(const Dataset& data, const std::filesystem::path& path);

/// Shortest-round-trip formatting capped at 17 significant digits.
std::string format_double(double v);

} // namespace sgdgp

#endif // SGDGP_DATA_HPP
