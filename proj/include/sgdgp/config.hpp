#ifndef SGDGP_CONFIG_HPP
#define SGDGP_CONFIG_HPP

#include "sgdgp/kernels.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace sgdgp {

/// Raised for malformed or unknown configuration; maps to exit code 2.
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Every knob the CLI understands. One JSON key per field, named as the
/// member; defaults reproduce the n = 1024 simulation protocol.
struct RunConfig {
  // data
  std::string dataset;
  std::string test_dataset;
  Index n = 1024;
  Index dim = 1;
  std::string input_dist = "gaussian";
  double input_sd = 5.0;
  double input_low = -10.0;
  double input_high = 10.0;
  std::string function;  // empty: GP simulation; "levy" / "griewank" otherwise
  double noise_sd = 1.0;
  std::vector<double> theta_true{4.0, 1.0};
  double train_fraction = 1.0;  // < 1 holds out a seeded test split
  bool normalize = false;

  // kernel
  MultiKernel<double> kernels{KernelSpec<double>::rbf(0.5)};

  // optimizer
  std::string optimizer = "sgd";
  Index batch_size = 128;
  Index epochs = 25;
  Index iterations = 0;  // > 0 overrides epochs
  double alpha1 = 9.0;
  double learning_rate = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::string scaling = "log";
  double tau = 3.0;
  std::string sampling = "uniform";
  bool clamp = true;
  double theta_min = 1e-4;
  double theta_max = 1e4;
  double clip = 0.0;  // 0 disables
  bool learn_lengthscales = false;
  std::vector<double> theta_init{5.0, 3.0};
  std::vector<double> lengthscale_init;
  Index grad_norm_every = 0;
  bool record_timing = false;

  // prediction
  std::string params;
  std::vector<double> theta;
  std::string strategy = "auto";
  double cg_tol = 1e-6;
  int cg_max_iter = 1000;
  bool jacobi = false;
  Index nn = 0;

  // diagnostics
  std::vector<Index> m_grid{16, 32, 64, 128};
  Index replicates = 50;
  Index pool_size = 2048;
  double pool_sd = 10.0;
  std::vector<double> curvature_theta{4.0, 1.0};
  Index eig_n = 2048;
  std::string eig_family = "exponential";
  Index eig_max_index = 10;

  // experiments
  std::string study;
  Index repetitions = 10;
  std::vector<Index> study_m_grid{32, 128, 512};
  std::vector<double> l_grid{0.5, 0.75, 1.0, 1.5, 2.0};
  Index surrogate_m = 2048;

  // shared
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  int jobs = 1;
};

/// Applies the keys of `doc` on top of `base`; unknown keys and type errors
/// raise ConfigError.
RunConfig apply_config(RunConfig base, const nlohmann::json& doc);

/// Parses `key=value`; the value is read as JSON when possible, else as a string.
RunConfig apply_override(RunConfig base, const std::string& assignment);

nlohmann::json to_json(const RunConfig& config);

/// 64-bit FNV-1a of the canonical JSON dump, hex encoded.
std::string config_hash(const RunConfig& config);

nlohmann::json kernel_to_json(const KernelSpec<double>& spec);
KernelSpec<double> kernel_from_json(const nlohmann::json& block);

} // namespace sgdgp

#endif // SGDGP_CONFIG_HPP
