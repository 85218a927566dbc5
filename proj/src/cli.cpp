#include "sgdgp/cli.hpp"

#include "sgdgp/config.hpp"
#include "sgdgp/data.hpp"
#include "sgdgp/diagnostics.hpp"
#include "sgdgp/experiments.hpp"
#include "sgdgp/prediction.hpp"
#include "sgdgp/training.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

namespace sgdgp {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct RunStats {
  Index clamp_events = 0;
  Index clip_events = 0;
  std::vector<std::string> notes;
};

VectorXd to_vector(const std::vector<double>& v) {
  return Eigen::Map<const VectorXd>(v.data(), static_cast<Index>(v.size()));
}

std::vector<double> to_std(const VectorXd& v) { return {v.data(), v.data() + v.size()}; }

InputDistribution input_distribution(const RunConfig& cfg) {
  if (cfg.input_dist == "gaussian") return InputDistribution::gaussian(cfg.input_sd);
  if (cfg.input_dist == "uniform") return InputDistribution::uniform(cfg.input_low, cfg.input_high);
  throw ConfigError("input_dist must be gaussian or uniform");
}

HyperParams<double> variances_param(const std::vector<double>& v, const RunConfig& cfg, const char* key) {
  if (static_cast<Index>(v.size()) != cfg.kernels.size() + 1)
    throw ConfigError(std::string(key) + " needs " + std::to_string(cfg.kernels.size() + 1) +
                      " entries (one per kernel plus noise)");
  try {
    return HyperParams<double>(to_vector(v));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string(key) + ": " + e.what());
  }
}

std::uint64_t root_seed(const RunConfig& cfg) { return cfg.seed.value_or(0); }

Dataset load_or_simulate(const RunConfig& cfg) {
  if (!cfg.dataset.empty()) return load_csv(cfg.dataset);
  const auto seed = derive_seed(root_seed(cfg), "data");
  if (!cfg.function.empty()) {
    std::optional<InputDistribution> input;
    if (cfg.input_dist == "uniform") input = input_distribution(cfg);
    return simulate_function(test_function_from_string(cfg.function), cfg.n, cfg.dim, cfg.noise_sd, seed, input);
  }
  return simulate_gp(cfg.kernels, variances_param(cfg.theta_true, cfg, "theta_true"), cfg.n, input_distribution(cfg),
                     cfg.dim, seed);
}

/// Training portion (and held-out test portion when one is defined).
std::pair<Dataset, std::optional<Dataset>> train_and_test(const RunConfig& cfg) {
  Dataset data = load_or_simulate(cfg);
  std::optional<Dataset> test;
  if (!cfg.test_dataset.empty()) {
    test = load_csv(cfg.test_dataset);
  } else if (cfg.train_fraction < 1.0) {
    auto [tr, te] = train_test_split(data, cfg.train_fraction, derive_seed(root_seed(cfg), "split"));
    data = std::move(tr);
    test = std::move(te);
  }
  return {std::move(data), std::move(test)};
}

SgdConfig sgd_config(const RunConfig& cfg, Index n) {
  SgdConfig sgd;
  sgd.batch_size = cfg.batch_size;
  if (cfg.batch_size < 1) throw ConfigError("batch_size must be >= 1");
  sgd.iterations = cfg.iterations > 0 ? cfg.iterations : iterations_for_epochs(n, cfg.batch_size, cfg.epochs);
  sgd.alpha1 = cfg.alpha1;
  sgd.scheme = sampling_scheme_from_string(cfg.sampling);
  if (cfg.scaling == "log") sgd.scaling = ScalingPolicy::log_scaled(cfg.tau);
  else if (cfg.scaling == "linear") sgd.scaling = ScalingPolicy::linear();
  else throw ConfigError("scaling must be log or linear");
  if (cfg.clamp) sgd.clamp = Bounds{cfg.theta_min, cfg.theta_max};
  else sgd.clamp.reset();
  if (cfg.clip > 0.0) sgd.clip = cfg.clip;
  else if (cfg.clip < 0.0) throw ConfigError("clip must be >= 0 (0 disables)");
  sgd.seed = derive_seed(root_seed(cfg), "fit");
  sgd.grad_norm_every = cfg.grad_norm_every;
  sgd.adam = AdamSettings{cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.adam_eps};
  sgd.validate();
  return sgd;
}

HyperParams<double> initial_params(const RunConfig& cfg) {
  HyperParams<double> theta0 = variances_param(cfg.theta_init, cfg, "theta_init");
  if (!cfg.lengthscale_init.empty()) {
    if (static_cast<Index>(cfg.lengthscale_init.size()) != cfg.kernels.lengthscale_slot_count())
      throw ConfigError("lengthscale_init needs " + std::to_string(cfg.kernels.lengthscale_slot_count()) + " entries");
    theta0.lengthscales = to_vector(cfg.lengthscale_init);
    theta0.validate();
  } else if (cfg.learn_lengthscales) {
    theta0.lengthscales = cfg.kernels.lengthscales();
  }
  return theta0;
}

std::string render_trace(const FitTrace& trace, bool timing) {
  std::ostringstream s;
  write_trace_csv(trace, s, timing);
  return s.str();
}

json normalization_json(const Normalization& n) {
  return json{{"x_mean", to_std(n.x_mean)}, {"x_sd", to_std(n.x_sd)}, {"y_mean", n.y_mean}, {"y_sd", n.y_sd}};
}

void write_summary(const fs::path& dir, const std::string& subcommand, const RunConfig& cfg, double elapsed_s,
                   const RunStats& stats) {
  std::ostringstream s;
  s << "subcommand=" << subcommand << '\n';
  s << "config_hash=" << config_hash(cfg) << '\n';
  s << "seed=" << root_seed(cfg) << '\n';
  s << "elapsed_s=" << format_double(elapsed_s) << '\n';
  s << "clamp_events=" << stats.clamp_events << '\n';
  s << "clip_events=" << stats.clip_events << '\n';
  for (const auto& note : stats.notes) s << note << '\n';
  write_file_atomic(dir / "summary.txt", s.str());
  write_file_atomic(dir / "config.json", to_json(cfg).dump(2) + "\n");
}

// --------------------------------------------------------------------------

void cmd_simulate(const RunConfig& cfg, const fs::path& out, RunStats& stats) {
  const Dataset data = load_or_simulate(cfg);
  const fs::path tmp = out / "dataset.csv.tmp";
  save_csv(data, tmp);
  fs::rename(tmp, out / "dataset.csv");
  json prov;
  prov["seed"] = root_seed(cfg);
  prov["data_seed"] = derive_seed(root_seed(cfg), "data");
  prov["n"] = data.size();
  prov["dim"] = data.dim();
  if (data.provenance) {
    prov["generator"] = data.provenance->generator;
    if (data.provenance->theta_true.size() > 0) prov["theta_true"] = to_std(data.provenance->theta_true);
    if (data.provenance->kernels) {
      json arr = json::array();
      for (const auto& k : data.provenance->kernels->components) arr.push_back(kernel_to_json(k));
      prov["kernels"] = arr;
    }
    if (data.provenance->generator != "gp") prov["noise_sd"] = data.provenance->noise_sd;
  }
  write_file_atomic(out / "provenance.json", prov.dump(2) + "\n");
  stats.notes.push_back("rows=" + std::to_string(data.size()));
}

void cmd_fit(const RunConfig& cfg, const fs::path& out, RunStats& stats) {
  auto [train, test] = train_and_test(cfg);
  std::optional<Normalization> norm;
  if (cfg.normalize) {
    auto pair = normalize(train, test.value_or(train));
    train = std::move(pair.train);
    norm = pair.stats;
  }
  const SgdConfig sgd = sgd_config(cfg, train.size());
  const HyperParams<double> theta0 = initial_params(cfg);
  FitTrace trace;
  if (cfg.optimizer == "sgd") trace = sgd_fit(train, cfg.kernels, sgd, theta0);
  else if (cfg.optimizer == "adam") trace = adam_fit(train, cfg.kernels, sgd, theta0, cfg.learn_lengthscales);
  else throw ConfigError("optimizer must be sgd or adam");

  write_file_atomic(out / "trace.csv", render_trace(trace, cfg.record_timing));
  const auto& fin = trace.final_params;
  json params;
  params["variances"] = to_std(fin.variances);
  const MultiKernel<double> learned = effective_kernels(cfg.kernels, fin);
  json arr = json::array();
  for (const auto& k : learned.components) arr.push_back(kernel_to_json(k));
  params["kernels"] = arr;
  if (norm) params["normalization"] = normalization_json(*norm);
  write_file_atomic(out / "params.json", params.dump(2) + "\n");
  stats.clamp_events += trace.clamp_events;
  stats.clip_events += trace.clip_events;
  stats.notes.push_back("iterations=" + std::to_string(trace.records.size() - 1));
}

void cmd_predict(const RunConfig& cfg, const fs::path& out, RunStats& stats, std::ostream& stdout_stream) {
  auto [train, test] = train_and_test(cfg);
  if (!test) throw ConfigError("predict needs test data: set test_dataset or train_fraction < 1");
  MultiKernel<double> kernels = cfg.kernels;
  HyperParams<double> theta;
  if (!cfg.params.empty()) {
    std::ifstream in(cfg.params);
    if (!in) throw ConfigError("cannot open params file " + cfg.params);
    const json doc = json::parse(in, nullptr, false);
    if (doc.is_discarded() || !doc.contains("variances")) throw ConfigError("params file is not valid fit output");
    if (doc.contains("kernels")) {
      std::vector<KernelSpec<double>> specs;
      for (const auto& b : doc["kernels"]) specs.push_back(kernel_from_json(b));
      kernels = MultiKernel<double>(std::move(specs));
    }
    theta = HyperParams<double>(to_vector(doc["variances"].get<std::vector<double>>()));
  } else if (!cfg.theta.empty()) {
    theta = variances_param(cfg.theta, cfg, "theta");
  } else {
    throw ConfigError("predict needs hyperparameters: set params (fit output) or theta");
  }
  if (theta.variances.size() != kernels.size() + 1) throw ConfigError("hyperparameters do not match kernel list");

  const VectorXd truth_raw = test->y;
  std::optional<Normalization> norm;
  if (cfg.normalize) {
    auto pair = normalize(train, *test);
    train = std::move(pair.train);
    test = std::move(pair.test);
    norm = pair.stats;
  }
  PredictOptions opts;
  opts.strategy = predict_strategy_from_string(cfg.strategy);
  opts.cg_tol = cfg.cg_tol;
  opts.cg_max_iter = cfg.cg_max_iter;
  opts.jacobi = cfg.jacobi;
  PredictionResult result;
  if (cfg.nn > 0) {
    const KdTree index(train.X);
    result = predict_nn(theta, kernels, train.X, train.y, test->X, cfg.nn, index, opts);
  } else {
    result = predict(theta, kernels, train.X, train.y, test->X, opts);
  }
  if (norm) {
    result.mean = (result.mean.array() * norm->y_sd + norm->y_mean).matrix();
    if (result.variance.size() > 0) result.variance *= norm->y_sd * norm->y_sd;
  }
  std::ostringstream csv;
  write_predictions_csv(result, truth_raw, csv);
  write_file_atomic(out / "predictions.csv", csv.str());
  const double err = rmse(result.mean, truth_raw);
  const double baseline = rmse(VectorXd::Constant(truth_raw.size(), train.y.mean() * (norm ? norm->y_sd : 1.0) +
                                                                       (norm ? norm->y_mean : 0.0)),
                               truth_raw);
  stats.notes.push_back("rmse=" + format_double(err));
  stats.notes.push_back("rmse_constant_mean=" + format_double(baseline));
  stats.notes.push_back("strategy=" + std::string(to_string(result.strategy)));
  stdout_stream << "rmse=" << format_double(err) << '\n';
}

std::vector<CurvatureReport> curvature_reports(const RunConfig& cfg) {
  CurvatureExperimentConfig c;
  c.pool_size = cfg.pool_size;
  c.batch_sizes = cfg.m_grid;
  c.replicates = cfg.replicates;
  if (cfg.curvature_theta.size() != 2) throw ConfigError("curvature_theta needs exactly two entries");
  c.signal = cfg.curvature_theta[0];
  c.noise = cfg.curvature_theta[1];
  c.kernel = cfg.kernels.components.front();
  c.input = InputDistribution::gaussian(cfg.pool_sd);
  c.dim = cfg.dim;
  c.seed = derive_seed(root_seed(cfg), "curvature");
  for (Index m : c.batch_sizes)
    if (m < 1 || m > c.pool_size) throw ConfigError("m_grid entries must lie in [1, pool_size]");
  return curvature_experiment(c);
}

void cmd_diagnose(const RunConfig& cfg, const fs::path& out, RunStats& stats) {
  std::ostringstream curv;
  write_curvature_csv(curvature_reports(cfg), curv);
  write_file_atomic(out / "curvature.csv", curv.str());

  // Eigendecay of the first kernel on a Gaussian input pool.
  const auto& kernel = cfg.kernels.components.front();
  CounterRng rng(derive_seed(root_seed(cfg), "eigendecay"));
  MatrixXd X(cfg.eig_n, cfg.dim);
  for (Index i = 0; i < X.rows(); ++i)
    for (Index j = 0; j < X.cols(); ++j) X(i, j) = cfg.pool_sd * rng.normal();
  const auto spectrum = sym_eigenvalues(kernel_matrix(kernel, X));
  const auto family = decay_family_from_string(cfg.eig_family);
  const std::optional<Index> max_index = cfg.eig_max_index > 0 ? std::optional(cfg.eig_max_index) : std::nullopt;
  const EigendecayFit fit = eigendecay_fit(spectrum, cfg.eig_n, family, max_index);
  std::ostringstream fits;
  write_eigendecay_csv({fit}, fits);
  write_file_atomic(out / "eigendecay.csv", fits.str());

  const bool analytic = kernel.family == KernelFamily::Rbf && cfg.dim == 1;
  std::ostringstream eig;
  eig << "j,lambda_over_n" << (analytic ? ",analytic" : "") << '\n';
  const Index shown = std::min<Index>(spectrum.size(), 64);
  const VectorXd law = analytic ? analytic_gaussian_eigenvalues(cfg.pool_sd, kernel.lengthscales[0], shown) : VectorXd();
  for (Index j = 0; j < shown; ++j) {
    eig << (j + 1) << ',' << format_double(spectrum[j] / static_cast<double>(cfg.eig_n));
    if (analytic) eig << ',' << format_double(law[j]);
    eig << '\n';
  }
  write_file_atomic(out / "eigenvalues.csv", eig.str());
  stats.notes.push_back("eigendecay_rate=" + format_double(fit.rate));
  stats.notes.push_back("eigendecay_scale=" + format_double(fit.scale));
}

// --------------------------------------------------------------------------
// Studies

SimulationProtocol protocol_from(const RunConfig& cfg) {
  SimulationProtocol p;
  p.n = cfg.n;
  p.dim = cfg.dim;
  p.input = input_distribution(cfg);
  p.kernels = cfg.kernels;
  p.theta_true = variances_param(cfg.theta_true, cfg, "theta_true");
  p.theta0 = initial_params(cfg);
  p.epochs = cfg.epochs;
  p.sgd = sgd_config(cfg, cfg.n);
  p.sgd.iterations = cfg.iterations;  // 0: derived per batch size from epochs
  p.sgd.seed = root_seed(cfg);
  p.use_adam = cfg.optimizer == "adam";
  p.learn_lengthscales = cfg.learn_lengthscales;
  return p;
}

void write_traces(const fs::path& dir, const std::string& label, const std::vector<FitTrace>& traces, bool timing,
                  RunStats& stats) {
  for (std::size_t r = 0; r < traces.size(); ++r) {
    write_file_atomic(dir / (label + "_rep" + std::to_string(r) + ".csv"), render_trace(traces[r], timing));
    stats.clamp_events += traces[r].clamp_events;
    stats.clip_events += traces[r].clip_events;
  }
}

struct InitCase {
  std::vector<double> theta0;
  double alpha1;
};

/// Three starting points around θ* = (4, 1); the third uses the smaller step.
const std::vector<InitCase>& param_convergence_inits() {
  static const std::vector<InitCase> cases{{{5.0, 3.0}, 9.0}, {{2.0, 0.5}, 9.0}, {{8.0, 2.0}, 6.0}};
  return cases;
}

void study_param_convergence(const RunConfig& cfg, const fs::path& dir, RunStats& stats) {
  std::ostringstream agg_csv;
  const auto& cases = param_convergence_inits();
  for (std::size_t c = 0; c < cases.size(); ++c) {
    SimulationProtocol p = protocol_from(cfg);
    p.theta0 = HyperParams<double>(to_vector(cases[c].theta0));
    p.sgd.alpha1 = cases[c].alpha1;
    const auto traces = run_repetitions(p, cfg.repetitions, cfg.jobs);
    write_traces(dir, "init" + std::to_string(c), traces, cfg.record_timing, stats);
    std::ostringstream part;
    write_aggregate_csv(aggregate_traces(traces), p.theta0.signal_count(), part, "init", std::to_string(c));
    std::string text = part.str();
    if (c > 0) text = text.substr(text.find('\n') + 1);
    agg_csv << text;
  }
  write_file_atomic(dir / "aggregate.csv", agg_csv.str());
}

void study_vary_m(const RunConfig& cfg, const fs::path& dir, RunStats& stats, bool gradients) {
  std::ostringstream agg_csv;
  bool first = true;
  for (Index m : cfg.study_m_grid) {
    SimulationProtocol p = protocol_from(cfg);
    p.sgd.batch_size = m;
    const Index iters = cfg.iterations > 0 ? cfg.iterations : iterations_for_epochs(p.n, m, p.epochs);
    p.sgd.iterations = iters;
    if (gradients) p.sgd.grad_norm_every = cfg.grad_norm_every > 0 ? cfg.grad_norm_every : (p.n + m - 1) / m;
    const auto traces = run_repetitions(p, cfg.repetitions, cfg.jobs);
    write_traces(dir, "m" + std::to_string(m), traces, cfg.record_timing, stats);
    std::ostringstream part;
    write_aggregate_csv(aggregate_traces(traces), p.theta0.signal_count(), part, "batch_size", std::to_string(m));
    std::string text = part.str();
    if (!first) text = text.substr(text.find('\n') + 1);
    first = false;
    agg_csv << text;
  }
  write_file_atomic(dir / "aggregate.csv", agg_csv.str());
}

bool study_lemma1(const RunConfig& cfg, const fs::path& dir, RunStats& stats) {
  if (cfg.curvature_theta.size() != 2) throw ConfigError("curvature_theta needs exactly two entries");
  const SurrogateCurve curve =
      lemma1_curve(cfg.l_grid, cfg.pool_sd, cfg.curvature_theta[0], cfg.curvature_theta[1], cfg.surrogate_m);
  std::ostringstream s;
  s << "lengthscale,beta,gamma_tilde\n";
  for (std::size_t i = 0; i < curve.values.size(); ++i)
    s << format_double(curve.lengthscales[i]) << ',' << format_double(curve.betas[i]) << ','
      << format_double(curve.values[i]) << '\n';
  write_file_atomic(dir / "lemma1.csv", s.str());
  stats.notes.push_back(std::string("lemma1_nondecreasing=") + (curve.nondecreasing ? "true" : "false"));
  return curve.nondecreasing;
}

int cmd_experiment(const RunConfig& cfg, const fs::path& out, RunStats& stats, std::ostream& err) {
  if (!cfg.seed) throw ConfigError("experiment requires an explicit seed (--seed)");
  if (cfg.repetitions < 1) throw ConfigError("repetitions must be >= 1");
  const fs::path dir = out / cfg.study;
  if (cfg.study == "param-convergence") {
    fs::create_directories(dir);
    study_param_convergence(cfg, dir, stats);
  } else if (cfg.study == "grad-convergence") {
    fs::create_directories(dir);
    study_vary_m(cfg, dir, stats, true);
  } else if (cfg.study == "vary-m") {
    fs::create_directories(dir);
    study_vary_m(cfg, dir, stats, false);
  } else if (cfg.study == "curvature") {
    fs::create_directories(dir);
    std::ostringstream curv;
    write_curvature_csv(curvature_reports(cfg), curv);
    write_file_atomic(dir / "curvature.csv", curv.str());
  } else if (cfg.study == "lemma1-monotone") {
    fs::create_directories(dir);
    if (!study_lemma1(cfg, dir, stats)) {
      err << "lemma1-monotone: surrogate curvature is not nondecreasing over the lengthscale grid\n";
      return kExitFailure;
    }
  } else {
    throw ConfigError("unknown study '" + cfg.study +
                      "' (expected param-convergence, grad-convergence, vary-m, curvature, lemma1-monotone)");
  }
  return kExitOk;
}

} // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Minibatch SGD for Gaussian-process hyperparameters"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  int jobs = 0;
  std::vector<std::string> overrides;
  app.add_option("--config", config_path, "JSON config file");
  app.add_option("--seed", seed, "root seed");
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--jobs", jobs, "parallel repetitions")->check(CLI::PositiveNumber);
  app.add_option("--set", overrides, "config override key=value (repeatable)");

  std::string study;
  auto* simulate = app.add_subcommand("simulate", "simulate a dataset");
  auto* fit = app.add_subcommand("fit", "fit hyperparameters with minibatch SGD or Adam");
  auto* predict_cmd = app.add_subcommand("predict", "posterior predictions and RMSE");
  auto* diagnose = app.add_subcommand("diagnose", "curvature and eigendecay diagnostics");
  auto* experiment = app.add_subcommand("experiment", "run a named multi-repetition study");
  experiment->add_option("study", study, "param-convergence | grad-convergence | vary-m | curvature | lemma1-monotone");

  std::vector<std::string> argv_rev(args.rbegin(), args.rend());
  try {
    app.parse(argv_rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n' << app.help();
    return kExitUsage;
  }

  const auto started = std::chrono::steady_clock::now();
  try {
    RunConfig cfg;
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw ConfigError("cannot open config file " + config_path);
      const json doc = json::parse(in, nullptr, false);
      if (doc.is_discarded()) throw ConfigError("config file " + config_path + " is not valid JSON");
      cfg = apply_config(cfg, doc);
    }
    for (const auto& o : overrides) cfg = apply_override(cfg, o);
    if (seed) cfg.seed = seed;
    if (!out_dir.empty()) cfg.out = out_dir;
    if (jobs > 0) cfg.jobs = jobs;
    if (!study.empty()) cfg.study = study;

    const fs::path dir = cfg.out;
    fs::create_directories(dir);
    RunStats stats;
    int code = kExitOk;
    std::string name;
    if (simulate->parsed()) {
      name = "simulate";
      cmd_simulate(cfg, dir, stats);
    } else if (fit->parsed()) {
      name = "fit";
      cmd_fit(cfg, dir, stats);
    } else if (predict_cmd->parsed()) {
      name = "predict";
      cmd_predict(cfg, dir, stats, out);
    } else if (diagnose->parsed()) {
      name = "diagnose";
      cmd_diagnose(cfg, dir, stats);
    } else {
      name = "experiment";
      code = cmd_experiment(cfg, dir, stats, err);
    }
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    write_summary(dir, name, cfg, elapsed, stats);
    return code;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    err << "invalid argument: " << e.what() << '\n';
    return kExitUsage;
  } catch (const FitError& e) {
    err << "fit failed: " << e.what() << '\n';
    return kExitFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

} // namespace sgdgp
