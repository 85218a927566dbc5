#include "sgdgp/data.hpp"

#include "sgdgp/linalg.hpp"
#include "sgdgp/random.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>
#include <vector>

namespace sgdgp {

void Dataset::validate() const {
  if (X.rows() != y.size()) throw std::invalid_argument("dataset X and y differ in row count");
  if (!X.allFinite() || !y.allFinite()) throw std::invalid_argument("dataset contains non-finite entries");
}

Dataset Dataset::subset(const std::vector<Index>& rows) const {
  Dataset out;
  out.X.resize(static_cast<Index>(rows.size()), X.cols());
  out.y.resize(static_cast<Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.X.row(static_cast<Index>(i)) = X.row(rows[i]);
    out.y[static_cast<Index>(i)] = y[rows[i]];
  }
  out.provenance = provenance;
  out.normalization = normalization;
  return out;
}

namespace {

MatrixXd draw_inputs(const InputDistribution& input, Index n, Index dim, CounterRng& rng) {
  MatrixXd X(n, dim);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < dim; ++j)
      X(i, j) = input.kind == InputDistribution::Kind::Gaussian ? input.sd * rng.normal()
                                                                : rng.uniform(input.low, input.high);
  return X;
}

void check_input_distribution(const InputDistribution& input) {
  if (input.kind == InputDistribution::Kind::Gaussian && !(input.sd > 0.0))
    throw std::invalid_argument("Gaussian input sd must be positive");
  if (input.kind == InputDistribution::Kind::Uniform && !(input.high > input.low))
    throw std::invalid_argument("uniform input range must satisfy low < high");
}

} // namespace

VectorXd sample_gp(const MultiKernel<double>& kernels, const HyperParams<double>& theta_true, const MatrixXd& X,
                   std::uint64_t seed) {
  const auto factor = cholesky(marginal_covariance(kernels, theta_true, X));
  CounterRng z_rng(derive_seed(seed, "simulate.z"));
  VectorXd z(X.rows());
  for (Index i = 0; i < z.size(); ++i) z[i] = z_rng.normal();
  return factor.lower().triangularView<Eigen::Lower>() * z;
}

Dataset simulate_gp(const MultiKernel<double>& kernels, const HyperParams<double>& theta_true, Index n,
                    const InputDistribution& input, Index dim, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("simulate_gp: n must be >= 1");
  theta_true.validate();
  check_input_distribution(input);
  CounterRng x_rng(derive_seed(seed, "simulate.x"));
  Dataset out;
  out.X = draw_inputs(input, n, dim, x_rng);
  out.y = sample_gp(kernels, theta_true, out.X, seed);
  out.provenance = Provenance{"gp", theta_true.flatten(), effective_kernels(kernels, theta_true), 0.0, seed};
  return out;
}

TestFunction test_function_from_string(const std::string& name) {
  if (name == "levy") return TestFunction::Levy;
  if (name == "griewank") return TestFunction::Griewank;
  throw std::invalid_argument("unknown test function '" + name + "' (expected levy or griewank)");
}

const char* to_string(TestFunction f) { return f == TestFunction::Levy ? "levy" : "griewank"; }

double evaluate(TestFunction f, const VectorXd& x) {
  using std::numbers::pi;
  const Index d = x.size();
  if (d < 1) throw std::invalid_argument("test function needs at least one dimension");
  if (f == TestFunction::Levy) {
    auto w = [&](Index i) { return 1.0 + (x[i] - 1.0) / 4.0; };
    const double s1 = std::sin(pi * w(0));
    double total = s1 * s1;
    for (Index i = 0; i + 1 < d; ++i) {
      const double wi = w(i);
      const double s = std::sin(pi * wi + 1.0);
      total += (wi - 1.0) * (wi - 1.0) * (1.0 + 10.0 * s * s);
    }
    const double wd = w(d - 1);
    const double sd = std::sin(2.0 * pi * wd);
    total += (wd - 1.0) * (wd - 1.0) * (1.0 + sd * sd);
    return total;
  }
  double sum = 0.0;
  double prod = 1.0;
  for (Index i = 0; i < d; ++i) {
    sum += x[i] * x[i] / 4000.0;
    prod *= std::cos(x[i] / std::sqrt(static_cast<double>(i + 1)));
  }
  return sum - prod + 1.0;
}

InputDistribution default_domain(TestFunction f) {
  return f == TestFunction::Levy ? InputDistribution::uniform(-10.0, 10.0) : InputDistribution::uniform(-600.0, 600.0);
}

Dataset simulate_function(TestFunction f, Index n, Index dim, double noise_sd, std::uint64_t seed,
                          std::optional<InputDistribution> input) {
  if (n < 1 || dim < 1) throw std::invalid_argument("simulate_function: n and dim must be >= 1");
  if (noise_sd < 0.0) throw std::invalid_argument("simulate_function: noise_sd must be >= 0");
  const InputDistribution dist = input.value_or(default_domain(f));
  check_input_distribution(dist);
  CounterRng x_rng(derive_seed(seed, "simulate.x"));
  CounterRng e_rng(derive_seed(seed, "simulate.noise"));
  Dataset out;
  out.X = draw_inputs(dist, n, dim, x_rng);
  out.y.resize(n);
  for (Index i = 0; i < n; ++i) out.y[i] = evaluate(f, out.X.row(i).transpose()) + noise_sd * e_rng.normal();
  out.provenance = Provenance{to_string(f), VectorXd(), std::nullopt, noise_sd, seed};
  return out;
}

std::pair<Dataset, Dataset> train_test_split(const Dataset& data, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw std::invalid_argument("train fraction must lie strictly between 0 and 1");
  const Index n = data.size();
  const auto n_train = static_cast<Index>(std::floor(train_fraction * static_cast<double>(n)));
  if (n_train < 1 || n_train >= n)
    throw std::invalid_argument("split of n=" + std::to_string(n) + " leaves an empty side");
  std::vector<Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Index{0});
  CounterRng rng(derive_seed(seed, "split"));
  for (Index i = n - 1; i > 0; --i) {
    const auto j = static_cast<Index>(rng.below(static_cast<std::uint64_t>(i + 1)));
    std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
  }
  std::vector<Index> train(perm.begin(), perm.begin() + n_train);
  std::vector<Index> test(perm.begin() + n_train, perm.end());
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {data.subset(train), data.subset(test)};
}

namespace {

double sample_sd(const VectorXd& v, double mean) {
  if (v.size() < 2) return 0.0;
  return std::sqrt((v.array() - mean).square().sum() / static_cast<double>(v.size() - 1));
}

} // namespace

Dataset apply_normalization(const Dataset& data, const Normalization& stats) {
  if (stats.x_mean.size() != data.dim()) throw std::invalid_argument("normalization dimension mismatch");
  Dataset out = data;
  out.X = ((data.X.rowwise() - stats.x_mean.transpose()).array().rowwise() / stats.x_sd.transpose().array()).matrix();
  out.y = ((data.y.array() - stats.y_mean) / stats.y_sd).matrix();
  out.normalization = stats;
  return out;
}

Dataset invert_normalization(const Dataset& data, const Normalization& stats) {
  if (stats.x_mean.size() != data.dim()) throw std::invalid_argument("normalization dimension mismatch");
  Dataset out = data;
  out.X = ((data.X.array().rowwise() * stats.x_sd.transpose().array()).rowwise() + stats.x_mean.transpose().array())
              .matrix();
  out.y = (data.y.array() * stats.y_sd + stats.y_mean).matrix();
  out.normalization.reset();
  return out;
}

NormalizedPair normalize(const Dataset& train, const Dataset& test) {
  if (train.dim() != test.dim()) throw std::invalid_argument("train and test differ in dimension");
  if (train.size() < 2) throw std::invalid_argument("normalization needs at least two training rows");
  Normalization stats;
  stats.x_mean = train.X.colwise().mean().transpose();
  stats.x_sd.resize(train.dim());
  for (Index j = 0; j < train.dim(); ++j) {
    stats.x_sd[j] = sample_sd(train.X.col(j), stats.x_mean[j]);
    if (!(stats.x_sd[j] > 0.0))
      throw std::invalid_argument("column x" + std::to_string(j + 1) + " has zero variance in the training set");
  }
  stats.y_mean = train.y.mean();
  stats.y_sd = sample_sd(train.y, stats.y_mean);
  if (!(stats.y_sd > 0.0)) throw std::invalid_argument("response has zero variance in the training set");
  return {apply_normalization(train, stats), apply_normalization(test, stats), stats};
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

} // namespace

Dataset load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CsvError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || trim(line).empty()) throw CsvError(path.string() + ": no data rows");
  const auto header = split_line(trim(line));
  if (header.size() < 2) throw CsvError(path.string() + ": header needs at least x1 and y");
  const auto dim = static_cast<Index>(header.size() - 1);
  for (Index j = 0; j < dim; ++j) {
    if (trim(header[static_cast<std::size_t>(j)]) != "x" + std::to_string(j + 1))
      throw CsvError(path.string() + ": header column " + std::to_string(j + 1) + " must be named x" +
                     std::to_string(j + 1));
  }
  if (trim(header.back()) != "y") throw CsvError(path.string() + ": last header column must be named y");

  std::vector<double> values;
  Index rows = 0;
  Index line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    const auto cells = split_line(line);
    if (static_cast<Index>(cells.size()) != dim + 1)
      throw CsvError(path.string() + ": row " + std::to_string(line_no) + " has " + std::to_string(cells.size()) +
                     " columns, expected " + std::to_string(dim + 1));
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const std::string cell = trim(cells[c]);
      double v = 0.0;
      const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (res.ec != std::errc() || res.ptr != cell.data() + cell.size() || !std::isfinite(v))
        throw CsvError(path.string() + ": row " + std::to_string(line_no) + ", column " + std::to_string(c + 1) +
                       ": non-numeric cell '" + cell + "'");
      values.push_back(v);
    }
    ++rows;
  }
  if (rows == 0) throw CsvError(path.string() + ": no data rows");
  Dataset out;
  out.X.resize(rows, dim);
  out.y.resize(rows);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < dim; ++j) out.X(i, j) = values[static_cast<std::size_t>(i * (dim + 1) + j)];
    out.y[i] = values[static_cast<std::size_t>(i * (dim + 1) + dim)];
  }
  return out;
}

void save_csv(const Dataset& data, const std::filesystem::path& path) {
  data.validate();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CsvError("cannot write " + path.string());
  for (Index j = 0; j < data.dim(); ++j) out << 'x' << (j + 1) << ',';
  out << "y\n";
  for (Index i = 0; i < data.size(); ++i) {
    for (Index j = 0; j < data.dim(); ++j) out << format_double(data.X(i, j)) << ',';
    out << format_double(data.y[i]) << '\n';
  }
  if (!out) throw CsvError("write failed for " + path.string());
}

} // namespace sgdgp
