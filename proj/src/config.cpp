#include "sgdgp/config.hpp"

#include <cstdio>
#include <functional>
#include <map>
#include <type_traits>

namespace sgdgp {

using nlohmann::json;

nlohmann::json kernel_to_json(const KernelSpec<double>& spec) {
  json block;
  block["family"] = spec.family == KernelFamily::Rbf ? "rbf" : "matern";
  block["lengthscales"] = std::vector<double>(spec.lengthscales.data(), spec.lengthscales.data() + spec.lengthscales.size());
  if (spec.family == KernelFamily::Matern) block["matern_order"] = matern_nu(spec.order);
  return block;
}

KernelSpec<double> kernel_from_json(const nlohmann::json& block) {
  if (!block.is_object()) throw ConfigError("kernel block must be an object");
  for (const auto& [key, _] : block.items())
    if (key != "family" && key != "lengthscales" && key != "matern_order")
      throw ConfigError("unknown kernel key '" + key + "'");
  try {
    const std::string family = block.value("family", std::string("rbf"));
    const auto ls = block.at("lengthscales").get<std::vector<double>>();
    const VectorXd lv = Eigen::Map<const VectorXd>(ls.data(), static_cast<Index>(ls.size()));
    if (family == "rbf") {
      if (block.contains("matern_order")) throw ConfigError("matern_order given for an rbf kernel");
      return KernelSpec<double>::rbf(lv);
    }
    if (family == "matern") {
      if (lv.size() != 1) throw ConfigError("matern kernel takes exactly one lengthscale");
      return KernelSpec<double>::matern(block.value("matern_order", 2.5), lv[0]);
    }
    throw ConfigError("unknown kernel family '" + family + "' (expected rbf or matern)");
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad kernel block: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

namespace {

struct Field {
  std::function<void(RunConfig&, const json&)> set;
  std::function<json(const RunConfig&)> get;
};

template <typename T>
void require_type(const json& v, const std::string& name) {
  bool ok = true;
  if constexpr (std::is_same_v<T, bool>) ok = v.is_boolean();
  else if constexpr (std::is_integral_v<T>) ok = v.is_number_integer() && (std::is_signed_v<T> || v.is_number_unsigned());
  else if constexpr (std::is_floating_point_v<T>) ok = v.is_number();
  else if constexpr (std::is_same_v<T, std::string>) ok = v.is_string();
  else ok = v.is_array();
  if (!ok) throw ConfigError("config key '" + name + "' has the wrong type");
}

template <typename T>
Field plain(T RunConfig::*member, const std::string& name) {
  return Field{[member, name](RunConfig& c, const json& v) {
                 require_type<T>(v, name);
                 try {
                   c.*member = v.get<T>();
                 } catch (const json::exception& e) {
                   throw ConfigError("config key '" + name + "': " + e.what());
                 }
               },
               [member](const RunConfig& c) { return json(c.*member); }};
}

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = [] {
    std::map<std::string, Field> t;
#define SGDGP_FIELD(name) t.emplace(#name, plain(&RunConfig::name, #name))
    SGDGP_FIELD(dataset);
    SGDGP_FIELD(test_dataset);
    SGDGP_FIELD(n);
    SGDGP_FIELD(dim);
    SGDGP_FIELD(input_dist);
    SGDGP_FIELD(input_sd);
    SGDGP_FIELD(input_low);
    SGDGP_FIELD(input_high);
    SGDGP_FIELD(function);
    SGDGP_FIELD(noise_sd);
    SGDGP_FIELD(theta_true);
    SGDGP_FIELD(train_fraction);
    SGDGP_FIELD(normalize);
    SGDGP_FIELD(optimizer);
    SGDGP_FIELD(batch_size);
    SGDGP_FIELD(epochs);
    SGDGP_FIELD(iterations);
    SGDGP_FIELD(alpha1);
    SGDGP_FIELD(learning_rate);
    SGDGP_FIELD(beta1);
    SGDGP_FIELD(beta2);
    SGDGP_FIELD(adam_eps);
    SGDGP_FIELD(scaling);
    SGDGP_FIELD(tau);
    SGDGP_FIELD(sampling);
    SGDGP_FIELD(clamp);
    SGDGP_FIELD(theta_min);
    SGDGP_FIELD(theta_max);
    SGDGP_FIELD(clip);
    SGDGP_FIELD(learn_lengthscales);
    SGDGP_FIELD(theta_init);
    SGDGP_FIELD(lengthscale_init);
    SGDGP_FIELD(grad_norm_every);
    SGDGP_FIELD(record_timing);
    SGDGP_FIELD(params);
    SGDGP_FIELD(theta);
    SGDGP_FIELD(strategy);
    SGDGP_FIELD(cg_tol);
    SGDGP_FIELD(cg_max_iter);
    SGDGP_FIELD(jacobi);
    SGDGP_FIELD(nn);
    SGDGP_FIELD(m_grid);
    SGDGP_FIELD(replicates);
    SGDGP_FIELD(pool_size);
    SGDGP_FIELD(pool_sd);
    SGDGP_FIELD(curvature_theta);
    SGDGP_FIELD(eig_n);
    SGDGP_FIELD(eig_family);
    SGDGP_FIELD(eig_max_index);
    SGDGP_FIELD(study);
    SGDGP_FIELD(repetitions);
    SGDGP_FIELD(study_m_grid);
    SGDGP_FIELD(l_grid);
    SGDGP_FIELD(surrogate_m);
    SGDGP_FIELD(out);
    SGDGP_FIELD(jobs);
#undef SGDGP_FIELD
    t.emplace("seed", Field{[](RunConfig& c, const json& v) {
                              if (v.is_null()) {
                                c.seed.reset();
                                return;
                              }
                              if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
                                throw ConfigError("config key 'seed' must be a non-negative integer");
                              c.seed = v.get<std::uint64_t>();
                            },
                            [](const RunConfig& c) { return c.seed ? json(*c.seed) : json(nullptr); }});
    t.emplace("kernels", Field{[](RunConfig& c, const json& v) {
                                 if (!v.is_array() || v.empty())
                                   throw ConfigError("config key 'kernels' must be a non-empty array of kernel blocks");
                                 std::vector<KernelSpec<double>> specs;
                                 for (const auto& b : v) specs.push_back(kernel_from_json(b));
                                 c.kernels = MultiKernel<double>(std::move(specs));
                               },
                               [](const RunConfig& c) {
                                 json arr = json::array();
                                 for (const auto& k : c.kernels.components) arr.push_back(kernel_to_json(k));
                                 return arr;
                               }});
    return t;
  }();
  return table;
}

} // namespace

RunConfig apply_config(RunConfig base, const nlohmann::json& doc) {
  if (!doc.is_object()) throw ConfigError("config document must be a JSON object");
  const auto& table = fields();
  for (const auto& [key, value] : doc.items()) {
    const auto it = table.find(key);
    if (it == table.end()) throw ConfigError("unknown config key '" + key + "'");
    it->second.set(base, value);
  }
  return base;
}

RunConfig apply_override(RunConfig base, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' must look like key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;
  return apply_config(std::move(base), json{{key, value}});
}

nlohmann::json to_json(const RunConfig& config) {
  json doc = json::object();
  for (const auto& [key, field] : fields()) doc[key] = field.get(config);
  return doc;
}

std::string config_hash(const RunConfig& config) {
  const std::string text = to_json(config).dump();
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

} // namespace sgdgp
