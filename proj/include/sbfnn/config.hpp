#pragma once
// JSON run configuration: a per-model preset, field overrides named like
// TrainConfig members, and optional model overrides.

#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sbfnn/biomodels.hpp"
#include "sbfnn/errors.hpp"
#include "sbfnn/training.hpp"

namespace sbfnn {

/// Thrown for a bad config value; field() names the offending key.
class ConfigError : public ContractError {
 public:
  ConfigError(std::string field, const std::string& what)
      : ContractError("config field '" + field + "': " + what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

struct ModelOverrides {
  std::optional<std::size_t> grid_cells;  // turing1d cells or turing2d side
  std::optional<double> ic_perturbation;
  std::optional<std::size_t> groups;      // asir
  std::string contact_csv;                // asir
  nlohmann::json params = nlohmann::json::object();
};

struct RunConfig {
  TrainConfig train;
  ModelOverrides model;
  std::string method;  // empty: derived from architecture/activation/constraint

  std::string method_label() const {
    if (!method.empty()) return method;
    if (train.arch == Architecture::PinnMlp) return "pinn-mlp-" + std::string(to_string(train.mlp_activation));
    return "sbfnn-" + train.activation.str() + (train.constraint ? "+constraint" : "");
  }
};

namespace detail {

template <class T>
T get_field(const nlohmann::json& j, const std::string& key) {
  try {
    return j.get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(key, "wrong type (" + std::string(j.type_name()) + ")");
  }
}

inline double get_nonneg(const nlohmann::json& j, const std::string& key) {
  const double v = get_field<double>(j, key);
  if (!(v >= 0.0)) throw ConfigError(key, "must be non-negative");
  return v;
}

inline std::size_t get_count(const nlohmann::json& j, const std::string& key) {
  if (!j.is_number_integer() && !j.is_number_unsigned()) throw ConfigError(key, "must be an integer");
  const auto v = j.get<long long>();
  if (v < 0) throw ConfigError(key, "must be non-negative");
  return static_cast<std::size_t>(v);
}

inline bool get_switch(const nlohmann::json& j, const std::string& key) {
  if (j.is_boolean()) return j.get<bool>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "on") return true;
    if (s == "off") return false;
  }
  throw ConfigError(key, "expected true/false or \"on\"/\"off\"");
}

inline void set_param(double& dst, const nlohmann::json& p, const char* key) {
  if (p.contains(key)) dst = get_field<double>(p.at(key), std::string("model_params.") + key);
}

}  // namespace detail

/// Parses a run configuration. Starts from the model's preset, then applies
/// every present field. Unknown keys are rejected.
inline RunConfig parse_run_config(const nlohmann::json& j) {
  using namespace detail;
  if (!j.is_object()) throw ConfigError("<root>", "configuration must be a JSON object");
  static const std::set<std::string> known{
      "model",       "arch",          "architecture",  "activation",    "constraint",   "lambda_o",    "lambda_f",
      "lambda_b",    "lambda_p",      "penalty_alpha", "penalty_tau",   "lr_init",      "lr_decay",    "epochs",
      "train_samples", "test_samples", "seed",         "ic_seed",       "hidden",       "modes",       "depth",
      "mlp_hidden",  "mlp_activation", "log_every",    "nmse_exclusion", "grid_cells",  "ic_perturbation",
      "groups",      "contact_csv",   "model_params",  "method",        "defaults",     "spectral_axis"};
  for (const auto& [k, v] : j.items())
    if (!known.count(k)) throw ConfigError(k, "unknown field");

  std::string model = "rep3";
  if (j.contains("model")) model = get_field<std::string>(j.at("model"), "model");
  RunConfig rc;
  try {
    rc.train = TrainConfig::defaults_for(model);
  } catch (const ContractError& e) {
    throw ConfigError("model", e.what());
  }
  if (j.contains("defaults") && !get_switch(j.at("defaults"), "defaults")) {
    rc.train = TrainConfig{};
    rc.train.model = model;
  }
  auto& t = rc.train;
  auto has = [&](const char* k) { return j.contains(k); };

  for (const char* k : {"arch", "architecture"})
    if (has(k)) {
      try {
        t.arch = architecture_from_string(get_field<std::string>(j.at(k), k));
      } catch (const ContractError& e) {
        throw ConfigError(k, e.what());
      }
    }
  if (has("activation")) {
    try {
      t.activation = ActivationMode::parse(get_field<std::string>(j.at("activation"), "activation"));
    } catch (const ContractError& e) {
      throw ConfigError("activation", e.what());
    }
  }
  if (has("mlp_activation")) {
    try {
      t.mlp_activation = activation_from_string(get_field<std::string>(j.at("mlp_activation"), "mlp_activation"));
    } catch (const ContractError& e) {
      throw ConfigError("mlp_activation", e.what());
    }
  }
  if (has("spectral_axis")) {
    try {
      t.spectral_axis = spectral_axis_from_string(get_field<std::string>(j.at("spectral_axis"), "spectral_axis"));
    } catch (const ContractError& e) {
      throw ConfigError("spectral_axis", e.what());
    }
  }
  if (has("constraint")) t.constraint = get_switch(j.at("constraint"), "constraint");
  if (has("nmse_exclusion")) t.nmse_exclusion = get_switch(j.at("nmse_exclusion"), "nmse_exclusion");

  struct RealField {
    const char* key;
    double* dst;
  };
  for (auto [k, dst] : {RealField{"lambda_o", &t.lambda_o}, RealField{"lambda_f", &t.lambda_f},
                        RealField{"lambda_b", &t.lambda_b}, RealField{"lambda_p", &t.lambda_p}})
    if (has(k)) *dst = get_nonneg(j.at(k), k);
  if (has("penalty_alpha")) t.penalty_alpha = get_field<double>(j.at("penalty_alpha"), "penalty_alpha");
  for (auto [k, dst] : {RealField{"penalty_tau", &t.penalty_tau}, RealField{"lr_init", &t.lr_init},
                        RealField{"lr_decay", &t.lr_decay}})
    if (has(k)) {
      *dst = get_field<double>(j.at(k), k);
      if (!(*dst > 0.0)) throw ConfigError(k, "must be positive");
    }

  struct CountField {
    const char* key;
    std::size_t* dst;
  };
  for (auto [k, dst] : {CountField{"epochs", &t.epochs}, CountField{"train_samples", &t.train_samples},
                        CountField{"test_samples", &t.test_samples}, CountField{"hidden", &t.hidden},
                        CountField{"modes", &t.modes}, CountField{"depth", &t.depth},
                        CountField{"log_every", &t.log_every}})
    if (has(k)) *dst = get_count(j.at(k), k);
  if (has("seed")) t.seed = get_count(j.at("seed"), "seed");
  if (has("ic_seed")) t.ic_seed = get_count(j.at("ic_seed"), "ic_seed");
  if (has("mlp_hidden")) {
    const auto& a = j.at("mlp_hidden");
    if (!a.is_array()) throw ConfigError("mlp_hidden", "must be an array of layer widths");
    t.mlp_hidden.clear();
    for (const auto& w : a) {
      t.mlp_hidden.push_back(get_count(w, "mlp_hidden"));
      if (t.mlp_hidden.back() == 0) throw ConfigError("mlp_hidden", "layer widths must be positive");
    }
  }
  if (has("method")) rc.method = get_field<std::string>(j.at("method"), "method");

  if (has("grid_cells")) {
    rc.model.grid_cells = get_count(j.at("grid_cells"), "grid_cells");
    if (*rc.model.grid_cells < 3) throw ConfigError("grid_cells", "need at least 3 cells per axis");
  }
  if (has("ic_perturbation")) rc.model.ic_perturbation = get_nonneg(j.at("ic_perturbation"), "ic_perturbation");
  if (has("groups")) {
    rc.model.groups = get_count(j.at("groups"), "groups");
    if (*rc.model.groups == 0) throw ConfigError("groups", "must be positive");
  }
  if (has("contact_csv")) rc.model.contact_csv = get_field<std::string>(j.at("contact_csv"), "contact_csv");
  if (has("model_params")) {
    if (!j.at("model_params").is_object()) throw ConfigError("model_params", "must be an object");
    rc.model.params = j.at("model_params");
  }

  // Remaining cross-field checks, reported against the field named in the message.
  try {
    t.validate();
  } catch (const ContractError& e) {
    std::string msg = e.what();
    throw ConfigError(msg.substr(0, msg.find(' ')), msg);
  }
  return rc;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("<root>", std::string("invalid JSON: ") + e.what());
  }
  auto rc = parse_run_config(j);
  // Relative contact paths resolve against the config file.
  if (!rc.model.contact_csv.empty() && std::filesystem::path(rc.model.contact_csv).is_relative())
    rc.model.contact_csv = (std::filesystem::path(path).parent_path() / rc.model.contact_csv).string();
  return rc;
}

/// Model for a run: defaults with the configured overrides applied.
inline ModelSpec build_model(const RunConfig& rc) {
  using detail::set_param;
  const auto& o = rc.model;
  const auto& p = o.params;
  static const std::set<std::string> allowed{"beta",  "hill", "alpha", "alpha0", "gamma", "population",
                                             "c1",    "c2",   "c_minus1", "c3", "d1",  "d2"};
  for (const auto& [k, v] : p.items())
    if (!allowed.count(k)) throw ConfigError("model_params." + k, "unknown model parameter");
  switch (model_kind_from_string(rc.train.model)) {
    case ModelKind::Rep3: {
      Rep3Params q;
      set_param(q.beta, p, "beta");
      set_param(q.hill, p, "hill");
      return make_rep3(q);
    }
    case ModelKind::Rep6: {
      Rep6Params q;
      set_param(q.alpha, p, "alpha");
      set_param(q.alpha0, p, "alpha0");
      set_param(q.beta, p, "beta");
      set_param(q.hill, p, "hill");
      return make_rep6(q);
    }
    case ModelKind::Sir: {
      SirParams q;
      set_param(q.beta, p, "beta");
      set_param(q.gamma, p, "gamma");
      set_param(q.population, p, "population");
      return make_sir(q);
    }
    case ModelKind::Asir: {
      AsirParams q;
      set_param(q.beta, p, "beta");
      set_param(q.gamma, p, "gamma");
      set_param(q.population, p, "population");
      if (o.groups) q.groups = *o.groups;
      if (!o.contact_csv.empty()) {
        std::size_t n = 0;
        q.contact = load_contact_csv(o.contact_csv, n);
        if (o.groups && *o.groups != n) throw ConfigError("contact_csv", "matrix size does not match groups");
        q.groups = n;
      }
      return make_asir(std::move(q));
    }
    case ModelKind::Turing1D:
    case ModelKind::Turing2D: {
      const bool two_d = model_kind_from_string(rc.train.model) == ModelKind::Turing2D;
      TuringParams q;
      set_param(q.c1, p, "c1");
      set_param(q.c2, p, "c2");
      set_param(q.c_minus1, p, "c_minus1");
      set_param(q.c3, p, "c3");
      set_param(q.d1, p, "d1");
      set_param(q.d2, p, "d2");
      const std::size_t n = o.grid_cells.value_or(two_d ? 25 : 100);
      q.grid = two_d ? SpatialGrid{n, n, 1.0} : SpatialGrid{n, 1, 1.0};
      return make_turing(q, two_d, o.ic_perturbation.value_or(0.1));
    }
  }
  throw ConfigError("model", "unknown model");
}

/// Echo of the effective configuration, written next to run outputs.
inline nlohmann::json to_json(const RunConfig& rc) {
  const auto& t = rc.train;
  nlohmann::json j{{"model", t.model},
                   {"arch", std::string(to_string(t.arch))},
                   {"activation", t.activation.str()},
                   {"constraint", t.constraint},
                   {"lambda_o", t.lambda_o},
                   {"lambda_f", t.lambda_f},
                   {"lambda_b", t.lambda_b},
                   {"lambda_p", t.lambda_p},
                   {"penalty_alpha", t.penalty_alpha},
                   {"penalty_tau", t.penalty_tau},
                   {"lr_init", t.lr_init},
                   {"lr_decay", t.lr_decay},
                   {"epochs", t.epochs},
                   {"train_samples", t.train_samples},
                   {"test_samples", t.effective_test_samples()},
                   {"seed", t.seed},
                   {"ic_seed", t.ic_seed},
                   {"hidden", t.hidden},
                   {"modes", t.modes},
                   {"depth", t.depth},
                   {"spectral_axis", std::string(to_string(t.spectral_axis))},
                   {"mlp_hidden", t.mlp_hidden},
                   {"mlp_activation", std::string(to_string(t.mlp_activation))},
                   {"log_every", t.log_every},
                   {"nmse_exclusion", t.nmse_exclusion},
                   {"method", rc.method_label()}};
  if (rc.model.grid_cells) j["grid_cells"] = *rc.model.grid_cells;
  if (rc.model.ic_perturbation) j["ic_perturbation"] = *rc.model.ic_perturbation;
  if (rc.model.groups) j["groups"] = *rc.model.groups;
  if (!rc.model.contact_csv.empty()) j["contact_csv"] = rc.model.contact_csv;
  if (!rc.model.params.empty()) j["model_params"] = rc.model.params;
  return j;
}

}  // namespace sbfnn
