#pragma once

// Run configuration: strict JSON parsing with defaults resolved in place.
//
// {
//   "model": {
//     "dim": 1,                          1 or 2
//     "m": 0.7,                          0 <= m < 1
//     "x_dist": "uniform",               uniform | uniform_positive | two_point
//     "g_per": "sine",                   sine | haar
//     "a_per": {"type": "piecewise_constant", "starts": [0, 0.5], "values": [1, 4]},
//              {"type": "constant", "value": c} | {"type": "cosine", "mean": m, "amplitude": a}
//     "f": {"type": "constant", "value": 1} | {"type": "sine"} |
//          {"type": "piecewise_constant", "starts": [...], "values": [...]}
//     "A_per": {"type": "laminate"} | {"type": "identity"} |
//              {"type": "checkerboard", "low": 1, "high": 4}          (dim 2)
//   },
//   "experiment": { command specific, see experiment_defaults() },
//   "seed": 0,
//   "output": {"dir": "rdhomog_out"}
// }
//
// Unknown keys anywhere are errors.

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "rdhomog/diffeo.hpp"
#include "rdhomog/error.hpp"
#include "rdhomog/fields.hpp"

namespace rdh::cli {

using json = nlohmann::ordered_json;

inline const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"astar1d",      "residual-mc",   "limit-check",
                                              "moment-check", "corrector-nd",  "astar-convergence"};
  return names;
}

inline std::vector<double> default_eps_ladder() { return {1.0 / 25, 1.0 / 50, 1.0 / 100, 1.0 / 200, 1.0 / 400}; }

/// Every experiment key a command accepts, with its default.
inline json experiment_defaults(const std::string& command) {
  if (command == "astar1d") return {{"mc_samples", 0}};
  if (command == "residual-mc")
    return {{"eps", default_eps_ladder()}, {"M", 2000},
            {"x", json::array({0.5})},     {"norms", true},      {"variance_se", 3.0},
            {"z_threshold", 4.0}};
  if (command == "limit-check")
    return {{"eps", 1.0 / 400}, {"M", 20000}, {"x", 0.5}, {"cell_sums", true}, {"z_threshold", 4.0}};
  if (command == "moment-check")
    return {{"p", {1, 2}}, {"eps", default_eps_ladder()}, {"alpha", 0.0}, {"beta", 1.0}, {"M", 4000}};
  if (command == "corrector-nd") return {{"N", 4}, {"r", 8}, {"direction", 0}, {"tol", 1e-10}};
  if (command == "astar-convergence")
    return {{"N", {2, 4, 8, 16}}, {"M", 32},     {"r", 8},     {"tol", 1e-10},
            {"cv_N", 64},         {"cv_M", 64},  {"cv_r", 8}};
  throw ValidationError("unknown command '" + command + "'");
}

namespace detail {

inline std::string kind_name(const json& v) {
  switch (v.type()) {
    case json::value_t::number_integer:
    case json::value_t::number_unsigned:
      return "integer";
    case json::value_t::number_float:
      return "number";
    default:
      return v.type_name();
  }
}

/// Type-checks `given` against the shape of `def` and returns the merged value.
inline json conform(const json& def, const json& given, const std::string& where) {
  if (def.is_number_integer() || def.is_number_unsigned()) {
    if (given.is_number_unsigned() || given.is_number_integer()) return given;
    if (given.is_number_float() && std::floor(given.get<double>()) == given.get<double>() &&
        std::abs(given.get<double>()) < 9.0e15)
      return static_cast<std::int64_t>(given.get<double>());
    throw ValidationError(where + ": expected integer, got " + kind_name(given));
  }
  if (def.is_number()) {
    if (given.is_number()) return given.get<double>();
    throw ValidationError(where + ": expected number, got " + kind_name(given));
  }
  if (def.is_boolean()) {
    if (given.is_boolean()) return given;
    throw ValidationError(where + ": expected boolean, got " + kind_name(given));
  }
  if (def.is_string()) {
    if (given.is_string()) return given;
    throw ValidationError(where + ": expected string, got " + kind_name(given));
  }
  if (def.is_array()) {
    if (!given.is_array()) throw ValidationError(where + ": expected array, got " + kind_name(given));
    if (given.empty()) throw ValidationError(where + ": array must not be empty");
    json out = json::array();
    for (std::size_t i = 0; i < given.size(); ++i)
      out.push_back(conform(def.front(), given[i], where + "[" + std::to_string(i) + "]"));
    return out;
  }
  throw ValidationError(where + ": unsupported value");
}

inline void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw ValidationError(where + ": expected object");
  for (const auto& [k, v] : obj.items())
    if (!allowed.count(k)) throw ValidationError(where + ": unknown key '" + k + "'");
}

inline json merge_object(const json& defaults, const json& given, const std::string& where) {
  if (given.is_null()) return defaults;
  std::set<std::string> allowed;
  for (const auto& [k, v] : defaults.items()) allowed.insert(k);
  reject_unknown(given, allowed, where);
  json out = defaults;
  for (const auto& [k, v] : given.items()) out[k] = conform(defaults[k], v, where + "." + k);
  return out;
}

inline json resolve_piecewise(const json& given, const std::string& where, bool allow_cosine) {
  if (!given.is_object() || !given.contains("type") || !given["type"].is_string())
    throw ValidationError(where + ": expected an object with a string 'type'");
  const auto type = given["type"].get<std::string>();
  if (type == "constant") return merge_object({{"type", "constant"}, {"value", 1.0}}, given, where);
  if (type == "piecewise_constant")
    return merge_object({{"type", "piecewise_constant"}, {"starts", json::array({0.0})}, {"values", json::array({1.0})}}, given, where);
  if (allow_cosine && type == "cosine")
    return merge_object({{"type", "cosine"}, {"mean", 2.0}, {"amplitude", 1.0}}, given, where);
  if (!allow_cosine && type == "sine") return merge_object({{"type", "sine"}}, given, where);
  throw ValidationError(where + ": unknown type '" + type + "'");
}

inline json resolve_matrix(const json& given, const std::string& where) {
  if (!given.is_object() || !given.contains("type") || !given["type"].is_string())
    throw ValidationError(where + ": expected an object with a string 'type'");
  const auto type = given["type"].get<std::string>();
  if (type == "laminate" || type == "identity") return merge_object({{"type", type}}, given, where);
  if (type == "checkerboard")
    return merge_object({{"type", "checkerboard"}, {"low", 1.0}, {"high", 4.0}}, given, where);
  throw ValidationError(where + ": unknown type '" + type + "'");
}

}  // namespace detail

inline json model_defaults() {
  return {{"dim", 1},
          {"m", 0.0},
          {"x_dist", "uniform"},
          {"g_per", "sine"},
          {"a_per", {{"type", "piecewise_constant"}, {"starts", {0.0, 0.5}}, {"values", {1.0, 4.0}}}},
          {"f", {{"type", "constant"}, {"value", 1.0}}},
          {"A_per", {{"type", "laminate"}}}};
}

/// Fully resolved configuration plus the library objects built from it.
struct RunConfig {
  std::string command;
  json model;
  json experiment;
  std::uint64_t seed = 0;
  std::string out_dir = "rdhomog_out";

  int dim = 1;
  DiffeoLaw law = DiffeoLaw::identity();
  PeriodicScalarField a_per = PeriodicScalarField::constant(1.0);
  SourceTerm f = SourceTerm::constant(1.0);

  /// The echo written into every summary: model, experiment and seed. Output
  /// paths and worker counts are deliberately absent, since they must not
  /// change the output bytes.
  [[nodiscard]] json echo() const { return {{"model", model}, {"experiment", experiment}, {"seed", seed}}; }
};

inline XDist parse_x_dist(const std::string& s) {
  if (s == "uniform") return XDist::UniformCentered;
  if (s == "uniform_positive") return XDist::UniformPositive;
  if (s == "two_point") return XDist::TwoPoint;
  throw ValidationError("model.x_dist: unknown distribution '" + s + "' (uniform, uniform_positive, two_point)");
}

inline GShape parse_g(const std::string& s) {
  if (s == "sine") return GShape::Sine;
  if (s == "haar") return GShape::Haar;
  throw ValidationError("model.g_per: unknown shape '" + s + "' (sine, haar)");
}

inline PeriodicScalarField build_scalar_field(const json& spec) {
  const auto type = spec["type"].get<std::string>();
  if (type == "constant") return PeriodicScalarField::constant(spec["value"].get<double>());
  if (type == "cosine") return PeriodicScalarField::cosine(spec["mean"].get<double>(), spec["amplitude"].get<double>());
  return PeriodicScalarField::piecewise_constant(spec["starts"].get<std::vector<double>>(),
                                                 spec["values"].get<std::vector<double>>());
}

inline SourceTerm build_source(const json& spec) {
  const auto type = spec["type"].get<std::string>();
  if (type == "constant") return SourceTerm::constant(spec["value"].get<double>());
  if (type == "sine") return SourceTerm::sine();
  return SourceTerm::piecewise_constant(spec["starts"].get<std::vector<double>>(),
                                        spec["values"].get<std::vector<double>>());
}

template <int Dim>
PeriodicMatrixField<Dim> build_matrix_field(const RunConfig& cfg) {
  const auto type = cfg.model["A_per"]["type"].get<std::string>();
  if (type == "identity") return PeriodicMatrixField<Dim>::identity();
  if (type == "laminate") return PeriodicMatrixField<Dim>::laminate(cfg.a_per);
  if constexpr (Dim == 2) {
    const double lo = cfg.model["A_per"]["low"].get<double>();
    const double hi = cfg.model["A_per"]["high"].get<double>();
    if (!(lo > 0.0 && hi > 0.0)) throw ValidationError("model.A_per: checkerboard values must be positive");
    return PeriodicMatrixField<Dim>::checkerboard(lo, hi);
  }
  throw ValidationError("model.A_per: '" + type + "' is only available for dim = 2");
}

namespace detail {

inline void require(bool ok, const std::string& msg) {
  if (!ok) throw ValidationError(msg);
}

inline void check_eps(double e, const std::string& where) {
  require(e > 0.0 && e <= 1.0, where + ": eps must lie in (0, 1], got " + std::to_string(e));
}

inline void check_positive_count(const json& v, const std::string& where, std::int64_t min) {
  require(v.get<std::int64_t>() >= min, where + " must be >= " + std::to_string(min));
}

/// Command preconditions, checked before any computation.
inline void validate_experiment(const RunConfig& cfg) {
  const auto& e = cfg.experiment;
  const auto& c = cfg.command;
  const bool one_d = c == "astar1d" || c == "residual-mc" || c == "limit-check" || c == "moment-check";
  if (one_d) require(cfg.dim == 1, "command " + c + " is one-dimensional; model.dim must be 1");
  if (c == "astar1d") {
    require(e["mc_samples"].get<std::int64_t>() >= 0, "experiment.mc_samples must be >= 0");
    const auto n = e["mc_samples"].get<std::int64_t>();
    require(n == 0 || n >= 2, "experiment.mc_samples must be 0 or >= 2");
  } else if (c == "residual-mc") {
    for (const auto& v : e["eps"]) check_eps(v.get<double>(), "experiment.eps");
    check_positive_count(e["M"], "experiment.M", 2);
    for (const auto& v : e["x"])
      require(v.get<double>() >= 0.0 && v.get<double>() <= 1.0, "experiment.x values must lie in [0, 1]");
    require(e["variance_se"].get<double>() > 0.0, "experiment.variance_se must be positive");
    require(e["z_threshold"].get<double>() > 0.0, "experiment.z_threshold must be positive");
  } else if (c == "limit-check") {
    check_eps(e["eps"].get<double>(), "experiment.eps");
    check_positive_count(e["M"], "experiment.M", 1000);
    require(e["x"].get<double>() > 0.0 && e["x"].get<double>() < 1.0, "experiment.x must lie in (0, 1)");
    require(e["z_threshold"].get<double>() > 0.0, "experiment.z_threshold must be positive");
  } else if (c == "moment-check") {
    for (const auto& v : e["p"])
      require(v.get<std::int64_t>() >= 1 && v.get<std::int64_t>() <= 4, "experiment.p values must lie in [1, 4]");
    for (const auto& v : e["eps"]) check_eps(v.get<double>(), "experiment.eps");
    const double a = e["alpha"].get<double>();
    const double b = e["beta"].get<double>();
    require(a >= 0.0 && a < b && b <= 1.0, "experiment: need 0 <= alpha < beta <= 1");
    check_positive_count(e["M"], "experiment.M", 2);
  } else if (c == "corrector-nd") {
    check_positive_count(e["N"], "experiment.N", 1);
    check_positive_count(e["r"], "experiment.r", 1);
    const auto d = e["direction"].get<std::int64_t>();
    require(d >= 0 && d < cfg.dim, "experiment.direction must lie in [0, dim)");
    require(e["tol"].get<double>() > 0.0, "experiment.tol must be positive");
  } else if (c == "astar-convergence") {
    std::int64_t prev = 0;
    for (const auto& v : e["N"]) {
      const auto n = v.get<std::int64_t>();
      require(n >= 1, "experiment.N values must be >= 1");
      require(n > prev, "experiment.N must be strictly increasing");
      prev = n;
    }
    check_positive_count(e["M"], "experiment.M", 2);
    check_positive_count(e["r"], "experiment.r", 1);
    require(e["tol"].get<double>() > 0.0, "experiment.tol must be positive");
    check_positive_count(e["cv_N"], "experiment.cv_N", 1);
    check_positive_count(e["cv_M"], "experiment.cv_M", 2);
    check_positive_count(e["cv_r"], "experiment.cv_r", 1);
  }
}

}  // namespace detail

/// Parses and validates a config document for `command`. Any problem is a
/// ValidationError.
inline RunConfig parse_config(const std::string& command, const json& doc) {
  if (!doc.is_object()) throw ValidationError("config: top level must be an object");
  detail::reject_unknown(doc, {"model", "experiment", "seed", "output"}, "config");
  if (!doc.contains("model")) throw ValidationError("config: missing 'model' block");
  RunConfig cfg;
  cfg.command = command;

  const json& m = doc["model"];
  detail::reject_unknown(m, {"dim", "m", "x_dist", "g_per", "a_per", "f", "A_per"}, "model");
  if (!m.contains("m")) throw ValidationError("model: missing 'm'");
  json model = model_defaults();
  for (const char* k : {"dim", "m", "x_dist", "g_per"})
    if (m.contains(k)) model[k] = detail::conform(model[k], m[k], std::string("model.") + k);
  if (m.contains("a_per")) model["a_per"] = detail::resolve_piecewise(m["a_per"], "model.a_per", true);
  if (m.contains("f")) model["f"] = detail::resolve_piecewise(m["f"], "model.f", false);
  if (m.contains("A_per")) model["A_per"] = detail::resolve_matrix(m["A_per"], "model.A_per");
  cfg.model = model;

  cfg.dim = static_cast<int>(model["dim"].get<std::int64_t>());
  if (cfg.dim != 1 && cfg.dim != 2) throw ValidationError("model.dim must be 1 or 2");
  cfg.law = DiffeoLaw(model["m"].get<double>(), parse_x_dist(model["x_dist"].get<std::string>()),
                      parse_g(model["g_per"].get<std::string>()));
  cfg.a_per = build_scalar_field(model["a_per"]);
  cfg.f = build_source(model["f"]);
  if (cfg.dim == 1 && model["A_per"]["type"] != "laminate")
    throw ValidationError("model.A_per: in dim = 1 the coefficient is a_per (type 'laminate')");

  cfg.experiment = detail::merge_object(experiment_defaults(command),
                                        doc.contains("experiment") ? doc["experiment"] : json(), "experiment");

  if (doc.contains("seed")) {
    const auto& s = doc["seed"];
    if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<std::int64_t>() >= 0))
      throw ValidationError("config.seed must be a non-negative 64-bit integer");
    cfg.seed = s.get<std::uint64_t>();
  }
  if (doc.contains("output")) {
    detail::reject_unknown(doc["output"], {"dir"}, "output");
    if (doc["output"].contains("dir")) {
      if (!doc["output"]["dir"].is_string()) throw ValidationError("output.dir must be a string");
      cfg.out_dir = doc["output"]["dir"].get<std::string>();
    }
  }
  detail::validate_experiment(cfg);
  return cfg;
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError("config '" + path + "' is not valid JSON: " + e.what());
  }
}

}  // namespace rdh::cli
