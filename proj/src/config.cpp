#include "l0flow/config.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <utility>

namespace l0flow {

namespace {

constexpr std::array<std::pair<ExperimentKind, std::pair<std::string_view, std::string_view>>, 7>
    kKinds{{
        {ExperimentKind::distance_table, {"distance-table", "distance"}},
        {ExperimentKind::geodesic, {"geodesic", "geodesic"}},
        {ExperimentKind::transport_check, {"transport-check", "transport"}},
        {ExperimentKind::couple, {"couple", "couple"}},
        {ExperimentKind::verify_supermartingale, {"verify-supermartingale", "verify-sm"}},
        {ExperimentKind::verify_monotonicity, {"verify-monotonicity", "verify-mono"}},
        {ExperimentKind::invariants, {"invariants", "invariants"}},
    }};

using json = nlohmann::json;

// Reads the keys of one JSON object, remembering which were consumed so
// that typos surface as errors instead of silently using defaults.
class Section {
 public:
  Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw ConfigError("config section '" + name_ + "' must be an object");
  }

  template <class T>
  void read(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError("config key '" + name_ + "." + key + "': " + e.what());
    }
  }

  template <class T>
  void read(const char* key, std::optional<T>& out) {
    seen_.insert(key);
    if (!j_.contains(key) || j_.at(key).is_null()) return;
    T value{};
    read(key, value);
    out = value;
  }

  bool has(const char* key) const { return j_.contains(key); }
  const json& at(const char* key) {
    seen_.insert(key);
    return j_.at(key);
  }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (!seen_.count(item.key())) {
        throw ConfigError("unknown config key '" + name_ + "." + item.key() + "'");
      }
    }
  }

 private:
  const json& j_;
  std::string name_;
  std::set<std::string> seen_;
};

}  // namespace

std::string_view kind_name(ExperimentKind kind) {
  for (const auto& [k, names] : kKinds) {
    if (k == kind) return names.first;
  }
  return "distance-table";
}

std::string_view subcommand_name(ExperimentKind kind) {
  for (const auto& [k, names] : kKinds) {
    if (k == kind) return names.second;
  }
  return "distance";
}

ExperimentKind parse_kind(std::string_view text) {
  for (const auto& [k, names] : kKinds) {
    if (text == names.first || text == names.second) return k;
  }
  throw ConfigError("unknown experiment '" + std::string(text) + "'");
}

nlohmann::ordered_json config_to_json(const ExperimentConfig& c) {
  nlohmann::ordered_json j;
  j["experiment"] = kind_name(c.kind);
  j["flow"] = {{"model", model_name(c.flow.model)},
               {"d", c.flow.d},
               {"L", c.flow.side},
               {"T", c.flow.horizon}};
  j["schedule"] = {{"t1_prime", c.schedule.t1_prime},
                   {"t1_dprime", c.schedule.t1_dprime},
                   {"S", c.schedule.horizon},
                   {"epsilon", c.schedule.epsilon},
                   {"max_steps", c.schedule.max_steps}};
  j["solver"] = {{"N", c.solver.steps},
                 {"multi_start", c.solver.multi_start},
                 {"tol_action", c.solver.tol_action},
                 {"tol_sep", c.solver.tol_sep},
                 {"tol_residual", c.solver.tol_residual},
                 {"max_iterations", c.solver.max_iterations},
                 {"direct_max_iterations", c.solver.direct_max_iterations},
                 {"direct_stage", c.solver.direct_stage}};
  j["coupling"] = {{"N", c.coupling.steps}, {"cut_fraction", c.coupling.cut_fraction}};
  nlohmann::ordered_json ens = {{"n_paths", c.ensemble.n_paths}};
  ens["master_seed"] = c.ensemble.master_seed ? nlohmann::ordered_json(*c.ensemble.master_seed)
                                              : nlohmann::ordered_json(nullptr);
  ens["threads"] = c.ensemble.threads ? nlohmann::ordered_json(*c.ensemble.threads)
                                      : nlohmann::ordered_json(nullptr);
  j["ensemble"] = ens;
  j["points"] = {{"tp", c.points.t_prime},
                 {"tq", c.points.t_dprime},
                 {"p", c.points.p},
                 {"q", c.points.q},
                 {"v", c.points.v}};
  j["measures"] = {{"n", c.measures.n},
                   {"center_prime", c.measures.center_prime},
                   {"center_dprime", c.measures.center_dprime},
                   {"radius", c.measures.radius},
                   {"phi", c.measures.phi},
                   {"checkpoints", c.measures.checkpoints},
                   {"bootstrap", c.measures.bootstrap},
                   {"tolerance_se", c.measures.tolerance_se}};
  j["output"] = {{"csv", c.output.csv},
                 {"json", c.output.json},
                 {"trajectory_dir", c.output.trajectory_dir},
                 {"long_format", c.output.long_format},
                 {"batch_input", c.output.batch_input}};
  return j;
}

ExperimentConfig config_from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  Section top(j, "config");
  if (top.has("experiment")) {
    std::string kind;
    top.read("experiment", kind);
    c.kind = parse_kind(kind);
  }
  if (top.has("flow")) {
    Section s(top.at("flow"), "flow");
    if (s.has("model")) {
      std::string model;
      s.read("model", model);
      try {
        c.flow.model = parse_model(model);
      } catch (const DomainError& e) {
        throw ConfigError(e.what());
      }
    }
    s.read("d", c.flow.d);
    s.read("L", c.flow.side);
    s.read("T", c.flow.horizon);
    s.finish();
  }
  if (top.has("schedule")) {
    Section s(top.at("schedule"), "schedule");
    s.read("t1_prime", c.schedule.t1_prime);
    s.read("t1_dprime", c.schedule.t1_dprime);
    s.read("S", c.schedule.horizon);
    s.read("epsilon", c.schedule.epsilon);
    s.read("max_steps", c.schedule.max_steps);
    s.finish();
  }
  if (top.has("solver")) {
    Section s(top.at("solver"), "solver");
    s.read("N", c.solver.steps);
    s.read("multi_start", c.solver.multi_start);
    s.read("tol_action", c.solver.tol_action);
    s.read("tol_sep", c.solver.tol_sep);
    s.read("tol_residual", c.solver.tol_residual);
    s.read("max_iterations", c.solver.max_iterations);
    s.read("direct_max_iterations", c.solver.direct_max_iterations);
    s.read("direct_stage", c.solver.direct_stage);
    s.finish();
  }
  if (top.has("coupling")) {
    Section s(top.at("coupling"), "coupling");
    s.read("N", c.coupling.steps);
    s.read("cut_fraction", c.coupling.cut_fraction);
    s.finish();
  }
  if (top.has("ensemble")) {
    Section s(top.at("ensemble"), "ensemble");
    s.read("n_paths", c.ensemble.n_paths);
    s.read("master_seed", c.ensemble.master_seed);
    s.read("threads", c.ensemble.threads);
    s.finish();
  }
  if (top.has("points")) {
    Section s(top.at("points"), "points");
    s.read("tp", c.points.t_prime);
    s.read("tq", c.points.t_dprime);
    s.read("p", c.points.p);
    s.read("q", c.points.q);
    s.read("v", c.points.v);
    s.finish();
  }
  if (top.has("measures")) {
    Section s(top.at("measures"), "measures");
    s.read("n", c.measures.n);
    s.read("center_prime", c.measures.center_prime);
    s.read("center_dprime", c.measures.center_dprime);
    s.read("radius", c.measures.radius);
    s.read("phi", c.measures.phi);
    s.read("checkpoints", c.measures.checkpoints);
    s.read("bootstrap", c.measures.bootstrap);
    s.read("tolerance_se", c.measures.tolerance_se);
    s.finish();
  }
  if (top.has("output")) {
    Section s(top.at("output"), "output");
    s.read("csv", c.output.csv);
    s.read("json", c.output.json);
    s.read("trajectory_dir", c.output.trajectory_dir);
    s.read("long_format", c.output.long_format);
    s.read("batch_input", c.output.batch_input);
    s.finish();
  }
  top.finish();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed config '" + path + "': " + e.what());
  }
  return config_from_json(j);
}

void validate_config(const ExperimentConfig& c) {
  auto fail = [](const std::string& msg) { throw ConfigError(msg); };
  if (c.flow.d < 2 || c.flow.d + 1 > kMaxAmbient) {
    fail("flow.d must be in [2, " + std::to_string(kMaxAmbient - 1) + "]");
  }
  if (!(c.flow.horizon > 0.0)) fail("flow.T must be positive");
  if (c.flow.model == Model::torus && !(c.flow.side > 0.0)) fail("flow.L must be positive");
  if (c.solver.steps < SpaceTimeCurve::kMinIntervals) fail("solver.N is too small");
  if (c.solver.multi_start < 1) fail("solver.multi_start must be >= 1");
  if (c.coupling.steps < SpaceTimeCurve::kMinIntervals) fail("coupling.N is too small");
  if (c.ensemble.threads && *c.ensemble.threads < 1) fail("ensemble.threads must be >= 1");

  const bool stochastic = c.kind == ExperimentKind::couple ||
                          c.kind == ExperimentKind::verify_supermartingale ||
                          c.kind == ExperimentKind::verify_monotonicity ||
                          c.kind == ExperimentKind::invariants;
  if (stochastic && !c.ensemble.master_seed) fail("a master seed is required for this experiment");

  const bool scheduled = c.kind == ExperimentKind::couple ||
                         c.kind == ExperimentKind::verify_supermartingale ||
                         c.kind == ExperimentKind::verify_monotonicity;
  if (scheduled) {
    const auto& s = c.schedule;
    if (!(s.epsilon > 0.0)) fail("schedule.epsilon must be positive");
    if (!(s.horizon >= 0.0)) fail("schedule.S must be >= 0");
    if (!(s.t1_prime < s.t1_dprime)) fail("schedule needs t1_prime < t1_dprime");
    if (s.t1_prime - s.horizon < -1e-12) fail("schedule leaves the flow: t1_prime - S < 0");
    if (s.t1_dprime > c.flow.horizon + 1e-12) fail("schedule leaves the flow: t1_dprime > T");
    if (s.horizon / (s.epsilon * s.epsilon) > static_cast<double>(s.max_steps)) {
      fail("schedule needs more than schedule.max_steps steps");
    }
    if (c.ensemble.n_paths < 1) fail("ensemble.n_paths must be >= 1");
  }
  if (c.kind == ExperimentKind::verify_monotonicity) {
    if (c.measures.n < 2) fail("measures.n must be >= 2");
    if (c.measures.checkpoints < 2) fail("measures.checkpoints must be >= 2");
    if (c.measures.bootstrap < 2) fail("measures.bootstrap must be >= 2");
    if (!(c.measures.radius >= 0.0)) fail("measures.radius must be >= 0");
  }
}

}  // namespace l0flow
