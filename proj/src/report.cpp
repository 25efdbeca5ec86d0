#include "l0flow/report.hpp"

#include <cstdio>
#include <fstream>

namespace l0flow {

std::string format_number(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

void Table::add_row(std::vector<std::string> row) {
  if (row.size() != header.size()) throw std::logic_error("table row width differs from header");
  rows.push_back(std::move(row));
}

std::string Table::to_csv() const {
  std::string out;
  auto line = [&out](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out += ',';
      out += cells[i];
    }
    out += '\n';
  };
  line(header);
  for (const auto& r : rows) line(r);
  return out;
}

std::vector<std::string> indexed_columns(const std::string& prefix, int n) {
  std::vector<std::string> cols;
  for (int i = 0; i < n; ++i) cols.push_back(prefix + "_" + std::to_string(i));
  return cols;
}

void append_coords(std::vector<std::string>& row, const Vec& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) row.push_back(format_number(v[i]));
}

namespace {

std::vector<std::string> concat(std::initializer_list<std::vector<std::string>> parts) {
  std::vector<std::string> out;
  for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

nlohmann::ordered_json vec_json(const Vec& v) {
  auto j = nlohmann::ordered_json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(v[i]);
  return j;
}

}  // namespace

Table distance_table(const std::vector<L0GeodesicResult>& results, int ambient) {
  Table t;
  t.header = concat({{"t_prime", "t_dprime"},
                     indexed_columns("p", ambient),
                     indexed_columns("q", ambient),
                     {"action"},
                     indexed_columns("v0", ambient),
                     {"converged", "multiplicity_flag", "residual", "upper_bound"}});
  for (const auto& r : results) {
    std::vector<std::string> row{format_number(r.t_prime), format_number(r.t_dprime)};
    append_coords(row, r.start.coords);
    append_coords(row, r.end.coords);
    row.push_back(format_number(r.action));
    append_coords(row, r.v0.components);
    row.push_back(r.converged ? "1" : "0");
    row.push_back(r.multiplicity_flag ? "1" : "0");
    row.push_back(format_number(r.residual));
    row.push_back(format_number(r.upper_bound));
    t.add_row(std::move(row));
  }
  return t;
}

Table geodesic_table(const MetricFamily& fam, const L0GeodesicResult& result) {
  const int ambient = fam.ambient_dim();
  Table t;
  t.header = concat({{"t"}, indexed_columns("x", ambient), {"speed"}});
  const auto& times = result.curve.times();
  const auto& pts = result.curve.points();
  const auto& vel = result.curve.velocities();
  for (std::size_t k = 0; k < pts.size(); ++k) {
    std::vector<std::string> row{format_number(times[k])};
    append_coords(row, pts[k].coords);
    // Difference speed of the interval starting here; the last point
    // reports the exact end velocity.
    double speed = 0.0;
    if (k < vel.size()) {
      speed = std::sqrt(fam.conformal_factor(times[k])) * vel[k].components.norm();
    } else {
      speed = std::sqrt(fam.conformal_factor(times[k])) * result.v_end.components.norm();
    }
    row.push_back(format_number(speed));
    t.add_row(std::move(row));
  }
  return t;
}

Table trajectory_table(const std::vector<CouplingPath>& paths, int ambient, bool path_column) {
  Table t;
  t.header = concat({path_column ? std::vector<std::string>{"path"} : std::vector<std::string>{},
                     {"s"},
                     indexed_columns("x", ambient),
                     indexed_columns("y", ambient),
                     {"lambda", "multiplicity_hit"}});
  for (const auto& p : paths) {
    for (std::size_t i = 0; i < p.position_index.size(); ++i) {
      const auto k = static_cast<std::size_t>(p.position_index[i]);
      if (k >= p.lambda.size()) continue;
      std::vector<std::string> row;
      if (path_column) row.push_back(std::to_string(p.stream_id));
      row.push_back(format_number(p.s[k]));
      append_coords(row, p.x[i].coords);
      append_coords(row, p.y[i].coords);
      row.push_back(format_number(p.lambda[k]));
      row.push_back(p.multiplicity_hit[k] ? "1" : "0");
      t.add_row(std::move(row));
    }
  }
  return t;
}

Table supermartingale_table(const SupermartingaleReport& report) {
  Table t;
  t.header = {"s", "mean", "stderr", "upper99"};
  for (const auto& st : report.per_step) {
    t.add_row({format_number(st.s), format_number(st.mean), format_number(st.std_error),
               format_number(st.upper99)});
  }
  return t;
}

Table monotonicity_table(const MonotonicityReport& report) {
  Table t;
  t.header = {"s",         "cost",          "stderr",          "flag",
              "increment", "increment_stderr", "identity_cost", "identity_stderr",
              "identity_flag", "bound_holds"};
  for (const auto& r : report.rows) {
    t.add_row({format_number(r.s), format_number(r.cost), format_number(r.std_error),
               r.flag ? "1" : "0", format_number(r.increment), format_number(r.increment_std_error),
               format_number(r.identity_cost), format_number(r.identity_std_error),
               r.identity_flag ? "1" : "0", r.bound_holds ? "1" : "0"});
  }
  return t;
}

Table invariants_table(const InvariantReport& report) {
  Table t;
  t.header = {"check", "passed", "worst", "tolerance", "samples"};
  for (const auto& c : report.checks) {
    t.add_row({c.name, c.passed ? "1" : "0", format_number(c.worst), format_number(c.tolerance),
               std::to_string(c.samples)});
  }
  return t;
}

nlohmann::ordered_json geodesic_json(const L0GeodesicResult& r) {
  nlohmann::ordered_json j;
  j["t_prime"] = r.t_prime;
  j["t_dprime"] = r.t_dprime;
  j["start"] = vec_json(r.start.coords);
  j["end"] = vec_json(r.end.coords);
  j["action"] = r.action;
  j["v0"] = vec_json(r.v0.components);
  j["v_end"] = vec_json(r.v_end.components);
  j["upper_bound"] = r.upper_bound;
  j["direct_action"] = r.direct_action ? nlohmann::ordered_json(*r.direct_action) : nlohmann::ordered_json(nullptr);
  j["converged"] = r.converged;
  j["multiplicity_flag"] = r.multiplicity_flag;
  j["residual"] = r.residual;
  j["candidates"] = r.candidates;
  j["steps"] = r.steps;
  return j;
}

nlohmann::ordered_json transport_json(const TransportMap& map, double norm_defect,
                                      double orthogonality_defect) {
  nlohmann::ordered_json j;
  j["t_prime"] = map.t_prime;
  j["t_dprime"] = map.t_dprime;
  j["source"] = vec_json(map.source.coords);
  j["target"] = vec_json(map.target.coords);
  auto rows = nlohmann::ordered_json::array();
  for (Eigen::Index i = 0; i < map.matrix.rows(); ++i) {
    auto row = nlohmann::ordered_json::array();
    for (Eigen::Index k = 0; k < map.matrix.cols(); ++k) row.push_back(map.matrix(i, k));
    rows.push_back(row);
  }
  j["matrix"] = rows;
  j["norm_defect"] = norm_defect;
  j["orthogonality_defect"] = orthogonality_defect;
  return j;
}

nlohmann::ordered_json supermartingale_json(const SupermartingaleReport& r) {
  nlohmann::ordered_json j;
  j["paths"] = r.paths;
  j["steps"] = r.steps;
  j["pooled_mean"] = r.pooled_mean;
  j["pooled_stderr"] = r.pooled_std_error;
  j["z"] = std::isfinite(r.z) ? nlohmann::ordered_json(r.z)
                              : nlohmann::ordered_json(r.z > 0 ? "inf" : "-inf");
  j["p_value"] = r.p_value;
  j["upper99"] = r.upper99;
  j["rejected"] = r.rejected;
  j["fraction_upper_below_zero"] = r.fraction_upper_below_zero;
  j["fraction_upper_above_zero"] = r.fraction_upper_above_zero;
  auto steps = nlohmann::ordered_json::array();
  for (const auto& st : r.per_step) {
    steps.push_back({{"s", st.s}, {"mean", st.mean}, {"stderr", st.std_error}, {"upper99", st.upper99}});
  }
  j["per_step"] = steps;
  return j;
}

nlohmann::ordered_json monotonicity_json(const MonotonicityReport& r) {
  nlohmann::ordered_json j;
  j["phi"] = r.phi.to_string();
  j["n"] = r.n;
  j["max_increment_se"] = r.max_increment_se;
  j["identity_max_increment_se"] = r.identity_max_increment_se;
  j["violation"] = r.violation;
  j["initial_plan_cost"] = r.initial_plan_cost;
  j["bookkeeping_defect"] = r.bookkeeping_defect;
  auto rows = nlohmann::ordered_json::array();
  for (const auto& row : r.rows) {
    rows.push_back({{"s", row.s},
                    {"step", row.step},
                    {"cost", row.cost},
                    {"stderr", row.std_error},
                    {"increment", row.increment},
                    {"increment_stderr", row.increment_std_error},
                    {"flag", row.flag},
                    {"identity_cost", row.identity_cost},
                    {"identity_stderr", row.identity_std_error},
                    {"identity_flag", row.identity_flag},
                    {"bound_holds", row.bound_holds}});
  }
  j["checkpoints"] = rows;
  return j;
}

nlohmann::ordered_json invariants_json(const InvariantReport& r) {
  nlohmann::ordered_json j;
  j["model"] = model_name(r.model);
  j["d"] = r.d;
  j["seed"] = r.seed;
  j["all_passed"] = r.all_passed();
  auto checks = nlohmann::ordered_json::array();
  for (const auto& c : r.checks) {
    checks.push_back({{"name", c.name},
                      {"passed", c.passed},
                      {"worst", c.worst},
                      {"tolerance", c.tolerance},
                      {"samples", c.samples},
                      {"detail", c.detail}});
  }
  j["checks"] = checks;
  return j;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << content;
  out.flush();
  if (!out) throw IoError("failed writing '" + path + "'");
}

std::string dump_json(const nlohmann::ordered_json& j) { return j.dump(2) + "\n"; }

}  // namespace l0flow
