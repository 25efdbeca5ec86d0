#include "l0flow/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include "l0flow/config.hpp"
#include "l0flow/coupling.hpp"
#include "l0flow/invariants.hpp"
#include "l0flow/ot_verify.hpp"
#include "l0flow/parallel.hpp"
#include "l0flow/report.hpp"
#include "l0flow/transport.hpp"

namespace l0flow {

namespace {

// Stream for the monotonicity input clouds, apart from the path streams.
constexpr std::uint64_t kCloudStream = 0xC10D'0000'0000'0001ULL;

// Command-line values; unset members leave the config untouched.
struct Overrides {
  std::string config_path;
  std::optional<std::string> model;
  std::optional<int> d;
  std::optional<double> side, horizon, tp, tq, t1p, t1q, S, eps;
  std::vector<double> p, q, v;
  std::optional<int> paths, threads, steps, multi_start, checkpoints, bootstrap, n;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> phi, csv, json, trajectory_dir, batch;
  std::optional<bool> long_format;
  bool dump_config = false;
};

void add_options(CLI::App& app, Overrides& o) {
  app.add_option("--config", o.config_path, "JSON experiment config");
  app.add_option("--model", o.model, "torus or sphere");
  app.add_option("--d", o.d, "manifold dimension");
  app.add_option("--L", o.side, "torus side length");
  app.add_option("--T", o.horizon, "flow horizon");
  app.add_option("--tp", o.tp, "start time t'");
  app.add_option("--tq", o.tq, "end time t''");
  app.add_option("--p", o.p, "start point, comma separated")->delimiter(',');
  app.add_option("--q", o.q, "end point, comma separated")->delimiter(',');
  app.add_option("--v", o.v, "tangent vector at p, comma separated")->delimiter(',');
  app.add_option("--t1p", o.t1p, "schedule t1'");
  app.add_option("--t1q", o.t1q, "schedule t1''");
  app.add_option("--S", o.S, "reversed-time horizon");
  app.add_option("--eps", o.eps, "walk step epsilon");
  app.add_option("--paths", o.paths, "number of trajectories");
  app.add_option("--seed", o.seed, "master seed");
  app.add_option("--threads", o.threads, "worker threads");
  app.add_option("--N", o.steps, "solver grid intervals");
  app.add_option("--multi-start", o.multi_start, "solver multi-start count");
  app.add_option("--n", o.n, "points per empirical measure");
  app.add_option("--checkpoints", o.checkpoints, "monotonicity checkpoints");
  app.add_option("--bootstrap", o.bootstrap, "bootstrap resamples");
  app.add_option("--phi", o.phi, "identity, capped:<c> or exp_saturating");
  app.add_option("--csv", o.csv, "CSV output path");
  app.add_option("--json", o.json, "JSON output path");
  app.add_option("--trajectory-dir", o.trajectory_dir, "one CSV per trajectory");
  app.add_option("--long-format", o.long_format, "couple: combined CSV with a path column");
  app.add_option("--batch", o.batch, "distance: CSV of t',t'',p..,q.. rows");
  app.add_flag("--dump-config", o.dump_config, "print the resolved config and exit");
}

template <class T>
void apply(const std::optional<T>& from, T& to) {
  if (from) to = *from;
}

ExperimentConfig resolve_config(ExperimentKind kind, const Overrides& o) {
  ExperimentConfig c;
  bool horizon_given = false;
  if (!o.config_path.empty()) {
    std::ifstream in(o.config_path);
    if (!in) throw ConfigError("cannot open config file '" + o.config_path + "'");
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("malformed config '" + o.config_path + "': " + e.what());
    }
    c = config_from_json(j);
    horizon_given = j.contains("flow") && j["flow"].is_object() && j["flow"].contains("T");
  }
  c.kind = kind;
  if (o.model) {
    try {
      c.flow.model = parse_model(*o.model);
    } catch (const DomainError& e) {
      throw ConfigError(e.what());
    }
  }
  apply(o.d, c.flow.d);
  apply(o.side, c.flow.side);
  apply(o.horizon, c.flow.horizon);
  horizon_given = horizon_given || o.horizon.has_value();
  apply(o.tp, c.points.t_prime);
  apply(o.tq, c.points.t_dprime);
  if (!o.p.empty()) c.points.p = o.p;
  if (!o.q.empty()) c.points.q = o.q;
  if (!o.v.empty()) c.points.v = o.v;
  apply(o.t1p, c.schedule.t1_prime);
  apply(o.t1q, c.schedule.t1_dprime);
  apply(o.S, c.schedule.horizon);
  apply(o.eps, c.schedule.epsilon);
  apply(o.paths, c.ensemble.n_paths);
  if (o.seed) c.ensemble.master_seed = *o.seed;
  if (o.threads) c.ensemble.threads = *o.threads;
  apply(o.steps, c.solver.steps);
  apply(o.multi_start, c.solver.multi_start);
  apply(o.n, c.measures.n);
  apply(o.checkpoints, c.measures.checkpoints);
  apply(o.bootstrap, c.measures.bootstrap);
  apply(o.phi, c.measures.phi);
  apply(o.csv, c.output.csv);
  apply(o.json, c.output.json);
  apply(o.trajectory_dir, c.output.trajectory_dir);
  apply(o.long_format, c.output.long_format);
  apply(o.batch, c.output.batch_input);
  // The torus metric is static: without an explicit horizon, stretch it
  // to cover every requested time.
  if (c.flow.model == Model::torus && !horizon_given) {
    c.flow.horizon = std::max({c.flow.horizon, 1.0, c.points.t_dprime, c.schedule.t1_dprime});
  }
  validate_config(c);
  return c;
}

Point point_from(const MetricFamily& fam, const std::vector<double>& coords, const char* what) {
  if (coords.empty()) throw ConfigError(std::string("missing point '") + what + "'");
  if (static_cast<int>(coords.size()) != fam.ambient_dim()) {
    throw ConfigError(std::string("point '") + what + "' needs " + std::to_string(fam.ambient_dim()) +
                      " coordinates");
  }
  const Vec x = Eigen::Map<const Vec>(coords.data(), static_cast<Eigen::Index>(coords.size()));
  if (fam.model() == Model::sphere && std::abs(x.norm() - 1.0) > 1e-6) {
    throw ConfigError(std::string("point '") + what + "' is not on the unit sphere");
  }
  return fam.make_point(fam.model() == Model::sphere ? Vec(x / x.norm()) : x);
}

TimeSchedule schedule_from(const MetricFamily& fam, const ExperimentConfig& c) {
  const auto& s = c.schedule;
  return TimeSchedule::make(fam, s.t1_prime, s.t1_dprime, s.horizon, s.epsilon, s.max_steps);
}

void emit(const std::string& path, const std::string& content) {
  if (!path.empty()) write_file(path, content);
}

std::vector<double> parse_row(const std::string& line) {
  std::vector<double> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    std::size_t used = 0;
    const double x = std::stod(cell, &used);
    if (cell.find_first_not_of(" \t\r", used) != std::string::npos) throw std::invalid_argument(cell);
    out.push_back(x);
  }
  return out;
}

int run_distance(const ExperimentConfig& c, const MetricFamily& fam, std::ostream& out) {
  SolverOptions solver = c.solver;
  solver.record_curve = false;
  std::vector<L0GeodesicResult> results;
  if (!c.output.batch_input.empty()) {
    std::ifstream in(c.output.batch_input);
    if (!in) throw IoError("cannot open batch input '" + c.output.batch_input + "'");
    const int a = fam.ambient_dim();
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      std::vector<double> row;
      try {
        row = parse_row(line);
      } catch (const std::exception&) {
        if (lineno == 1) continue;  // header
        throw ConfigError("batch line " + std::to_string(lineno) + " is not numeric");
      }
      if (static_cast<int>(row.size()) != 2 + 2 * a) {
        throw ConfigError("batch line " + std::to_string(lineno) + " needs " +
                          std::to_string(2 + 2 * a) + " columns");
      }
      const Point p = point_from(fam, {row.begin() + 2, row.begin() + 2 + a}, "p");
      const Point q = point_from(fam, {row.begin() + 2 + a, row.end()}, "q");
      results.push_back(l0_distance(fam, row[0], row[1], p, q, solver));
    }
    const std::string csv = distance_table(results, a).to_csv();
    if (c.output.csv.empty()) {
      out << csv;
    } else {
      write_file(c.output.csv, csv);
    }
  } else {
    const Point p = point_from(fam, c.points.p, "p");
    const Point q = point_from(fam, c.points.q, "q");
    results.push_back(l0_distance(fam, c.points.t_prime, c.points.t_dprime, p, q, solver));
    emit(c.output.csv, distance_table(results, fam.ambient_dim()).to_csv());
    if (!c.output.json.empty()) write_file(c.output.json, dump_json(geodesic_json(results[0])));
    out << format_number(results[0].action) << "\n";
  }
  for (const auto& r : results) {
    if (!r.converged) throw SolverError("geodesic solver did not converge");
  }
  return kExitOk;
}

int run_geodesic(const ExperimentConfig& c, const MetricFamily& fam, std::ostream& out) {
  const Point p = point_from(fam, c.points.p, "p");
  const Point q = point_from(fam, c.points.q, "q");
  SolverOptions solver = c.solver;
  solver.record_curve = true;
  const auto r = l0_distance(fam, c.points.t_prime, c.points.t_dprime, p, q, solver);
  if (!r.converged) throw SolverError("geodesic solver did not converge");
  emit(c.output.csv, geodesic_table(fam, r).to_csv());
  emit(c.output.json, dump_json(geodesic_json(r)));
  out << "L0=" << format_number(r.action) << " residual=" << format_number(r.residual)
      << " multiplicity=" << (r.multiplicity_flag ? 1 : 0) << "\n";
  return kExitOk;
}

int run_transport(const ExperimentConfig& c, const MetricFamily& fam, std::ostream& out) {
  const Point p = point_from(fam, c.points.p, "p");
  const Point q = point_from(fam, c.points.q, "q");
  SolverOptions solver = c.solver;
  solver.record_curve = true;
  const double tp = c.points.t_prime;
  const double tq = c.points.t_dprime;
  const auto r = l0_distance(fam, tp, tq, p, q, solver);
  if (!r.converged) throw SolverError("geodesic solver did not converge");
  const auto map = transport_matrix(fam, r);
  const Eigen::MatrixXd gram = map.matrix.transpose() * map.matrix;
  const double orth = (gram - Eigen::MatrixXd::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff();

  std::vector<TangentVec> inputs;
  if (!c.points.v.empty()) {
    if (static_cast<int>(c.points.v.size()) != fam.ambient_dim()) {
      throw ConfigError("vector 'v' needs " + std::to_string(fam.ambient_dim()) + " components");
    }
    inputs.push_back(fam.make_tangent(
        p, Eigen::Map<const Vec>(c.points.v.data(), static_cast<Eigen::Index>(c.points.v.size()))));
  } else {
    const Mat frame = orthonormal_frame(fam, tp, p);
    for (Eigen::Index k = 0; k < frame.cols(); ++k) inputs.push_back(TangentVec{p, frame.col(k)});
  }
  Table table;
  table.header = indexed_columns("v", fam.ambient_dim());
  for (const auto& name : indexed_columns("w", fam.ambient_dim())) table.header.push_back(name);
  table.header.push_back("norm_defect");
  double norm_defect = 0.0;
  for (const auto& v : inputs) {
    const TangentVec w = spacetime_transport(fam, r, v);
    const double defect = std::abs(metric_norm(fam, tq, w) - metric_norm(fam, tp, v));
    norm_defect = std::max(norm_defect, defect);
    std::vector<std::string> row;
    append_coords(row, v.components);
    append_coords(row, w.components);
    row.push_back(format_number(defect));
    table.add_row(std::move(row));
  }
  emit(c.output.csv, table.to_csv());
  emit(c.output.json, dump_json(transport_json(map, norm_defect, orth)));
  out << "norm_defect=" << format_number(norm_defect) << " orthogonality_defect=" << format_number(orth)
      << "\n";
  return kExitOk;
}

CouplingOptions coupling_options(const ExperimentConfig& c) {
  CouplingOptions o;
  o.solver.steps = c.coupling.steps;
  o.solver.multi_start = c.solver.multi_start;
  o.solver.tol_action = c.solver.tol_action;
  o.solver.tol_sep = c.solver.tol_sep;
  o.solver.tol_residual = c.solver.tol_residual;
  o.solver.max_iterations = c.solver.max_iterations;
  o.solver.direct_max_iterations = c.solver.direct_max_iterations;
  o.solver.direct_stage = c.solver.direct_stage;
  o.cut_fraction = c.coupling.cut_fraction;
  return o;
}

int run_couple(const ExperimentConfig& c, const MetricFamily& fam, std::ostream& out) {
  const auto sch = schedule_from(fam, c);
  const Point p = point_from(fam, c.points.p, "p");
  const Point q = point_from(fam, c.points.q, "q");
  CouplingOptions opts = coupling_options(c);
  opts.record_positions = !c.output.csv.empty() || !c.output.trajectory_dir.empty();
  const int threads = resolve_threads(c.ensemble.threads);
  const auto paths =
      run_ensemble(fam, sch, {{p, q}}, *c.ensemble.master_seed, c.ensemble.n_paths, opts, threads);
  const int a = fam.ambient_dim();
  if (!c.output.csv.empty()) {
    write_file(c.output.csv, trajectory_table(paths, a, c.output.long_format).to_csv());
  }
  if (!c.output.trajectory_dir.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(c.output.trajectory_dir, ec);
    if (ec) throw IoError("cannot create '" + c.output.trajectory_dir + "': " + ec.message());
    for (const auto& path : paths) {
      const auto file = std::filesystem::path(c.output.trajectory_dir) /
                        ("path_" + std::to_string(path.stream_id) + ".csv");
      write_file(file.string(), trajectory_table({path}, a, false).to_csv());
    }
  }
  double first = 0.0, last = 0.0;
  int hits = 0;
  for (const auto& path : paths) {
    first += path.lambda.front();
    last += path.lambda.back();
    hits += path.multiplicity_hits;
  }
  const double n = static_cast<double>(paths.size());
  if (!c.output.json.empty()) {
    nlohmann::ordered_json j;
    j["paths"] = paths.size();
    j["steps"] = sch.step_count();
    j["mean_lambda_initial"] = first / n;
    j["mean_lambda_final"] = last / n;
    j["multiplicity_hits"] = hits;
    write_file(c.output.json, dump_json(j));
  }
  out << "paths=" << paths.size() << " steps=" << sch.step_count()
      << " mean_lambda_initial=" << format_number(first / n)
      << " mean_lambda_final=" << format_number(last / n) << " multiplicity_hits=" << hits << "\n";
  return kExitOk;
}

int run_verify_sm(const ExperimentConfig& c, const MetricFamily& fam, std::ostream& out) {
  const auto sch = schedule_from(fam, c);
  const Point p = point_from(fam, c.points.p, "p");
  const Point q = point_from(fam, c.points.q, "q");
  CouplingOptions opts = coupling_options(c);
  opts.record_positions = false;
  const int threads = resolve_threads(c.ensemble.threads);
  const auto paths =
      run_ensemble(fam, sch, {{p, q}}, *c.ensemble.master_seed, c.ensemble.n_paths, opts, threads);
  const auto rep = supermartingale_test(paths);
  emit(c.output.csv, supermartingale_table(rep).to_csv());
  emit(c.output.json, dump_json(supermartingale_json(rep)));
  out << "paths=" << rep.paths << " steps=" << rep.steps
      << " pooled_mean=" << format_number(rep.pooled_mean)
      << " upper99=" << format_number(rep.upper99) << " p_value=" << format_number(rep.p_value)
      << " rejected=" << (rep.rejected ? 1 : 0) << "\n";
  return rep.rejected ? kExitViolation : kExitOk;
}

int run_verify_mono(const ExperimentConfig& c, const MetricFamily& fam, std::ostream& out) {
  const auto sch = schedule_from(fam, c);
  const auto& m = c.measures;
  const Point cp = point_from(fam, m.center_prime, "center_prime");
  const Point cq = point_from(fam, m.center_dprime, "center_dprime");
  PhiSpec phi;
  try {
    phi = PhiSpec::parse(m.phi);
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  }
  RngStream rng(*c.ensemble.master_seed, kCloudStream);
  const auto xs = sample_cloud(fam, cp, m.radius, m.n, rng);
  const auto ys = sample_cloud(fam, cq, m.radius, m.n, rng);
  const int threads = resolve_threads(c.ensemble.threads);

  MonotonicityOptions opts;
  opts.checkpoints = m.checkpoints;
  opts.bootstrap = m.bootstrap;
  opts.tolerance_se = m.tolerance_se;
  opts.coupling = coupling_options(c);
  opts.solver = c.solver;
  opts.solver.record_curve = false;
  opts.threads = threads;
  const auto [pairs, plan] = optimal_pairs(fam, sch, xs, ys, phi, opts.solver, threads);
  const auto rep = monotonicity_experiment(fam, sch, pairs, phi, *c.ensemble.master_seed, opts);
  emit(c.output.csv, monotonicity_table(rep).to_csv());
  emit(c.output.json, dump_json(monotonicity_json(rep)));
  out << "phi=" << phi.to_string() << " n=" << rep.n << " checkpoints=" << rep.rows.size()
      << " max_increment_se=" << format_number(rep.max_increment_se)
      << " violation=" << (rep.violation ? 1 : 0) << "\n";
  return rep.violation ? kExitViolation : kExitOk;
}

int run_invariant_suite(const ExperimentConfig& c, const MetricFamily& fam, std::ostream& out) {
  InvariantOptions opts;
  opts.solver = c.solver;
  const auto rep = run_invariants(fam, *c.ensemble.master_seed, opts);
  emit(c.output.csv, invariants_table(rep).to_csv());
  emit(c.output.json, dump_json(invariants_json(rep)));
  int failed = 0;
  for (const auto& check : rep.checks) failed += check.passed ? 0 : 1;
  out << "checks=" << rep.checks.size() << " failed=" << failed << "\n";
  return rep.all_passed() ? kExitOk : kExitViolation;
}

int dispatch(const ExperimentConfig& c, std::ostream& out) {
  const MetricFamily fam = make_flow(c.flow);
  switch (c.kind) {
    case ExperimentKind::distance_table:
      return run_distance(c, fam, out);
    case ExperimentKind::geodesic:
      return run_geodesic(c, fam, out);
    case ExperimentKind::transport_check:
      return run_transport(c, fam, out);
    case ExperimentKind::couple:
      return run_couple(c, fam, out);
    case ExperimentKind::verify_supermartingale:
      return run_verify_sm(c, fam, out);
    case ExperimentKind::verify_monotonicity:
      return run_verify_mono(c, fam, out);
    case ExperimentKind::invariants:
      return run_invariant_suite(c, fam, out);
  }
  return kExitConfig;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Numerical experiments for L0 geometry under Ricci flow", "l0flow"};
  app.require_subcommand(1);
  app.fallthrough();
  Overrides o;
  add_options(app, o);
  std::map<CLI::App*, ExperimentKind> kinds;
  for (auto kind : {ExperimentKind::distance_table, ExperimentKind::geodesic,
                    ExperimentKind::transport_check, ExperimentKind::couple,
                    ExperimentKind::verify_supermartingale, ExperimentKind::verify_monotonicity,
                    ExperimentKind::invariants}) {
    auto* sub = app.add_subcommand(std::string(subcommand_name(kind)), std::string(kind_name(kind)));
    kinds[sub] = kind;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }

  try {
    ExperimentKind kind = ExperimentKind::distance_table;
    for (auto* sub : app.get_subcommands()) kind = kinds.at(sub);
    const ExperimentConfig config = resolve_config(kind, o);
    if (o.dump_config) {
      out << dump_json(config_to_json(config));
      return kExitOk;
    }
    return dispatch(config, out);
  } catch (const SolverError& e) {
    err << "solver error: " << e.what() << "\n";
    return kExitSolver;
  } catch (const DomainError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitSolver;
  }
}

}  // namespace l0flow
