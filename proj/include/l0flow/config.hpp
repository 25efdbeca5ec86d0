#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "l0flow/model_flows.hpp"
#include "l0flow/l0_geometry.hpp"

namespace l0flow {

struct ConfigError : DomainError {
  using DomainError::DomainError;
};

enum class ExperimentKind {
  distance_table,
  geodesic,
  transport_check,
  couple,
  verify_supermartingale,
  verify_monotonicity,
  invariants,
};

std::string_view kind_name(ExperimentKind kind);
std::string_view subcommand_name(ExperimentKind kind);
/// Accepts either the long kind name or the subcommand name.
ExperimentKind parse_kind(std::string_view text);

struct ScheduleConfig {
  double t1_prime = 0.15;
  double t1_dprime = 0.17;
  double horizon = 0.1;  // S
  double epsilon = 0.022360679774997897;  // sqrt(5e-4): 200 steps over S
  long max_steps = 10'000'000;
  bool operator==(const ScheduleConfig&) const = default;
};

struct CouplingConfig {
  int steps = 32;  // solver grid for the per-step solves
  double cut_fraction = 0.5;
  bool operator==(const CouplingConfig&) const = default;
};

struct EnsembleConfig {
  int n_paths = 1000;
  std::optional<std::uint64_t> master_seed;
  std::optional<int> threads;  // unset: L0FLOW_THREADS, then all cores
  bool operator==(const EnsembleConfig&) const = default;
};

/// Endpoints for distance, geodesic, transport and couple runs.
struct PointsConfig {
  double t_prime = 0.0;
  double t_dprime = 0.1;
  std::vector<double> p;
  std::vector<double> q;
  std::vector<double> v;  // tangent at p (transport); empty = whole frame
  bool operator==(const PointsConfig&) const = default;
};

/// Two n-point clouds for the monotonicity experiment: points at distance
/// radius * sqrt(U) from each centre in a uniform direction.
struct MeasuresConfig {
  int n = 256;
  std::vector<double> center_prime;
  std::vector<double> center_dprime;
  double radius = 0.3;
  std::string phi = "identity";
  int checkpoints = 10;
  int bootstrap = 50;
  double tolerance_se = 2.0;
  bool operator==(const MeasuresConfig&) const = default;
};

struct OutputConfig {
  std::string csv;
  std::string json;
  std::string trajectory_dir;  // one CSV per trajectory
  bool long_format = true;     // couple: one combined CSV in `csv`
  std::string batch_input;     // distance: CSV of endpoint rows
  bool operator==(const OutputConfig&) const = default;
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::distance_table;
  FlowSpec flow{Model::sphere, 2, 1.0, 0.2};
  ScheduleConfig schedule;
  SolverOptions solver;
  CouplingConfig coupling;
  EnsembleConfig ensemble;
  PointsConfig points;
  MeasuresConfig measures;
  OutputConfig output;
  bool operator==(const ExperimentConfig&) const = default;
};

nlohmann::ordered_json config_to_json(const ExperimentConfig& config);
/// Missing keys keep their defaults; unknown keys are rejected.
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);

/// Consistency checks that do not need a run: flow parameters, schedule
/// inside the flow's time interval, seeds for stochastic runs.
void validate_config(const ExperimentConfig& config);

}  // namespace l0flow
