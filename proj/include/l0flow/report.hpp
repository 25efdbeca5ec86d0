#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "l0flow/coupling.hpp"
#include "l0flow/invariants.hpp"
#include "l0flow/ot_verify.hpp"
#include "l0flow/transport.hpp"

namespace l0flow {

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// 12 significant digits, "%.12g".
std::string format_number(double x);

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void add_row(std::vector<std::string> row);
  /// Header line plus one line per row, '\n' terminated.
  std::string to_csv() const;
};

/// Column names prefix_0 .. prefix_{n-1}.
std::vector<std::string> indexed_columns(const std::string& prefix, int n);
/// Appends formatted coordinates to a row.
void append_coords(std::vector<std::string>& row, const Vec& v);

Table distance_table(const std::vector<L0GeodesicResult>& results, int ambient);
Table geodesic_table(const MetricFamily& fam, const L0GeodesicResult& result);
/// s, X, Y, Lambda, multiplicity_hit for the stored positions; with
/// `path_column` a leading path index (long format).
Table trajectory_table(const std::vector<CouplingPath>& paths, int ambient, bool path_column);
Table supermartingale_table(const SupermartingaleReport& report);
Table monotonicity_table(const MonotonicityReport& report);
Table invariants_table(const InvariantReport& report);

nlohmann::ordered_json geodesic_json(const L0GeodesicResult& result);
nlohmann::ordered_json transport_json(const TransportMap& map, double norm_defect,
                                      double orthogonality_defect);
nlohmann::ordered_json supermartingale_json(const SupermartingaleReport& report);
nlohmann::ordered_json monotonicity_json(const MonotonicityReport& report);
nlohmann::ordered_json invariants_json(const InvariantReport& report);

/// Truncates and writes; throws IoError on failure.
void write_file(const std::string& path, const std::string& content);
std::string dump_json(const nlohmann::ordered_json& j);  // 2-space indent, trailing newline

}  // namespace l0flow
