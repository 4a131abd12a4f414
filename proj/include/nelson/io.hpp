#pragma once

#include <nlohmann/json.hpp>

#include <map>
#include <string>
#include <vector>

#include "nelson/sde.hpp"
#include "nelson/verify.hpp"

namespace nelson {

/// Shortest decimal text that reads back to the same double ('.' decimal,
/// independent of the locale). Non-finite values print as nan/inf/-inf.
std::string format_double(double value);

/// Comma-separated table with a header row.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> columns);

  void add_row(const std::vector<double>& values);
  const std::vector<std::string>& columns() const { return columns_; }
  const std::vector<std::vector<double>>& rows() const { return rows_; }
  std::string str() const;
  /// Throws FormatError when the file cannot be written.
  void write(const std::string& path) const;

  /// Parses a numeric CSV with a header row. Throws FormatError on malformed
  /// input (missing header, ragged rows, non-numeric cells).
  static CsvTable read(const std::string& path);
  static CsvTable parse(const std::string& text, const std::string& origin = "<string>");

  /// Column by name; throws FormatError when absent.
  std::vector<double> column(const std::string& name) const;
  bool has_column(const std::string& name) const;

 private:
  std::vector<std::string> columns_;
  std::vector<std::vector<double>> rows_;
};

/// Estimate table: bin_center, count, estimate, stderr, target, pass.
CsvTable estimate_table(const ConditionalEstimate& est, const CheckResult* check = nullptr);

/// Ensemble as one CSV per component next to the JSON sidecar `path`
/// (e.g. ensemble.json -> ensemble_x.csv, ensemble_v.csv). Each CSV has a
/// header `t,traj0,traj1,...`; rows are stored times, columns trajectories.
/// Keeps every `thin`-th stored sample and at most `max_trajectories`
/// trajectories (0 = all). The sidecar records the grid, provenance and the
/// component file names so `read_ensemble` can rebuild the ensemble.
/// Returns the written paths (component files, then the sidecar).
std::vector<std::string> write_ensemble(const std::string& path, const Ensemble& ens,
                                        const std::vector<std::string>& component_names,
                                        std::size_t thin = 1, std::size_t max_trajectories = 0);
/// Reads an ensemble from its JSON sidecar.
Ensemble read_ensemble(const std::string& path);

nlohmann::json ensemble_meta_json(const Ensemble& ens);

/// Writes pretty JSON with a trailing newline.
void write_json(const std::string& path, const nlohmann::json& doc);

void write_text(const std::string& path, const std::string& text);

/// Version string baked in at build time (git describe).
std::string version_string();

}  // namespace nelson
