#include "nelson/io.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "nelson/errors.hpp"

#ifndef NELSON_VERSION
#define NELSON_VERSION "unknown"
#endif

namespace nelson {

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buffer[64];
  const auto result = std::to_chars(buffer, buffer + sizeof buffer, value);
  return std::string(buffer, result.ptr);
}

namespace {

double parse_double(const std::string& cell, const std::string& where) {
  if (cell == "nan") return std::nan("");
  if (cell == "inf") return INFINITY;
  if (cell == "-inf") return -INFINITY;
  double value = 0;
  const char* first = cell.data();
  const char* last = first + cell.size();
  if (!cell.empty() && *first == '+') ++first;
  const auto result = std::from_chars(first, last, value);
  if (result.ec != std::errc() || result.ptr != last)
    throw FormatError(where + ": '" + cell + "' is not a number");
  return value;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    cells.push_back(b == std::string::npos ? "" : cell.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

void ensure_parent(const std::string& path) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
}

}  // namespace

CsvTable::CsvTable(std::vector<std::string> columns) : columns_(std::move(columns)) {
  if (columns_.empty()) throw FormatError("a table needs at least one column");
}

void CsvTable::add_row(const std::vector<double>& values) {
  if (values.size() != columns_.size())
    throw FormatError("row has " + std::to_string(values.size()) + " cells, expected " +
                      std::to_string(columns_.size()));
  rows_.push_back(values);
}

std::string CsvTable::str() const {
  std::string out;
  for (std::size_t c = 0; c < columns_.size(); ++c) {
    if (c) out += ',';
    out += columns_[c];
  }
  out += '\n';
  for (const auto& row : rows_) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out += ',';
      out += format_double(row[c]);
    }
    out += '\n';
  }
  return out;
}

void CsvTable::write(const std::string& path) const { write_text(path, str()); }

CsvTable CsvTable::read(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str(), path);
}

CsvTable CsvTable::parse(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    header = split(line);
    break;
  }
  if (header.empty()) throw FormatError(origin + ": missing header row");
  for (const auto& name : header)
    if (name.empty()) throw FormatError(origin + ": empty column name in header");
  CsvTable table(header);
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto cells = split(line);
    const std::string where = origin + ":" + std::to_string(line_no);
    if (cells.size() != header.size())
      throw FormatError(where + ": expected " + std::to_string(header.size()) + " cells, got " +
                        std::to_string(cells.size()));
    std::vector<double> row;
    row.reserve(cells.size());
    for (const auto& cell : cells) row.push_back(parse_double(cell, where));
    table.rows_.push_back(std::move(row));
  }
  return table;
}

bool CsvTable::has_column(const std::string& name) const {
  return std::find(columns_.begin(), columns_.end(), name) != columns_.end();
}

std::vector<double> CsvTable::column(const std::string& name) const {
  const auto it = std::find(columns_.begin(), columns_.end(), name);
  if (it == columns_.end()) throw FormatError("table has no column '" + name + "'");
  const auto c = static_cast<std::size_t>(it - columns_.begin());
  std::vector<double> out;
  out.reserve(rows_.size());
  for (const auto& row : rows_) out.push_back(row[c]);
  return out;
}

CsvTable estimate_table(const ConditionalEstimate& est, const CheckResult* check) {
  CsvTable table({"bin_center", "count", "estimate", "stderr", "target", "pass"});
  for (std::size_t b = 0; b < est.bins(); ++b) {
    const double target = b < est.target.size() ? est.target[b] : std::nan("");
    const double pass = check && b < check->bin_pass.size() && check->bin_pass[b] ? 1.0 : 0.0;
    table.add_row({est.centers[b], static_cast<double>(est.counts[b]), est.mean[b], est.std_error[b],
                   target, pass});
  }
  return table;
}

nlohmann::json ensemble_meta_json(const Ensemble& ens) {
  const auto& meta = ens.meta();
  nlohmann::json params = nlohmann::json::object();
  for (const auto& [k, v] : meta.parameters) params[k] = v;
  return {{"schema", 1},
          {"model", meta.model},
          {"integrator", meta.integrator},
          {"seed", meta.seed},
          {"dimension", ens.dimension()},
          {"trajectories", ens.size()},
          {"samples", ens.samples()},
          {"t0", ens.t0()},
          {"dt", ens.dt()},
          {"steps", ens.steps()},
          {"stride", ens.stride()},
          {"parameters", params},
          {"version", version_string()}};
}

namespace {

std::filesystem::path component_file(const std::filesystem::path& meta_path, const std::string& name) {
  return meta_path.parent_path() / (meta_path.stem().string() + "_" + name + ".csv");
}

}  // namespace

std::vector<std::string> write_ensemble(const std::string& path, const Ensemble& ens,
                                        const std::vector<std::string>& names, std::size_t thin,
                                        std::size_t max_trajectories) {
  if (thin == 0) throw ParameterError("thinning factor must be positive");
  if (static_cast<int>(names.size()) != ens.dimension())
    throw ParameterError("need one column name per component");
  const std::size_t n = max_trajectories ? std::min(max_trajectories, ens.size()) : ens.size();
  std::size_t kept = 0;
  for (std::size_t k = 0; k < ens.samples(); k += thin) ++kept;

  std::vector<std::string> written;
  nlohmann::json files = nlohmann::json::object();
  for (int c = 0; c < ens.dimension(); ++c) {
    const auto name = names[static_cast<std::size_t>(c)];
    const auto file = component_file(path, name);
    ensure_parent(file.string());
    std::ofstream out(file, std::ios::binary);
    if (!out) throw FormatError("cannot write " + file.string());
    out << 't';
    for (std::size_t i = 0; i < n; ++i) out << ",traj" << i;
    out << '\n';
    for (std::size_t k = 0; k < ens.samples(); k += thin) {
      out << format_double(ens.time(k));
      for (std::size_t i = 0; i < n; ++i) out << ',' << format_double(ens.at(i, k, c));
      out << '\n';
    }
    if (!out) throw FormatError("failed while writing " + file.string());
    files[name] = file.filename().string();
    written.push_back(file.string());
  }

  auto meta = ensemble_meta_json(ens);
  meta["trajectories"] = n;
  meta["samples"] = kept;
  meta["stride"] = ens.stride() * thin;
  meta["components"] = names;
  meta["files"] = files;
  write_json(path, meta);
  written.push_back(path);
  return written;
}

Ensemble read_ensemble(const std::string& path) {
  std::ifstream meta_in(path);
  if (!meta_in) throw FormatError("missing ensemble metadata " + path);
  nlohmann::json meta;
  try {
    meta_in >> meta;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path + ": " + e.what());
  }
  try {
    const int dim = meta.at("dimension").get<int>();
    const auto n = meta.at("trajectories").get<std::size_t>();
    const auto samples = meta.at("samples").get<std::size_t>();
    const auto names = meta.at("components").get<std::vector<std::string>>();
    if (static_cast<int>(names.size()) != dim)
      throw FormatError(path + ": component list does not match the dimension");
    EnsembleMeta em;
    em.seed = meta.at("seed").get<std::uint64_t>();
    em.model = meta.at("model").get<std::string>();
    em.integrator = meta.at("integrator").get<std::string>();
    em.stride = meta.at("stride").get<std::size_t>();
    for (const auto& [k, v] : meta.at("parameters").items()) em.parameters[k] = v.get<double>();
    Ensemble ens(dim, n, samples, meta.at("t0").get<double>(), meta.at("dt").get<double>(),
                 meta.at("steps").get<std::size_t>(), em);
    const std::filesystem::path base = std::filesystem::path(path).parent_path();
    for (int c = 0; c < dim; ++c) {
      const auto& name = names[static_cast<std::size_t>(c)];
      const auto file = (base / meta.at("files").at(name).get<std::string>()).string();
      const auto table = CsvTable::read(file);
      if (table.rows().size() != samples || table.columns().size() != n + 1)
        throw FormatError(file + ": table shape does not match its metadata");
      for (std::size_t k = 0; k < samples; ++k)
        for (std::size_t i = 0; i < n; ++i)
          ens.component(c)(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) =
              table.rows()[k][i + 1];
    }
    return ens;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path + ": " + e.what());
  }
}

void write_json(const std::string& path, const nlohmann::json& doc) {
  write_text(path, doc.dump(2) + "\n");
}

void write_text(const std::string& path, const std::string& text) {
  ensure_parent(path);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path);
  out << text;
  if (!out) throw FormatError("failed while writing " + path);
}

std::string version_string() { return NELSON_VERSION; }

}  // namespace nelson
