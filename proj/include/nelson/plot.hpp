#pragma once

#include <string>

#include "nelson/io.hpp"

namespace nelson {

struct PlotOptions {
  std::string title;
  std::string x_column = "bin_center";
  std::string x_label = "x";
  std::string y_label = "estimate";
  int width = 640;
  int height = 420;
};

/// Line-and-errorbar SVG of an estimate table: estimate polyline with
/// markers, a +-3 stderr band, and the target curve. Rows with zero count or
/// non-finite estimates are left out. Needs columns (x, estimate, stderr,
/// target); throws FormatError otherwise. Output is a pure function of the
/// table.
std::string render_plot(const CsvTable& table, const PlotOptions& options = {});

/// render_plot written to `path`.
void emit_plot(const CsvTable& table, const std::string& path, const PlotOptions& options = {});

}  // namespace nelson
