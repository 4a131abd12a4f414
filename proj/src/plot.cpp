#include "nelson/plot.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>

#include "nelson/errors.hpp"

namespace nelson {

namespace {

std::string fixed(double v, int precision = 2) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, precision);
  return std::string(buf, r.ptr);
}

std::string tick_label(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 4);
  return std::string(buf, r.ptr);
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void add(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void pad() {
    if (!(lo <= hi)) lo = 0, hi = 1;
    if (hi - lo < 1e-300) {
      const double s = std::max(std::abs(lo), 1.0) * 0.05;
      lo -= s;
      hi += s;
    }
    const double margin = 0.05 * (hi - lo);
    lo -= margin;
    hi += margin;
  }
};

}  // namespace

std::string render_plot(const CsvTable& table, const PlotOptions& options) {
  const auto x = table.column(options.x_column);
  const auto est = table.column("estimate");
  const auto se = table.column("stderr");
  const auto target = table.column("target");
  const bool has_count = table.has_column("count");
  const auto count = has_count ? table.column("count") : std::vector<double>(x.size(), 1.0);

  struct Row {
    double x, y, se, target;
  };
  std::vector<Row> rows;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(count[i] > 0) || !std::isfinite(est[i]) || !std::isfinite(x[i])) continue;
    rows.push_back({x[i], est[i], std::isfinite(se[i]) ? se[i] : 0.0, target[i]});
  }

  Range xr, yr;
  for (const auto& r : rows) {
    xr.add(r.x);
    yr.add(r.y - 3 * r.se);
    yr.add(r.y + 3 * r.se);
    yr.add(r.target);
  }
  xr.pad();
  yr.pad();

  const double left = 70, right = 20, top = 40, bottom = 50;
  const double W = options.width, H = options.height;
  const double pw = W - left - right, ph = H - top - bottom;
  const auto sx = [&](double v) { return left + (v - xr.lo) / (xr.hi - xr.lo) * pw; };
  const auto sy = [&](double v) { return top + (yr.hi - v) / (yr.hi - yr.lo) * ph; };

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fixed(W, 0) + "\" height=\"" +
         fixed(H, 0) + "\" viewBox=\"0 0 " + fixed(W, 0) + " " + fixed(H, 0) + "\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg += "<text x=\"" + fixed(W / 2) + "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"15\">" + escape(options.title) + "</text>\n";
  svg += "<rect x=\"" + fixed(left) + "\" y=\"" + fixed(top) + "\" width=\"" + fixed(pw) +
         "\" height=\"" + fixed(ph) + "\" fill=\"none\" stroke=\"black\"/>\n";

  // Ticks.
  for (int i = 0; i <= 4; ++i) {
    const double vx = xr.lo + (xr.hi - xr.lo) * i / 4.0;
    const double vy = yr.lo + (yr.hi - yr.lo) * i / 4.0;
    svg += "<text x=\"" + fixed(sx(vx)) + "\" y=\"" + fixed(top + ph + 18) +
           "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" +
           tick_label(vx) + "</text>\n";
    svg += "<text x=\"" + fixed(left - 6) + "\" y=\"" + fixed(sy(vy) + 4) +
           "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" + tick_label(vy) +
           "</text>\n";
  }
  svg += "<text x=\"" + fixed(left + pw / 2) + "\" y=\"" + fixed(H - 10) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" +
         escape(options.x_label) + "</text>\n";
  svg += "<text x=\"16\" y=\"" + fixed(top + ph / 2) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" transform=\"rotate(-90 16 " +
         fixed(top + ph / 2) + ")\">" + escape(options.y_label) + "</text>\n";

  if (!rows.empty()) {
    // +-3 stderr band.
    std::string band;
    for (const auto& r : rows) band += fixed(sx(r.x)) + "," + fixed(sy(r.y + 3 * r.se)) + " ";
    for (auto it = rows.rbegin(); it != rows.rend(); ++it)
      band += fixed(sx(it->x)) + "," + fixed(sy(it->y - 3 * it->se)) + " ";
    band.pop_back();
    svg += "<polygon points=\"" + band + "\" fill=\"#9ecae1\" fill-opacity=\"0.5\" stroke=\"none\"/>\n";

    std::string target_line;
    for (const auto& r : rows)
      if (std::isfinite(r.target)) target_line += fixed(sx(r.x)) + "," + fixed(sy(r.target)) + " ";
    if (!target_line.empty()) {
      target_line.pop_back();
      svg += "<polyline points=\"" + target_line +
             "\" fill=\"none\" stroke=\"#d62728\" stroke-width=\"1.5\" stroke-dasharray=\"6 3\"/>\n";
    }

    std::string line;
    for (const auto& r : rows) line += fixed(sx(r.x)) + "," + fixed(sy(r.y)) + " ";
    line.pop_back();
    svg += "<polyline points=\"" + line + "\" fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\"/>\n";
    for (const auto& r : rows) {
      svg += "<line x1=\"" + fixed(sx(r.x)) + "\" y1=\"" + fixed(sy(r.y - 3 * r.se)) + "\" x2=\"" +
             fixed(sx(r.x)) + "\" y2=\"" + fixed(sy(r.y + 3 * r.se)) + "\" stroke=\"#1f77b4\"/>\n";
      svg += "<circle cx=\"" + fixed(sx(r.x)) + "\" cy=\"" + fixed(sy(r.y)) +
             "\" r=\"2.5\" fill=\"#1f77b4\"/>\n";
    }
  }

  // Legend.
  const double lx = left + 10, ly = top + 14;
  svg += "<line x1=\"" + fixed(lx) + "\" y1=\"" + fixed(ly) + "\" x2=\"" + fixed(lx + 20) + "\" y2=\"" +
         fixed(ly) + "\" stroke=\"#1f77b4\" stroke-width=\"1.5\"/>\n";
  svg += "<text x=\"" + fixed(lx + 26) + "\" y=\"" + fixed(ly + 4) +
         "\" font-family=\"sans-serif\" font-size=\"11\">estimate (band: 3 stderr)</text>\n";
  svg += "<line x1=\"" + fixed(lx) + "\" y1=\"" + fixed(ly + 16) + "\" x2=\"" + fixed(lx + 20) +
         "\" y2=\"" + fixed(ly + 16) + "\" stroke=\"#d62728\" stroke-width=\"1.5\" stroke-dasharray=\"6 3\"/>\n";
  svg += "<text x=\"" + fixed(lx + 26) + "\" y=\"" + fixed(ly + 20) +
         "\" font-family=\"sans-serif\" font-size=\"11\">target</text>\n";
  svg += "</svg>\n";
  return svg;
}

void emit_plot(const CsvTable& table, const std::string& path, const PlotOptions& options) {
  write_text(path, render_plot(table, options));
}

}  // namespace nelson
