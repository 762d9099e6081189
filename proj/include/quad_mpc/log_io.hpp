#pragma once

// CSV logs, plain-text run summaries and minimal SVG line charts.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "quad_mpc/common.hpp"
#include "quad_mpc/sim_harness.hpp"

namespace quad_mpc {

inline const std::vector<std::string>& csv_columns() {
  static const std::vector<std::string> cols = [] {
    std::vector<std::string> c{"t",  "px",    "py",    "pz",  "vx", "vy", "vz",
                               "roll", "pitch", "yaw", "wx", "wy", "wz"};
    for (int i = 0; i < kNumLegs; ++i) c.push_back("c" + std::to_string(i));
    for (int i = 0; i < kNumLegs; ++i)
      for (const char* axis : {"x", "y", "z"}) c.push_back("f" + std::to_string(i) + axis);
    c.push_back("qp_status");
    c.push_back("qp_ms");
    return c;
  }();
  return cols;
}

// Shortest round-trip representation; never depends on the C locale.
inline std::string format_number(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return ec == std::errc() ? std::string(buf, ptr) : std::string("nan");
}

struct CsvOptions {
  bool include_timing = true;  // false writes qp_ms = 0 so identical runs give identical files
};

inline void write_csv(std::ostream& out, const SimLog& log, const CsvOptions& opts = {}) {
  const auto& cols = csv_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << '\n';
  for (const LogRow& r : log.rows) {
    const Vec3 w = r.state.w_world();
    std::string line = format_number(r.t);
    auto add = [&line](double v) {
      line += ',';
      line += format_number(v);
    };
    for (int i = 0; i < 3; ++i) add(r.state.p(i));
    for (int i = 0; i < 3; ++i) add(r.state.v(i));
    add(r.euler.roll);
    add(r.euler.pitch);
    add(r.euler.yaw);
    for (int i = 0; i < 3; ++i) add(w(i));
    for (int i = 0; i < kNumLegs; ++i) line += r.contact[i] ? ",1" : ",0";
    for (int i = 0; i < kNumLegs; ++i)
      for (int a = 0; a < 3; ++a) add(r.grf[i](a));
    line += ',';
    line += to_string(r.qp_status);
    add(opts.include_timing ? r.qp_ms : 0.0);
    out << line << '\n';
  }
}

inline void write_summary(std::ostream& out, const ScenarioConfig& cfg, const SimLog& log) {
  const SimSummary s = summarize(log);
  out << "scenario: " << cfg.name << '\n';
  out << "gait: " << cfg.gait << '\n';
  out << "duration_s: " << format_number(cfg.duration) << '\n';
  out << "rows: " << s.rows << '\n';
  out << "diverged: " << (log.diverged ? "true" : "false") << '\n';
  if (log.diverged) {
    out << "divergence_time_s: " << format_number(log.divergence_time) << '\n';
    out << "divergence_reason: " << log.divergence_reason << '\n';
  }
  out << "mpc_ticks: " << s.ticks << '\n';
  out << "qp_failures: " << s.qp_failures << '\n';
  out << "mean_solve_ms: " << format_number(s.mean_solve_ms) << '\n';
  out << "p95_solve_ms: " << format_number(s.p95_solve_ms) << '\n';
  out << "max_solve_ms: " << format_number(s.max_solve_ms) << '\n';
  out << "max_kkt_residual: " << format_number(s.max_kkt) << '\n';
  out << "rms_position_error_m: " << format_number(s.rms_position_error) << '\n';
  out << "rms_velocity_error_mps: " << format_number(s.rms_velocity_error) << '\n';
  out << "rms_yaw_error_rad: " << format_number(s.rms_yaw_error) << '\n';
  out << "max_abs_roll_rad: " << format_number(s.max_abs_roll) << '\n';
  out << "max_abs_pitch_rad: " << format_number(s.max_abs_pitch) << '\n';
  out << "final_position_m: " << format_number(s.final_position.x()) << ' '
      << format_number(s.final_position.y()) << ' ' << format_number(s.final_position.z()) << '\n';
  out << "final_yaw_rad: " << format_number(s.final_yaw) << '\n';
  out << "disturbance_events: " << cfg.disturbances.size() << '\n';
  for (std::size_t i = 0; i < cfg.disturbances.size(); ++i) {
    const DisturbanceSpec& d = cfg.disturbances[i];
    out << "disturbance_" << i << ": onset=" << format_number(d.onset) << " window=" << format_number(d.window)
        << " peak=" << format_number(d.peak.x()) << ',' << format_number(d.peak.y()) << ','
        << format_number(d.peak.z()) << '\n';
  }
}

/// Column-addressed view of a CSV log.
class CsvTable {
 public:
  static CsvTable read(std::istream& in) {
    CsvTable t;
    std::string line;
    if (!std::getline(in, line)) throw MissingColumn("empty log: no header row");
    std::istringstream header(line);
    std::string name;
    while (std::getline(header, name, ',')) t.names_.push_back(name);
    t.data_.resize(t.names_.size());
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::istringstream row(line);
      std::string cell;
      for (std::size_t c = 0; c < t.names_.size(); ++c) {
        if (!std::getline(row, cell, ',')) cell.clear();
        double v = std::nan("");
        std::from_chars(cell.data(), cell.data() + cell.size(), v);
        t.data_[c].push_back(v);
      }
    }
    return t;
  }

  static CsvTable read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open log '" + path + "'");
    return read(in);
  }

  bool has(const std::string& name) const {
    return std::find(names_.begin(), names_.end(), name) != names_.end();
  }

  const std::vector<double>& column(const std::string& name) const {
    const auto it = std::find(names_.begin(), names_.end(), name);
    if (it == names_.end()) throw MissingColumn("log has no column '" + name + "'");
    return data_[static_cast<std::size_t>(it - names_.begin())];
  }

  std::size_t rows() const { return data_.empty() ? 0 : data_.front().size(); }

 private:
  std::vector<std::string> names_;
  std::vector<std::vector<double>> data_;
};

// ---------------------------------------------------------------------------
// SVG

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct Panel {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
};

namespace detail {

inline const char* series_color(std::size_t i) {
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
  return colors[i % 6];
}

inline std::string svg_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else out += c;
  }
  return out;
}

inline void draw_panel(std::ostream& out, const Panel& p, double x0, double y0, double w, double h) {
  double xmin = INFINITY, xmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
  for (const auto& s : p.series)
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, s.y[i]);
      ymax = std::max(ymax, s.y[i]);
    }
  if (!std::isfinite(xmin)) xmin = 0.0, xmax = 1.0, ymin = 0.0, ymax = 1.0;
  if (xmax - xmin < 1e-12) xmax = xmin + 1.0;
  if (ymax - ymin < 1e-12) ymin -= 0.5, ymax += 0.5;
  const double pad = 0.05 * (ymax - ymin);
  ymin -= pad;
  ymax += pad;

  const double left = x0 + 60, right = x0 + w - 110, top = y0 + 25, bottom = y0 + h - 35;
  auto sx = [&](double x) { return left + (x - xmin) / (xmax - xmin) * (right - left); };
  auto sy = [&](double y) { return bottom - (y - ymin) / (ymax - ymin) * (bottom - top); };

  out << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << right - left << "\" height=\""
      << bottom - top << "\" fill=\"none\" stroke=\"#444\"/>\n";
  out << "<text x=\"" << (left + right) / 2 << "\" y=\"" << y0 + 16
      << "\" text-anchor=\"middle\" font-size=\"13\">" << svg_escape(p.title) << "</text>\n";
  out << "<text x=\"" << (left + right) / 2 << "\" y=\"" << bottom + 28
      << "\" text-anchor=\"middle\" font-size=\"11\">" << svg_escape(p.x_label) << "</text>\n";
  out << "<text x=\"" << x0 + 14 << "\" y=\"" << (top + bottom) / 2 << "\" font-size=\"11\" transform=\"rotate(-90 "
      << x0 + 14 << ' ' << (top + bottom) / 2 << ")\" text-anchor=\"middle\">" << svg_escape(p.y_label)
      << "</text>\n";
  for (int k = 0; k <= 4; ++k) {
    const double xv = xmin + k * (xmax - xmin) / 4, yv = ymin + k * (ymax - ymin) / 4;
    out << "<text x=\"" << sx(xv) << "\" y=\"" << bottom + 13 << "\" font-size=\"9\" text-anchor=\"middle\">"
        << format_number(std::round(xv * 1000) / 1000) << "</text>\n";
    out << "<text x=\"" << left - 4 << "\" y=\"" << sy(yv) + 3 << "\" font-size=\"9\" text-anchor=\"end\">"
        << format_number(std::round(yv * 1000) / 1000) << "</text>\n";
  }

  for (std::size_t k = 0; k < p.series.size(); ++k) {
    const Series& s = p.series[k];
    out << "<polyline fill=\"none\" stroke-width=\"1.2\" stroke=\"" << series_color(k) << "\" points=\"";
    // Thin long series to at most ~2000 vertices.
    const std::size_t n = std::min(s.x.size(), s.y.size());
    const std::size_t stride = std::max<std::size_t>(1, n / 2000);
    for (std::size_t i = 0; i < n; i += stride)
      if (std::isfinite(s.x[i]) && std::isfinite(s.y[i])) out << sx(s.x[i]) << ',' << sy(s.y[i]) << ' ';
    out << "\"/>\n";
    out << "<text x=\"" << right + 8 << "\" y=\"" << top + 12 + 14 * k << "\" font-size=\"11\" fill=\""
        << series_color(k) << "\">" << svg_escape(s.label) << "</text>\n";
  }
}

}  // namespace detail

/// Panels stacked vertically in one SVG document.
inline void write_svg(std::ostream& out, const std::vector<Panel>& panels, double width = 800,
                      double panel_height = 240) {
  const double height = panel_height * static_cast<double>(panels.size());
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" font-family=\"sans-serif\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (std::size_t i = 0; i < panels.size(); ++i)
    detail::draw_panel(out, panels[i], 0.0, panel_height * static_cast<double>(i), width, panel_height);
  out << "</svg>\n";
}

inline const std::vector<std::string>& figure_names() {
  static const std::vector<std::string> names{"grf_z", "states", "top_view"};
  return names;
}

/// Panels for a named figure. Throws Error for an unknown name and
/// MissingColumn when the log lacks a needed column.
inline std::vector<Panel> figure_panels(const CsvTable& log, const std::string& figure) {
  const auto& t = log.column("t");
  auto series = [&](const std::string& label, const std::string& col) { return Series{label, t, log.column(col)}; };

  if (figure == "grf_z") {
    Panel p{"vertical ground reaction forces", "t [s]", "f_z [N]", {}};
    for (int i = 0; i < kNumLegs; ++i)
      p.series.push_back(series(kLegNames[i], "f" + std::to_string(i) + "z"));
    return {p};
  }
  if (figure == "states") {
    Panel pos{"position", "t [s]", "[m]", {series("px", "px"), series("py", "py"), series("pz", "pz")}};
    Panel vel{"velocity", "t [s]", "[m/s]", {series("vx", "vx"), series("vy", "vy"), series("vz", "vz")}};
    Panel ang{"orientation", "t [s]", "[rad]",
              {series("roll", "roll"), series("pitch", "pitch"), series("yaw", "yaw")}};
    Panel rate{"angular velocity (world)", "t [s]", "[rad/s]",
               {series("wx", "wx"), series("wy", "wy"), series("wz", "wz")}};
    return {pos, vel, ang, rate};
  }
  if (figure == "top_view") {
    Panel p{"top view", "x [m]", "y [m]", {Series{"CoM path", log.column("px"), log.column("py")}}};
    return {p};
  }
  std::string valid;
  for (const auto& n : figure_names()) valid += (valid.empty() ? "" : ", ") + n;
  throw Error("unknown figure '" + figure + "' (valid: " + valid + ")");
}

}  // namespace quad_mpc
