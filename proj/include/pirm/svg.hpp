// Copyright 2026 The pirm-lab Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Minimal deterministic SVG line charts for sweep results.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pirm/experiments.hpp"
#include "pirm/io.hpp"

namespace pirm::svg {

struct Series {
  std::string name;
  std::vector<std::pair<double, double>> points;  // (x, y) in data units
};

struct Panel {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = false;
  std::vector<Series> series;
};

inline constexpr double kPanelWidth = 520.0;
inline constexpr double kPanelHeight = 380.0;
inline constexpr double kMarginLeft = 84.0;
inline constexpr double kMarginRight = 24.0;
inline constexpr double kMarginTop = 40.0;
inline constexpr double kMarginBottom = 56.0;
inline constexpr double kLegendHeight = 22.0;
inline constexpr int kTicks = 12;

inline constexpr const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                           "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
                                           "#bcbd22", "#17becf"};

// Data-to-pixel mapping of one panel placed at horizontal offset `x0`.
struct PanelFrame {
  double x0 = 0.0;
  double xmin = 0.0, xmax = 1.0;  // in axis units (log10 when log_x)
  double ymin = 0.0, ymax = 1.0;
  bool log_x = false;

  double left() const { return x0 + kMarginLeft; }
  double right() const { return x0 + kPanelWidth - kMarginRight; }
  double top() const { return kMarginTop; }
  double bottom() const { return kPanelHeight - kMarginBottom; }

  double axis_x(double x) const { return log_x ? std::log10(x) : x; }
  double px(double x) const {
    return left() + (axis_x(x) - xmin) / (xmax - xmin) * (right() - left());
  }
  double py(double y) const { return bottom() - (y - ymin) / (ymax - ymin) * (bottom() - top()); }
};

inline bool plottable(const Panel& panel, double x, double y) {
  return std::isfinite(x) && std::isfinite(y) && (!panel.log_x || x > 0.0);
}

// Axis ranges are the exact [min, max] of the plotted data; a degenerate
// range is widened symmetrically.
inline PanelFrame frame_for(const Panel& panel, double x0 = 0.0) {
  PanelFrame f;
  f.x0 = x0;
  f.log_x = panel.log_x;
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  for (const auto& s : panel.series) {
    for (const auto& [x, y] : s.points) {
      if (!plottable(panel, x, y)) continue;
      const double ax = f.axis_x(x);
      xmin = std::min(xmin, ax);
      xmax = std::max(xmax, ax);
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
  }
  if (!std::isfinite(xmin)) {
    xmin = 0.0;
    xmax = 1.0;
    ymin = 0.0;
    ymax = 1.0;
  }
  auto widen = [](double& lo, double& hi) {
    if (hi > lo) return;
    const double pad = lo == 0.0 ? 1.0 : 0.05 * std::abs(lo);
    lo -= pad;
    hi += pad;
  };
  widen(xmin, xmax);
  widen(ymin, ymax);
  f.xmin = xmin;
  f.xmax = xmax;
  f.ymin = ymin;
  f.ymax = ymax;
  return f;
}

namespace detail {

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

inline void render_panel(std::string& out, const Panel& panel, double x0) {
  const PanelFrame f = frame_for(panel, x0);
  out += "<g class=\"panel\">\n";
  out += "<text x=\"" + num(x0 + kPanelWidth / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" +
         escape(panel.title) + "</text>\n";
  out += "<rect x=\"" + num(f.left()) + "\" y=\"" + num(f.top()) + "\" width=\"" +
         num(f.right() - f.left()) + "\" height=\"" + num(f.bottom() - f.top()) +
         "\" fill=\"none\" stroke=\"#333\"/>\n";

  for (int k = 0; k < kTicks; ++k) {
    const double frac = static_cast<double>(k) / (kTicks - 1);
    const double ax = f.xmin + frac * (f.xmax - f.xmin);
    const double xv = f.log_x ? std::pow(10.0, ax) : ax;
    const double xp = f.left() + frac * (f.right() - f.left());
    out += "<line x1=\"" + num(xp) + "\" y1=\"" + num(f.bottom()) + "\" x2=\"" + num(xp) +
           "\" y2=\"" + num(f.bottom() + 5) + "\" stroke=\"#333\"/>\n";
    out += "<text x=\"" + num(xp) + "\" y=\"" + num(f.bottom() + 18) +
           "\" text-anchor=\"middle\" font-size=\"9\">" + tick_label(xv) + "</text>\n";

    const double yv = f.ymin + frac * (f.ymax - f.ymin);
    const double yp = f.py(yv);
    out += "<line x1=\"" + num(f.left() - 5) + "\" y1=\"" + num(yp) + "\" x2=\"" + num(f.left()) +
           "\" y2=\"" + num(yp) + "\" stroke=\"#333\"/>\n";
    out += "<line x1=\"" + num(f.left()) + "\" y1=\"" + num(yp) + "\" x2=\"" + num(f.right()) +
           "\" y2=\"" + num(yp) + "\" stroke=\"#ddd\" stroke-width=\"0.5\"/>\n";
    out += "<text x=\"" + num(f.left() - 8) + "\" y=\"" + num(yp + 3) +
           "\" text-anchor=\"end\" font-size=\"9\">" + tick_label(yv) + "</text>\n";
  }
  out += "<text x=\"" + num((f.left() + f.right()) / 2) + "\" y=\"" + num(f.bottom() + 38) +
         "\" text-anchor=\"middle\" font-size=\"12\">" + escape(panel.x_label) + "</text>\n";
  out += "<text x=\"" + num(x0 + 16) + "\" y=\"" + num((f.top() + f.bottom()) / 2) +
         "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 " + num(x0 + 16) + " " +
         num((f.top() + f.bottom()) / 2) + ")\">" + escape(panel.y_label) + "</text>\n";

  for (std::size_t s = 0; s < panel.series.size(); ++s) {
    const auto& series = panel.series[s];
    const char* color = kPalette[s % std::size(kPalette)];
    std::string pts;
    for (const auto& [x, y] : series.points) {
      if (!plottable(panel, x, y)) continue;
      if (!pts.empty()) pts += ' ';
      pts += num(f.px(x)) + ',' + num(f.py(y));
    }
    out += "<polyline class=\"series\" data-name=\"" + escape(series.name) + "\" fill=\"none\" stroke=\"" +
           color + "\" stroke-width=\"1.8\" points=\"" + pts + "\"/>\n";
    const double lx = f.left() + 8 + static_cast<double>(s % 4) * 104.0;
    const double ly = kPanelHeight + 4 + static_cast<double>(s / 4) * kLegendHeight;
    out += "<line x1=\"" + num(lx) + "\" y1=\"" + num(ly) + "\" x2=\"" + num(lx + 18) + "\" y2=\"" +
           num(ly) + "\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
    out += "<text x=\"" + num(lx + 22) + "\" y=\"" + num(ly + 4) + "\" font-size=\"10\">" +
           escape(series.name) + "</text>\n";
  }
  out += "</g>\n";
}

}  // namespace detail

// Panels laid out left to right on one canvas.
inline std::string render_svg(std::span<const Panel> panels) {
  std::size_t legend_rows = 1;
  for (const auto& p : panels) legend_rows = std::max(legend_rows, (p.series.size() + 3) / 4);
  const double width = kPanelWidth * static_cast<double>(std::max<std::size_t>(1, panels.size()));
  const double height = kPanelHeight + 8 + kLegendHeight * static_cast<double>(legend_rows);
  std::string out;
  out += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + detail::num(width) + "\" height=\"" +
         detail::num(height) + "\" viewBox=\"0 0 " + detail::num(width) + " " + detail::num(height) +
         "\" font-family=\"sans-serif\">\n";
  out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (std::size_t k = 0; k < panels.size(); ++k) {
    detail::render_panel(out, panels[k], kPanelWidth * static_cast<double>(k));
  }
  out += "</svg>\n";
  return out;
}

inline std::string series_name(std::size_t n_parts, std::size_t n_envs_hint) {
  std::string s = "p=" + std::to_string(n_parts);
  if (n_parts == 1) s += " (IRM)";
  if (n_parts == n_envs_hint) s += " (ERM)";
  return s;
}

// Records grouped by scenario label, in first-appearance order.
inline std::vector<std::pair<std::string, std::vector<SweepRecord>>> group_by_scenario(
    std::span<const SweepRecord> records) {
  std::vector<std::pair<std::string, std::vector<SweepRecord>>> groups;
  for (const auto& r : records) {
    auto it = std::find_if(groups.begin(), groups.end(), [&](const auto& g) { return g.first == r.scenario; });
    if (it == groups.end()) {
      groups.emplace_back(r.scenario, std::vector<SweepRecord>{});
      it = std::prev(groups.end());
    }
    it->second.push_back(r);
  }
  return groups;
}

// Two panels (risk, fairness) against the partition count.
inline std::vector<Panel> partition_panels(std::span<const SweepRecord> records) {
  Series risk{"global risk", {}}, fair{"fairness", {}};
  for (const auto& r : records) {
    risk.points.emplace_back(static_cast<double>(r.n_parts), r.global_risk);
    fair.points.emplace_back(static_cast<double>(r.n_parts), r.fairness);
  }
  std::string suffix = records.empty() ? "" : " (" + records.front().scenario + ")";
  return {Panel{"Risk vs partitions" + suffix, "number of partitions p", "global risk", false, {risk}},
          Panel{"Fairness vs partitions" + suffix, "number of partitions p", "V-REx fairness", false, {fair}}};
}

// One panel of the lambda sweep: a series per partition count, log lambda axis.
inline Panel lambda_panel(std::span<const SweepRecord> records, bool fairness) {
  std::map<std::size_t, Series> by_p;
  std::size_t max_p = 0;
  for (const auto& r : records) max_p = std::max(max_p, r.n_parts);
  for (const auto& r : records) {
    auto& s = by_p[r.n_parts];
    if (s.name.empty()) s.name = series_name(r.n_parts, max_p);
    s.points.emplace_back(r.lambda, fairness ? r.fairness : r.global_risk);
  }
  Panel p;
  p.title = fairness ? "Fairness of different partitions" : "Risk of different partitions";
  if (!records.empty()) p.title += " (" + records.front().scenario + ")";
  p.x_label = "lambda";
  p.y_label = fairness ? "V-REx fairness" : "global risk";
  p.log_x = true;
  for (auto& [n, s] : by_p) p.series.push_back(std::move(s));
  return p;
}

enum class SweepKind { partitions, lambda };

// Writes the plots for one sweep; returns the files written, in order.
inline std::vector<std::filesystem::path> write_svg_plots(std::span<const SweepRecord> records,
                                                          const std::filesystem::path& output_dir,
                                                          SweepKind kind) {
  if (records.empty()) throw std::invalid_argument("write_svg_plots: no records");
  std::vector<std::filesystem::path> written;
  const auto groups = group_by_scenario(records);
  for (const auto& [label, recs] : groups) {
    if (kind == SweepKind::partitions) {
      const auto panels = partition_panels(recs);
      written.push_back(output_dir / ("partition_sweep_" + label + ".svg"));
      io::write_text_file(written.back(), render_svg(panels));
    } else {
      const std::string stem = groups.size() == 1 ? "lambda_sweep" : "lambda_sweep_" + label;
      for (bool fairness : {false, true}) {
        const Panel panel = lambda_panel(recs, fairness);
        written.push_back(output_dir / (stem + (fairness ? "_fairness.svg" : "_risk.svg")));
        io::write_text_file(written.back(), render_svg(std::span<const Panel>(&panel, 1)));
      }
    }
  }
  return written;
}

}  // namespace pirm::svg
