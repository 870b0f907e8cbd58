#pragma once

// Self-contained SVG line charts of trajectories, one panel per axis.
// Output bytes depend only on the inputs.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "blurcam/error.hpp"
#include "blurcam/trajectory.hpp"

namespace blurcam {

enum class SeriesStyle { Line, Dashed, Markers };

struct PlotSeries {
  std::string label;
  const Trajectory* traj = nullptr;
  SeriesStyle style = SeriesStyle::Line;
  std::string color = "#1f77b4";
};

namespace detail {

inline std::string fmt3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

inline std::string fmt_sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

inline std::string xml_escape(const std::string& s) {
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

inline double axis_value(const RotationSample& s, int axis) {
  return axis == 0 ? s.alpha : axis == 1 ? s.beta : s.gamma;
}

}  // namespace detail

inline std::string render_trajectory_svg(const std::vector<PlotSeries>& series, const std::string& title = "") {
  if (series.empty()) throw DataError("plot: no series to draw");
  for (const auto& s : series)
    if (!s.traj) throw DataError("plot: series '" + s.label + "' has no data");

  constexpr double kWidth = 900.0;
  constexpr double kPanelH = 220.0;
  constexpr double kLeft = 80.0;
  constexpr double kRight = 20.0;
  constexpr double kTop = 40.0;
  constexpr double kGap = 30.0;
  const double plot_w = kWidth - kLeft - kRight;
  const double height = kTop + 3 * (kPanelH + kGap) + 40.0;

  double t_min = series.front().traj->start();
  double t_max = series.front().traj->end();
  for (const auto& s : series) {
    t_min = std::min(t_min, s.traj->start());
    t_max = std::max(t_max, s.traj->end());
  }
  if (t_max == t_min) t_max = t_min + 1.0;

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << height
     << "\" viewBox=\"0 0 " << kWidth << ' ' << height << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!title.empty())
    os << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
       << detail::xml_escape(title) << "</text>\n";

  static const char* const kAxisNames[3] = {"alpha (pitch) [rad]", "beta (yaw) [rad]", "gamma (roll) [rad]"};
  for (int axis = 0; axis < 3; ++axis) {
    const double top = kTop + axis * (kPanelH + kGap);
    double v_min = detail::axis_value((*series.front().traj)[0], axis);
    double v_max = v_min;
    for (const auto& s : series)
      for (const auto& r : s.traj->samples()) {
        v_min = std::min(v_min, detail::axis_value(r, axis));
        v_max = std::max(v_max, detail::axis_value(r, axis));
      }
    const double pad = (v_max > v_min) ? 0.05 * (v_max - v_min) : (v_min == 0.0 ? 1e-3 : 0.05 * std::abs(v_min));
    v_min -= pad;
    v_max += pad;
    const auto sx = [&](double t) { return kLeft + (t - t_min) / (t_max - t_min) * plot_w; };
    const auto sy = [&](double v) { return top + kPanelH - (v - v_min) / (v_max - v_min) * kPanelH; };

    os << "<g class=\"panel\" data-axis=\"" << axis << "\">\n";
    os << "<rect x=\"" << kLeft << "\" y=\"" << top << "\" width=\"" << plot_w << "\" height=\"" << kPanelH
       << "\" fill=\"none\" stroke=\"#888\"/>\n";
    os << "<text x=\"" << kLeft - 8 << "\" y=\"" << top + 12 << "\" text-anchor=\"end\">" << detail::fmt_sci(v_max)
       << "</text>\n";
    os << "<text x=\"" << kLeft - 8 << "\" y=\"" << top + kPanelH << "\" text-anchor=\"end\">"
       << detail::fmt_sci(v_min) << "</text>\n";
    os << "<text x=\"" << kLeft + 6 << "\" y=\"" << top + 16 << "\">" << kAxisNames[axis] << "</text>\n";
    for (const auto& s : series) {
      const std::string label = detail::xml_escape(s.label);
      if (s.style == SeriesStyle::Markers) {
        os << "<g class=\"series\" data-label=\"" << label << "\" fill=\"" << s.color << "\">\n";
        for (const auto& r : s.traj->samples())
          os << "<circle cx=\"" << detail::fmt3(sx(r.t)) << "\" cy=\"" << detail::fmt3(sy(detail::axis_value(r, axis)))
             << "\" r=\"3\"/>\n";
        os << "</g>\n";
      } else {
        os << "<polyline class=\"series\" data-label=\"" << label << "\" fill=\"none\" stroke=\"" << s.color
           << "\" stroke-width=\"1.5\"" << (s.style == SeriesStyle::Dashed ? " stroke-dasharray=\"6 4\"" : "")
           << " points=\"";
        bool first = true;
        for (const auto& r : s.traj->samples()) {
          if (!first) os << ' ';
          first = false;
          os << detail::fmt3(sx(r.t)) << ',' << detail::fmt3(sy(detail::axis_value(r, axis)));
        }
        os << "\"/>\n";
      }
    }
    os << "</g>\n";
  }

  const double axis_y = kTop + 3 * (kPanelH + kGap) - kGap + 16;
  os << "<text x=\"" << kLeft << "\" y=\"" << axis_y << "\">" << detail::fmt_sci(t_min) << " ms</text>\n";
  os << "<text x=\"" << kLeft + plot_w << "\" y=\"" << axis_y << "\" text-anchor=\"end\">" << detail::fmt_sci(t_max)
     << " ms</text>\n";
  double lx = kLeft;
  const double ly = axis_y + 20;
  for (const auto& s : series) {
    os << "<rect x=\"" << lx << "\" y=\"" << ly - 9 << "\" width=\"12\" height=\"10\" fill=\"" << s.color << "\"/>\n";
    os << "<text class=\"legend\" x=\"" << lx + 16 << "\" y=\"" << ly << "\">" << detail::xml_escape(s.label)
       << "</text>\n";
    lx += 40.0 + 7.0 * static_cast<double>(s.label.size());
  }
  os << "</svg>\n";
  return os.str();
}

inline void write_svg(const std::string& path, const std::string& svg) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open '" + path + "' for writing");
  os << svg;
}

}  // namespace blurcam
