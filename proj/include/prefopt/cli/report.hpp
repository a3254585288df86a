// Copyright 2026 The prefopt Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Report bundle: copies run CSVs into <run>/report and renders SVG plots
// from them. Output depends only on the CSV contents.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "prefopt/error.hpp"
#include "prefopt/io.hpp"

namespace prefopt::cli {

struct Csv {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int Column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return static_cast<int>(i);
    }
    throw IoError("CSV has no column '" + name + "'");
  }

  std::vector<double> Numbers(const std::string& name) const {
    const int c = Column(name);
    std::vector<double> out;
    for (const auto& r : rows) out.push_back(std::stod(r.at(static_cast<std::size_t>(c))));
    return out;
  }
};

// Plain comma-separated values as written by this tool (no quoting).
inline Csv ParseCsv(const std::string& text) {
  Csv csv;
  std::istringstream in(text);
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (first) {
      csv.header = std::move(cells);
      first = false;
    } else {
      csv.rows.push_back(std::move(cells));
    }
  }
  return csv;
}

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

struct PlotSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::optional<std::pair<double, double>> y_range;
  std::optional<double> reference_y;  // dashed horizontal line
  bool markers = false;
};

namespace internal {

inline std::string Num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

inline std::string Tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

inline std::string Escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += c;
    }
  }
  return out;
}

inline const char* Color(std::size_t i) {
  static const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                   "#ff7f0e", "#8c564b", "#e377c2", "#17becf"};
  return kPalette[i % 8];
}

struct Frame {
  double x0, x1, y0, y1;
  static constexpr double kLeft = 70, kRight = 620, kTop = 40, kBottom = 360;
  double X(double x) const { return kLeft + (x - x0) / (x1 - x0) * (kRight - kLeft); }
  double Y(double y) const { return kBottom - (y - y0) / (y1 - y0) * (kBottom - kTop); }
};

inline std::pair<double, double> Span(double lo, double hi) {
  if (!(lo < hi)) {
    const double pad = lo == 0.0 ? 1.0 : std::abs(lo) * 0.1;
    return {lo - pad, hi + pad};
  }
  const double pad = (hi - lo) * 0.05;
  return {lo - pad, hi + pad};
}

inline std::string Axes(const Frame& f, const PlotSpec& spec) {
  std::string s;
  s += "<rect x=\"0\" y=\"0\" width=\"760\" height=\"420\" fill=\"white\"/>\n";
  s += "<text x=\"345\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" +
       Escape(spec.title) + "</text>\n";
  s += "<line x1=\"70\" y1=\"360\" x2=\"620\" y2=\"360\" stroke=\"black\"/>\n";
  s += "<line x1=\"70\" y1=\"40\" x2=\"70\" y2=\"360\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = f.x0 + (f.x1 - f.x0) * i / 4.0;
    const double yv = f.y0 + (f.y1 - f.y0) * i / 4.0;
    s += "<text x=\"" + Num(f.X(xv)) + "\" y=\"378\" text-anchor=\"middle\" font-size=\"11\">" +
         Tick(xv) + "</text>\n";
    s += "<text x=\"64\" y=\"" + Num(f.Y(yv) + 4) +
         "\" text-anchor=\"end\" font-size=\"11\">" + Tick(yv) + "</text>\n";
  }
  s += "<text x=\"345\" y=\"405\" text-anchor=\"middle\" font-size=\"13\">" +
       Escape(spec.x_label) + "</text>\n";
  s += "<text x=\"18\" y=\"200\" text-anchor=\"middle\" font-size=\"13\" "
       "transform=\"rotate(-90 18 200)\">" + Escape(spec.y_label) + "</text>\n";
  if (spec.reference_y) {
    const std::string y = Num(f.Y(*spec.reference_y));
    s += "<line x1=\"70\" y1=\"" + y + "\" x2=\"620\" y2=\"" + y +
         "\" stroke=\"gray\" stroke-dasharray=\"6,4\"/>\n";
  }
  return s;
}

inline Frame FrameFor(const std::vector<Series>& series, const PlotSpec& spec) {
  double xl = 1e300, xh = -1e300, yl = 1e300, yh = -1e300;
  for (const auto& s : series) {
    for (double v : s.x) xl = std::min(xl, v), xh = std::max(xh, v);
    for (double v : s.y) yl = std::min(yl, v), yh = std::max(yh, v);
  }
  if (xl > xh) xl = 0.0, xh = 1.0;
  if (yl > yh) yl = 0.0, yh = 1.0;
  auto [x0, x1] = Span(xl, xh);
  auto [y0, y1] = spec.y_range ? *spec.y_range : Span(yl, yh);
  return {x0, x1, y0, y1};
}

}  // namespace internal

inline std::string LinePlotSvg(const std::vector<Series>& series, const PlotSpec& spec) {
  using internal::Num;
  const internal::Frame f = internal::FrameFor(series, spec);
  std::string s =
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"760\" height=\"420\" "
      "viewBox=\"0 0 760 420\" font-family=\"sans-serif\">\n";
  s += internal::Axes(f, spec);
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& ser = series[i];
    std::string points;
    for (std::size_t j = 0; j < ser.x.size() && j < ser.y.size(); ++j) {
      if (!points.empty()) points += ' ';
      points += Num(f.X(ser.x[j])) + "," + Num(f.Y(ser.y[j]));
    }
    s += "<polyline fill=\"none\" stroke=\"" + std::string(internal::Color(i)) +
         "\" stroke-width=\"1.5\" points=\"" + points + "\"/>\n";
    if (spec.markers) {
      for (std::size_t j = 0; j < ser.x.size() && j < ser.y.size(); ++j) {
        s += "<circle cx=\"" + Num(f.X(ser.x[j])) + "\" cy=\"" + Num(f.Y(ser.y[j])) +
             "\" r=\"3.5\" fill=\"" + internal::Color(i) + "\"/>\n";
      }
    }
    s += "<line x1=\"635\" y1=\"" + Num(50 + 18.0 * i) + "\" x2=\"655\" y2=\"" +
         Num(50 + 18.0 * i) + "\" stroke=\"" + internal::Color(i) + "\" stroke-width=\"2\"/>\n";
    s += "<text x=\"660\" y=\"" + Num(54 + 18.0 * i) + "\" font-size=\"11\">" +
         internal::Escape(ser.name) + "</text>\n";
  }
  s += "</svg>\n";
  return s;
}

inline std::string ScatterSvg(const std::vector<double>& x, const std::vector<double>& y,
                              const PlotSpec& spec) {
  using internal::Num;
  const internal::Frame f = internal::FrameFor({{"", x, y}}, spec);
  std::string s =
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"760\" height=\"420\" "
      "viewBox=\"0 0 760 420\" font-family=\"sans-serif\">\n";
  s += internal::Axes(f, spec);
  for (std::size_t i = 0; i < x.size() && i < y.size(); ++i) {
    s += "<circle cx=\"" + Num(f.X(x[i])) + "\" cy=\"" + Num(f.Y(y[i])) +
         "\" r=\"1.5\" fill=\"#1f77b4\" fill-opacity=\"0.5\"/>\n";
  }
  s += "</svg>\n";
  return s;
}

struct ReportArtifact {
  std::string input;   // CSV expected in the run directory
  std::string output;  // stem written under <run>/report
};

inline const std::vector<ReportArtifact>& ReportArtifacts() {
  static const std::vector<ReportArtifact> a = {
      {"metrics.csv", "learning_curve"},
      {"smoothness.csv", "smoothness"},
      {"reward_scatter.csv", "reward_scatter"},
      {"ablation.csv", "ablation"},
  };
  return a;
}

inline std::string RenderArtifact(const std::string& stem, const Csv& csv) {
  if (stem == "learning_curve") {
    return LinePlotSvg({{"DPPO", csv.Numbers("step"), csv.Numbers("eval_return_normalized")}},
                       {"Policy learning curve", "policy step", "normalized return",
                        std::nullopt, std::nullopt, false});
  }
  if (stem == "smoothness") {
    // One line per trajectory, in order of first appearance.
    std::vector<Series> series;
    std::map<std::string, std::size_t> index;
    const int id = csv.Column("traj_id"), ic = csv.Column("i"), pc = csv.Column("p");
    for (const auto& r : csv.rows) {
      const std::string& t = r.at(static_cast<std::size_t>(id));
      auto it = index.find(t);
      if (it == index.end()) {
        it = index.emplace(t, series.size()).first;
        series.push_back({t, {}, {}});
      }
      series[it->second].x.push_back(std::stod(r.at(static_cast<std::size_t>(ic))));
      series[it->second].y.push_back(std::stod(r.at(static_cast<std::size_t>(pc))));
    }
    return LinePlotSvg(series, {"Preference between one-step-shifted windows",
                                "window index i", "P[window i > window i+1]",
                                std::make_pair(0.0, 1.0), 0.5, false});
  }
  if (stem == "reward_scatter") {
    return ScatterSvg(csv.Numbers("pred_reward"), csv.Numbers("true_reward"),
                      {"Learned vs true per-step reward", "predicted reward",
                       "true reward", std::nullopt, std::nullopt, false});
  }
  if (stem == "ablation") {
    const std::string param = csv.rows.empty() ? "value" : csv.rows[0].at(0);
    return LinePlotSvg({{param, csv.Numbers("value"), csv.Numbers("final_eval_return_normalized")}},
                       {"Ablation over " + param, param, "final normalized return",
                        std::nullopt, std::nullopt, true});
  }
  throw InvalidArgument("unknown report artifact " + stem);
}

struct ReportResult {
  std::vector<std::string> written;
  std::vector<std::string> missing;
};

// Renders every artifact whose input exists; the rest are listed in
// `missing`.
inline ReportResult EmitReport(const std::filesystem::path& run_dir) {
  ReportResult result;
  const std::filesystem::path out = run_dir / "report";
  for (const auto& a : ReportArtifacts()) {
    const auto input = run_dir / a.input;
    if (!std::filesystem::exists(input)) {
      result.missing.push_back(a.input);
      continue;
    }
    const std::string text = ReadFile(input);
    WriteFile(out / (a.output + ".csv"), text);
    WriteFile(out / (a.output + ".svg"), RenderArtifact(a.output, ParseCsv(text)));
    result.written.push_back(a.output);
  }
  return result;
}

}  // namespace prefopt::cli
