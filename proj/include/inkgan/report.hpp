#pragma once

// Per-epoch metric charts as standalone SVG files plus a combined CSV.
// Output bytes depend only on the input records.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "inkgan/metrics.hpp"

namespace inkgan {

struct RunSeries {
  std::string label;
  std::vector<MetricRecord> records;
};

struct ChartStyle {
  int width = 640;
  int height = 400;
  int margin_left = 70;
  int margin_right = 20;
  int margin_top = 40;
  int margin_bottom = 50;
};

namespace detail {

inline std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
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

inline constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2"};

}  // namespace detail

/// Line chart of one metric against epoch, one polyline per run.
inline std::string metric_chart_svg(const std::vector<RunSeries>& runs, const std::string& title,
                                    const std::function<double(const MetricRecord&)>& metric,
                                    const ChartStyle& style = {}) {
  double x_min = std::numeric_limits<double>::infinity(), x_max = -x_min;
  double y_min = x_min, y_max = -x_min;
  for (const auto& run : runs) {
    for (const auto& r : run.records) {
      x_min = std::min(x_min, static_cast<double>(r.epoch));
      x_max = std::max(x_max, static_cast<double>(r.epoch));
      y_min = std::min(y_min, metric(r));
      y_max = std::max(y_max, metric(r));
    }
  }
  if (!std::isfinite(x_min)) {
    x_min = 0;
    x_max = 1;
    y_min = 0;
    y_max = 1;
  }
  if (x_max == x_min) x_max = x_min + 1;
  if (y_max == y_min) {
    y_min -= 0.5;
    y_max += 0.5;
  }
  const double pad = (y_max - y_min) * 0.05;
  y_min -= pad;
  y_max += pad;

  const double plot_w = style.width - style.margin_left - style.margin_right;
  const double plot_h = style.height - style.margin_top - style.margin_bottom;
  auto px = [&](double x) { return style.margin_left + (x - x_min) / (x_max - x_min) * plot_w; };
  auto py = [&](double y) { return style.margin_top + (1.0 - (y - y_min) / (y_max - y_min)) * plot_h; };

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(style.width) + "\" height=\"" +
         std::to_string(style.height) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg += "<text x=\"" + std::to_string(style.width / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" +
         detail::xml_escape(title) + "</text>\n";
  svg += "<rect x=\"" + detail::fmt("%.2f", style.margin_left) + "\" y=\"" + detail::fmt("%.2f", style.margin_top) +
         "\" width=\"" + detail::fmt("%.2f", plot_w) + "\" height=\"" + detail::fmt("%.2f", plot_h) +
         "\" fill=\"none\" stroke=\"#444\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double yv = y_min + (y_max - y_min) * i / 4.0;
    const double xv = x_min + (x_max - x_min) * i / 4.0;
    svg += "<text x=\"" + detail::fmt("%.2f", style.margin_left - 6.0) + "\" y=\"" + detail::fmt("%.2f", py(yv) + 4) +
           "\" text-anchor=\"end\">" + detail::fmt("%.4g", yv) + "</text>\n";
    svg += "<text x=\"" + detail::fmt("%.2f", px(xv)) + "\" y=\"" +
           detail::fmt("%.2f", style.height - style.margin_bottom + 16.0) + "\" text-anchor=\"middle\">" +
           detail::fmt("%.4g", xv) + "</text>\n";
  }
  svg += "<text x=\"" + detail::fmt("%.2f", style.margin_left + plot_w / 2) + "\" y=\"" +
         std::to_string(style.height - 10) + "\" text-anchor=\"middle\">epoch</text>\n";

  for (std::size_t k = 0; k < runs.size(); ++k) {
    const char* color = detail::kPalette[k % std::size(detail::kPalette)];
    std::string points;
    for (const auto& r : runs[k].records) {
      points += (points.empty() ? "" : " ") + detail::fmt("%.2f", px(static_cast<double>(r.epoch))) + "," +
                detail::fmt("%.2f", py(metric(r)));
    }
    svg += "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"2\" points=\"" + points +
           "\"/>\n";
    const double ly = style.margin_top + 14.0 + 16.0 * static_cast<double>(k);
    const double lx = style.margin_left + 10.0;
    svg += "<line x1=\"" + detail::fmt("%.2f", lx) + "\" y1=\"" + detail::fmt("%.2f", ly - 4) + "\" x2=\"" +
           detail::fmt("%.2f", lx + 18) + "\" y2=\"" + detail::fmt("%.2f", ly - 4) + "\" stroke=\"" + color +
           "\" stroke-width=\"2\"/>\n";
    svg += "<text x=\"" + detail::fmt("%.2f", lx + 24) + "\" y=\"" + detail::fmt("%.2f", ly) + "\">" +
           detail::xml_escape(runs[k].label) + "</text>\n";
  }
  svg += "</svg>\n";
  return svg;
}

inline std::string combined_csv(const std::vector<RunSeries>& runs) {
  std::string out = std::string("run,") + kMetricsHeader + "\n";
  for (const auto& run : runs) {
    for (const auto& r : run.records) out += run.label + "," + metrics_row(r) + "\n";
  }
  return out;
}

/// Writes fid.svg, ssim_mean.svg, ssim_std.svg and combined.csv into `out_dir`.
/// FID is only comparable within one feature extractor, so its name goes in
/// the FID chart title when known.
inline std::vector<std::filesystem::path> write_report(const std::vector<RunSeries>& runs,
                                                       const std::filesystem::path& out_dir,
                                                       const std::string& extractor_name = "") {
  std::filesystem::create_directories(out_dir);
  std::vector<std::filesystem::path> written;
  auto emit = [&](const std::string& file, const std::string& body) {
    const auto path = out_dir / file;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << body;
    written.push_back(path);
  };
  const std::string fid_title =
      extractor_name.empty() ? "FID (lower is better)" : "FID, " + extractor_name + " features (lower is better)";
  emit("fid.svg", metric_chart_svg(runs, fid_title, [](const MetricRecord& r) { return r.fid; }));
  emit("ssim_mean.svg", metric_chart_svg(runs, "SSIM mean", [](const MetricRecord& r) { return r.ssim_mean; }));
  emit("ssim_std.svg", metric_chart_svg(runs, "SSIM standard deviation", [](const MetricRecord& r) { return r.ssim_std; }));
  emit("combined.csv", combined_csv(runs));
  return written;
}

}  // namespace inkgan
