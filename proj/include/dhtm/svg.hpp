#pragma once

#include <string>
#include <vector>

namespace dhtm {

// Minimal SVG line-chart writer for the metric plots: per-series polylines
// over a shared axis box with tick labels and a legend.
struct PlotSeries {
    std::string label;
    std::string color = "#777777";
    double stroke_width = 1.0;
    std::vector<double> x;
    std::vector<double> y;
};

std::string render_line_chart(const std::string& title, const std::string& x_label,
                              const std::string& y_label,
                              const std::vector<PlotSeries>& series, int width = 720,
                              int height = 420);

}  // namespace dhtm
