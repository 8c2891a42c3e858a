#pragma once

#include <string>
#include <vector>

namespace hiclr {

struct PlotSeries {
    std::string name;
    std::vector<double> values;  // plotted against 1..n
};

// Standalone SVG documents. Non-finite values are skipped.
std::string line_chart_svg(const std::string& title, const std::string& x_label, const std::string& y_label,
                           const std::vector<PlotSeries>& series);
std::string bar_chart_svg(const std::string& title, const std::string& y_label,
                          const std::vector<std::string>& labels, const std::vector<double>& values);

}  // namespace hiclr
