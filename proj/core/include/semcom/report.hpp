#pragma once

#include <string>
#include <vector>

namespace semcom {

// "%.10g" with IEEE infinities spelled "inf"/"-inf"
std::string format_number(double v);

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

// Minimal standalone SVG line plot (axes, ticks, markers, one series).
void write_line_plot_svg(const std::string& path, const std::string& title,
                         const std::string& x_label, const std::string& y_label,
                         const std::vector<double>& xs, const std::vector<double>& ys);

}  // namespace semcom
