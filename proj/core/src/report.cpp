#include "semcom/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "semcom/common.hpp"

namespace semcom {

std::string format_number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw DataError("cannot open '" + path + "' for writing");
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i) f << ',';
    f << header[i];
  }
  f << '\n';
  for (const auto& row : rows) {
    if (row.size() != header.size()) throw Error("CSV row width does not match header");
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) f << ',';
      f << row[i];
    }
    f << '\n';
  }
  if (!f) throw DataError("failed writing '" + path + "'");
}

void write_line_plot_svg(const std::string& path, const std::string& title,
                         const std::string& x_label, const std::string& y_label,
                         const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size() || xs.empty()) {
    throw Error("plot needs matching non-empty x/y series");
  }
  const int width = 640, height = 440;
  const int ml = 70, mr = 25, mt = 45, mb = 55;
  const double px = width - ml - mr, py = height - mt - mb;

  double xmin = *std::min_element(xs.begin(), xs.end());
  double xmax = *std::max_element(xs.begin(), xs.end());
  double ymin = *std::min_element(ys.begin(), ys.end());
  double ymax = *std::max_element(ys.begin(), ys.end());
  if (xmax == xmin) {
    xmin -= 1;
    xmax += 1;
  }
  const double ypad = (ymax == ymin) ? std::max(1.0, std::abs(ymax)) * 0.1
                                     : (ymax - ymin) * 0.08;
  ymin -= ypad;
  ymax += ypad;

  auto sx = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * px; };
  auto sy = [&](double y) { return mt + (ymax - y) / (ymax - ymin) * py; };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" "
         "font-family=\"sans-serif\" font-size=\"16\">" << title << "</text>\n";

  // axes
  svg << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\""
      << height - mb << "\" stroke=\"black\"/>\n"
      << "<line x1=\"" << ml << "\" y1=\"" << height - mb << "\" x2=\"" << width - mr
      << "\" y2=\"" << height - mb << "\" stroke=\"black\"/>\n";

  const int ticks = 5;
  for (int i = 0; i <= ticks; ++i) {
    const double xv = xmin + (xmax - xmin) * i / ticks;
    const double yv = ymin + (ymax - ymin) * i / ticks;
    svg << "<line x1=\"" << sx(xv) << "\" y1=\"" << height - mb << "\" x2=\"" << sx(xv)
        << "\" y2=\"" << height - mb + 5 << "\" stroke=\"black\"/>\n"
        << "<text x=\"" << sx(xv) << "\" y=\"" << height - mb + 20
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
        << format_number(std::round(xv * 100) / 100) << "</text>\n"
        << "<line x1=\"" << ml - 5 << "\" y1=\"" << sy(yv) << "\" x2=\"" << ml << "\" y2=\""
        << sy(yv) << "\" stroke=\"black\"/>\n"
        << "<text x=\"" << ml - 8 << "\" y=\"" << sy(yv) + 4
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
        << format_number(std::round(yv * 100) / 100) << "</text>\n"
        << "<line x1=\"" << ml << "\" y1=\"" << sy(yv) << "\" x2=\"" << width - mr
        << "\" y2=\"" << sy(yv) << "\" stroke=\"#dddddd\" stroke-width=\"0.5\"/>\n";
  }

  svg << "<text x=\"" << ml + px / 2 << "\" y=\"" << height - 12
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" << x_label
      << "</text>\n"
      << "<text x=\"18\" y=\"" << mt + py / 2
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" "
         "transform=\"rotate(-90 18 " << mt + py / 2 << ")\">" << y_label << "</text>\n";

  svg << "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\" points=\"";
  for (std::size_t i = 0; i < xs.size(); ++i) {
    svg << sx(xs[i]) << "," << sy(ys[i]) << " ";
  }
  svg << "\"/>\n";
  for (std::size_t i = 0; i < xs.size(); ++i) {
    svg << "<circle cx=\"" << sx(xs[i]) << "\" cy=\"" << sy(ys[i])
        << "\" r=\"3.5\" fill=\"#1f77b4\"/>\n";
  }
  svg << "</svg>\n";

  std::ofstream f(path, std::ios::trunc);
  if (!f) throw DataError("cannot open '" + path + "' for writing");
  f << svg.str();
}

}  // namespace semcom
