#pragma once

// Minimal self-contained SVG 1.1 line-chart writer (no external assets).

#include "molo/core.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

namespace molo {

struct SvgSeries {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

inline void write_svg_chart(const std::string& path, const std::string& title,
                            const std::vector<SvgSeries>& series, bool log_y = false) {
    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                    "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};
    const int width = 720, height = 440, left = 60, right = 20, top = 40, bottom = 40;
    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
    double ymin = xmin, ymax = -xmin;
    for (const auto& s : series)
        for (size_t i = 0; i < s.x.size(); ++i) {
            double yv = log_y ? std::log10(std::max(s.y[i], 1e-300)) : s.y[i];
            xmin = std::min(xmin, s.x[i]);
            xmax = std::max(xmax, s.x[i]);
            ymin = std::min(ymin, yv);
            ymax = std::max(ymax, yv);
        }
    if (!(xmax > xmin)) xmax = xmin + 1;
    if (!(ymax > ymin)) ymax = ymin + 1;
    auto sx = [&](double v) { return left + (v - xmin) / (xmax - xmin) * (width - left - right); };
    auto sy = [&](double v) {
        double t = log_y ? std::log10(std::max(v, 1e-300)) : v;
        return height - bottom - (t - ymin) / (ymax - ymin) * (height - top - bottom);
    };

    std::ofstream out(path);
    if (!out) throw Error("cannot open " + path);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">"
        << title << "</text>\n";
    out << "<line x1=\"" << left << "\" y1=\"" << height - bottom << "\" x2=\"" << width - right
        << "\" y2=\"" << height - bottom << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\""
        << height - bottom << "\" stroke=\"black\"/>\n";
    for (size_t si = 0; si < series.size(); ++si) {
        const auto& s = series[si];
        const char* color = palette[si % 8];
        out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        for (size_t i = 0; i < s.x.size(); ++i) out << sx(s.x[i]) << "," << sy(s.y[i]) << " ";
        out << "\"/>\n";
        out << "<text x=\"" << width - right - 150 << "\" y=\"" << top + 16 * (si + 1)
            << "\" font-family=\"sans-serif\" font-size=\"12\" fill=\"" << color << "\">" << s.label
            << "</text>\n";
    }
    out << "</svg>\n";
}

}  // namespace molo
