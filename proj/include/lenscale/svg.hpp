#pragma once

// Minimal SVG line charts for the curve families written by the CLI. The CSV
// next to each chart is the data of record; the chart is for looking at.

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "lenscale/core.hpp"

namespace lenscale::svg {

struct Series {
    std::string label;
    std::vector<double> x, y;
    bool dashed = false;
    bool markers = false;  ///< dots instead of a polyline
};

struct Chart {
    std::string title, x_label, y_label;
    std::vector<Series> series;
    double width = 640, height = 440;
};

namespace detail {

inline std::string fmt(double v) {
    std::ostringstream os;
    os.precision(4);
    os << v;
    return os.str();
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

/// Round-number tick spacing giving about `target` intervals.
inline double tick_step(double span, int target = 5) {
    if (!(span > 0.0)) return 1.0;
    const double raw = span / target;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    for (double m : {1.0, 2.0, 5.0, 10.0})
        if (raw <= m * mag) return m * mag;
    return 10.0 * mag;
}

inline constexpr std::array<const char*, 8> kPalette{"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                                      "#ff7f0e", "#17becf", "#8c564b", "#7f7f7f"};

}  // namespace detail

inline std::string render(const Chart& c) {
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    for (const auto& s : c.series)
        for (std::size_t k = 0; k < s.x.size() && k < s.y.size(); ++k) {
            if (!std::isfinite(s.x[k]) || !std::isfinite(s.y[k])) continue;
            x0 = std::min(x0, s.x[k]);
            x1 = std::max(x1, s.x[k]);
            y0 = std::min(y0, s.y[k]);
            y1 = std::max(y1, s.y[k]);
        }
    if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    if (x1 - x0 < 1e-12) x0 -= 0.5, x1 += 0.5;
    if (y1 - y0 < 1e-12) y0 -= 0.5, y1 += 0.5;
    const double ml = 64, mr = 150, mt = 36, mb = 48;
    const double pw = c.width - ml - mr, ph = c.height - mt - mb;
    auto X = [&](double v) { return ml + (v - x0) / (x1 - x0) * pw; };
    auto Y = [&](double v) { return mt + (1.0 - (v - y0) / (y1 - y0)) * ph; };
    using detail::fmt;

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(c.width) << "\" height=\"" << fmt(c.height)
       << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << fmt(ml + pw / 2) << "\" y=\"20\" text-anchor=\"middle\" font-size=\"13\">"
       << detail::escape(c.title) << "</text>\n";
    os << "<rect x=\"" << fmt(ml) << "\" y=\"" << fmt(mt) << "\" width=\"" << fmt(pw) << "\" height=\"" << fmt(ph)
       << "\" fill=\"none\" stroke=\"black\"/>\n";
    const double dx = detail::tick_step(x1 - x0), dy = detail::tick_step(y1 - y0);
    for (double v = std::ceil(x0 / dx - 1e-9) * dx; v <= x1 + 1e-9 * dx; v += dx)
        os << "<line x1=\"" << fmt(X(v)) << "\" y1=\"" << fmt(mt + ph) << "\" x2=\"" << fmt(X(v)) << "\" y2=\""
           << fmt(mt + ph + 4) << "\" stroke=\"black\"/><text x=\"" << fmt(X(v)) << "\" y=\"" << fmt(mt + ph + 16)
           << "\" text-anchor=\"middle\">" << fmt(std::abs(v) < 1e-12 ? 0.0 : v) << "</text>\n";
    for (double v = std::ceil(y0 / dy - 1e-9) * dy; v <= y1 + 1e-9 * dy; v += dy)
        os << "<line x1=\"" << fmt(ml - 4) << "\" y1=\"" << fmt(Y(v)) << "\" x2=\"" << fmt(ml) << "\" y2=\""
           << fmt(Y(v)) << "\" stroke=\"black\"/><text x=\"" << fmt(ml - 6) << "\" y=\"" << fmt(Y(v) + 4)
           << "\" text-anchor=\"end\">" << fmt(std::abs(v) < 1e-12 ? 0.0 : v) << "</text>\n";
    os << "<text x=\"" << fmt(ml + pw / 2) << "\" y=\"" << fmt(c.height - 10) << "\" text-anchor=\"middle\">"
       << detail::escape(c.x_label) << "</text>\n";
    os << "<text transform=\"translate(16," << fmt(mt + ph / 2) << ") rotate(-90)\" text-anchor=\"middle\">"
       << detail::escape(c.y_label) << "</text>\n";

    for (std::size_t s = 0; s < c.series.size(); ++s) {
        const auto& ser = c.series[s];
        const char* colour = detail::kPalette[s % detail::kPalette.size()];
        if (ser.markers) {
            for (std::size_t k = 0; k < ser.x.size() && k < ser.y.size(); ++k)
                if (std::isfinite(ser.x[k]) && std::isfinite(ser.y[k]))
                    os << "<circle cx=\"" << fmt(X(ser.x[k])) << "\" cy=\"" << fmt(Y(ser.y[k]))
                       << "\" r=\"2.5\" fill=\"" << colour << "\"/>\n";
        } else {
            // Non-finite values break the line into separate runs.
            std::string pts;
            auto flush = [&] {
                if (!pts.empty())
                    os << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.5\""
                       << (ser.dashed ? " stroke-dasharray=\"5,3\"" : "") << " points=\"" << pts << "\"/>\n";
                pts.clear();
            };
            for (std::size_t k = 0; k < ser.x.size() && k < ser.y.size(); ++k) {
                if (!std::isfinite(ser.x[k]) || !std::isfinite(ser.y[k])) {
                    flush();
                    continue;
                }
                pts += fmt(X(ser.x[k])) + "," + fmt(Y(ser.y[k])) + " ";
            }
            flush();
        }
        const double ly = mt + 10 + 16.0 * static_cast<double>(s);
        os << "<line x1=\"" << fmt(ml + pw + 10) << "\" y1=\"" << fmt(ly) << "\" x2=\"" << fmt(ml + pw + 30)
           << "\" y2=\"" << fmt(ly) << "\" stroke=\"" << colour << "\" stroke-width=\"2\""
           << (ser.dashed ? " stroke-dasharray=\"5,3\"" : "") << "/><text x=\"" << fmt(ml + pw + 34) << "\" y=\""
           << fmt(ly + 4) << "\">" << detail::escape(ser.label) << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

inline void write(const std::filesystem::path& path, const Chart& c) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out << render(c);
    if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace lenscale::svg
