#include "wmmon/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace wmmon {

namespace {

constexpr int kPanelW = 420;
constexpr int kPanelH = 180;
constexpr int kMarginL = 52;
constexpr int kMarginR = 12;
constexpr int kMarginT = 26;
constexpr int kMarginB = 24;

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

std::string tick(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4g", v);
    return buf;
}

struct Range {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();

    void include(double v) {
        if (!std::isfinite(v)) return;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    void finalize() {
        if (!std::isfinite(lo)) { lo = 0.0; hi = 1.0; }
        if (hi - lo < 1e-12) { lo -= 0.5; hi += 0.5; }
    }
};

}  // namespace

void write_svg_panels(const std::vector<PlotPanel>& panels, int columns,
                      const std::string& path) {
    if (panels.empty() || columns <= 0) throw std::invalid_argument("nothing to plot");
    const int rows = (static_cast<int>(panels.size()) + columns - 1) / columns;
    const int width = columns * kPanelW;
    const int height = rows * kPanelH;

    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write plot: " + path);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
    out << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";

    for (std::size_t p = 0; p < panels.size(); ++p) {
        const PlotPanel& panel = panels[p];
        const int px = (static_cast<int>(p) % columns) * kPanelW;
        const int py = (static_cast<int>(p) / columns) * kPanelH;
        const double x0 = px + kMarginL, x1 = px + kPanelW - kMarginR;
        const double y0 = py + kMarginT, y1 = py + kPanelH - kMarginB;

        Range rx, ry;
        for (const auto& s : panel.series) {
            for (double v : s.x) rx.include(v);
            for (double v : s.y) ry.include(v);
        }
        for (double v : panel.hlines) ry.include(v);
        rx.finalize();
        ry.finalize();

        auto sx = [&](double v) { return x0 + (v - rx.lo) / (rx.hi - rx.lo) * (x1 - x0); };
        auto sy = [&](double v) { return y1 - (v - ry.lo) / (ry.hi - ry.lo) * (y1 - y0); };

        out << "<rect x=\"" << num(x0) << "\" y=\"" << num(y0) << "\" width=\"" << num(x1 - x0)
            << "\" height=\"" << num(y1 - y0)
            << "\" fill=\"none\" stroke=\"#cccccc\" stroke-width=\"1\"/>\n";
        out << "<text x=\"" << num(x0) << "\" y=\"" << num(py + 16.0)
            << "\" font-family=\"sans-serif\" font-size=\"11\">" << panel.title << "</text>\n";
        out << "<text x=\"" << num(px + 4.0) << "\" y=\"" << num(y0 + 10.0)
            << "\" font-family=\"sans-serif\" font-size=\"9\" fill=\"#555555\">" << tick(ry.hi)
            << "</text>\n";
        out << "<text x=\"" << num(px + 4.0) << "\" y=\"" << num(y1)
            << "\" font-family=\"sans-serif\" font-size=\"9\" fill=\"#555555\">" << tick(ry.lo)
            << "</text>\n";
        out << "<text x=\"" << num(x1 - 30.0) << "\" y=\"" << num(y1 + 14.0)
            << "\" font-family=\"sans-serif\" font-size=\"9\" fill=\"#555555\">" << tick(rx.hi)
            << "</text>\n";

        for (double v : panel.vlines) {
            if (v < rx.lo || v > rx.hi) continue;
            out << "<line x1=\"" << num(sx(v)) << "\" y1=\"" << num(y0) << "\" x2=\""
                << num(sx(v)) << "\" y2=\"" << num(y1)
                << "\" stroke=\"#d62728\" stroke-width=\"1\" stroke-dasharray=\"4,3\"/>\n";
        }
        for (double v : panel.hlines) {
            out << "<line x1=\"" << num(x0) << "\" y1=\"" << num(sy(v)) << "\" x2=\"" << num(x1)
                << "\" y2=\"" << num(sy(v))
                << "\" stroke=\"#7f7f7f\" stroke-width=\"1\" stroke-dasharray=\"6,3\"/>\n";
        }

        for (const auto& s : panel.series) {
            if (s.x.empty()) continue;
            out << "<polyline fill=\"none\" stroke=\"" << s.color
                << "\" stroke-width=\"1.2\" points=\"";
            for (std::size_t i = 0; i < s.x.size(); ++i) {
                if (i) out << " ";
                out << num(sx(s.x[i])) << "," << num(sy(s.y[i]));
            }
            out << "\"/>\n";
        }

        // legend
        double lx = x0 + 6.0;
        for (const auto& s : panel.series) {
            out << "<rect x=\"" << num(lx) << "\" y=\"" << num(y0 + 4.0)
                << "\" width=\"10\" height=\"3\" fill=\"" << s.color << "\"/>\n";
            out << "<text x=\"" << num(lx + 13.0) << "\" y=\"" << num(y0 + 9.0)
                << "\" font-family=\"sans-serif\" font-size=\"9\">" << s.label << "</text>\n";
            lx += 13.0 + 7.0 * static_cast<double>(s.label.size()) + 10.0;
        }
    }
    out << "</svg>\n";
    if (!out) throw std::runtime_error("plot write failed: " + path);
}

}  // namespace wmmon
