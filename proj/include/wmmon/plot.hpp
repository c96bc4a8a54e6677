#pragma once

#include <string>
#include <vector>

namespace wmmon {

// Minimal static vector plots: small-multiple line panels written as SVG.

struct PlotSeries {
    std::string label;
    std::string color;  // e.g. "#1f77b4"
    std::vector<double> x;
    std::vector<double> y;
};

struct PlotPanel {
    std::string title;
    std::vector<PlotSeries> series;
    std::vector<double> vlines;  // e.g. perturbation onsets
    std::vector<double> hlines;  // e.g. thresholds
};

void write_svg_panels(const std::vector<PlotPanel>& panels, int columns,
                      const std::string& path);

}  // namespace wmmon
