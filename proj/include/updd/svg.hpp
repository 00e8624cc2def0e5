#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "updd/data.hpp"

namespace updd {

struct Polyline {
    std::vector<Vec2> points;
    std::string color = "#000000";
    double width = 1.5;
    bool dashed = false;
    double opacity = 1.0;
};

struct PlotPanel {
    std::string title;
    std::vector<Polyline> lines;
};

// Panels stacked vertically, each fitted to its own bounding box with y up.
std::string render_svg(const std::vector<PlotPanel>& panels, int panel_width = 480, int panel_height = 360);
void write_svg(const std::filesystem::path& path, const std::vector<PlotPanel>& panels);

}  // namespace updd
