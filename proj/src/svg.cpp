#include "updd/svg.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "updd/errors.hpp"

namespace updd {

namespace {

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

}  // namespace

std::string render_svg(const std::vector<PlotPanel>& panels, int panel_width, int panel_height) {
    const double margin = 24, title_h = 20;
    std::ostringstream os;
    const int total_h = panel_height * static_cast<int>(std::max<size_t>(panels.size(), 1));
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << panel_width << "\" height=\"" << total_h
       << "\" viewBox=\"0 0 " << panel_width << ' ' << total_h << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    char buf[64];
    for (size_t p = 0; p < panels.size(); ++p) {
        const auto& panel = panels[p];
        double x0 = std::numeric_limits<double>::infinity(), y0 = x0, x1 = -x0, y1 = -x0;
        for (const auto& l : panel.lines)
            for (const auto& v : l.points) x0 = std::min(x0, v.x), x1 = std::max(x1, v.x), y0 = std::min(y0, v.y), y1 = std::max(y1, v.y);
        if (!(x1 >= x0)) x0 = y0 = 0, x1 = y1 = 1;
        const double span = std::max({x1 - x0, y1 - y0, 1e-3});
        const double w = panel_width - 2 * margin, h = panel_height - 2 * margin - title_h;
        const double s = std::min(w, h) / span;
        const double top = p * panel_height;
        auto X = [&](double x) { return margin + (x - x0) * s; };
        auto Y = [&](double y) { return top + title_h + margin + h - (y - y0) * s; };

        os << "<g>\n<text x=\"" << margin << "\" y=\"" << top + 16 << "\" font-family=\"sans-serif\" font-size=\"13\">"
           << escape(panel.title) << "</text>\n";
        for (const auto& l : panel.lines) {
            if (l.points.empty()) continue;
            os << "<polyline fill=\"none\" stroke=\"" << l.color << "\" stroke-width=\"" << l.width << '"';
            if (l.dashed) os << " stroke-dasharray=\"4 3\"";
            if (l.opacity < 1) os << " stroke-opacity=\"" << l.opacity << '"';
            os << " points=\"";
            for (size_t i = 0; i < l.points.size(); ++i) {
                std::snprintf(buf, sizeof buf, "%s%.2f,%.2f", i ? " " : "", X(l.points[i].x), Y(l.points[i].y));
                os << buf;
            }
            os << "\"/>\n";
        }
        os << "</g>\n";
    }
    os << "</svg>\n";
    return os.str();
}

void write_svg(const std::filesystem::path& path, const std::vector<PlotPanel>& panels) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << render_svg(panels);
}

}  // namespace updd
