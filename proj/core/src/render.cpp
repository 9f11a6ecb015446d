#include "mvlift/render.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "mvlift/io.hpp"

namespace mvlift {

namespace {

constexpr double kPanelSize = 300.0;
constexpr double kMarginFrac = 0.1;

struct Projected {
    std::vector<Vec2> points;
};

// Orthographic 3D view: slight rotation around the vertical axis so depth is
// visible, then drop the depth coordinate.
Projected flatten(const Landmarks3D& pose) {
    const double yaw = 0.5;
    Projected out;
    out.points.reserve(pose.rows());
    for (Eigen::Index i = 0; i < pose.rows(); ++i) {
        const double x = std::cos(yaw) * pose(i, 0) + std::sin(yaw) * pose(i, 2);
        const double y = pose(i, 1);
        out.points.emplace_back(x, y);
    }
    return out;
}

Projected flatten(const Landmarks2D& pose) {
    Projected out;
    out.points.reserve(pose.rows());
    for (Eigen::Index i = 0; i < pose.rows(); ++i) out.points.emplace_back(pose(i, 0), pose(i, 1));
    return out;
}

// Maps points into a [offset, offset + kPanelSize]^2 box, preserving aspect.
void fit_to_panel(Projected& proj, double x_offset) {
    double min_x = 1e300, max_x = -1e300, min_y = 1e300, max_y = -1e300;
    for (const auto& p : proj.points) {
        min_x = std::min(min_x, p.x());
        max_x = std::max(max_x, p.x());
        min_y = std::min(min_y, p.y());
        max_y = std::max(max_y, p.y());
    }
    const double span = std::max({max_x - min_x, max_y - min_y, 1e-9});
    const double usable = kPanelSize * (1.0 - 2.0 * kMarginFrac);
    const double scale = usable / span;
    const double cx = 0.5 * (min_x + max_x);
    const double cy = 0.5 * (min_y + max_y);
    for (auto& p : proj.points) {
        p.x() = x_offset + kPanelSize / 2.0 + (p.x() - cx) * scale;
        p.y() = kPanelSize / 2.0 + (p.y() - cy) * scale;
    }
}

}  // namespace

void render_pose_svg(const std::filesystem::path& path, const std::vector<RenderPanel>& panels,
                     const std::vector<std::pair<int, int>>& edges) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write " + path.string());

    const double width = kPanelSize * static_cast<double>(panels.size());
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << kPanelSize + 24.0 << "\" viewBox=\"0 0 " << width << " " << kPanelSize + 24.0
        << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

    const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c"};
    for (size_t i = 0; i < panels.size(); ++i) {
        const auto& panel = panels[i];
        Projected proj;
        if (panel.pose2d) {
            proj = flatten(*panel.pose2d);
        } else if (panel.pose3d) {
            proj = flatten(*panel.pose3d);
        } else {
            continue;
        }
        const double x_offset = kPanelSize * static_cast<double>(i);
        fit_to_panel(proj, x_offset);
        const char* color = colors[i % 3];

        for (const auto& [child, parent] : edges) {
            if (child < 0 || parent < 0 || static_cast<size_t>(child) >= proj.points.size() ||
                static_cast<size_t>(parent) >= proj.points.size()) {
                continue;
            }
            out << "<line x1=\"" << format_double(proj.points[child].x()) << "\" y1=\""
                << format_double(proj.points[child].y()) << "\" x2=\""
                << format_double(proj.points[parent].x()) << "\" y2=\""
                << format_double(proj.points[parent].y()) << "\" stroke=\"" << color
                << "\" stroke-width=\"2\"/>\n";
        }
        for (const auto& p : proj.points) {
            out << "<circle cx=\"" << format_double(p.x()) << "\" cy=\""
                << format_double(p.y()) << "\" r=\"3\" fill=\"" << color << "\"/>\n";
        }
        out << "<text x=\"" << x_offset + kPanelSize / 2.0 << "\" y=\"" << kPanelSize + 16.0
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">"
            << panel.title << "</text>\n";
    }
    out << "</svg>\n";
}

}  // namespace mvlift
