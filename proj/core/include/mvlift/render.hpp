#pragma once

#include <filesystem>
#include <optional>
#include <utility>
#include <vector>

#include "mvlift/types.hpp"

namespace mvlift {

/// Side-by-side SVG rendering of a 2D detection and one or two 3D poses
/// (typically ground truth and prediction). 3D poses are drawn with a fixed
/// orthographic view. Edges are (child, parent) landmark index pairs; an
/// empty edge list draws landmarks only.
struct RenderPanel {
    std::string title;
    std::optional<Landmarks2D> pose2d;
    std::optional<Landmarks3D> pose3d;
};

void render_pose_svg(const std::filesystem::path& path, const std::vector<RenderPanel>& panels,
                     const std::vector<std::pair<int, int>>& edges);

}  // namespace mvlift
