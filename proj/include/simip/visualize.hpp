#pragma once

#include <filesystem>
#include <vector>

#include "simip/planner.hpp"

namespace simip {

struct StripMarker {
    int panel = 0;
    Point circle_center;
    int radius = 0;
    Point placement;
};

struct PlanStrip {
    Image image;
    int panel_width = 0;
    int gap = 0;
    std::vector<StripMarker> markers;  // one per step, on panels 1..n
};

// First panel is the initial scene, each further panel the scene after one step.
PlanStrip render_plan_strip(const Plan& plan, int gap = 4);
PlanStrip render_plan_strip(const Plan& plan, const std::filesystem::path& out, int gap = 4);

}  // namespace simip
