#pragma once
// Planning tree search over imagined scenes: greedy depth-first search, an
// exhaustive backtracking oracle, and the random placement baseline.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <json.hpp>
#include <optional>
#include <vector>

#include "simip/imagination.hpp"
#include "simip/validation.hpp"

namespace simip {

enum class PlanMode { Greedy, Exhaustive };

struct PlannerConfig {
    std::uint64_t seed = 0;
    int rotation_step = kRotationStep;
    bool allow_flip = true;
    bool allow_stacking = true;
    int max_depth = 12;
    PlanMode mode = PlanMode::Greedy;
    int jitter_samples = 2;       // extra random targets per region besides its anchor
    int threshold = -1;           // conflict threshold; negative selects the resolution default
    std::size_t max_expansions = 20000;  // exhaustive budget (nodes expanded)
    std::size_t max_failed_nodes = 6;    // failed attempts recorded per expansion

    void check() const;
    nlohmann::json to_json() const;
    static PlannerConfig from_json(const nlohmann::json& j);
};

struct PlanNode {
    int id = 0;
    int parent = -1;
    int depth = 0;
    Scene scene;
    std::optional<Step> step;
    std::optional<ValidationResult> validation;
    std::vector<int> children;
    bool on_plan = false;
};

struct PlanningTree {
    std::vector<PlanNode> nodes;  // nodes[0] is the root
    const PlanNode& root() const { return nodes.front(); }
};

struct Plan {
    std::vector<int> node_ids;     // root to leaf
    std::vector<Scene> scenes;     // scenes[0] initial, scenes[k] after step k
    std::vector<Step> steps;
    std::vector<ValidationResult> validations;
    bool complete = false;
    bool depth_exceeded = false;
    bool budget_exhausted = false;

    std::size_t size() const { return steps.size(); }
    // Flip + rotation + placement counts, as primitive actions.
    std::vector<Action> actions() const;
};

struct PlanResult {
    PlanningTree tree;
    Plan plan;
};

// Rotation deltas in sweep order: 0, +s, -s, +2s, ..., 180.
std::vector<int> rotation_sweep(int step);

PlanResult plan(const Scene& initial, const PlannerConfig& cfg);
PlanResult plan(const Scene& initial, const std::function<Scene(const Scene&)>& perceive, const PlannerConfig& cfg);

// |outside_box(initial)| random placements without validity checks during
// construction; validations are filled in afterwards.
Plan baseline_plan(const Scene& initial, const PlannerConfig& cfg);

// Regions a subtree may be placed into, as seen with that subtree lifted out.
struct PlacementRegion {
    std::string name;
    Component component;
};
std::vector<PlacementRegion> placement_regions(const Scene& scene, int object, const PlannerConfig& cfg);

// Writes node_<k>.png per node (plan nodes first, k = 0..n) and tree.txt.
void dump_tree(const PlanningTree& tree, const std::filesystem::path& dir);

// Re-checks every step of a plan against its own scenes.
bool plan_is_consistent(const Plan& plan, int threshold);

}  // namespace simip
