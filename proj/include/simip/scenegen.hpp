#pragma once
// Procedural top-view packing scenes with ground-truth layers, affordances and
// a packing certificate (one Step per object that starts outside the box).

#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <random>
#include <vector>

#include "simip/imagination.hpp"
#include "simip/scene.hpp"

namespace simip {

struct GenConfig {
    std::uint64_t seed = 1;
    int width = kReferenceWidth;
    int height = kReferenceHeight;
    int min_outside = 1;  // objects (stack roots) that start outside the box
    int max_outside = 5;
    int min_in_box = 0;   // objects that start packed
    int max_in_box = 2;
    int compartments = 5;
    std::vector<ClassLabel> palette = {ClassLabel::Can,   ClassLabel::Cup,    ClassLabel::Plate,
                                       ClassLabel::Bowl,  ClassLabel::Apple,  ClassLabel::Cuboid};
    bool guarantee_feasible = true;
    double stack_prob = 0.15;     // an outside container starts with a content inside
    double overlap_prob = 0.0;    // an outside object starts partially on top of another
    double vertical_prob = 0.25;  // a cuboid slot requires the vertical pose
    int margin_min = 4;           // compartment clearance, reference pixels
    int margin_max = 14;
    int max_retries = 200;
    bool uniform_compartments = true;  // rooms share the largest extent; vertical-pose slots stay fitted

    // Throws InvalidArgument when the ranges are inconsistent.
    void check() const;
    nlohmann::json to_json() const;
    static GenConfig from_json(const nlohmann::json& j);
};

struct GeneratedScene {
    Scene scene;
    std::vector<Step> certificate;  // replays to a packed box when guarantee_feasible
    std::uint64_t seed = 0;

    nlohmann::json certificate_json() const;
};

std::vector<Step> certificate_from_json(const nlohmann::json& j);

// Deterministic in config.seed. Throws Infeasible when objects cannot be laid
// out within the retry budget.
GeneratedScene generate_scene(const GenConfig& config);
// Scene with exactly `outside` stack roots outside the box.
GeneratedScene generate_scene(const GenConfig& config, int outside);

// Replays a certificate through apply_step + validate. Returns the index of the
// first failing step, or -1 when every step validates and the goal holds.
int replay_certificate(const Scene& scene, const std::vector<Step>& certificate);

// Per-scene seed derived from a master seed (splitmix64).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

// Outside-count for scene i of n, cycling over [min_outside, max_outside].
int stratified_outside(const GenConfig& config, int index);

// Writes n manifests to dir/scene_XXXX/scene.manifest; returns their paths.
std::vector<std::filesystem::path> generate_dataset(const GenConfig& config, int n_scenes,
                                                    const std::filesystem::path& dir);

}  // namespace simip
