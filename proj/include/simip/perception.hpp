#pragma once
// The planner's view of a scene: oracle reports from ground truth, a seeded
// corruption model, amodal completion from the pose dictionary, quality
// metrics, and the belief scene assembled from a report.

#include <array>
#include <cstdint>
#include <json.hpp>
#include <map>
#include <vector>

#include "simip/scene.hpp"

namespace simip {

struct Detection {
    int source_id = -1;  // ground-truth object it stems from (bookkeeping for scoring only)
    std::string name;
    ClassLabel label = ClassLabel::Apple;
    Pose pose = Pose::Horizontal;
    double confidence = 1.0;
    BBox bbox;        // scene coordinates
    Sprite layer;     // bbox-sized mask, appearance and affordances of the layer
    int z = 0;        // depth rank, larger is closer to the camera
    int rotation = 0; // estimated in-plane rotation

    // Set when the whole layer is known exactly as canonical + rotation + anchor.
    SpritePtr canonical;
    Point anchor;

    bool completed = false;   // occluded pixels were restored
    bool incomplete = false;  // restoration was requested but impossible
    bool split = false;
    bool misclassified = false;
    bool jittered = false;

    Patch mask() const { return {{bbox.x0, bbox.y0}, layer.mask}; }
    bool entity_exact() const { return !split && !misclassified && !jittered; }
};

struct RegionDetection {
    std::string name;
    BBox bbox;
    double confidence = 1.0;
};

struct PerceptionReport {
    int width = 0;
    int height = 0;
    std::vector<Detection> objects;
    std::vector<RegionDetection> compartments;
    Image image;
    AffordanceMap affordances;

    std::size_t detection_count() const { return objects.size() + compartments.size(); }
};

struct CorruptionConfig {
    double miss_prob = 0.0;
    double split_prob = 0.0;
    double misclass_prob = 0.0;
    int boundary_jitter = 0;      // pixels of erosion or dilation per detection mask
    int affordance_jitter = 0;    // boundary displacement on affordance channels, pixels
    double affordance_prob = 0.5; // fraction of 16x16 cells whose boundary is displaced
    std::uint64_t seed = 0;

    void check() const;
    bool is_identity() const;
    nlohmann::json to_json() const;
    static CorruptionConfig from_json(const nlohmann::json& j);
};

PerceptionReport perceive_oracle(const Scene& scene);

PerceptionReport corrupt(const PerceptionReport& report, const CorruptionConfig& cfg);

// Restores occluded pixels from the (class, pose) dictionary entry, rotated by
// the detection's estimated rotation and fitted to its bbox. Disabled leaves
// the report untouched.
PerceptionReport complete_objects(const Scene& scene, const PerceptionReport& report, bool enabled,
                                  const PoseDictionary& dict);

struct PerceptionQuality {
    double affordance_miou = 0.0;
    std::array<double, 4> channel_iou{};  // NaN for channels with empty union
    double instance_miou = 0.0;
    double detection_score = 0.0;
};

PerceptionQuality perception_quality(const PerceptionReport& report, const Scene& ground_truth);

// Scene the planner imagines on. Object ids are 1..n in depth order.
struct Belief {
    Scene scene;
    std::map<int, int> detection;        // belief id -> index into report.objects
    std::map<int, int> rotation_offset;  // belief id -> rotation baked into its canonical
};

Belief build_belief(const PerceptionReport& report, const Scene& ground_truth);

// Oracle, optional corruption, optional completion, belief.
struct PerceptionSettings {
    CorruptionConfig corruption;
    bool completion = true;
};
PerceptionReport perceive(const Scene& scene, const PerceptionSettings& settings);

// Searches corruption strength so that the mean affordance mIoU over `scenes`
// lands near `target`. Returns `base` with affordance_jitter/affordance_prob set;
// a nonzero base.affordance_jitter is kept and only the cell fraction is searched.
CorruptionConfig calibrate_affordance_noise(const std::vector<Scene>& scenes, double target,
                                            const CorruptionConfig& base = {});

}  // namespace simip
