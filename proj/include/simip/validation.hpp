#pragma once
// Action validation by obstruct-conflict counting, and the packing goal test.

#include <cstddef>

#include "simip/scene.hpp"

namespace simip {

inline constexpr int kReferenceThreshold = 30;

struct ValidationResult {
    bool valid = false;
    std::size_t conflict_pixels = 0;
    int threshold_used = 0;
    friend bool operator==(const ValidationResult&, const ValidationResult&) = default;
};

// round(30 * W*H / (1024*768)), at least 1; 30 at the reference resolution.
int default_threshold(int width, int height);

// |footprint(moved) ∩ Obstruct| where the moved subtree's own layers are left
// out of the affordance composite before intersecting.
std::size_t conflict_area(const Scene& post_scene, int moved_id);

// Per-pixel double loop over the scene, kept as the reference for conflict_area.
std::size_t conflict_area_bruteforce(const Scene& post_scene, int moved_id);

ValidationResult validate(const Scene& post_scene, int moved_id, int threshold);
inline ValidationResult validate(const Scene& post_scene, int moved_id) {
    return validate(post_scene, moved_id, default_threshold(post_scene.width(), post_scene.height()));
}
inline ValidationResult make_result(std::size_t conflict, int threshold) {
    return {conflict < std::size_t(threshold < 0 ? 0 : threshold), conflict, threshold};
}

// Obstruct channel of everything except one subtree, reusable across candidate
// placements of that subtree while the rest of the scene is unchanged.
class ConflictField {
public:
    ConflictField(const Scene& scene, int moved_id);
    std::size_t conflict(const Scene& candidate, int moved_id) const;
    const Mask& obstruct() const { return obstruct_; }

private:
    Mask obstruct_;
};

bool goal_reached(const Scene& scene);

}  // namespace simip
