#include "simip/validation.hpp"

#include <cmath>

#include "simip/errors.hpp"

namespace simip {

int default_threshold(int width, int height) {
    double scaled = kReferenceThreshold * double(width) * double(height) /
                    (double(kReferenceWidth) * double(kReferenceHeight));
    return std::max(1, int(std::lround(scaled)));
}

std::size_t conflict_area(const Scene& post_scene, int moved_id) {
    AffordanceMap others = composite_affordances(post_scene, subtree(post_scene, moved_id));
    return count_and(footprint_patch(post_scene, moved_id), others[Affordance::Obstruct]);
}

std::size_t conflict_area_bruteforce(const Scene& post_scene, int moved_id) {
    std::set<int> moved = subtree(post_scene, moved_id);
    const Backdrop& b = *post_scene.backdrop;
    std::vector<const ObjectInstance*> order = draw_order(post_scene);
    std::size_t c = 0;
    for (int y = 0; y < b.height; ++y)
        for (int x = 0; x < b.width; ++x) {
            bool in_footprint = false;
            bool obstruct = b.affordances[Affordance::Obstruct].at(x, y);
            for (const ObjectInstance* o : order) {
                int lx = x - o->origin.x, ly = y - o->origin.y;
                if (!o->sprite->mask.in_bounds(lx, ly) || !o->sprite->mask.at(lx, ly)) continue;
                if (moved.contains(o->id))
                    in_footprint = true;
                else
                    obstruct = o->sprite->affordances[Affordance::Obstruct].at(lx, ly);
            }
            c += in_footprint && obstruct;
        }
    return c;
}

ValidationResult validate(const Scene& post_scene, int moved_id, int threshold) {
    if (threshold < 0) throw Error(ErrorKind::InvalidArgument, "threshold must be non-negative");
    return make_result(conflict_area(post_scene, moved_id), threshold);
}

ConflictField::ConflictField(const Scene& scene, int moved_id)
    : obstruct_(composite_affordances(scene, subtree(scene, moved_id))[Affordance::Obstruct]) {}

std::size_t ConflictField::conflict(const Scene& candidate, int moved_id) const {
    return count_and(footprint_patch(candidate, moved_id), obstruct_);
}

bool goal_reached(const Scene& scene) { return outside_box(scene).empty(); }

}  // namespace simip
