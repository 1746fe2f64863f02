#pragma once
// Imagined actions on layered scenes: pick & place, rotate and flip.
// Every function returns a new scene; inputs are never modified.

#include <string>
#include <variant>
#include <vector>

#include "simip/scene.hpp"

namespace simip {

inline constexpr int kRotationStep = 15;

struct PickPlace {
    int object = 0;
    Point target;        // where the footprint's bbox center lands
    std::string region;  // name of the placement region (compartment or object)
    friend bool operator==(const PickPlace&, const PickPlace&) = default;
};

struct Rotate {
    int object = 0;
    int degrees = 0;  // one of 15, 30, ..., 345
    friend bool operator==(const Rotate&, const Rotate&) = default;
};

struct Flip {
    int object = 0;
    friend bool operator==(const Flip&, const Flip&) = default;
};

using Action = std::variant<PickPlace, Rotate, Flip>;

int action_object(const Action& a);
std::string describe(const Action& a);

// One planning step on one object: optional flip, optional rotation, then placement.
struct Step {
    int object = 0;
    bool flip = false;
    int rotate = 0;  // signed degrees, multiple of the rotation step; 0 = none
    Point target;
    std::string region;

    std::vector<Action> actions() const;
    friend bool operator==(const Step&, const Step&) = default;
};

bool is_legal_rotation(int degrees);

// Checks preconditions against `map` (the current affordance map) and applies
// the action. Errors: UnknownId, PreconditionFailed (no Grasp on the object,
// target without PlaceOn/Hole or with Obstruct, illegal angle, flipping a
// loaded container), OutOfBounds, MissingPose.
Scene apply_action(const Scene& scene, const AffordanceMap& map, const Action& action);

// Preconditions for the whole step are checked against the pre-step map.
Scene apply_step(const Scene& scene, const AffordanceMap& map, const Step& step);

// Same transforms without precondition or bounds checks; used by the planner to
// score candidates and by ground-truth execution of perceived plans.
Scene transform_step(const Scene& scene, const Step& step);

// Flip and rotation of a step without the placement, unchecked.
Scene reorient(const Scene& scene, int object, bool flip, int rotate);

// Throws PreconditionFailed when the step is not applicable under `map`.
void check_step_preconditions(const Scene& scene, const AffordanceMap& map, const Step& step);

// True if the object's pixels carry Grasp anywhere in `map`.
bool has_grasp(const Scene& scene, const AffordanceMap& map, int id);

// True if some pixel of the subtree rooted at `id` leaves the scene extent.
bool subtree_out_of_bounds(const Scene& scene, int id);

// Post-action image and affordance map (delegates to composite).
Rendering render(const Scene& scene);

}  // namespace simip
