#include "simip/imagination.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "simip/errors.hpp"

namespace simip {

int action_object(const Action& a) {
    return std::visit([](const auto& v) { return v.object; }, a);
}

std::string describe(const Action& a) {
    struct V {
        std::string operator()(const PickPlace& p) const {
            return "pick_place(" + std::to_string(p.object) + " -> " + p.region + " @" + std::to_string(p.target.x) +
                   "," + std::to_string(p.target.y) + ")";
        }
        std::string operator()(const Rotate& r) const {
            return "rotate(" + std::to_string(r.object) + ", " + std::to_string(r.degrees) + ")";
        }
        std::string operator()(const Flip& f) const { return "flip(" + std::to_string(f.object) + ")"; }
    };
    return std::visit(V{}, a);
}

std::vector<Action> Step::actions() const {
    std::vector<Action> out;
    if (flip) out.push_back(Flip{object});
    if (rotate != 0) out.push_back(Rotate{object, normalize_degrees(rotate)});
    out.push_back(PickPlace{object, target, region});
    return out;
}

bool is_legal_rotation(int degrees) {
    return degrees > 0 && degrees < 360 && degrees % kRotationStep == 0;
}

bool has_grasp(const Scene& scene, const AffordanceMap& map, int id) {
    const ObjectInstance& o = scene.at(id);
    Patch vis = o.patch();
    const BBox box = o.bbox();
    for (const ObjectInstance& p : scene.objects) {
        if (p.z <= o.z || p.id == id) continue;
        const BBox ov = box.intersect(p.bbox());
        if (ov.empty()) continue;
        for (int y = ov.y0; y < ov.y1; ++y)
            for (int x = ov.x0; x < ov.x1; ++x)
                if (p.sprite->mask.at(x - p.origin.x, y - p.origin.y)) vis.mask.at(x - o.origin.x, y - o.origin.y) = 0;
    }
    return count_and(vis, map[Affordance::Grasp]) > 0;
}

bool subtree_out_of_bounds(const Scene& scene, int id) {
    for (int i : subtree(scene, id))
        if (exits_extent(scene.at(i).patch(), scene.width(), scene.height())) return true;
    return false;
}

namespace {

void require_grasp(const Scene& scene, const AffordanceMap& map, int id) {
    if (!has_grasp(scene, map, id))
        throw Error(ErrorKind::PreconditionFailed, "object " + std::to_string(id) + " has no grasp affordance");
}

void require_target(const Scene& scene, const AffordanceMap& map, Point t) {
    if (t.x < 0 || t.y < 0 || t.x >= scene.width() || t.y >= scene.height())
        throw Error(ErrorKind::PreconditionFailed, "target outside the scene");
    bool support = map[Affordance::PlaceOn].at(t.x, t.y) || map[Affordance::Hole].at(t.x, t.y);
    if (!support || map[Affordance::Obstruct].at(t.x, t.y))
        throw Error(ErrorKind::PreconditionFailed,
                    "target (" + std::to_string(t.x) + "," + std::to_string(t.y) + ") lacks place-on/hole");
}

void require_flippable(const Scene& scene, int id) {
    const ObjectInstance& o = scene.at(id);
    if (!scene.dictionary || !scene.dictionary->contains(o.label, other(o.pose)))
        throw Error(ErrorKind::MissingPose, "no " + std::string(to_string(other(o.pose))) + " entry for " +
                                                std::string(to_string(o.label)));
    if (!scene.children_of(id).empty())
        throw Error(ErrorKind::PreconditionFailed, "cannot flip an object that carries others");
}

void do_flip(Scene& s, int id) {
    ObjectInstance& o = *s.find(id);
    Point c2 = o.center2();
    SpritePtr next = s.dictionary ? s.dictionary->find(o.label, other(o.pose)) : nullptr;
    if (!next)
        throw Error(ErrorKind::MissingPose, "no " + std::string(to_string(other(o.pose))) + " entry for " +
                                                std::string(to_string(o.label)));
    o.pose = other(o.pose);
    o.canonical = next;
    o.anchor = {int(std::floor((c2.x - o.canonical->width()) / 2.0)),
                int(std::floor((c2.y - o.canonical->height()) / 2.0))};
    refresh(o);
}

void do_rotate(Scene& s, int id, int degrees) {
    std::set<int> ids = subtree(s, id);
    ObjectInstance& root = *s.find(id);
    const Point r2 = root.center2();
    const double rad = normalize_degrees(degrees) * std::numbers::pi / 180.0;
    const double c = std::cos(rad), sn = std::sin(rad);
    for (int i : ids) {
        ObjectInstance& o = *s.find(i);
        o.rotation = normalize_degrees(o.rotation + degrees);
        if (i != id) {
            // carry the child's center along, same sense as the raster rotation
            double dx = (o.center2().x - r2.x) / 2.0, dy = (o.center2().y - r2.y) / 2.0;
            double nx = c * dx + sn * dy, ny = -sn * dx + c * dy;
            double cx = r2.x / 2.0 + nx, cy = r2.y / 2.0 + ny;
            o.anchor = {int(std::lround(cx - o.canonical->width() / 2.0)),
                        int(std::lround(cy - o.canonical->height() / 2.0))};
        }
        refresh(o);
    }
}

void do_place(Scene& s, int id, Point target) {
    std::set<int> ids = subtree(s, id);
    Point center = footprint_patch(s, id).tight_box().center();
    Point d = target - center;
    // raise the subtree above everything else, keeping its internal order
    std::vector<ObjectInstance*> moved;
    for (int i : ids) moved.push_back(s.find(i));
    std::sort(moved.begin(), moved.end(), [](auto* a, auto* b) { return a->z != b->z ? a->z < b->z : a->id < b->id; });
    int top = -1;
    for (const auto& o : s.objects)
        if (!ids.contains(o.id)) top = std::max(top, o.z);
    for (ObjectInstance* o : moved) {
        o->anchor = o->anchor + d;
        o->origin = o->origin + d;
        o->z = ++top;
    }
    s.find(id)->parent.reset();
    s.find(id)->parent = find_container(s, id);
}

}  // namespace

void check_step_preconditions(const Scene& scene, const AffordanceMap& map, const Step& step) {
    scene.at(step.object);
    require_grasp(scene, map, step.object);
    if (step.rotate != 0 && !is_legal_rotation(normalize_degrees(step.rotate)))
        throw Error(ErrorKind::PreconditionFailed, "illegal rotation " + std::to_string(step.rotate));
    if (step.rotate % kRotationStep != 0)
        throw Error(ErrorKind::PreconditionFailed, "rotation must be a multiple of 15 degrees");
    if (step.flip) require_flippable(scene, step.object);
    require_target(scene, map, step.target);
}

Scene transform_step(const Scene& scene, const Step& step) {
    Scene s = scene;
    if (step.flip) do_flip(s, step.object);
    if (normalize_degrees(step.rotate) != 0) do_rotate(s, step.object, step.rotate);
    do_place(s, step.object, step.target);
    return s;
}

Scene reorient(const Scene& scene, int object, bool flip, int rotate) {
    Scene s = scene;
    s.at(object);
    if (flip) do_flip(s, object);
    if (normalize_degrees(rotate) != 0) do_rotate(s, object, rotate);
    return s;
}

Scene apply_step(const Scene& scene, const AffordanceMap& map, const Step& step) {
    check_step_preconditions(scene, map, step);
    Scene s = transform_step(scene, step);
    if (subtree_out_of_bounds(s, step.object))
        throw Error(ErrorKind::OutOfBounds, "object " + std::to_string(step.object) + " would leave the scene");
    return s;
}

Scene apply_action(const Scene& scene, const AffordanceMap& map, const Action& action) {
    int id = action_object(action);
    scene.at(id);
    require_grasp(scene, map, id);
    Scene s = scene;
    if (const auto* r = std::get_if<Rotate>(&action)) {
        if (!is_legal_rotation(r->degrees))
            throw Error(ErrorKind::PreconditionFailed, "illegal rotation " + std::to_string(r->degrees));
        do_rotate(s, id, r->degrees);
    } else if (std::holds_alternative<Flip>(action)) {
        require_flippable(scene, id);
        do_flip(s, id);
    } else {
        const auto& p = std::get<PickPlace>(action);
        require_target(scene, map, p.target);
        do_place(s, id, p.target);
    }
    if (subtree_out_of_bounds(s, id))
        throw Error(ErrorKind::OutOfBounds, "object " + std::to_string(id) + " would leave the scene");
    return s;
}

Rendering render(const Scene& scene) { return composite(scene); }

}  // namespace simip
