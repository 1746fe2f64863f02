#include "simip/symbolic.hpp"

#include <sstream>

namespace simip {

using nlohmann::json;

namespace {

std::string image_ref(std::size_t k) { return "image_" + std::to_string(k + 1); }

std::string quoted(const std::string& s) { return "\"" + s + "\""; }

std::string bbox_call(const BboxRef& b) { return "Bbox(" + quoted(b.entity) + ", " + quoted(b.image) + ")"; }

json box_json(const BBox& b) { return {b.x0, b.y0, b.x1, b.y1}; }
BBox box_from(const json& j) { return {j.at(0).get<int>(), j.at(1).get<int>(), j.at(2).get<int>(), j.at(3).get<int>()}; }

json ref_json(const BboxRef& r) { return {{"entity", r.entity}, {"image", r.image}, {"box", box_json(r.box)}}; }
BboxRef ref_from(const json& j) {
    return {j.at("entity").get<std::string>(), j.at("image").get<std::string>(), box_from(j.at("box"))};
}

// Bbox of a named entity (object or compartment) as seen in `scene`.
std::optional<BBox> entity_box(const Scene& scene, const std::string& name) {
    if (const ObjectInstance* o = scene.find_by_name(name)) return o->bbox();
    for (const Compartment& c : scene.backdrop->compartments)
        if (c.name == name) return c.bbox;
    return std::nullopt;
}

std::string entity_class(const Scene& scene, const std::string& name) {
    if (const ObjectInstance* o = scene.find_by_name(name)) return std::string(to_string(o->label));
    return std::string(to_string(ClassLabel::Compartment));
}

}  // namespace

std::string SymbolicPlan::listing() const {
    std::ostringstream os;
    for (const SymbolicCommand& c : commands) {
        if (const auto* g = std::get_if<GraspCmd>(&c))
            os << "Grasp(" << quoted(g->class_label) << ", " << bbox_call(g->bbox) << ")\n";
        else if (const auto* r = std::get_if<RotateCmd>(&c))
            os << "Rotate(" << quoted(r->object) << ", " << r->angle << ")\n";
        else if (const auto* f = std::get_if<FlipCmd>(&c))
            os << "Flip(" << quoted(f->object) << ")\n";
        else if (const auto* p = std::get_if<PlaceAtCmd>(&c))
            os << "Place_at(" << quoted(p->class_label) << ", " << bbox_call(p->bbox) << ")\n";
    }
    return os.str();
}

json SymbolicPlan::to_json() const {
    json cmds = json::array();
    for (const SymbolicCommand& c : commands) {
        if (const auto* g = std::get_if<GraspCmd>(&c))
            cmds.push_back({{"op", "grasp"}, {"class", g->class_label}, {"bbox", ref_json(g->bbox)}});
        else if (const auto* r = std::get_if<RotateCmd>(&c))
            cmds.push_back({{"op", "rotate"}, {"object", r->object}, {"angle", r->angle}});
        else if (const auto* f = std::get_if<FlipCmd>(&c))
            cmds.push_back({{"op", "flip"}, {"object", f->object}});
        else if (const auto* p = std::get_if<PlaceAtCmd>(&c))
            cmds.push_back({{"op", "place_at"},
                            {"class", p->class_label},
                            {"bbox", ref_json(p->bbox)},
                            {"center", {p->center.x, p->center.y}}});
    }
    return {{"format", "simip-symbolic/1"}, {"images", image_refs}, {"commands", cmds}};
}

SymbolicPlan SymbolicPlan::from_json(const json& j) {
    SymbolicPlan p;
    try {
        p.image_refs = j.at("images").get<std::vector<std::string>>();
        for (const json& c : j.at("commands")) {
            std::string op = c.at("op").get<std::string>();
            if (op == "grasp")
                p.commands.push_back(GraspCmd{c.at("class").get<std::string>(), ref_from(c.at("bbox"))});
            else if (op == "rotate")
                p.commands.push_back(RotateCmd{c.at("object").get<std::string>(), c.at("angle").get<int>()});
            else if (op == "flip")
                p.commands.push_back(FlipCmd{c.at("object").get<std::string>()});
            else if (op == "place_at")
                p.commands.push_back(PlaceAtCmd{c.at("class").get<std::string>(), ref_from(c.at("bbox")),
                                                {c.at("center").at(0).get<int>(), c.at("center").at(1).get<int>()}});
            else
                throw Error(ErrorKind::InvalidArgument, "unknown symbolic op '" + op + "'");
        }
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Io, std::string("malformed symbolic plan: ") + e.what());
    }
    return p;
}

SymbolicPlan parse(const Plan& plan) {
    SymbolicPlan out;
    if (plan.scenes.size() != plan.steps.size() + 1 || plan.validations.size() != plan.steps.size())
        throw Error(ErrorKind::Refused, "plan is malformed");
    for (std::size_t k = 0; k < plan.validations.size(); ++k)
        if (!plan.validations[k].valid)
            throw Error(ErrorKind::Refused, "step " + std::to_string(k + 1) + " did not pass validation");
    for (std::size_t k = 0; k < plan.scenes.size(); ++k) out.image_refs.push_back(image_ref(k));
    for (std::size_t k = 0; k < plan.steps.size(); ++k) {
        const Scene& before = plan.scenes[k];
        const Scene& after = plan.scenes[k + 1];
        const Step& s = plan.steps[k];
        const ObjectInstance& o = before.at(s.object);
        const ObjectInstance& o2 = after.at(s.object);
        const std::string img = image_ref(k);
        out.commands.push_back(GraspCmd{std::string(to_string(o.label)), {o.name, img, o.bbox()}});
        int angle = signed_degrees(o2.rotation - o.rotation);
        if (angle != 0) out.commands.push_back(RotateCmd{o.name, angle});
        if (o2.pose != o.pose) out.commands.push_back(FlipCmd{o.name});
        auto region_box = entity_box(before, s.region);
        if (!region_box) throw Error(ErrorKind::Refused, "step " + std::to_string(k + 1) + " names unknown region " + s.region);
        out.commands.push_back(PlaceAtCmd{entity_class(before, s.region), {s.region, img, *region_box}, s.target});
    }
    return out;
}

Scene replay(const Scene& initial, const SymbolicPlan& splan, int threshold) {
    if (threshold < 0) threshold = default_threshold(initial.width(), initial.height());
    Scene cur = initial;
    std::optional<Step> open;
    std::string open_name;
    std::size_t image = 0;
    for (std::size_t i = 0; i < splan.commands.size(); ++i) {
        const SymbolicCommand& c = splan.commands[i];
        auto check_ref = [&](const BboxRef& r) {
            if (r.image != image_ref(image))
                throw ReplayError(i, ErrorKind::PreconditionFailed, "expected reference to " + image_ref(image) + ", got " + r.image);
            auto box = entity_box(cur, r.entity);
            if (!box) throw ReplayError(i, ErrorKind::UnknownId, "unknown entity " + r.entity);
            if (*box != r.box) throw ReplayError(i, ErrorKind::ValidationFailed, "bbox of " + r.entity + " does not match " + r.image);
        };
        if (const auto* g = std::get_if<GraspCmd>(&c)) {
            if (open) throw ReplayError(i, ErrorKind::PreconditionFailed, "grasp while holding " + open_name);
            check_ref(g->bbox);
            const ObjectInstance* o = cur.find_by_name(g->bbox.entity);
            if (!o) throw ReplayError(i, ErrorKind::UnknownId, g->bbox.entity + " is not an object");
            if (std::string(to_string(o->label)) != g->class_label)
                throw ReplayError(i, ErrorKind::ValidationFailed, g->bbox.entity + " is not a " + g->class_label);
            open = Step{o->id, false, 0, {}, {}};
            open_name = o->name;
        } else if (const auto* r = std::get_if<RotateCmd>(&c)) {
            if (!open || r->object != open_name) throw ReplayError(i, ErrorKind::PreconditionFailed, "rotate without grasping " + r->object);
            open->rotate = signed_degrees(open->rotate + r->angle);
        } else if (const auto* f = std::get_if<FlipCmd>(&c)) {
            if (!open || f->object != open_name) throw ReplayError(i, ErrorKind::PreconditionFailed, "flip without grasping " + f->object);
            open->flip = !open->flip;
        } else if (const auto* p = std::get_if<PlaceAtCmd>(&c)) {
            if (!open) throw ReplayError(i, ErrorKind::PreconditionFailed, "place without a grasped object");
            check_ref(p->bbox);
            if (entity_class(cur, p->bbox.entity) != p->class_label)
                throw ReplayError(i, ErrorKind::ValidationFailed, p->bbox.entity + " is not a " + p->class_label);
            open->target = p->center;
            open->region = p->bbox.entity;
            Scene next;
            try {
                next = apply_step(cur, render(cur).affordances, *open);
            } catch (const Error& e) {
                throw ReplayError(i, e.kind(), e.what());
            }
            ValidationResult v = validate(next, open->object, threshold);
            if (!v.valid)
                throw ReplayError(i, ErrorKind::ValidationFailed,
                                  "conflict of " + std::to_string(v.conflict_pixels) + " px is not below " + std::to_string(threshold));
            cur = std::move(next);
            open.reset();
            ++image;
        }
    }
    if (open) throw ReplayError(splan.commands.size() - 1, ErrorKind::PreconditionFailed, open_name + " is still held");
    return cur;
}

std::string to_text(const SymbolicPlan& splan) {
    if (splan.commands.empty()) return "nothing needs to be done\n";
    std::ostringstream os;
    auto at = [](const BBox& b) {
        Point c = b.center();
        return "(" + std::to_string(c.x) + "," + std::to_string(c.y) + "), diameter " + std::to_string(b.max_side()) + " px";
    };
    for (const SymbolicCommand& c : splan.commands) {
        if (const auto* g = std::get_if<GraspCmd>(&c))
            os << "pick an object with label " << g->class_label << " at " << at(g->bbox.box) << '\n';
        else if (const auto* r = std::get_if<RotateCmd>(&c))
            os << "rotate " << r->object << " by " << r->angle << " degrees\n";
        else if (const auto* f = std::get_if<FlipCmd>(&c))
            os << "flip " << f->object << " by 90 degrees\n";
        else if (const auto* p = std::get_if<PlaceAtCmd>(&c))
            os << "place it on " << p->bbox.entity << " (label " << p->class_label << ") with center coordinate ("
               << p->center.x << "," << p->center.y << ")\n";
    }
    return os.str();
}

}  // namespace simip
