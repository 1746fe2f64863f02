#include "simip/scene.hpp"

#include <algorithm>
#include <mutex>

#include "simip/errors.hpp"
#include "simip/kernels.hpp"

namespace simip {

namespace {

constexpr std::array<std::string_view, kAffordanceCount> kAffNames = {"grasp", "place-on", "obstruct",
                                                                     "hole"};
constexpr std::array<std::string_view, 8> kClassNames = {"can",   "cup", "plate",  "bowl",
                                                         "apple", "box", "cuboid", "compartment"};

}  // namespace

std::string_view to_string(Affordance a) { return kAffNames[std::size_t(a)]; }
std::string_view to_string(ClassLabel c) { return kClassNames[std::size_t(c)]; }
std::string_view to_string(Pose p) { return p == Pose::Horizontal ? "horizontal" : "vertical"; }

Affordance parse_affordance(std::string_view s) {
    for (std::size_t i = 0; i < kAffNames.size(); ++i)
        if (kAffNames[i] == s) return Affordance(i);
    throw Error(ErrorKind::InvalidArgument, "unknown affordance '" + std::string(s) + "'");
}

ClassLabel parse_class(std::string_view s) {
    for (std::size_t i = 0; i < kClassNames.size(); ++i)
        if (kClassNames[i] == s) return ClassLabel(i);
    throw Error(ErrorKind::InvalidArgument, "unknown class '" + std::string(s) + "'");
}

Pose parse_pose(std::string_view s) {
    if (s == "horizontal") return Pose::Horizontal;
    if (s == "vertical") return Pose::Vertical;
    throw Error(ErrorKind::InvalidArgument, "unknown pose '" + std::string(s) + "'");
}

AffordanceMap::AffordanceMap(int width, int height) {
    for (auto& c : channels) c = Mask(width, height);
}

void Sprite::check(bool require_tight) const {
    const int w = mask.width(), h = mask.height();
    if (w < 1 || h < 1) throw Error(ErrorKind::InvalidScene, "sprite has empty extent");
    if (appearance.width() != w || appearance.height() != h)
        throw Error(ErrorKind::InvalidScene, "appearance extent differs from mask");
    if (!mask.is_binary()) throw Error(ErrorKind::InvalidScene, "sprite mask is not binary");
    if (mask.count() == 0) throw Error(ErrorKind::InvalidScene, "sprite mask is empty");
    for (const auto& ch : affordances.channels) {
        if (ch.width() != w || ch.height() != h)
            throw Error(ErrorKind::InvalidScene, "affordance extent differs from mask");
        if (!ch.is_binary()) throw Error(ErrorKind::InvalidScene, "affordance mask is not binary");
        if (!is_subset(ch, mask)) throw Error(ErrorKind::InvalidScene, "affordance outside object mask");
    }
    if (require_tight && !(mask.bounds() == mask.extent()))
        throw Error(ErrorKind::InvalidScene, "sprite mask is not bbox-tight");
}

Sprite rotate_sprite(const Sprite& s, int degrees, Point& offset) {
    RotatedGrid g = rotated_grid(s.width(), s.height(), degrees);
    Sprite r;
    r.mask = rotate_nearest(s.mask, degrees);
    Image app = rotate_bilinear(s.appearance, degrees);
    for (int a = 0; a < kAffordanceCount; ++a) {
        r.affordances.channels[a] = rotate_nearest(s.affordances.channels[a], degrees);
        kernels::and_into(r.affordances.channels[a].data(), r.mask.data());
    }
    BBox b = r.mask.bounds();
    if (b.empty()) throw Error(ErrorKind::InvalidScene, "rotation produced an empty mask");
    offset = g.shift + Point{b.x0, b.y0};
    Sprite out;
    out.mask = crop(r.mask, b);
    out.appearance = crop(app, b);
    for (int y = 0; y < out.height(); ++y)
        for (int x = 0; x < out.width(); ++x)
            if (!out.mask.at(x, y)) out.appearance.set_pixel(x, y, {0, 0, 0});
    for (int a = 0; a < kAffordanceCount; ++a) out.affordances.channels[a] = crop(r.affordances.channels[a], b);
    return out;
}

void PoseDictionary::insert(ClassLabel c, Pose p, SpritePtr sprite) {
    if (!sprite) throw Error(ErrorKind::InvalidArgument, "null dictionary sprite");
    sprite->check(true);
    entries_[{c, p}] = std::move(sprite);
}

SpritePtr PoseDictionary::find(ClassLabel c, Pose p) const {
    auto it = entries_.find({c, p});
    return it == entries_.end() ? nullptr : it->second;
}

void PoseDictionary::check() const {
    for (const auto& [key, sprite] : entries_)
        if (key.second == Pose::Vertical && !contains(key.first, Pose::Horizontal))
            throw Error(ErrorKind::InvalidScene,
                        "dictionary has vertical but no horizontal entry for " + std::string(to_string(key.first)));
}

namespace {

struct RotationCache {
    std::mutex mu;
    std::map<std::pair<const Sprite*, int>, std::pair<SpritePtr, std::pair<SpritePtr, Point>>> entries;
};

RotationCache& rotation_cache() {
    static RotationCache c;
    return c;
}

}  // namespace

void refresh(ObjectInstance& obj) {
    if (!obj.canonical) throw Error(ErrorKind::InvalidScene, "object without canonical sprite");
    obj.rotation = normalize_degrees(obj.rotation);
    if (obj.rotation == 0) {
        obj.sprite = obj.canonical;
        obj.origin = obj.anchor;
        return;
    }
    auto& cache = rotation_cache();
    std::pair<const Sprite*, int> key{obj.canonical.get(), obj.rotation};
    {
        std::lock_guard lock(cache.mu);
        auto it = cache.entries.find(key);
        if (it != cache.entries.end()) {
            obj.sprite = it->second.second.first;
            obj.origin = obj.anchor + it->second.second.second;
            return;
        }
    }
    Point off;
    auto rotated = std::make_shared<const Sprite>(rotate_sprite(*obj.canonical, obj.rotation, off));
    {
        std::lock_guard lock(cache.mu);
        if (cache.entries.size() > 8192) cache.entries.clear();
        // The entry holds the canonical alive, so the raw-pointer key cannot be reused.
        cache.entries[key] = {obj.canonical, {rotated, off}};
    }
    obj.sprite = std::move(rotated);
    obj.origin = obj.anchor + off;
}

const ObjectInstance* Scene::find(int id) const {
    for (const auto& o : objects)
        if (o.id == id) return &o;
    return nullptr;
}

ObjectInstance* Scene::find(int id) {
    for (auto& o : objects)
        if (o.id == id) return &o;
    return nullptr;
}

const ObjectInstance& Scene::at(int id) const {
    const ObjectInstance* o = find(id);
    if (!o) throw Error(ErrorKind::UnknownId, "object id " + std::to_string(id));
    return *o;
}

const ObjectInstance* Scene::find_by_name(std::string_view name) const {
    for (const auto& o : objects)
        if (o.name == name) return &o;
    return nullptr;
}

std::vector<int> Scene::children_of(int id) const {
    std::vector<int> out;
    for (const auto& o : objects)
        if (o.parent && *o.parent == id) out.push_back(o.id);
    return out;
}

int Scene::top_z() const {
    int z = -1;
    for (const auto& o : objects) z = std::max(z, o.z);
    return z;
}

namespace {

std::size_t count_and_patches(const Patch& a, const Patch& b) {
    BBox o = a.box().intersect(b.box());
    if (o.empty()) return 0;
    const auto& k = kernels::active();
    std::size_t n = std::size_t(o.width()), c = 0;
    for (int y = o.y0; y < o.y1; ++y)
        c += k.count_and(a.mask.row(y - a.origin.y).data() + (o.x0 - a.origin.x),
                         b.mask.row(y - b.origin.y).data() + (o.x0 - b.origin.x), n);
    return c;
}

}  // namespace

std::vector<const ObjectInstance*> draw_order(const Scene& scene) {
    std::vector<const ObjectInstance*> order;
    order.reserve(scene.objects.size());
    for (const auto& o : scene.objects) order.push_back(&o);
    std::stable_sort(order.begin(), order.end(),
                     [](const ObjectInstance* a, const ObjectInstance* b) { return a->z != b->z ? a->z < b->z : a->id < b->id; });
    for (std::size_t i = 0; i + 1 < order.size(); ++i)
        for (std::size_t j = i + 1; j < order.size() && order[j]->z == order[i]->z; ++j)
            if (count_and_patches(order[i]->patch(), order[j]->patch()) > 0)
                throw Error(ErrorKind::AmbiguousOrder, "objects " + std::to_string(order[i]->id) + " and " +
                                                           std::to_string(order[j]->id) + " overlap at equal z");
    return order;
}

void check_scene(const Scene& scene) {
    if (!scene.backdrop) throw Error(ErrorKind::InvalidScene, "scene without backdrop");
    const Backdrop& b = *scene.backdrop;
    if (b.width < 1 || b.height < 1) throw Error(ErrorKind::InvalidScene, "scene extent must be positive");
    if (b.image.width() != b.width || b.image.height() != b.height)
        throw Error(ErrorKind::InvalidScene, "background image extent mismatch");
    if (b.box_region.width() != b.width || b.box_region.height() != b.height)
        throw Error(ErrorKind::InvalidScene, "box region extent mismatch");
    for (const auto& ch : b.affordances.channels)
        if (ch.width() != b.width || ch.height() != b.height || !ch.is_binary())
            throw Error(ErrorKind::InvalidScene, "background affordance channel invalid");
    for (const auto& c : b.compartments)
        if (!is_subset(c.region, b.box_region))
            throw Error(ErrorKind::InvalidScene, "compartment " + c.name + " leaves the box region");
    if (scene.dictionary) scene.dictionary->check();

    std::set<int> ids;
    for (const auto& o : scene.objects) {
        if (!ids.insert(o.id).second) throw Error(ErrorKind::InvalidScene, "duplicate object id " + std::to_string(o.id));
        if (o.label == ClassLabel::Compartment)
            throw Error(ErrorKind::InvalidScene, "compartment class on a movable layer");
        if (!o.sprite || !o.canonical) throw Error(ErrorKind::InvalidScene, "object without rasters");
        o.canonical->check(true);
        o.sprite->check(true);
        if (o.rotation < 0 || o.rotation >= 360) throw Error(ErrorKind::InvalidScene, "rotation out of range");
    }
    for (const auto& o : scene.objects) {
        if (!o.parent) continue;
        const ObjectInstance* p = scene.find(*o.parent);
        if (!p) throw Error(ErrorKind::InvalidScene, "object " + std::to_string(o.id) + " has unknown parent");
        if (p->z >= o.z) throw Error(ErrorKind::InvalidScene, "child below its parent");
        // acyclic: walk up at most |objects| steps
        int steps = 0;
        const ObjectInstance* cur = &o;
        while (cur->parent) {
            cur = scene.find(*cur->parent);
            if (!cur || ++steps > int(scene.objects.size()))
                throw Error(ErrorKind::InvalidScene, "containment cycle");
        }
    }
    draw_order(scene);
}

namespace {

void paint(Rendering* r, AffordanceMap& aff, const ObjectInstance& o, int width, int height) {
    const Sprite& s = *o.sprite;
    int x0 = std::max(0, o.origin.x), x1 = std::min(width, o.origin.x + s.width());
    int y0 = std::max(0, o.origin.y), y1 = std::min(height, o.origin.y + s.height());
    if (x1 <= x0 || y1 <= y0) return;
    const auto& k = kernels::active();
    std::size_t n = std::size_t(x1 - x0);
    int sx0 = x0 - o.origin.x;
    for (int y = y0; y < y1; ++y) {
        int sy = y - o.origin.y;
        const std::uint8_t* m = s.mask.row(sy).data() + sx0;
        for (int a = 0; a < kAffordanceCount; ++a)
            k.masked_copy(aff.channels[a].row(y).data() + x0, s.affordances.channels[a].row(sy).data() + sx0, m, n);
        if (r) {
            for (int c = 0; c < 3; ++c)
                k.masked_copy(r->image.row(c, y).data() + x0, s.appearance.row(c, sy).data() + sx0, m, n);
            int* lab = r->labels.data() + std::size_t(y) * width + x0;
            for (std::size_t i = 0; i < n; ++i)
                if (m[i]) lab[i] = o.id;
        }
    }
}

}  // namespace

Rendering composite(const Scene& scene) {
    const Backdrop& b = *scene.backdrop;
    Rendering r;
    r.image = b.image;
    r.affordances = b.affordances;
    r.labels.assign(std::size_t(b.width) * b.height, -1);
    for (const ObjectInstance* o : draw_order(scene)) paint(&r, r.affordances, *o, b.width, b.height);
    return r;
}

AffordanceMap composite_affordances(const Scene& scene, const std::set<int>& excluded) {
    const Backdrop& b = *scene.backdrop;
    AffordanceMap aff = b.affordances;
    for (const ObjectInstance* o : draw_order(scene))
        if (!excluded.contains(o->id)) paint(nullptr, aff, *o, b.width, b.height);
    return aff;
}

std::set<int> subtree(const Scene& scene, int id) {
    scene.at(id);
    std::set<int> out{id};
    std::vector<int> frontier{id};
    while (!frontier.empty()) {
        int cur = frontier.back();
        frontier.pop_back();
        for (const auto& o : scene.objects)
            if (o.parent && *o.parent == cur && out.insert(o.id).second) frontier.push_back(o.id);
    }
    return out;
}

Patch footprint_patch(const Scene& scene, int id) {
    std::set<int> ids = subtree(scene, id);
    BBox box;
    for (int i : ids) box = box.unite(scene.at(i).bbox());
    Patch p{{box.x0, box.y0}, Mask(box.width(), box.height())};
    const auto& k = kernels::active();
    for (int i : ids) {
        const ObjectInstance& o = scene.at(i);
        for (int y = 0; y < o.sprite->height(); ++y)
            k.or_into(p.mask.row(o.origin.y - box.y0 + y).data() + (o.origin.x - box.x0), o.sprite->mask.row(y).data(),
                      std::size_t(o.sprite->width()));
    }
    return p;
}

Mask footprint(const Scene& scene, int id) {
    return to_scene(footprint_patch(scene, id), scene.width(), scene.height());
}

std::set<int> outside_box(const Scene& scene) {
    std::set<int> out;
    for (const auto& o : scene.objects) {
        if (o.parent || o.label == ClassLabel::Box) continue;
        Patch fp = footprint_patch(scene, o.id);
        if (count_and(fp, scene.backdrop->box_region) < fp.mask.count()) out.insert(o.id);
    }
    return out;
}

std::optional<int> find_container(const Scene& scene, int id, double fraction) {
    std::set<int> excluded = subtree(scene, id);
    Patch fp = footprint_patch(scene, id);
    const double need = fraction * double(fp.mask.count());
    std::optional<int> best;
    int best_z = 0;
    for (const auto& o : scene.objects) {
        if (excluded.contains(o.id)) continue;
        if (o.bbox().intersect(fp.box()).empty()) continue;
        Mask support = mask_or(o.sprite->affordances[Affordance::Hole], o.sprite->affordances[Affordance::PlaceOn]);
        std::size_t c = count_and_patches(fp, Patch{o.origin, std::move(support)});
        if (double(c) >= need && (!best || o.z > best_z)) {
            best = o.id;
            best_z = o.z;
        }
    }
    return best;
}

Mask visible_mask(const Scene& scene, const Rendering& r, int id) {
    Mask m(scene.width(), scene.height());
    BBox b = scene.at(id).bbox().intersect({0, 0, scene.width(), scene.height()});
    for (int y = b.y0; y < b.y1; ++y)
        for (int x = b.x0; x < b.x1; ++x)
            if (r.label_at(x, y) == id) m.at(x, y) = 1;
    return m;
}

}  // namespace simip
