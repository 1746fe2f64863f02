#pragma once
// Hand-built scenes for unit tests.

#include <memory>
#include <string>

#include "simip/scene.hpp"

namespace simip::test {

using Rgb = std::array<std::uint8_t, 3>;

// Solid rectangle: Grasp + Obstruct everywhere, or a container with a
// PlaceOn/Hole interior `rim` pixels in from the edge.
inline Sprite rect_sprite(int w, int h, Rgb color, int rim = 0) {
    Sprite s;
    s.mask = Mask(w, h);
    s.appearance = Image(w, h);
    s.affordances = AffordanceMap(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            s.mask.at(x, y) = 1;
            s.appearance.set_pixel(x, y, color);
            bool inner = rim > 0 && x >= rim && y >= rim && x < w - rim && y < h - rim;
            if (inner) {
                s.affordances[Affordance::PlaceOn].at(x, y) = 1;
                s.affordances[Affordance::Hole].at(x, y) = 1;
            } else {
                s.affordances[Affordance::Grasp].at(x, y) = 1;
                s.affordances[Affordance::Obstruct].at(x, y) = 1;
            }
        }
    return s;
}

inline Sprite disc_sprite(int r, Rgb color, int rim = 0) {
    Sprite s = rect_sprite(2 * r, 2 * r, color, 0);
    for (int y = 0; y < 2 * r; ++y)
        for (int x = 0; x < 2 * r; ++x) {
            double dx = x + 0.5 - r, dy = y + 0.5 - r, d2 = dx * dx + dy * dy;
            bool in = d2 <= double(r) * r;
            bool inner = rim > 0 && d2 <= double(r - rim) * (r - rim);
            s.mask.at(x, y) = in;
            if (!in) s.appearance.set_pixel(x, y, {0, 0, 0});
            for (Affordance a : kAllAffordances) s.affordances[a].at(x, y) = 0;
            if (!in) continue;
            if (inner) {
                s.affordances[Affordance::PlaceOn].at(x, y) = 1;
                s.affordances[Affordance::Hole].at(x, y) = 1;
            } else {
                s.affordances[Affordance::Grasp].at(x, y) = 1;
                s.affordances[Affordance::Obstruct].at(x, y) = 1;
            }
        }
    return s;
}

class SceneBuilder {
public:
    SceneBuilder(int w, int h) : bd_(std::make_shared<Backdrop>()), dict_(std::make_shared<PoseDictionary>()) {
        bd_->width = w;
        bd_->height = h;
        bd_->image = Image(w, h, {190, 160, 120});
        bd_->affordances = AffordanceMap(w, h);
        bd_->box_region = Mask(w, h);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) bd_->affordances[Affordance::PlaceOn].at(x, y) = 1;
    }

    // Box walls obstruct; compartments added later carve PlaceOn/Hole floors.
    SceneBuilder& box(BBox b) {
        for (int y = b.y0; y < b.y1; ++y)
            for (int x = b.x0; x < b.x1; ++x) {
                bd_->box_region.at(x, y) = 1;
                bd_->image.set_pixel(x, y, {110, 70, 40});
                bd_->affordances[Affordance::PlaceOn].at(x, y) = 0;
                bd_->affordances[Affordance::Obstruct].at(x, y) = 1;
            }
        return *this;
    }

    SceneBuilder& compartment(BBox r) {
        Compartment c;
        c.name = "compartment_" + std::to_string(bd_->compartments.size() + 1);
        c.region = Mask(bd_->width, bd_->height);
        for (int y = r.y0; y < r.y1; ++y)
            for (int x = r.x0; x < r.x1; ++x) {
                c.region.at(x, y) = 1;
                bd_->image.set_pixel(x, y, {205, 185, 150});
                bd_->affordances[Affordance::Obstruct].at(x, y) = 0;
                bd_->affordances[Affordance::PlaceOn].at(x, y) = 1;
                bd_->affordances[Affordance::Hole].at(x, y) = 1;
            }
        c.bbox = r;
        bd_->compartments.push_back(std::move(c));
        return *this;
    }

    SceneBuilder& pose(ClassLabel c, Pose p, const Sprite& s) {
        dict_->insert(c, p, std::make_shared<const Sprite>(s));
        return *this;
    }

    // Adds an object with its canonical top-left at `anchor`; returns the id.
    int add(const std::string& name, ClassLabel label, const Sprite& s, Point anchor, int z,
            std::optional<int> parent = std::nullopt, int rotation = 0, Pose pose = Pose::Horizontal) {
        ObjectInstance o;
        o.id = int(objects_.size()) + 1;
        o.name = name;
        o.label = label;
        o.pose = pose;
        SpritePtr dict_entry = dict_->find(label, pose);
        o.canonical = dict_entry && *dict_entry == s ? dict_entry : std::make_shared<const Sprite>(s);
        o.rotation = rotation;
        o.anchor = anchor;
        o.z = z;
        o.parent = parent;
        refresh(o);
        objects_.push_back(o);
        return o.id;
    }

    Scene build() const {
        Scene s;
        s.backdrop = bd_;
        s.dictionary = dict_;
        s.objects = objects_;
        return s;
    }

private:
    std::shared_ptr<Backdrop> bd_;
    std::shared_ptr<PoseDictionary> dict_;
    std::vector<ObjectInstance> objects_;
};

}  // namespace simip::test
