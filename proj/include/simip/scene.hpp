#pragma once
// Layered top-view scene: static backdrop (table, box, compartments), movable
// object layers with per-pixel affordances, and topmost-wins compositing.

#include <array>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "simip/raster.hpp"

namespace simip {

inline constexpr int kReferenceWidth = 1024;
inline constexpr int kReferenceHeight = 768;

enum class Affordance : std::uint8_t { Grasp = 0, PlaceOn = 1, Obstruct = 2, Hole = 3 };
inline constexpr int kAffordanceCount = 4;
inline constexpr std::array<Affordance, kAffordanceCount> kAllAffordances = {
    Affordance::Grasp, Affordance::PlaceOn, Affordance::Obstruct, Affordance::Hole};

enum class ClassLabel { Can, Cup, Plate, Bowl, Apple, Box, Cuboid, Compartment };
inline constexpr std::array<ClassLabel, 8> kAllClasses = {
    ClassLabel::Can,   ClassLabel::Cup, ClassLabel::Plate,  ClassLabel::Bowl,
    ClassLabel::Apple, ClassLabel::Box, ClassLabel::Cuboid, ClassLabel::Compartment};

enum class Pose { Horizontal, Vertical };

std::string_view to_string(Affordance a);
std::string_view to_string(ClassLabel c);
std::string_view to_string(Pose p);
Affordance parse_affordance(std::string_view s);
ClassLabel parse_class(std::string_view s);
Pose parse_pose(std::string_view s);
inline Pose other(Pose p) { return p == Pose::Horizontal ? Pose::Vertical : Pose::Horizontal; }

// Four binary channels, indexed by Affordance.
struct AffordanceMap {
    std::array<Mask, kAffordanceCount> channels;

    AffordanceMap() = default;
    AffordanceMap(int width, int height);
    Mask& operator[](Affordance a) { return channels[std::size_t(a)]; }
    const Mask& operator[](Affordance a) const { return channels[std::size_t(a)]; }
    int width() const { return channels[0].width(); }
    int height() const { return channels[0].height(); }
    friend bool operator==(const AffordanceMap&, const AffordanceMap&) = default;
};

// Bbox-local raster bundle of one object layer.
struct Sprite {
    Mask mask;
    Image appearance;
    AffordanceMap affordances;

    int width() const { return mask.width(); }
    int height() const { return mask.height(); }
    // Throws InvalidScene if extents disagree, masks are not binary, an
    // affordance leaves the mask, or (when require_tight) the mask is not bbox-tight.
    void check(bool require_tight = true) const;
    friend bool operator==(const Sprite&, const Sprite&) = default;
};

using SpritePtr = std::shared_ptr<const Sprite>;

// Rotates every raster of a sprite by the given angle (nearest for masks,
// bilinear for appearance masked to the rotated mask) and crops tight.
// `offset` receives the result's top-left relative to the source's top-left.
Sprite rotate_sprite(const Sprite& s, int degrees, Point& offset);

// (class, pose) -> canonical sprite.
class PoseDictionary {
public:
    void insert(ClassLabel c, Pose p, SpritePtr sprite);
    SpritePtr find(ClassLabel c, Pose p) const;
    bool contains(ClassLabel c, Pose p) const { return find(c, p) != nullptr; }
    // Throws InvalidScene when a Vertical entry lacks its Horizontal partner.
    void check() const;
    const std::map<std::pair<ClassLabel, Pose>, SpritePtr>& entries() const { return entries_; }

private:
    std::map<std::pair<ClassLabel, Pose>, SpritePtr> entries_;
};

struct ObjectInstance {
    int id = 0;
    std::string name;
    ClassLabel label = ClassLabel::Apple;
    Pose pose = Pose::Horizontal;
    SpritePtr canonical;  // unrotated rasters for the current pose
    int rotation = 0;     // accumulated degrees in [0,360)
    Point anchor;         // scene position of the canonical top-left at rotation 0
    int z = 0;
    std::optional<int> parent;

    // Derived from canonical/rotation/anchor by refresh().
    SpritePtr sprite;
    Point origin;

    BBox bbox() const {
        return {origin.x, origin.y, origin.x + sprite->width(), origin.y + sprite->height()};
    }
    Patch patch() const { return {origin, sprite->mask}; }
    // Twice the canonical geometric center, in scene coordinates.
    Point center2() const { return {2 * anchor.x + canonical->width(), 2 * anchor.y + canonical->height()}; }
};

// Recomputes sprite and origin from canonical, rotation and anchor.
void refresh(ObjectInstance& obj);

struct Compartment {
    std::string name;
    Mask region;  // scene-sized
    BBox bbox;
};

// Static part of a scene, shared between snapshots.
struct Backdrop {
    int width = 0;
    int height = 0;
    Image image;
    AffordanceMap affordances;
    Mask box_region;
    std::vector<Compartment> compartments;
};

struct Scene {
    std::shared_ptr<const Backdrop> backdrop;
    std::shared_ptr<const PoseDictionary> dictionary;
    std::vector<ObjectInstance> objects;

    int width() const { return backdrop->width; }
    int height() const { return backdrop->height; }
    const ObjectInstance* find(int id) const;
    ObjectInstance* find(int id);
    const ObjectInstance& at(int id) const;  // throws UnknownId
    const ObjectInstance* find_by_name(std::string_view name) const;
    std::vector<int> children_of(int id) const;
    int top_z() const;
};

struct Rendering {
    Image image;
    AffordanceMap affordances;
    std::vector<int> labels;  // topmost object id per pixel, -1 for background

    int label_at(int x, int y) const { return labels[std::size_t(y) * image.width() + x]; }
};

// Throws InvalidScene / AmbiguousOrder when an invariant is violated.
void check_scene(const Scene& scene);

// Objects sorted bottom to top; throws AmbiguousOrder for overlapping equal z.
std::vector<const ObjectInstance*> draw_order(const Scene& scene);

Rendering composite(const Scene& scene);
// Composite of the affordance channels with the given layers left out.
AffordanceMap composite_affordances(const Scene& scene, const std::set<int>& excluded = {});

// The object and all containment descendants.
std::set<int> subtree(const Scene& scene, int id);
Patch footprint_patch(const Scene& scene, int id);
Mask footprint(const Scene& scene, int id);
// Root objects (no parent, not of class Box) whose footprint leaves box_region.
std::set<int> outside_box(const Scene& scene);

// Layer among `scene` (excluding the given subtree) whose Hole or PlaceOn pixels
// cover at least 90% of the footprint; topmost wins.
std::optional<int> find_container(const Scene& scene, int id, double fraction = 0.9);

// Pixels of `id` that are visible in the composite.
Mask visible_mask(const Scene& scene, const Rendering& r, int id);

}  // namespace simip
