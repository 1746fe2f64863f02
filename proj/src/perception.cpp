#include "simip/perception.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "simip/errors.hpp"

namespace simip {

using nlohmann::json;

void CorruptionConfig::check() const {
    for (double p : {miss_prob, split_prob, misclass_prob, affordance_prob})
        if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorKind::InvalidArgument, "corruption probabilities must lie in [0,1]");
    if (boundary_jitter < 0 || affordance_jitter < 0)
        throw Error(ErrorKind::InvalidArgument, "corruption jitters must be >= 0");
}

bool CorruptionConfig::is_identity() const {
    return miss_prob == 0.0 && split_prob == 0.0 && misclass_prob == 0.0 && boundary_jitter == 0 &&
           (affordance_jitter == 0 || affordance_prob == 0.0);
}

json CorruptionConfig::to_json() const {
    return {{"miss_prob", miss_prob},           {"split_prob", split_prob},
            {"misclass_prob", misclass_prob},   {"boundary_jitter", boundary_jitter},
            {"affordance_jitter", affordance_jitter}, {"affordance_prob", affordance_prob},
            {"seed", seed}};
}

CorruptionConfig CorruptionConfig::from_json(const json& j) {
    CorruptionConfig c;
    c.miss_prob = j.value("miss_prob", c.miss_prob);
    c.split_prob = j.value("split_prob", c.split_prob);
    c.misclass_prob = j.value("misclass_prob", c.misclass_prob);
    c.boundary_jitter = j.value("boundary_jitter", c.boundary_jitter);
    c.affordance_jitter = j.value("affordance_jitter", c.affordance_jitter);
    c.affordance_prob = j.value("affordance_prob", c.affordance_prob);
    c.seed = j.value("seed", c.seed);
    c.check();
    return c;
}

namespace {

// Layer rasters read off the camera image and the affordance map under `mask`.
Sprite observe_layer(const Image& image, const AffordanceMap& map, const Patch& mask) {
    Sprite s;
    s.mask = mask.mask;
    const int w = mask.mask.width(), h = mask.mask.height();
    s.appearance = Image(w, h);
    s.affordances = AffordanceMap(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (!s.mask.at(x, y)) continue;
            int sx = x + mask.origin.x, sy = y + mask.origin.y;
            if (sx < 0 || sy < 0 || sx >= image.width() || sy >= image.height()) {
                s.mask.at(x, y) = 0;
                continue;
            }
            s.appearance.set_pixel(x, y, image.pixel(sx, sy));
            for (int c = 0; c < 4; ++c) s.affordances.channels[std::size_t(c)].at(x, y) = map.channels[std::size_t(c)].at(sx, sy);
        }
    return s;
}

std::uint64_t mix(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Uniform in [0,1) keyed by (seed, stream, index); independent of evaluation order.
double keyed_unit(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
    std::uint64_t h = mix(seed ^ mix(stream * 0x100000001B3ULL + 0x51ED27) ^ mix(index));
    return double(h >> 11) * 0x1.0p-53;
}

constexpr int kJitterCell = 16;

// Boundary displacement: each grid cell is picked with probability p and its
// part of the channel is replaced by the channel dilated or eroded by k.
void jitter_channel(Mask& ch, int k, double p, std::uint64_t seed, int channel) {
    const Mask grown = dilate(ch, k), shrunk = erode(ch, k);
    const int w = ch.width(), h = ch.height();
    const int cols = (w + kJitterCell - 1) / kJitterCell;
    for (int cy = 0; cy * kJitterCell < h; ++cy)
        for (int cx = 0; cx < cols; ++cx) {
            const std::uint64_t cell = std::uint64_t(cy) * std::uint64_t(cols) + std::uint64_t(cx);
            if (keyed_unit(seed, 2 * std::uint64_t(channel) + 1, cell) >= p) continue;
            const Mask& src = keyed_unit(seed, 2 * std::uint64_t(channel) + 2, cell) < 0.5 ? grown : shrunk;
            for (int y = cy * kJitterCell; y < std::min(h, (cy + 1) * kJitterCell); ++y)
                for (int x = cx * kJitterCell; x < std::min(w, (cx + 1) * kJitterCell); ++x) ch.at(x, y) = src.at(x, y);
        }
}

const std::vector<ClassLabel>& movable_classes() {
    static const std::vector<ClassLabel> v = {ClassLabel::Can,   ClassLabel::Cup,   ClassLabel::Plate,
                                              ClassLabel::Bowl,  ClassLabel::Apple, ClassLabel::Cuboid};
    return v;
}

// Mask patch grown by `pad` on every side.
Patch padded(const Patch& p, int pad) {
    Patch out{{p.origin.x - pad, p.origin.y - pad}, Mask(p.mask.width() + 2 * pad, p.mask.height() + 2 * pad)};
    for (int y = 0; y < p.mask.height(); ++y)
        for (int x = 0; x < p.mask.width(); ++x) out.mask.at(x + pad, y + pad) = p.mask.at(x, y);
    return out;
}

Patch clip_to(const Patch& p, int width, int height) {
    BBox b = p.box().intersect({0, 0, width, height});
    if (b.empty()) return {{0, 0}, Mask()};
    Patch out{{b.x0, b.y0}, Mask(b.width(), b.height())};
    for (int y = b.y0; y < b.y1; ++y)
        for (int x = b.x0; x < b.x1; ++x) out.mask.at(x - b.x0, y - b.y0) = p.mask.at(x - p.origin.x, y - p.origin.y);
    return out;
}

// Re-reads a detection's layer after its mask changed; drops the exact canonical.
void reshape(Detection& d, const Patch& mask, const PerceptionReport& r) {
    Patch t = tighten(clip_to(mask, r.width, r.height));
    d.bbox = t.box();
    d.layer = observe_layer(r.image, r.affordances, t);
    d.canonical.reset();
}

}  // namespace

PerceptionReport perceive_oracle(const Scene& scene) {
    PerceptionReport r;
    r.width = scene.width();
    r.height = scene.height();
    Rendering ren = composite(scene);
    r.image = ren.image;
    r.affordances = ren.affordances;
    auto order = draw_order(scene);
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
        const ObjectInstance& o = *order[rank];
        Mask vis = visible_mask(scene, ren, o.id);
        Patch full = o.patch();
        Patch visible = from_scene(vis, full.box());
        if (visible.mask.count() == 0) continue;
        Detection d;
        d.source_id = o.id;
        d.name = o.name;
        d.label = o.label;
        d.pose = o.pose;
        d.bbox = full.box();
        d.z = int(rank);
        d.rotation = o.rotation;
        d.layer = observe_layer(r.image, r.affordances, visible);
        if (visible.mask == full.mask) {
            d.canonical = o.canonical;
            d.anchor = o.anchor;
        }
        r.objects.push_back(std::move(d));
    }
    for (const Compartment& c : scene.backdrop->compartments) r.compartments.push_back({c.name, c.bbox, 1.0});
    return r;
}

PerceptionReport corrupt(const PerceptionReport& report, const CorruptionConfig& cfg) {
    cfg.check();
    if (cfg.is_identity()) return report;
    PerceptionReport r = report;
    if (cfg.affordance_jitter > 0 && cfg.affordance_prob > 0.0)
        for (int c = 0; c < 4; ++c)
            jitter_channel(r.affordances.channels[std::size_t(c)], cfg.affordance_jitter, cfg.affordance_prob, cfg.seed, c);
    const bool map_changed = cfg.affordance_jitter > 0 && cfg.affordance_prob > 0.0;

    r.objects.clear();
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (const Detection& src : report.objects) {
        // Same number of draws per detection whatever the probabilities.
        const double u_miss = unit(rng), u_split = unit(rng), u_class = unit(rng), u_dir = unit(rng);
        const int pick = std::uniform_int_distribution<int>(0, int(movable_classes().size()) - 2)(rng);
        if (u_miss < cfg.miss_prob) continue;
        Detection d = src;
        if (map_changed) {
            d.layer = observe_layer(r.image, r.affordances, d.mask());
            d.canonical.reset();
        }
        if (u_class < cfg.misclass_prob) {
            std::vector<ClassLabel> others;
            for (ClassLabel c : movable_classes())
                if (c != d.label) others.push_back(c);
            d.label = others[std::size_t(pick) % others.size()];
            d.misclassified = true;
            d.confidence = std::min(d.confidence, 0.7);
        }
        if (cfg.boundary_jitter > 0) {
            const int k = cfg.boundary_jitter;
            Patch p = padded(d.mask(), k);
            p.mask = u_dir < 0.5 ? erode(p.mask, k) : dilate(p.mask, k);
            if (p.mask.count() > 0) {
                reshape(d, p, r);
                d.jittered = true;
                d.confidence = std::min(d.confidence, 0.9);
            }
        }
        if (u_split < cfg.split_prob) {
            Patch m = d.mask();
            BBox tb = m.tight_box();
            Patch a{m.origin, Mask(m.mask.width(), m.mask.height())}, b = a;
            const bool along_x = tb.width() >= tb.height();
            const int cut = along_x ? tb.x0 + tb.width() / 2 : tb.y0 + tb.height() / 2;
            for (int y = 0; y < m.mask.height(); ++y)
                for (int x = 0; x < m.mask.width(); ++x) {
                    if (!m.mask.at(x, y)) continue;
                    int coord = along_x ? x + m.origin.x : y + m.origin.y;
                    (coord < cut ? a : b).mask.at(x, y) = 1;
                }
            if (a.mask.count() > 0 && b.mask.count() > 0) {
                Detection d2 = d;
                reshape(d, a, r);
                reshape(d2, b, r);
                d.split = d2.split = true;
                d.confidence = d2.confidence = std::min(d.confidence, 0.5);
                d2.name += "_part";
                r.objects.push_back(std::move(d));
                r.objects.push_back(std::move(d2));
                continue;
            }
        }
        r.objects.push_back(std::move(d));
    }
    return r;
}

PerceptionReport complete_objects(const Scene& scene, const PerceptionReport& report, bool enabled,
                                  const PoseDictionary& dict) {
    (void)scene;
    if (!enabled) return report;
    PerceptionReport r = report;
    for (Detection& d : r.objects) {
        SpritePtr entry = dict.find(d.label, d.pose);
        if (!entry) {
            d.incomplete = true;
            continue;
        }
        Point off;
        Sprite rot = normalize_degrees(d.rotation) == 0 ? *entry : rotate_sprite(*entry, d.rotation, off);
        const int w = d.bbox.width(), h = d.bbox.height();
        const bool exact = rot.width() == w && rot.height() == h;
        if (!exact) {
            rot.mask = resize_nearest(rot.mask, w, h);
            rot.appearance = resize_nearest(rot.appearance, w, h);
            for (auto& ch : rot.affordances.channels) ch = resize_nearest(ch, w, h);
        }
        // Pixels the entry adds, clipped to the scene.
        Mask added(w, h);
        std::size_t n_added = 0;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                int sx = x + d.bbox.x0, sy = y + d.bbox.y0;
                if (sx < 0 || sy < 0 || sx >= r.width || sy >= r.height) continue;
                if (rot.mask.at(x, y) && !d.layer.mask.at(x, y)) {
                    added.at(x, y) = 1;
                    ++n_added;
                }
            }
        if (n_added == 0) continue;
        d.completed = true;
        if (exact && d.entity_exact()) {
            // The layer is now the dictionary entry itself, placed on the bbox.
            ObjectInstance probe;
            probe.canonical = entry;
            probe.rotation = d.rotation;
            refresh(probe);
            d.canonical = entry;
            d.anchor = Point{d.bbox.x0, d.bbox.y0} - probe.origin;
            d.layer = rot;
            continue;
        }
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                if (!rot.mask.at(x, y)) continue;
                if (added.at(x, y)) {
                    d.layer.mask.at(x, y) = 1;
                    d.layer.appearance.set_pixel(x, y, rot.appearance.pixel(x, y));
                }
                if (d.layer.mask.at(x, y))
                    for (int c = 0; c < 4; ++c)
                        d.layer.affordances.channels[std::size_t(c)].at(x, y) = rot.affordances.channels[std::size_t(c)].at(x, y);
            }
        d.canonical.reset();
    }
    return r;
}

PerceptionQuality perception_quality(const PerceptionReport& report, const Scene& gt) {
    if (report.width != gt.width() || report.height != gt.height())
        throw Error(ErrorKind::InvalidArgument, "report and scene extents differ");
    PerceptionQuality q;
    Rendering ren = composite(gt);
    double sum = 0.0;
    int n = 0;
    for (int c = 0; c < 4; ++c) {
        const Mask& a = report.affordances.channels[std::size_t(c)];
        const Mask& b = ren.affordances.channels[std::size_t(c)];
        std::size_t inter = count_and(a, b), uni = a.count() + b.count() - inter;
        if (uni == 0) {
            q.channel_iou[std::size_t(c)] = std::numeric_limits<double>::quiet_NaN();
            continue;
        }
        q.channel_iou[std::size_t(c)] = double(inter) / double(uni);
        sum += q.channel_iou[std::size_t(c)];
        ++n;
    }
    q.affordance_miou = n ? sum / n : 1.0;

    // Instance masks, class by class.
    std::map<ClassLabel, Mask> pred, truth;
    auto blank = [&] { return Mask(gt.width(), gt.height()); };
    std::vector<std::pair<const ObjectInstance*, Mask>> visible;
    for (const ObjectInstance& o : gt.objects) {
        Mask v = visible_mask(gt, ren, o.id);
        if (v.count() == 0) continue;
        auto [it, _] = truth.try_emplace(o.label, blank());
        it->second = mask_or(it->second, v);
        visible.emplace_back(&o, std::move(v));
    }
    for (const Detection& d : report.objects) {
        auto [it, _] = pred.try_emplace(d.label, blank());
        or_into(it->second, d.mask());
    }
    sum = 0.0;
    n = 0;
    for (ClassLabel c : movable_classes()) {
        Mask a = pred.contains(c) ? pred.at(c) : blank();
        Mask b = truth.contains(c) ? truth.at(c) : blank();
        std::size_t inter = count_and(a, b), uni = a.count() + b.count() - inter;
        if (uni == 0) continue;
        sum += double(inter) / double(uni);
        ++n;
    }
    q.instance_miou = n ? sum / n : 1.0;

    // Matched-detection rate at bbox IoU >= 0.5 with the right class.
    auto box_iou = [](const BBox& a, const BBox& b) {
        long inter = a.intersect(b).area();
        long uni = a.area() + b.area() - inter;
        return uni > 0 ? double(inter) / double(uni) : 0.0;
    };
    std::vector<bool> used(report.objects.size(), false);
    int matched = 0;
    for (const auto& [o, v] : visible) {
        int best = -1;
        double best_iou = 0.5;
        for (std::size_t k = 0; k < report.objects.size(); ++k) {
            const Detection& d = report.objects[k];
            if (used[k] || d.label != o->label) continue;
            double i = box_iou(d.bbox, o->bbox());
            if (i >= best_iou) {
                best_iou = i;
                best = int(k);
            }
        }
        if (best >= 0) {
            used[std::size_t(best)] = true;
            ++matched;
        }
    }
    q.detection_score = visible.empty() ? 1.0 : double(matched) / double(visible.size());
    return q;
}

Belief build_belief(const PerceptionReport& report, const Scene& gt) {
    Belief b;
    auto backdrop = std::make_shared<Backdrop>(*gt.backdrop);
    Mask covered(report.width, report.height);
    for (const Detection& d : report.objects) or_into(covered, d.mask());
    for (int y = 0; y < report.height; ++y)
        for (int x = 0; x < report.width; ++x) {
            if (covered.at(x, y)) continue;
            backdrop->image.set_pixel(x, y, report.image.pixel(x, y));
            for (int c = 0; c < 4; ++c)
                backdrop->affordances.channels[std::size_t(c)].at(x, y) = report.affordances.channels[std::size_t(c)].at(x, y);
        }
    b.scene.backdrop = backdrop;
    b.scene.dictionary = gt.dictionary;

    std::vector<int> order(report.objects.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = int(i);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int c) { return report.objects[std::size_t(a)].z < report.objects[std::size_t(c)].z; });
    int next = 1;
    for (int k : order) {
        const Detection& d = report.objects[std::size_t(k)];
        ObjectInstance o;
        o.id = next;
        o.name = d.name;
        o.label = d.label;
        o.pose = d.pose;
        o.z = next;
        if (d.canonical) {
            o.canonical = d.canonical;
            o.rotation = d.rotation;
            o.anchor = d.anchor;
        } else {
            BBox tb = d.layer.mask.bounds();
            if (tb.empty()) continue;
            Sprite s;
            s.mask = crop(d.layer.mask, tb);
            s.appearance = crop(d.layer.appearance, tb);
            s.affordances = AffordanceMap(tb.width(), tb.height());
            for (int c = 0; c < 4; ++c)
                s.affordances.channels[std::size_t(c)] =
                    mask_and(crop(d.layer.affordances.channels[std::size_t(c)], tb), s.mask);
            o.canonical = std::make_shared<const Sprite>(std::move(s));
            o.rotation = 0;
            o.anchor = {d.bbox.x0 + tb.x0, d.bbox.y0 + tb.y0};
            b.rotation_offset[o.id] = normalize_degrees(d.rotation);
        }
        refresh(o);
        b.scene.objects.push_back(std::move(o));
        b.detection[next] = k;
        // Containment among the layers below.
        if (auto parent = find_container(b.scene, next)) b.scene.objects.back().parent = *parent;
        ++next;
    }
    check_scene(b.scene);
    return b;
}

PerceptionReport perceive(const Scene& scene, const PerceptionSettings& settings) {
    PerceptionReport r = corrupt(perceive_oracle(scene), settings.corruption);
    return complete_objects(scene, r, settings.completion, *scene.dictionary);
}

CorruptionConfig calibrate_affordance_noise(const std::vector<Scene>& scenes, double target,
                                            const CorruptionConfig& base) {
    if (scenes.empty()) throw Error(ErrorKind::InvalidArgument, "calibration needs at least one scene");
    std::vector<PerceptionReport> oracle;
    for (const Scene& s : scenes) oracle.push_back(perceive_oracle(s));
    auto measure = [&](int k, double p) {
        CorruptionConfig c = base;
        c.affordance_jitter = k;
        c.affordance_prob = p;
        double sum = 0.0;
        for (std::size_t i = 0; i < scenes.size(); ++i) {
            c.seed = base.seed + i;
            PerceptionReport r = oracle[i];
            for (int ch = 0; ch < 4; ++ch)
                if (k > 0 && p > 0.0)
                    jitter_channel(r.affordances.channels[std::size_t(ch)], k, p, c.seed, ch);
            sum += perception_quality(r, scenes[i]).affordance_miou;
        }
        return sum / double(scenes.size());
    };
    CorruptionConfig out = base;
    if (target >= 1.0) {
        out.affordance_jitter = 0;
        return out;
    }
    if (base.affordance_jitter > 0) {
        double lo = 0.0, hi = 1.0;
        for (int it = 0; it < 18; ++it) {
            double mid = 0.5 * (lo + hi);
            (measure(base.affordance_jitter, mid) > target ? lo : hi) = mid;
        }
        out.affordance_prob = 0.5 * (lo + hi);
        return out;
    }
    for (int k = 1; k <= 16; ++k) {
        if (measure(k, 1.0) > target) continue;
        double lo = 0.0, hi = 1.0;
        for (int it = 0; it < 18; ++it) {
            double mid = 0.5 * (lo + hi);
            (measure(k, mid) > target ? lo : hi) = mid;
        }
        out.affordance_jitter = k;
        out.affordance_prob = 0.5 * (lo + hi);
        return out;
    }
    out.affordance_jitter = 16;
    out.affordance_prob = 1.0;
    return out;
}

}  // namespace simip
