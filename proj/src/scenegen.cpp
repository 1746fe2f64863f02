#include "simip/scenegen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>
#include <optional>
#include <set>

#include "simip/errors.hpp"
#include "simip/manifest.hpp"
#include "simip/validation.hpp"

namespace simip {

namespace fs = std::filesystem;
using nlohmann::json;

void GenConfig::check() const {
    auto bad = [](const std::string& m) { throw Error(ErrorKind::InvalidArgument, "GenConfig: " + m); };
    if (width < 64 || height < 48) bad("scene must be at least 64x48");
    if (min_outside < 0 || max_outside < min_outside) bad("outside range");
    if (min_in_box < 0 || max_in_box < min_in_box) bad("in-box range");
    if (compartments < 1) bad("compartment count must be >= 1");
    if (margin_min < 1 || margin_max < margin_min) bad("margin range");
    if (palette.empty()) bad("empty palette");
    for (ClassLabel c : palette)
        if (c == ClassLabel::Box || c == ClassLabel::Compartment) bad("palette may only hold movable classes");
    for (double p : {stack_prob, overlap_prob, vertical_prob})
        if (p < 0.0 || p > 1.0) bad("probabilities must lie in [0,1]");
    if (max_retries < 1) bad("max_retries must be >= 1");
}

json GenConfig::to_json() const {
    json pal = json::array();
    for (ClassLabel c : palette) pal.push_back(to_string(c));
    return {{"seed", seed},
            {"width", width},
            {"height", height},
            {"min_outside", min_outside},
            {"max_outside", max_outside},
            {"min_in_box", min_in_box},
            {"max_in_box", max_in_box},
            {"compartments", compartments},
            {"palette", pal},
            {"guarantee_feasible", guarantee_feasible},
            {"stack_prob", stack_prob},
            {"overlap_prob", overlap_prob},
            {"vertical_prob", vertical_prob},
            {"margin_min", margin_min},
            {"margin_max", margin_max},
            {"max_retries", max_retries},
            {"uniform_compartments", uniform_compartments}};
}

GenConfig GenConfig::from_json(const json& j) {
    GenConfig c;
    c.seed = j.value("seed", c.seed);
    c.width = j.value("width", c.width);
    c.height = j.value("height", c.height);
    c.min_outside = j.value("min_outside", c.min_outside);
    c.max_outside = j.value("max_outside", c.max_outside);
    c.min_in_box = j.value("min_in_box", c.min_in_box);
    c.max_in_box = j.value("max_in_box", c.max_in_box);
    c.compartments = j.value("compartments", c.compartments);
    if (j.contains("palette")) {
        c.palette.clear();
        for (const auto& p : j["palette"]) c.palette.push_back(parse_class(p.get<std::string>()));
    }
    c.guarantee_feasible = j.value("guarantee_feasible", c.guarantee_feasible);
    c.stack_prob = j.value("stack_prob", c.stack_prob);
    c.overlap_prob = j.value("overlap_prob", c.overlap_prob);
    c.vertical_prob = j.value("vertical_prob", c.vertical_prob);
    c.margin_min = j.value("margin_min", c.margin_min);
    c.margin_max = j.value("margin_max", c.margin_max);
    c.max_retries = j.value("max_retries", c.max_retries);
    c.uniform_compartments = j.value("uniform_compartments", c.uniform_compartments);
    c.check();
    return c;
}

json GeneratedScene::certificate_json() const {
    json a = json::array();
    for (const Step& s : certificate)
        a.push_back({{"object", s.object},
                     {"flip", s.flip},
                     {"rotate", s.rotate},
                     {"target", {s.target.x, s.target.y}},
                     {"region", s.region}});
    return a;
}

std::vector<Step> certificate_from_json(const json& j) {
    std::vector<Step> out;
    if (j.is_null()) return out;
    for (const auto& e : j)
        out.push_back({e.at("object").get<int>(), e.at("flip").get<bool>(), e.at("rotate").get<int>(),
                       {e.at("target").at(0).get<int>(), e.at("target").at(1).get<int>()},
                       e.at("region").get<std::string>()});
    return out;
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
    std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

int stratified_outside(const GenConfig& config, int index) {
    int span = config.max_outside - config.min_outside + 1;
    return config.min_outside + index % span;
}

namespace {

using Rng = std::mt19937_64;
using Rgb = std::array<std::uint8_t, 3>;

int uniform(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }
double unit(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }
bool chance(Rng& rng, double p) { return p > 0.0 && unit(rng) < p; }

struct Dims {
    int radius = 0;  // discs and annuli
    int rim = 0;
    int side = 0;    // cuboid short side
    int length = 0;  // cuboid long side
};

bool is_container(ClassLabel c) {
    return c == ClassLabel::Cup || c == ClassLabel::Can || c == ClassLabel::Bowl || c == ClassLabel::Plate;
}

struct Palette {
    std::map<ClassLabel, Dims> dims;
    double scale = 1.0;

    int px(double v) const { return std::max(1, int(std::lround(v * scale))); }

    int inner_radius(ClassLabel c) const {
        const Dims& d = dims.at(c);
        return d.radius - d.rim;
    }
    // Half of the largest extent, used for stacking fits.
    int outer_radius(ClassLabel c) const {
        const Dims& d = dims.at(c);
        if (c == ClassLabel::Cuboid) return d.length / 2 + 1;
        return d.radius;
    }
    bool fits_inside(ClassLabel content, ClassLabel container) const {
        if (!is_container(container) || content == ClassLabel::Cuboid || content == ClassLabel::Plate) return false;
        if (content == container) return false;
        return outer_radius(content) + px(4) <= inner_radius(container);
    }
    // Extent (w,h) of the object in a slot with the given pose and quarter-turn.
    std::pair<int, int> extent(ClassLabel c, Pose p, int rot) const {
        const Dims& d = dims.at(c);
        if (c != ClassLabel::Cuboid) return {2 * d.radius, 2 * d.radius};
        if (p == Pose::Vertical) return {d.side, d.side};
        return rot % 180 == 0 ? std::pair{d.length, d.side} : std::pair{d.side, d.length};
    }
};

Palette sample_palette(const GenConfig& cfg, Rng& rng) {
    Palette pal;
    pal.scale = std::min(cfg.width / double(kReferenceWidth), cfg.height / double(kReferenceHeight));
    auto disc = [&](int lo, int hi, int rim) { return Dims{pal.px(uniform(rng, lo, hi)), rim ? pal.px(rim) : 0, 0, 0}; };
    pal.dims[ClassLabel::Apple] = disc(22, 28, 0);
    pal.dims[ClassLabel::Cup] = disc(36, 44, 7);
    pal.dims[ClassLabel::Can] = disc(50, 58, 8);
    pal.dims[ClassLabel::Bowl] = disc(62, 72, 9);
    pal.dims[ClassLabel::Plate] = disc(66, 78, 10);
    Dims cub;
    cub.side = pal.px(uniform(rng, 36, 44));
    cub.length = int(std::lround(cub.side * 2.2));
    if ((cub.length - cub.side) % 2 != 0) ++cub.length;  // equal parity keeps flips centered
    pal.dims[ClassLabel::Cuboid] = cub;
    return pal;
}

Rgb jitter(Rgb c, int amount, Rng& rng) {
    Rgb out;
    for (int i = 0; i < 3; ++i) out[i] = std::uint8_t(std::clamp(int(c[i]) + uniform(rng, -amount, amount), 0, 255));
    return out;
}

Rgb shade(Rgb c, double f) {
    return {std::uint8_t(std::clamp(c[0] * f, 0.0, 255.0)), std::uint8_t(std::clamp(c[1] * f, 0.0, 255.0)),
            std::uint8_t(std::clamp(c[2] * f, 0.0, 255.0))};
}

Mask disc_mask(int r) {
    Mask m(2 * r, 2 * r);
    for (int y = 0; y < 2 * r; ++y)
        for (int x = 0; x < 2 * r; ++x) {
            double dx = x + 0.5 - r, dy = y + 0.5 - r;
            m.at(x, y) = dx * dx + dy * dy <= double(r) * r;
        }
    return m;
}

Mask rounded_rect(int w, int h, int corner) {
    Mask m(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double cx = std::clamp(x + 0.5, double(corner), double(w - corner));
            double cy = std::clamp(y + 0.5, double(corner), double(h - corner));
            double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
            m.at(x, y) = dx * dx + dy * dy <= double(corner) * corner;
        }
    return m;
}

Sprite make_sprite(ClassLabel c, Pose pose, const Palette& pal, Rgb color, Rng& rng) {
    const Dims& d = pal.dims.at(c);
    Sprite s;
    Mask inner;
    if (c == ClassLabel::Cuboid) {
        int corner = pal.px(4);
        s.mask = pose == Pose::Vertical ? rounded_rect(d.side, d.side, corner) : rounded_rect(d.length, d.side, corner);
    } else {
        s.mask = disc_mask(d.radius);
        if (d.rim > 0) {
            inner = Mask(2 * d.radius, 2 * d.radius);
            int ir = d.radius - d.rim;
            for (int y = 0; y < 2 * d.radius; ++y)
                for (int x = 0; x < 2 * d.radius; ++x) {
                    double dx = x + 0.5 - d.radius, dy = y + 0.5 - d.radius;
                    inner.at(x, y) = dx * dx + dy * dy <= double(ir) * ir;
                }
        }
    }
    const int w = s.mask.width(), h = s.mask.height();
    s.affordances = AffordanceMap(w, h);
    s.appearance = Image(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (!s.mask.at(x, y)) continue;
            bool interior = inner.width() > 0 && inner.at(x, y);
            Rgb base = interior ? shade(color, c == ClassLabel::Plate ? 1.05 : 0.7) : color;
            s.appearance.set_pixel(x, y, jitter(base, 10, rng));
            if (interior) {
                s.affordances[Affordance::PlaceOn].at(x, y) = 1;
                if (c != ClassLabel::Plate) s.affordances[Affordance::Hole].at(x, y) = 1;
            } else {
                s.affordances[Affordance::Grasp].at(x, y) = 1;
                if (c != ClassLabel::Plate) s.affordances[Affordance::Obstruct].at(x, y) = 1;
            }
        }
    return s;
}

const std::vector<std::pair<std::string, Rgb>>& colors_for(ClassLabel c) {
    static const std::map<ClassLabel, std::vector<std::pair<std::string, Rgb>>> table = {
        {ClassLabel::Apple, {{"red", {200, 30, 30}}, {"green", {80, 170, 60}}}},
        {ClassLabel::Cup, {{"yellow", {230, 200, 40}}, {"blue", {40, 90, 200}}}},
        {ClassLabel::Can, {{"black", {35, 35, 35}}, {"silver", {170, 170, 180}}}},
        {ClassLabel::Bowl, {{"blue", {50, 80, 180}}, {"white", {230, 230, 225}}}},
        {ClassLabel::Plate, {{"white", {235, 235, 235}}, {"blue", {60, 110, 210}}}},
        {ClassLabel::Cuboid, {{"blue", {40, 60, 190}}, {"green", {40, 150, 70}}}},
    };
    return table.at(c);
}

struct Item {
    ClassLabel label = ClassLabel::Apple;
    int compartment = -1;  // primary slot
    int container = -1;    // item index when stacked
    int content = -1;
    Pose final_pose = Pose::Horizontal;
    int final_rot = 0;     // 0 or 90 for cuboid slots
    bool outside = false;
    bool rides = false;    // starts inside its (outside) container
    int id = 0;
};

struct Layout {
    std::vector<BBox> rooms;  // compartment interiors, row-major
    BBox box;
};

std::optional<Layout> layout_box(const std::vector<std::pair<int, int>>& inner, int wall, int width, int height,
                                 Rng& rng) {
    const int n = int(inner.size());
    const int rows = n <= 2 ? 1 : 2;
    const int top = rows == 1 ? n : (n + 1) / 2;
    std::vector<std::vector<int>> row_items(rows);
    for (int i = 0; i < n; ++i) row_items[i < top ? 0 : 1].push_back(i);
    std::vector<int> row_h(rows, 0), row_w(rows, wall);
    for (int r = 0; r < rows; ++r)
        for (int i : row_items[r]) {
            row_h[r] = std::max(row_h[r], inner[i].second);
            row_w[r] += inner[i].first + wall;
        }
    int box_w = *std::max_element(row_w.begin(), row_w.end());
    int box_h = wall;
    for (int r = 0; r < rows; ++r) box_h += row_h[r] + wall;
    const int edge = std::max(2, width / 64);
    if (box_w + 2 * edge > width || box_h + 2 * edge > height) return std::nullopt;
    Layout L;
    int bx = uniform(rng, edge, width - box_w - edge);
    int by = uniform(rng, edge, height - box_h - edge);
    L.box = {bx, by, bx + box_w, by + box_h};
    L.rooms.resize(std::size_t(n));
    int y = by + wall;
    for (int r = 0; r < rows; ++r) {
        int x = bx + wall;
        for (std::size_t k = 0; k < row_items[r].size(); ++k) {
            int i = row_items[r][k];
            int w = inner[i].first;
            if (k + 1 == row_items[r].size()) w += box_w - row_w[r];  // stretch the last room
            L.rooms[std::size_t(i)] = {x, y, x + w, y + row_h[r]};
            x += w + wall;
        }
        y += row_h[r] + wall;
    }
    return L;
}

std::shared_ptr<Backdrop> make_backdrop(const Layout& L, int width, int height, Rng& rng) {
    auto b = std::make_shared<Backdrop>();
    b->width = width;
    b->height = height;
    b->image = Image(width, height);
    b->affordances = AffordanceMap(width, height);
    b->box_region = Mask(width, height);
    const Rgb table{190, 160, 120}, wall{110, 70, 40}, floor{205, 185, 150};
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            bool in_box = L.box.contains({x, y});
            b->box_region.at(x, y) = in_box;
            b->image.set_pixel(x, y, jitter(in_box ? wall : table, 8, rng));
            if (!in_box) b->affordances[Affordance::PlaceOn].at(x, y) = 1;
            else b->affordances[Affordance::Obstruct].at(x, y) = 1;
        }
    for (std::size_t i = 0; i < L.rooms.size(); ++i) {
        Compartment c;
        c.name = "compartment_" + std::to_string(i + 1);
        c.region = Mask(width, height);
        const BBox& r = L.rooms[i];
        for (int y = r.y0; y < r.y1; ++y)
            for (int x = r.x0; x < r.x1; ++x) {
                c.region.at(x, y) = 1;
                b->image.set_pixel(x, y, jitter(floor, 8, rng));
                b->affordances[Affordance::Obstruct].at(x, y) = 0;
                b->affordances[Affordance::PlaceOn].at(x, y) = 1;
                b->affordances[Affordance::Hole].at(x, y) = 1;
            }
        c.bbox = r;
        b->compartments.push_back(std::move(c));
    }
    return b;
}

// Target pixel of an empty region: its pixel nearest the centroid.
Point region_anchor(const Mask& region) {
    auto comps = connected_components(region);
    return comps.front().anchor();
}

int minimal_delta(int from, int to, int period) {
    // smallest signed d (multiple of 15) with (from + d) == to (mod period)
    int best = 0;
    bool found = false;
    for (int d = -180; d <= 180; d += kRotationStep) {
        if (normalize_degrees(from + d - to) % period != 0) continue;
        if (!found || std::abs(d) < std::abs(best) || (std::abs(d) == std::abs(best) && d > best)) {
            best = d;
            found = true;
        }
    }
    return best;
}

struct Builder {
    const GenConfig& cfg;
    Rng& rng;
    Palette pal;
    std::shared_ptr<PoseDictionary> dict = std::make_shared<PoseDictionary>();
    std::map<std::string, int> name_use;

    std::string fresh_name(ClassLabel c, const std::string& color) {
        std::string base = color + "_" + std::string(to_string(c));
        int n = ++name_use[base];
        return n == 1 ? base : base + "_" + std::to_string(n);
    }

    ObjectInstance make_object(int id, ClassLabel c, Pose pose) {
        const auto& colors = colors_for(c);
        const auto& [cname, rgb] = colors[std::size_t(uniform(rng, 0, int(colors.size()) - 1))];
        ObjectInstance o;
        o.id = id;
        o.name = fresh_name(c, cname);
        o.label = c;
        o.pose = pose;
        o.canonical = std::make_shared<const Sprite>(make_sprite(c, pose, pal, rgb, rng));
        return o;
    }

    void fill_dictionary() {
        for (ClassLabel c : cfg.palette) {
            const auto& rgb = colors_for(c).front().second;
            dict->insert(c, Pose::Horizontal, std::make_shared<const Sprite>(make_sprite(c, Pose::Horizontal, pal, rgb, rng)));
            if (c == ClassLabel::Cuboid)
                dict->insert(c, Pose::Vertical, std::make_shared<const Sprite>(make_sprite(c, Pose::Vertical, pal, rgb, rng)));
        }
    }
};

// Places the object so that its tight bbox center lands on `center`.
void center_on(ObjectInstance& o, Point center) {
    refresh(o);
    Point d = center - o.bbox().center();
    o.anchor = o.anchor + d;
    refresh(o);
}

std::optional<GeneratedScene> attempt(const GenConfig& cfg, Rng& rng, int outside) {
    Builder B{cfg, rng, sample_palette(cfg, rng), std::make_shared<PoseDictionary>(), {}};
    B.fill_dictionary();
    const Palette& pal = B.pal;
    const int in_box = uniform(rng, cfg.min_in_box, cfg.max_in_box);
    const int total = outside + in_box;
    const int C = cfg.compartments;

    auto pick = [&](const std::vector<ClassLabel>& from) { return from[std::size_t(uniform(rng, 0, int(from.size()) - 1))]; };

    // Slots: one primary per compartment, then contents stacked into containers.
    std::vector<Item> items;
    std::vector<int> rooms(static_cast<std::size_t>(C));
    for (int i = 0; i < C; ++i) rooms[std::size_t(i)] = i;
    std::shuffle(rooms.begin(), rooms.end(), rng);
    const int primaries = std::min(C, total);
    std::vector<ClassLabel> containers_in_palette;
    for (ClassLabel c : cfg.palette)
        if (is_container(c)) containers_in_palette.push_back(c);
    for (int i = 0; i < primaries; ++i) {
        Item it;
        bool need_containers = total - primaries > i && !containers_in_palette.empty();
        it.label = need_containers && chance(rng, 0.7) ? pick(containers_in_palette) : pick(cfg.palette);
        it.compartment = rooms[std::size_t(i)];
        if (it.label == ClassLabel::Cuboid) {
            if (chance(rng, cfg.vertical_prob)) it.final_pose = Pose::Vertical;
            else it.final_rot = chance(rng, 0.5) ? 90 : 0;
        }
        items.push_back(it);
    }
    auto add_content = [&](bool outside_rider) -> bool {
        std::vector<std::pair<int, ClassLabel>> options;
        for (int k = 0; k < int(items.size()); ++k) {
            const Item& host = items[std::size_t(k)];
            if (host.content >= 0 || !is_container(host.label)) continue;
            if (outside_rider != host.outside) continue;
            for (ClassLabel c : cfg.palette)
                if (pal.fits_inside(c, host.label)) options.push_back({k, c});
        }
        if (options.empty()) return false;
        auto [host, c] = options[std::size_t(uniform(rng, 0, int(options.size()) - 1))];
        Item it;
        it.label = c;
        it.container = host;
        it.outside = outside_rider;
        it.rides = outside_rider;
        items[std::size_t(host)].content = int(items.size());
        items.push_back(it);
        return true;
    };
    while (int(items.size()) < total)
        if (!add_content(false)) return std::nullopt;

    // In-box set is closed under "content implies container".
    std::vector<int> order(items.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = int(i);
    std::shuffle(order.begin(), order.end(), rng);
    for (auto& it : items) it.outside = true;
    int placed_in = 0;
    for (bool progress = true; progress && placed_in < in_box;) {
        progress = false;
        for (int i : order) {
            Item& it = items[std::size_t(i)];
            if (!it.outside || placed_in >= in_box) continue;
            if (it.container >= 0 && items[std::size_t(it.container)].outside) continue;
            it.outside = false;
            ++placed_in;
            progress = true;
        }
    }
    if (placed_in != in_box) return std::nullopt;
    // Riders: outside containers that start with something inside.
    const std::size_t base_items = items.size();
    for (std::size_t i = 0; i < base_items; ++i)
        if (items[i].outside && is_container(items[i].label) && items[i].content < 0 && chance(rng, cfg.stack_prob)) {
            std::vector<ClassLabel> fits;
            for (ClassLabel c : cfg.palette)
                if (pal.fits_inside(c, items[i].label)) fits.push_back(c);
            if (fits.empty()) continue;
            Item it;
            it.label = pick(fits);
            it.container = int(i);
            it.outside = true;
            it.rides = true;
            items[i].content = int(items.size());
            items.push_back(it);
        }

    // Compartment interiors sized around their primaries.
    std::vector<std::pair<int, int>> inner(static_cast<std::size_t>(C));
    std::vector<int> room_item(std::size_t(C), -1);
    for (int i = 0; i < int(items.size()); ++i)
        if (items[std::size_t(i)].compartment >= 0) room_item[std::size_t(items[std::size_t(i)].compartment)] = i;
    const int wall = pal.px(8);
    std::vector<int> margins(static_cast<std::size_t>(C), 0);
    for (int r = 0; r < C; ++r) {
        int m = pal.px(uniform(rng, cfg.margin_min, cfg.margin_max));
        std::pair<int, int> e;
        if (room_item[std::size_t(r)] >= 0) {
            const Item& it = items[std::size_t(room_item[std::size_t(r)])];
            e = pal.extent(it.label, it.final_pose, it.final_rot);
        } else {
            ClassLabel c = pick(cfg.palette);
            e = pal.extent(c, Pose::Horizontal, chance(rng, 0.5) ? 90 : 0);
        }
        if (!cfg.guarantee_feasible) {
            e.first = int(e.first * (0.8 + 0.4 * unit(rng)));
            e.second = int(e.second * (0.8 + 0.4 * unit(rng)));
        }
        inner[std::size_t(r)] = e;
        margins[std::size_t(r)] = m;
    }
    if (cfg.uniform_compartments) {
        // Every room takes the largest extent, except fitted vertical-pose slots.
        auto fitted = [&](int r) {
            int i = room_item[std::size_t(r)];
            return i >= 0 && items[std::size_t(i)].final_pose == Pose::Vertical;
        };
        int mw = 0, mh = 0;
        for (int r = 0; r < C; ++r)
            if (!fitted(r)) {
                mw = std::max(mw, inner[std::size_t(r)].first);
                mh = std::max(mh, inner[std::size_t(r)].second);
            }
        for (int r = 0; r < C; ++r)
            if (!fitted(r)) inner[std::size_t(r)] = {mw, mh};
    }
    for (int r = 0; r < C; ++r) {
        inner[std::size_t(r)].first += 2 * margins[std::size_t(r)];
        inner[std::size_t(r)].second += 2 * margins[std::size_t(r)];
    }
    auto layout = layout_box(inner, wall, cfg.width, cfg.height, rng);
    if (!layout) return std::nullopt;
    std::shared_ptr<Backdrop> backdrop = make_backdrop(*layout, cfg.width, cfg.height, rng);

    // Instantiate objects.
    std::vector<ObjectInstance> objs(items.size());
    int next_id = 1;
    for (std::size_t i = 0; i < items.size(); ++i) {
        Item& it = items[i];
        it.id = next_id++;
        Pose start = it.final_pose;
        if (it.outside && !it.rides && it.label == ClassLabel::Cuboid) {
            if (it.final_pose == Pose::Vertical) start = chance(rng, 0.75) ? Pose::Horizontal : Pose::Vertical;
            else start = chance(rng, 0.2) ? Pose::Vertical : Pose::Horizontal;
        }
        objs[i] = B.make_object(it.id, it.label, start);
        if (start != Pose::Horizontal || it.label == ClassLabel::Cuboid) {
            // cuboids share the dictionary rasters so flips stay bit-exact
            ObjectInstance& o = objs[i];
            o.canonical = B.dict->find(it.label, start);
        }
    }
    auto room_anchor = [&](int room) { return region_anchor(backdrop->compartments[std::size_t(room)].region); };

    // Packed objects at their final slots.
    int z = 0;
    std::vector<int> in_order;
    for (std::size_t i = 0; i < items.size(); ++i)
        if (!items[i].outside && items[i].compartment >= 0) in_order.push_back(int(i));
    for (std::size_t k = 0; k < in_order.size(); ++k) {  // containers before their contents
        int c = items[std::size_t(in_order[k])].content;
        if (c >= 0 && !items[std::size_t(c)].outside) in_order.push_back(c);
    }
    for (int i : in_order) {
        Item& it = items[std::size_t(i)];
        ObjectInstance& o = objs[std::size_t(i)];
        o.rotation = it.final_rot;
        if (it.compartment >= 0) {
            center_on(o, room_anchor(it.compartment));
        } else {
            const ObjectInstance& host = objs[std::size_t(it.container)];
            center_on(o, host.bbox().center());
            o.parent = host.id;
        }
        o.z = z++;
    }

    // Certificate order over outside roots: containers first.
    std::vector<int> roots;
    for (std::size_t i = 0; i < items.size(); ++i)
        if (items[i].outside && !items[i].rides) roots.push_back(int(i));
    std::shuffle(roots.begin(), roots.end(), rng);
    std::vector<int> cert_order;
    std::set<int> done;
    while (cert_order.size() < roots.size()) {
        bool progress = false;
        for (int i : roots) {
            if (done.contains(i)) continue;
            const Item& it = items[std::size_t(i)];
            if (it.container >= 0 && items[std::size_t(it.container)].outside && !done.contains(it.container)) continue;
            cert_order.push_back(i);
            done.insert(i);
            progress = true;
        }
        if (!progress) return std::nullopt;
    }

    // Scatter outside roots, last-to-pack first so that overlaps sit on later ones.
    const int gap = pal.px(6);
    const BBox box_guard = {layout->box.x0 - gap, layout->box.y0 - gap, layout->box.x1 + gap, layout->box.y1 + gap};
    std::vector<int> scattered;
    auto footprint_box = [&](int i) {
        BBox b = objs[std::size_t(i)].bbox();
        int c = items[std::size_t(i)].content;
        if (c >= 0 && items[std::size_t(c)].rides) b = b.unite(objs[std::size_t(c)].bbox());
        return b;
    };
    auto move_with_rider = [&](int i, Point center) {
        ObjectInstance& o = objs[std::size_t(i)];
        center_on(o, center);
        int c = items[std::size_t(i)].content;
        if (c >= 0 && items[std::size_t(c)].rides) {
            ObjectInstance& r = objs[std::size_t(c)];
            center_on(r, o.bbox().center());
        }
    };
    for (auto it = cert_order.rbegin(); it != cert_order.rend(); ++it) {
        const int i = *it;
        ObjectInstance& o = objs[std::size_t(i)];
        o.rotation = kRotationStep * uniform(rng, 0, 360 / kRotationStep - 1);
        refresh(o);
        int c = items[std::size_t(i)].content;
        if (c >= 0 && items[std::size_t(c)].rides) {
            objs[std::size_t(c)].rotation = kRotationStep * uniform(rng, 0, 360 / kRotationStep - 1);
            refresh(objs[std::size_t(c)]);
        }
        const int half_w = o.sprite->width() / 2 + 1, half_h = o.sprite->height() / 2 + 1;
        bool ok = false;
        std::optional<int> under;
        if (!scattered.empty() && chance(rng, cfg.overlap_prob)) {
            int a = scattered[std::size_t(uniform(rng, 0, int(scattered.size()) - 1))];
            const ObjectInstance& A = objs[std::size_t(a)];
            for (int t = 0; t < 60 && !ok; ++t) {
                double ang = unit(rng) * 2 * std::numbers::pi;
                double reach = 0.5 * (A.bbox().max_side() + o.sprite->width()) * (0.55 + 0.25 * unit(rng));
                Point ctr = A.bbox().center() + Point{int(std::lround(std::cos(ang) * reach)), int(std::lround(std::sin(ang) * reach))};
                move_with_rider(i, ctr);
                BBox fb = footprint_box(i);
                if (fb.x0 < 1 || fb.y0 < 1 || fb.x1 > cfg.width - 1 || fb.y1 > cfg.height - 1) continue;
                if (!fb.intersect(box_guard).empty()) continue;
                bool clash = false;
                for (int s : scattered)
                    if (s != a && !fb.intersect(footprint_box(s)).empty()) clash = true;
                if (clash) continue;
                Patch mine = o.patch();
                std::size_t ov = count_and(mine, to_scene(A.patch(), cfg.width, cfg.height));
                double frac = double(ov) / double(mine.mask.count());
                if (frac < 0.12 || frac > 0.45) continue;
                ok = true;
                under = a;
            }
        }
        for (int t = 0; t < 400 && !ok; ++t) {
            Point ctr{uniform(rng, half_w + 1, cfg.width - half_w - 2), uniform(rng, half_h + 1, cfg.height - half_h - 2)};
            move_with_rider(i, ctr);
            BBox fb = footprint_box(i);
            if (fb.x0 < 1 || fb.y0 < 1 || fb.x1 > cfg.width - 1 || fb.y1 > cfg.height - 1) continue;
            if (!fb.intersect(box_guard).empty()) continue;
            bool clash = false;
            for (int s : scattered) {
                BBox other = footprint_box(s);
                BBox grown{other.x0 - gap, other.y0 - gap, other.x1 + gap, other.y1 + gap};
                if (!fb.intersect(grown).empty()) clash = true;
            }
            if (!clash) ok = true;
        }
        if (!ok) return std::nullopt;
        (void)under;
        o.z = z++;
        if (c >= 0 && items[std::size_t(c)].rides) {
            objs[std::size_t(c)].z = z++;
            objs[std::size_t(c)].parent = o.id;
        }
        scattered.push_back(i);
    }

    GeneratedScene g;
    g.scene.backdrop = backdrop;
    g.scene.dictionary = B.dict;
    g.scene.objects = std::move(objs);
    check_scene(g.scene);

    for (int i : cert_order) {
        const Item& it = items[std::size_t(i)];
        const ObjectInstance& o = g.scene.at(it.id);
        Step s;
        s.object = it.id;
        s.flip = o.pose != it.final_pose;
        if (it.label == ClassLabel::Cuboid)
            s.rotate = minimal_delta(o.rotation, it.final_pose == Pose::Vertical ? 0 : it.final_rot,
                                     it.final_pose == Pose::Vertical ? 90 : 180);
        if (it.compartment >= 0) {
            s.target = room_anchor(it.compartment);
            s.region = backdrop->compartments[std::size_t(it.compartment)].name;
        } else {
            s.region = g.scene.at(items[std::size_t(it.container)].id).name;
            s.target = {-1, -1};  // resolved below once the host is placed
        }
        g.certificate.push_back(s);
    }
    if (!cfg.guarantee_feasible) {
        g.certificate.clear();
        return g;
    }
    // Resolve container targets by replaying in order.
    Scene cur = g.scene;
    const int threshold = default_threshold(cfg.width, cfg.height);
    for (Step& s : g.certificate) {
        if (s.target.x < 0) {
            const ObjectInstance* host = cur.find_by_name(s.region);
            if (!host) return std::nullopt;
            s.target = host->bbox().center();
        }
        Rendering r = render(cur);
        try {
            cur = apply_step(cur, r.affordances, s);
        } catch (const Error&) {
            return std::nullopt;
        }
        if (!validate(cur, s.object, threshold).valid) return std::nullopt;
    }
    if (!goal_reached(cur)) return std::nullopt;
    return g;
}

}  // namespace

GeneratedScene generate_scene(const GenConfig& config) {
    config.check();
    Rng rng(config.seed);
    int outside = uniform(rng, config.min_outside, config.max_outside);
    GenConfig c = config;
    c.seed = derive_seed(config.seed, 0x5eed);
    return generate_scene(c, outside);
}

GeneratedScene generate_scene(const GenConfig& config, int outside) {
    config.check();
    if (outside < 0) throw Error(ErrorKind::InvalidArgument, "negative outside count");
    Rng rng(config.seed);
    for (int a = 0; a < config.max_retries; ++a) {
        if (auto g = attempt(config, rng, outside)) {
            g->seed = config.seed;
            return std::move(*g);
        }
    }
    throw Error(ErrorKind::Infeasible, "could not lay out a scene with " + std::to_string(outside) +
                                           " outside objects after " + std::to_string(config.max_retries) + " retries");
}

int replay_certificate(const Scene& scene, const std::vector<Step>& certificate) {
    Scene cur = scene;
    const int threshold = default_threshold(scene.width(), scene.height());
    for (std::size_t k = 0; k < certificate.size(); ++k) {
        try {
            cur = apply_step(cur, render(cur).affordances, certificate[k]);
        } catch (const Error&) {
            return int(k);
        }
        if (!validate(cur, certificate[k].object, threshold).valid) return int(k);
    }
    return goal_reached(cur) ? -1 : int(certificate.size());
}

std::vector<fs::path> generate_dataset(const GenConfig& config, int n_scenes, const fs::path& dir) {
    config.check();
    if (n_scenes < 1) throw Error(ErrorKind::InvalidArgument, "n_scenes must be >= 1");
    std::vector<fs::path> out;
    for (int i = 0; i < n_scenes; ++i) {
        GenConfig c = config;
        c.seed = derive_seed(config.seed, std::uint64_t(i));
        GeneratedScene g = generate_scene(c, stratified_outside(config, i));
        char name[32];
        std::snprintf(name, sizeof name, "scene_%04d", i);
        json extra = {{"seed", c.seed}, {"certificate", g.certificate_json()}, {"outside", int(outside_box(g.scene).size())}};
        out.push_back(save_scene(g.scene, dir / name, extra));
    }
    return out;
}

}  // namespace simip
