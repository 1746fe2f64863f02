#include <doctest.h>

#include <random>

#include "simip/eval.hpp"
#include "simip/imagination.hpp"
#include "simip/ipm.hpp"
#include "simip/scenegen.hpp"
#include "simip/symbolic.hpp"
#include "simip/validation.hpp"
#include "ipm_oracle.hpp"
#include "support.hpp"

using namespace simip;
using simip::test::SceneBuilder;
using simip::test::disc_sprite;
using simip::test::rect_sprite;

namespace {

std::vector<Scene> sample_scenes(int n, double stack = 0.4, double overlap = 0.4) {
    GenConfig g;
    g.width = 512;
    g.height = 384;
    g.stack_prob = stack;
    g.overlap_prob = overlap;
    std::vector<Scene> out;
    for (int i = 0; i < n; ++i) {
        g.seed = 500 + std::uint64_t(i);
        out.push_back(generate_scene(g, i % 8).scene);
    }
    return out;
}

bool subset(const Mask& a, const Mask& b) { return mask_andnot(a, b).count() == 0; }

Scene without(const Scene& s, int id) {
    Scene t = s;
    std::set<int> gone = subtree(s, id);
    std::erase_if(t.objects, [&](const ObjectInstance& o) { return gone.count(o.id) > 0; });
    return t;
}

}  // namespace

TEST_CASE("compositing properties on generated scenes") {
    for (const Scene& s : sample_scenes(12)) {
        Rendering a = composite(s), b = composite(s);
        CHECK(a.image == b.image);
        CHECK(a.affordances == b.affordances);
        CHECK(a.labels == b.labels);
        for (const ObjectInstance& o : s.objects) {
            int seen = 0, agree = 0;
            for (int y = 0; y < o.sprite->height(); ++y)
                for (int x = 0; x < o.sprite->width(); ++x) {
                    const int sx = o.origin.x + x, sy = o.origin.y + y;
                    if (!o.sprite->mask.at(x, y) || a.label_at(sx, sy) != o.id) continue;
                    ++seen;
                    bool same = true;
                    for (std::size_t c = 0; c < 4; ++c)
                        same = same && a.affordances.channels[c].at(sx, sy) == o.sprite->affordances.channels[c].at(x, y);
                    agree += same;
                }
            CHECK(agree == seen);
            for (int d : subtree(s, o.id)) CHECK(subset(footprint(s, d), footprint(s, o.id)));
        }
        const std::set<int> out = outside_box(s);
        for (const ObjectInstance& o : s.objects) {
            if (o.parent) continue;
            for (int id : outside_box(without(s, o.id))) CHECK(out.count(id) == 1);
        }
    }
}

TEST_CASE("generated backdrops carry the affordance rules") {
    for (const Scene& s : sample_scenes(8)) {
        CHECK_NOTHROW(check_scene(s));
        const Backdrop& b = *s.backdrop;
        Mask rooms(s.width(), s.height());
        for (const Compartment& c : b.compartments) {
            CHECK(subset(c.region, b.affordances[Affordance::Hole]));
            CHECK(subset(c.region, b.affordances[Affordance::PlaceOn]));
            CHECK(mask_and(c.region, b.affordances[Affordance::Obstruct]).count() == 0);
            rooms = mask_or(rooms, c.region);
        }
        CHECK(mask_andnot(b.box_region, rooms) == b.affordances[Affordance::Obstruct]);
        Mask table(s.width(), s.height());
        for (int y = 0; y < s.height(); ++y)
            for (int x = 0; x < s.width(); ++x) table.at(x, y) = !b.box_region.at(x, y);
        CHECK(subset(table, b.affordances[Affordance::PlaceOn]));
        for (const ObjectInstance& o : s.objects)
            for (const Mask& ch : o.sprite->affordances.channels) CHECK(subset(ch, o.sprite->mask));
    }
}

TEST_CASE("perception properties") {
    const std::vector<Scene> scenes = sample_scenes(100, 0.3, 0.5);
    double prev[4] = {0, 0, 0, 0};
    int k = 0;
    for (int jitter : {0, 1, 2, 4}) {
        double sum = 0.0;
        for (std::size_t i = 0; i < scenes.size(); ++i) {
            CorruptionConfig c;
            c.boundary_jitter = jitter;
            c.seed = 9 + i;
            sum += perception_quality(corrupt(perceive_oracle(scenes[i]), c), scenes[i]).affordance_miou;
        }
        prev[k++] = sum / double(scenes.size());
    }
    CHECK(prev[0] == doctest::Approx(1.0));
    for (int i = 1; i < 4; ++i) CHECK(prev[i] <= prev[i - 1]);

    int completed = 0;
    for (std::size_t i = 0; i < 30; ++i) {
        const Scene& s = scenes[i];
        PerceptionReport seen = perceive_oracle(s);
        PerceptionQuality q = perception_quality(seen, s);
        CHECK(q.affordance_miou == doctest::Approx(1.0));
        CHECK(q.instance_miou == doctest::Approx(1.0));
        CHECK(q.detection_score == doctest::Approx(1.0));
        PerceptionReport full = complete_objects(s, seen, true, *s.dictionary);
        REQUIRE(full.objects.size() == seen.objects.size());
        for (std::size_t d = 0; d < full.objects.size(); ++d) {
            const Detection& after = full.objects[d];
            const Mask vis = to_scene(seen.objects[d].mask(), s.width(), s.height());
            const Mask got = to_scene(after.mask(), s.width(), s.height());
            const Mask truth = to_scene(s.at(after.source_id).patch(), s.width(), s.height());
            CHECK(subset(vis, got));
            CHECK(subset(got, truth));
            completed += after.completed;
        }
    }
    CHECK(completed > 0);
}

TEST_CASE("imagination properties") {
    int id;
    SceneBuilder b(240, 180);
    b.box({150, 20, 230, 160}).compartment({154, 24, 226, 156});
    id = b.add("bar", ClassLabel::Cuboid, rect_sprite(50, 18, {40, 90, 200}), {20, 60}, 0);
    Scene s = b.build();
    const Scene copy = s;
    const AffordanceMap map = render(s).affordances;
    const std::size_t count = s.at(id).sprite->mask.count();

    Scene moved = apply_action(s, map, PickPlace{id, {190, 90}, "compartment_1"});
    CHECK(moved.at(id).sprite->mask.count() == count);
    CHECK(render(apply_action(s, map, PickPlace{id, {190, 90}, "compartment_1"})).image == render(moved).image);
    CHECK(render(s).image == render(copy).image);
    CHECK(s.at(id).origin == copy.at(id).origin);

    for (int deg = 15; deg < 360; deg += 15) {
        Scene r = apply_action(s, map, Rotate{id, deg});
        CHECK(std::abs(double(r.at(id).sprite->mask.count()) - double(count)) <= 0.02 * double(count));
    }
    Scene spun = s;
    for (int i = 0; i < 24; ++i) spun = reorient(spun, id, false, 15);
    CHECK(*spun.at(id).sprite == *s.at(id).sprite);
}

TEST_CASE("validation properties") {
    std::mt19937 rng(3);
    for (const Scene& s : sample_scenes(6)) {
        for (const ObjectInstance& o : s.objects) {
            if (o.parent) continue;
            Step st{o.id, false, 15 * int(rng() % 24), {int(rng() % 512), int(rng() % 384)}, "x"};
            Scene t = transform_step(s, st);
            const std::size_t c = conflict_area(t, o.id);
            CHECK(c == conflict_area_bruteforce(t, o.id));
            bool was_valid = false;
            for (int thr = 0; thr <= 200; thr += 5) {
                bool v = validate(t, o.id, thr).valid;
                CHECK((!was_valid || v));
                was_valid = v;
            }
        }
    }
    std::size_t first = 0;
    for (Point shift : {Point{0, 0}, Point{13, 7}}) {
        SceneBuilder b(300, 200);
        b.box({150 + shift.x, 20 + shift.y, 260 + shift.x, 150 + shift.y})
            .compartment({154 + shift.x, 24 + shift.y, 256 + shift.x, 146 + shift.y});
        b.add("plate", ClassLabel::Plate, disc_sprite(20, {220, 220, 220}, 4), {40 + shift.x, 40 + shift.y}, 0);
        int cup = b.add("cup", ClassLabel::Cup, disc_sprite(18, {40, 90, 200}, 3), {140 + shift.x, 60 + shift.y}, 1);
        const std::size_t c = conflict_area(b.build(), cup);
        if (shift.x == 0) first = c;
        else CHECK(c == first);
        CHECK(c > 0);
    }
}

TEST_CASE("plan and symbolic properties") {
    std::vector<Scene> scenes = sample_scenes(16, 0.3, 0.0);
    for (std::size_t i = 0; i < scenes.size(); ++i) {
        PlannerConfig pc;
        pc.seed = i;
        Plan p = plan(scenes[i], pc).plan;
        const int thr = default_threshold(512, 384);
        CHECK(plan_is_consistent(p, thr));
        CHECK(int(p.size()) <= pc.max_depth);
        for (const ValidationResult& v : p.validations) CHECK(v.valid);
        if (!p.complete) continue;
        CHECK(goal_reached(p.scenes.back()));
        SymbolicPlan sp = parse(p);
        for (const SymbolicCommand& cmd : sp.commands) {
            const BboxRef* ref = nullptr;
            if (const auto* g = std::get_if<GraspCmd>(&cmd)) ref = &g->bbox;
            if (const auto* pl = std::get_if<PlaceAtCmd>(&cmd)) ref = &pl->bbox;
            if (!ref) continue;
            const int k = std::stoi(ref->image.substr(6)) - 1;
            REQUIRE(k >= 0);
            REQUIRE(std::size_t(k) < p.scenes.size());
            const Scene& at = p.scenes[std::size_t(k)];
            BBox expect;
            if (const ObjectInstance* o = at.find_by_name(ref->entity)) expect = o->bbox();
            for (const Compartment& c : at.backdrop->compartments)
                if (c.name == ref->entity) expect = c.bbox;
            CHECK(ref->box == expect);
        }
    }
}

TEST_CASE("warping keeps ground lines straight and merging commutes") {
    CameraModel c = CameraModel::look_at({0.2, -0.8, 0.6}, {0.0, 0.1, 0.0}, {0, 0, 1}, 550.0, 640, 480);
    TopViewSpec spec{0.002, 400, 400, -0.4, 0.4};
    const Eigen::Matrix3d Hinv = ground_homography(c, spec).inverse();
    auto to_top = [&](double X, double Y) {
        Eigen::Vector2d px;
        REQUIRE(c.project({X, Y, 0.0}, px));
        Eigen::Vector3d q = Hinv * Eigen::Vector3d(px.x(), px.y(), 1.0);
        return Eigen::Vector2d(q.x() / q.z(), q.y() / q.z());
    };
    for (int line = 0; line < 5; ++line) {
        const double y0 = -0.2 + 0.1 * line;
        Eigen::Vector2d a = to_top(-0.3, y0), b = to_top(0.3, y0 + 0.15);
        const Eigen::Vector2d dir = (b - a).normalized();
        for (double t : {0.2, 0.45, 0.7}) {
            Eigen::Vector2d p = to_top(-0.3 + 0.6 * t, y0 + 0.15 * t);
            Eigen::Vector2d r = p - a;
            CHECK(std::abs(r.x() * dir.y() - r.y() * dir.x()) < 0.5);
        }
    }

    std::vector<CameraModel> cams;
    std::vector<Image> views;
    for (Eigen::Vector3d eye : {Eigen::Vector3d{0, -0.9, 0.8}, Eigen::Vector3d{0.9, 0, 0.8}, Eigen::Vector3d{0, 0.9, 0.8}}) {
        cams.push_back(CameraModel::look_at(eye, {0, 0, 0}, {0, 0, 1}, 500.0, 320, 240));
        views.push_back(render_ground_plane(cams.back(), test::checkerboard(0.05), 2));
    }
    MergeResult fwd = remap_and_merge(views, cams, spec);
    std::vector<CameraModel> rc(cams.rbegin(), cams.rend());
    std::vector<Image> rv(views.rbegin(), views.rend());
    MergeResult back = remap_and_merge(rv, rc, spec);
    CHECK(fwd.image == back.image);
    CHECK(fwd.coverage == back.coverage);
}

TEST_CASE("per-length and per-step results agree case by case") {
    ExperimentConfig c;
    c.dataset.width = 512;
    c.dataset.height = 384;
    c.dataset.min_outside = 0;
    c.dataset.max_outside = 6;
    c.n_scenes = 12;
    c.threads = 1;
    c.methods = {Method::Greedy, Method::GreedyNoCompletion, Method::Baseline};
    c.levels = {corruption_preset("oracle"), corruption_preset("strong")};
    Report r = run(c);
    Report again = run(c);
    CHECK(r.csv() == again.csv());
    int failed = 0;
    for (const CaseRecord& cs : r.cases) {
        REQUIRE(cs.error.empty());
        bool all = true;
        for (const StepRecord& s : cs.steps) {
            all = all && s.success;
            failed += !s.success;
            CHECK((s.success == (s.cause == FailureCause::None)));
        }
        CHECK(cs.success == all);
    }
    CHECK(classify_failures(r).at("all").total() == failed);
}
