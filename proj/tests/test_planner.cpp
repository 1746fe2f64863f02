#include <doctest.h>

#include <fstream>
#include <sstream>
#include <set>

#include "simip/errors.hpp"
#include "simip/planner.hpp"
#include "simip/scenegen.hpp"
#include "simip/validation.hpp"
#include "support.hpp"

using namespace simip;
using simip::test::SceneBuilder;
using simip::test::disc_sprite;
using simip::test::rect_sprite;
namespace fs = std::filesystem;

namespace {

// Can, bowl, two cups and an apple next to a five-compartment box.
Scene five_object_scene() {
    SceneBuilder b(512, 384);
    b.box({250, 30, 500, 354});
    b.compartment({254, 34, 334, 190}).compartment({338, 34, 416, 190}).compartment({420, 34, 496, 190});
    b.compartment({254, 194, 374, 350}).compartment({378, 194, 496, 350});
    b.add("black_can", ClassLabel::Can, disc_sprite(26, {35, 35, 35}, 4), {20, 20}, 0);
    b.add("blue_bowl", ClassLabel::Bowl, disc_sprite(33, {50, 80, 180}, 5), {120, 30}, 0);
    b.add("yellow_cup", ClassLabel::Cup, disc_sprite(19, {230, 200, 40}, 3), {30, 160}, 0);
    b.add("blue_cup", ClassLabel::Cup, disc_sprite(19, {40, 90, 200}, 3), {130, 190}, 0);
    b.add("red_apple", ClassLabel::Apple, disc_sprite(11, {200, 30, 30}), {60, 300}, 0);
    return b.build();
}

// A 60x20 bar whose only compartment is 26 wide and 66 tall.
Scene quarter_turn_scene(int& id) {
    SceneBuilder b(200, 150);
    b.box({120, 30, 152, 102}).compartment({123, 33, 149, 99});
    id = b.add("bar", ClassLabel::Cuboid, rect_sprite(60, 20, {40, 90, 200}), {20, 60}, 0);
    return b.build();
}

bool accepted(const Scene& s, const Step& st, int thr) {
    Scene t = transform_step(s, st);
    if (subtree_out_of_bounds(t, st.object)) return false;
    if (!is_subset(footprint(t, st.object), t.backdrop->box_region)) return false;
    return validate(t, st.object, thr).valid;
}

}  // namespace

TEST_CASE("rotation sweep order") {
    std::vector<int> s = rotation_sweep(15);
    REQUIRE(s.size() == 24);
    CHECK(s[0] == 0);
    CHECK(s[1] == 15);
    CHECK(s[2] == -15);
    CHECK(s.back() == 180);
    CHECK(std::set<int>(s.begin(), s.end()).size() == 24);
    CHECK(rotation_sweep(90) == std::vector<int>{0, 90, -90, 180});
}

TEST_CASE("a packed scene needs no steps") {
    GenConfig c;
    c.width = 512;
    c.height = 384;
    c.min_outside = c.max_outside = 0;
    c.min_in_box = c.max_in_box = 2;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        c.seed = seed;
        Scene s = generate_scene(c).scene;
        for (PlanMode m : {PlanMode::Greedy, PlanMode::Exhaustive}) {
            PlannerConfig pc;
            pc.mode = m;
            PlanResult r = plan(s, pc);
            CHECK(r.plan.complete);
            CHECK(r.plan.size() == 0);
            CHECK(r.tree.nodes.size() == 1);
        }
        PlannerConfig pc;
        CHECK(baseline_plan(s, pc).steps.empty());
    }
}

TEST_CASE("five objects are packed in five steps") {
    Scene s = five_object_scene();
    CHECK(outside_box(s).size() == 5);
    for (PlanMode m : {PlanMode::Greedy, PlanMode::Exhaustive}) {
        PlannerConfig pc;
        pc.mode = m;
        pc.seed = 3;
        PlanResult r = plan(s, pc);
        REQUIRE(r.plan.complete);
        CHECK(r.plan.size() == 5);
        std::set<int> moved;
        for (const Step& st : r.plan.steps) moved.insert(st.object);
        CHECK(moved == outside_box(s));
        CHECK(goal_reached(r.plan.scenes.back()));
        CHECK(plan_is_consistent(r.plan, default_threshold(512, 384)));
        for (const ValidationResult& v : r.plan.validations) CHECK(v.valid);
    }
}

TEST_CASE("a bar that fits only after a quarter turn") {
    int id;
    Scene s = quarter_turn_scene(id);
    const int thr = default_threshold(200, 150);
    // brute force: every rotation and every compartment pixel as target
    std::set<int> ok_rotations;
    const Compartment& c = s.backdrop->compartments.front();
    for (int rot = 0; rot < 360; rot += 15)
        for (int y = c.bbox.y0; y < c.bbox.y1; ++y)
            for (int x = c.bbox.x0; x < c.bbox.x1; ++x)
                if (accepted(s, Step{id, false, signed_degrees(rot), {x, y}, "compartment_1"}, thr)) ok_rotations.insert(rot);
    CHECK(ok_rotations == std::set<int>{90, 270});
    for (PlanMode m : {PlanMode::Greedy, PlanMode::Exhaustive}) {
        PlannerConfig pc;
        pc.mode = m;
        PlanResult r = plan(s, pc);
        REQUIRE(r.plan.complete);
        REQUIRE(r.plan.size() == 1);
        CHECK(std::abs(r.plan.steps[0].rotate) == 90);
        CHECK(r.plan.scenes.back().at(id).rotation % 180 == 90);
    }
    PlannerConfig coarse;
    coarse.rotation_step = 45;
    CHECK(plan(s, coarse).plan.complete);
}

TEST_CASE("planning is deterministic per seed") {
    GenConfig c;
    c.width = 512;
    c.height = 384;
    c.seed = 31;
    Scene s = generate_scene(c, 5).scene;
    PlannerConfig pc;
    pc.seed = 9;
    PlanResult a = plan(s, pc), b = plan(s, pc);
    CHECK(a.plan.steps == b.plan.steps);
    CHECK(a.tree.nodes.size() == b.tree.nodes.size());
}

TEST_CASE("placement regions stay inside the box") {
    GenConfig c;
    c.width = 512;
    c.height = 384;
    c.seed = 12;
    Scene s = generate_scene(c, 3).scene;
    for (int id : outside_box(s)) {
        auto regions = placement_regions(s, id, PlannerConfig{});
        CHECK(!regions.empty());
        for (const PlacementRegion& r : regions)
            for (Point q : r.component.pixels) CHECK(s.backdrop->box_region.at(q.x, q.y));
    }
}

TEST_CASE("random baseline matches the brute-force acceptance probability") {
    SceneBuilder b(120, 90);
    b.box({60, 6, 116, 84}).compartment({62, 8, 114, 82});
    int id = b.add("red_apple", ClassLabel::Apple, disc_sprite(8, {200, 30, 30}), {10, 30}, 0);
    Scene s = b.build();
    const int thr = default_threshold(120, 90);
    AffordanceMap m = composite_affordances(s, subtree(s, id));
    Mask place = mask_and(mask_or(m[Affordance::PlaceOn], m[Affordance::Hole]), s.backdrop->box_region);
    long good = 0, total = 0;
    for (int rot = 0; rot < 360; rot += 15)
        for (int y = 0; y < 90; ++y)
            for (int x = 0; x < 120; ++x) {
                if (!place.at(x, y)) continue;
                ++total;
                Scene t = transform_step(s, Step{id, false, signed_degrees(rot), {x, y}, ""});
                good += !subtree_out_of_bounds(t, id) && validate(t, id, thr).valid && goal_reached(t);
            }
    const double p = double(good) / double(total);
    int wins = 0;
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
        PlannerConfig pc;
        pc.seed = seed;
        wins += baseline_plan(s, pc).complete;
    }
    CHECK(p > 0.05);
    CHECK(std::abs(double(wins) / 1000.0 - p) <= 0.03);
}

TEST_CASE("random baseline rarely packs six objects") {
    GenConfig c;
    c.width = 512;
    c.height = 384;
    int wins = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        c.seed = seed;
        Scene s = generate_scene(c, 6).scene;
        PlannerConfig pc;
        pc.seed = seed;
        Plan p = baseline_plan(s, pc);
        CHECK(p.size() == 6);
        wins += p.complete;
    }
    CHECK(wins <= 1);
}

TEST_CASE("planning tree export") {
    fs::path dir = fs::temp_directory_path() / "simip_tree_test";
    fs::remove_all(dir);
    GenConfig c;
    c.width = 512;
    c.height = 384;
    c.min_outside = c.max_outside = 0;
    c.seed = 2;
    PlanResult single = plan(generate_scene(c).scene, PlannerConfig{});
    dump_tree(single.tree, dir / "single");
    CHECK(fs::exists(dir / "single" / "node_0.png"));
    CHECK(!fs::exists(dir / "single" / "node_1.png"));
    CHECK(fs::exists(dir / "single" / "tree.txt"));

    PlanResult r = plan(five_object_scene(), PlannerConfig{});
    REQUIRE(r.plan.complete);
    dump_tree(r.tree, dir / "five");
    std::ifstream txt(dir / "five" / "tree.txt");
    std::string line;
    std::getline(txt, line);
    int flagged = 0, rows = 0;
    while (std::getline(txt, line)) {
        std::istringstream is(line);
        std::string node, parent;
        int depth, on_plan;
        std::string valid;
        is >> node >> parent >> depth >> on_plan >> valid;
        if (on_plan) {
            CHECK(node == "node_" + std::to_string(flagged));
            if (flagged > 0) CHECK(valid == "1");
            ++flagged;
        }
        ++rows;
    }
    CHECK(flagged == 6);
    CHECK(rows == int(r.tree.nodes.size()));
    for (int k = 0; k < rows; ++k) CHECK(fs::exists(dir / "five" / ("node_" + std::to_string(k) + ".png")));
    for (const PlanNode& n : r.tree.nodes)
        if (n.on_plan && n.validation) CHECK(n.validation->valid);
}

TEST_CASE("planner config validation") {
    PlannerConfig pc;
    pc.rotation_step = 7;
    CHECK_THROWS_AS(pc.check(), Error);
    PlannerConfig q;
    q.mode = PlanMode::Exhaustive;
    q.threshold = 12;
    CHECK(PlannerConfig::from_json(q.to_json()).to_json() == q.to_json());
}
