#include <doctest.h>

#include "simip/errors.hpp"
#include "simip/planner.hpp"
#include "simip/scenegen.hpp"
#include "simip/symbolic.hpp"
#include "support.hpp"

using namespace simip;
using simip::test::SceneBuilder;
using simip::test::disc_sprite;
using simip::test::rect_sprite;

namespace {

std::size_t action_count(const Plan& p) { return p.actions().size(); }

Plan oracle_plan(std::uint64_t seed, int outside, PlanMode mode = PlanMode::Greedy) {
    GenConfig c;
    c.width = 512;
    c.height = 384;
    c.seed = seed;
    c.stack_prob = 0.3;
    Scene s = generate_scene(c, outside).scene;
    PlannerConfig pc;
    pc.seed = seed;
    pc.mode = mode;
    return plan(s, pc).plan;
}

}  // namespace

TEST_CASE("empty plans") {
    GenConfig c;
    c.width = 512;
    c.height = 384;
    c.min_outside = c.max_outside = 0;
    Scene s = generate_scene(c).scene;
    Plan p = plan(s, PlannerConfig{}).plan;
    SymbolicPlan sp = parse(p);
    CHECK(sp.commands.empty());
    CHECK(to_text(sp) == "nothing needs to be done\n");
    Scene r = replay(s, sp);
    CHECK(composite(r).image == composite(s).image);
}

TEST_CASE("command layout of a five-step plan") {
    Plan p = oracle_plan(3, 5, PlanMode::Exhaustive);
    REQUIRE(p.complete);
    REQUIRE(p.size() == 5);
    SymbolicPlan sp = parse(p);
    std::size_t rotates = 0, flips = 0;
    for (const Step& st : p.steps) {
        rotates += st.rotate != 0;
        flips += st.flip;
    }
    CHECK(sp.commands.size() == 2 * p.size() + rotates + flips);
    CHECK(sp.commands.size() == action_count(p) + p.size());
    const auto& g = std::get<GraspCmd>(sp.commands.front());
    const ObjectInstance& first = p.scenes[0].at(p.steps[0].object);
    CHECK(g.class_label == to_string(first.label));
    CHECK(g.bbox.entity == first.name);
    CHECK(g.bbox.image == "image_1");
    CHECK(g.bbox.box == first.bbox());
    std::size_t places = 0;
    for (const SymbolicCommand& cmd : sp.commands)
        if (const auto* pa = std::get_if<PlaceAtCmd>(&cmd)) {
            CHECK(pa->bbox.image == "image_" + std::to_string(places + 1));
            if (pa->class_label == "compartment") CHECK(pa->bbox.entity.rfind("compartment_", 0) == 0);
            ++places;
        }
    CHECK(places == 5);
    CHECK(sp.image_refs.size() == 6);
    std::string text = to_text(sp);
    CHECK(std::count(text.begin(), text.end(), '\n') == std::ptrdiff_t(sp.commands.size()));
    std::size_t picks = 0;
    for (std::size_t pos = 0; (pos = text.find("pick an object", pos)) != std::string::npos; ++pos) ++picks;
    CHECK(picks == 5);
    CHECK(SymbolicPlan::from_json(sp.to_json()) == sp);
    MESSAGE(sp.listing());
}

TEST_CASE("flip precedes the placement it prepares") {
    SceneBuilder b(220, 160);
    Sprite hz = rect_sprite(48, 20, {40, 90, 200}), vt = rect_sprite(20, 20, {40, 90, 200});
    b.pose(ClassLabel::Cuboid, Pose::Horizontal, hz).pose(ClassLabel::Cuboid, Pose::Vertical, vt);
    b.box({140, 40, 172, 72}).compartment({143, 43, 169, 69});
    b.add("blue_cuboid", ClassLabel::Cuboid, hz, {20, 60}, 0);
    Scene s = b.build();
    PlanResult r = plan(s, PlannerConfig{});
    REQUIRE(r.plan.complete);
    REQUIRE(r.plan.size() == 1);
    CHECK(r.plan.steps[0].flip);
    SymbolicPlan sp = parse(r.plan);
    int flip_at = -1, place_at = -1;
    for (std::size_t i = 0; i < sp.commands.size(); ++i) {
        if (std::holds_alternative<FlipCmd>(sp.commands[i])) flip_at = int(i);
        if (std::holds_alternative<PlaceAtCmd>(sp.commands[i])) place_at = int(i);
    }
    CHECK(flip_at >= 0);
    CHECK(flip_at < place_at);
    CHECK(composite(replay(s, sp)).image == composite(r.plan.scenes.back()).image);
}

TEST_CASE("parse then replay reproduces the final image") {
    int checked = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        Plan p = oracle_plan(seed, 1 + int(seed % 6));
        if (!p.complete) continue;
        SymbolicPlan sp = parse(p);
        Scene end = replay(p.scenes.front(), sp);
        CHECK(composite(end).image == composite(p.scenes.back()).image);
        CHECK(composite(end).affordances == composite(p.scenes.back()).affordances);
        ++checked;
    }
    CHECK(checked >= 15);
}

TEST_CASE("a corrupted bbox is reported at its command") {
    Plan p = oracle_plan(4, 3, PlanMode::Exhaustive);
    REQUIRE(p.complete);
    SymbolicPlan sp = parse(p);
    // corrupt the second Grasp
    std::size_t target = 0, seen = 0;
    for (std::size_t i = 0; i < sp.commands.size(); ++i)
        if (std::holds_alternative<GraspCmd>(sp.commands[i]) && ++seen == 2) target = i;
    REQUIRE(seen >= 2);
    std::get<GraspCmd>(sp.commands[target]).bbox.box.x0 += 7;
    try {
        replay(p.scenes.front(), sp);
        FAIL("corrupted plan replayed");
    } catch (const ReplayError& e) {
        CHECK(e.command() == target);
        CHECK(std::string(e.what()).find("command " + std::to_string(target + 1)) != std::string::npos);
    }
    // a misplaced target fails validation at the Place_at
    SymbolicPlan moved = parse(p);
    std::size_t last_place = 0;
    for (std::size_t i = 0; i < moved.commands.size(); ++i)
        if (std::holds_alternative<PlaceAtCmd>(moved.commands[i])) last_place = i;
    std::get<PlaceAtCmd>(moved.commands[last_place]).center = {2, 2};
    try {
        replay(p.scenes.front(), moved);
        FAIL("misplaced plan replayed");
    } catch (const ReplayError& e) {
        CHECK(e.command() == last_place);
    }
}

TEST_CASE("unvalidated plans are refused") {
    GenConfig c;
    c.width = 512;
    c.height = 384;
    c.seed = 5;
    Scene s = generate_scene(c, 6).scene;
    PlannerConfig pc;
    pc.seed = 1;
    Plan b = baseline_plan(s, pc);
    bool any_invalid = false;
    for (const ValidationResult& v : b.validations) any_invalid = any_invalid || !v.valid;
    if (any_invalid) {
        try {
            parse(b);
            FAIL("invalid plan parsed");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::Refused);
        }
    }
}

TEST_CASE("natural-language rendering") {
    SymbolicPlan sp;
    sp.image_refs = {"image_1", "image_2"};
    sp.commands.push_back(GraspCmd{"can", {"black_can", "image_1", {364, 257, 460, 353}}});
    sp.commands.push_back(RotateCmd{"black_can", 60});
    sp.commands.push_back(PlaceAtCmd{"compartment", {"compartment_1", "image_1", {600, 100, 700, 300}}, {650, 200}});
    std::string t = to_text(sp);
    CHECK(t.find("pick an object with label can at (412,305), diameter 96 px\n") == 0);
    CHECK(t.find("rotate black_can by 60 degrees\n") != std::string::npos);
    CHECK(t.find("place it on compartment_1 (label compartment) with center coordinate (650,200)\n") != std::string::npos);
    std::string l = sp.listing();
    CHECK(l.find("Grasp(\"can\", Bbox(\"black_can\", \"image_1\"))") != std::string::npos);
    CHECK(l.find("Place_at(\"compartment\", Bbox(\"compartment_1\", \"image_1\"))") != std::string::npos);
}
