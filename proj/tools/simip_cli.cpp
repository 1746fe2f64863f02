#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <json.hpp>
#include <sstream>

#include "simip/errors.hpp"
#include "simip/eval.hpp"
#include "simip/ipm.hpp"
#include "simip/manifest.hpp"
#include "simip/perception.hpp"
#include "simip/planner.hpp"
#include "simip/png_io.hpp"
#include "simip/scenegen.hpp"
#include "simip/symbolic.hpp"
#include "simip/visualize.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace simip;

namespace {

struct Usage : std::runtime_error {
    using std::runtime_error::runtime_error;
};

json read_json(const fs::path& p) {
    std::ifstream in(p);
    if (!in) throw Error(ErrorKind::Io, "cannot read " + p.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Io, p.string() + ": " + e.what());
    }
}

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream out(p);
    out << text;
    if (!out) throw Error(ErrorKind::Io, "cannot write " + p.string());
}

void prepare_out(const fs::path& out) {
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) throw Error(ErrorKind::Io, "cannot create " + out.string() + ": " + ec.message());
}

json steps_json(const Plan& p) {
    json a = json::array();
    for (std::size_t k = 0; k < p.steps.size(); ++k) {
        const Step& s = p.steps[k];
        a.push_back({{"object", s.object},
                     {"name", p.scenes[k].at(s.object).name},
                     {"flip", s.flip},
                     {"rotate", s.rotate},
                     {"target", {s.target.x, s.target.y}},
                     {"region", s.region},
                     {"conflict_pixels", p.validations[k].conflict_pixels}});
    }
    return a;
}

struct PlanOptions {
    fs::path scene;
    fs::path out;
    fs::path config;
    std::uint64_t seed = 1;
    std::string mode = "greedy";
    std::string level = "oracle";
    int threshold = -1;
    bool no_completion = false;
    bool require_complete = false;
};

void add_plan_flags(CLI::App* sub, PlanOptions& o) {
    sub->add_option("--scene", o.scene, "Scene manifest")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", o.out, "Output directory")->required();
    sub->add_option("--config", o.config, "Planner config (JSON)")->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "Master seed")->capture_default_str();
    sub->add_option("--mode", o.mode, "Search mode")->check(CLI::IsMember({"greedy", "exhaustive"}))->capture_default_str();
    sub->add_option("--level", o.level, "Perception corruption level")
        ->check(CLI::IsMember({"oracle", "mild", "strong"}))
        ->capture_default_str();
    sub->add_option("--threshold", o.threshold, "Conflict threshold override in pixels (negative: resolution default)");
    sub->add_flag("--no-completion", o.no_completion, "Disable object completion");
    sub->add_flag("--require-complete", o.require_complete, "Exit 1 when no complete plan is found");
}

struct Planned {
    Scene truth;
    Belief belief;
    PlanResult result;
};

Planned run_planner(const PlanOptions& o) {
    Planned p;
    p.truth = load_scene(o.scene);
    PlannerConfig pc = o.config.empty() ? PlannerConfig{} : PlannerConfig::from_json(read_json(o.config));
    pc.seed = derive_seed(o.seed, 1);
    pc.mode = o.mode == "exhaustive" ? PlanMode::Exhaustive : PlanMode::Greedy;
    if (o.threshold >= 0) pc.threshold = o.threshold;
    pc.check();
    PerceptionSettings ps;
    ps.corruption = corruption_preset(o.level).corruption;
    ps.corruption.seed = derive_seed(o.seed, 2);
    ps.completion = !o.no_completion;
    PerceptionReport report = perceive(p.truth, ps);
    p.belief = build_belief(report, p.truth);
    p.result = plan(p.belief.scene, pc);
    return p;
}

int finish_plan(const Plan& plan, const PlanOptions& o) {
    if (plan.steps.empty() && plan.complete) std::cout << "nothing needs to be done\n";
    else std::cout << to_text(parse(plan));
    if (!plan.complete) {
        std::cerr << "simip: no complete plan found"
                  << (plan.depth_exceeded ? " (depth limit)" : plan.budget_exhausted ? " (budget exhausted)" : "") << "\n";
        if (o.require_complete) return 1;
    }
    return 0;
}

int cmd_plan(const PlanOptions& o) {
    prepare_out(o.out);
    Planned p = run_planner(o);
    const Plan& plan = p.result.plan;
    json j = {{"complete", plan.complete},
              {"depth_exceeded", plan.depth_exceeded},
              {"budget_exhausted", plan.budget_exhausted},
              {"steps", steps_json(plan)}};
    write_text(o.out / "plan.json", j.dump(2) + "\n");
    write_text(o.out / "plan.txt", plan.steps.empty() && plan.complete ? "nothing needs to be done\n" : to_text(parse(plan)));
    render_plan_strip(plan, o.out / "strip.png");
    return finish_plan(plan, o);
}

int cmd_tree(const PlanOptions& o) {
    prepare_out(o.out);
    Planned p = run_planner(o);
    dump_tree(p.result.tree, o.out);
    std::cout << p.result.tree.nodes.size() << " nodes, plan of " << p.result.plan.size() << " steps\n";
    return finish_plan(p.result.plan, o);
}

int cmd_symbolic(const PlanOptions& o, const fs::path& replay_path) {
    prepare_out(o.out);
    if (!replay_path.empty()) {
        Scene truth = load_scene(o.scene);
        SymbolicPlan sp = SymbolicPlan::from_json(read_json(replay_path));
        Scene final_scene = replay(truth, sp, o.threshold);
        write_png(o.out / "final.png", render(final_scene).image);
        std::cout << "replayed " << sp.commands.size() << " commands\n";
        return 0;
    }
    Planned p = run_planner(o);
    const Plan& plan = p.result.plan;
    SymbolicPlan sp = parse(plan);
    write_text(o.out / "symbolic.json", sp.to_json().dump(2) + "\n");
    write_text(o.out / "symbolic.txt", sp.listing());
    for (std::size_t k = 0; k < plan.scenes.size(); ++k)
        write_png(o.out / ("image_" + std::to_string(k + 1) + ".png"), render(plan.scenes[k]).image);
    std::cout << sp.listing();
    if (!plan.complete) {
        std::cerr << "simip: no complete plan found\n";
        if (o.require_complete) return 1;
    }
    return 0;
}

int cmd_generate(const fs::path& config, const fs::path& out, std::uint64_t seed, bool seed_given, int count,
                 int outside) {
    GenConfig gc = config.empty() ? GenConfig{} : GenConfig::from_json(read_json(config));
    if (seed_given || config.empty()) gc.seed = seed;
    if (outside >= 0) gc.min_outside = gc.max_outside = outside;
    gc.check();
    prepare_out(out);
    auto paths = generate_dataset(gc, count, out);
    std::cout << "generated " << paths.size() << " scenes in " << out.string() << "\n";
    return 0;
}

int cmd_evaluate(const fs::path& config, const fs::path& out, std::uint64_t seed, bool seed_given, int scenes,
                 int threads) {
    ExperimentConfig ec = ExperimentConfig::from_json(read_json(config));
    if (seed_given) ec.seed = seed;
    if (scenes > 0) ec.n_scenes = scenes;
    if (threads >= 0) ec.threads = threads;
    ec.out_dir = out;
    ec.check();
    Report r = run(ec);
    r.write();
    std::cout << r.length_table() << r.step_table();
    return 0;
}

std::array<std::uint8_t, 3> checker(double x, double y) {
    const double sq = 0.05;
    bool dark = (int(std::floor(x / sq)) + int(std::floor(y / sq))) % 2 != 0;
    return dark ? std::array<std::uint8_t, 3>{30, 30, 30} : std::array<std::uint8_t, 3>{235, 235, 235};
}

int cmd_ipm(const fs::path& cameras, const std::vector<fs::path>& images, const fs::path& top, const fs::path& out,
            bool demo) {
    prepare_out(out);
    std::vector<CameraModel> cams;
    std::vector<Image> views;
    TopViewSpec spec;
    if (demo) {
        spec = {0.002, 400, 400, -0.4, 0.4};
        const double d = 0.9, h = 0.8;
        const Eigen::Vector3d eyes[4] = {{0, -d, h}, {d, 0, h}, {0, d, h}, {-d, 0, h}};
        for (int k = 0; k < 4; ++k) {
            cams.push_back(CameraModel::look_at(eyes[k], {0, 0, 0}, {0, 0, 1}, 500.0, 640, 480));
            views.push_back(render_ground_plane(cams.back(), checker, 3));
            write_png(out / ("view_" + std::to_string(k + 1) + ".png"), views.back());
        }
    } else {
        if (cameras.empty() || top.empty() || images.empty())
            throw Usage("ipm needs --cameras, --images and --top (or --demo)");
        json cj = read_json(cameras);
        for (const json& c : cj) cams.push_back(CameraModel::from_json(c));
        for (const fs::path& p : images) views.push_back(read_image_png(p));
        spec = TopViewSpec::from_json(read_json(top));
        if (cams.size() != views.size()) throw Error(ErrorKind::InvalidArgument, "camera and image counts differ");
    }
    MergeResult m = remap_and_merge(views, cams, spec);
    write_png(out / "top_view.png", m.image);
    write_png(out / "coverage.png", m.coverage);
    std::cout << "merged " << views.size() << " views into " << spec.width << "x" << spec.height << " top view\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Imagination-based packing planner"};
    app.require_subcommand(1);

    PlanOptions plan_o, tree_o, sym_o;
    fs::path sym_replay;
    add_plan_flags(app.add_subcommand("plan", "Plan a single scene"), plan_o);
    add_plan_flags(app.add_subcommand("tree", "Plan a scene and dump the planning tree"), tree_o);
    CLI::App* sym = app.add_subcommand("symbolic", "Extract or replay a symbolic plan");
    add_plan_flags(sym, sym_o);
    sym->add_option("--replay", sym_replay, "Symbolic plan (JSON) to replay on the scene")->check(CLI::ExistingFile);

    fs::path gen_config, gen_out;
    std::uint64_t gen_seed = 1;
    int gen_count = 20, gen_outside = -1;
    CLI::App* gen = app.add_subcommand("generate", "Generate a synthetic dataset");
    gen->add_option("--config", gen_config, "Generator config (JSON)")->check(CLI::ExistingFile);
    gen->add_option("--out", gen_out, "Output directory")->required();
    CLI::Option* gen_seed_opt = gen->add_option("--seed", gen_seed, "Master seed")->capture_default_str();
    gen->add_option("--count", gen_count, "Number of scenes")->check(CLI::PositiveNumber)->capture_default_str();
    gen->add_option("--outside", gen_outside, "Exact number of objects outside the box")->check(CLI::NonNegativeNumber);

    fs::path ev_config, ev_out;
    std::uint64_t ev_seed = 1;
    int ev_scenes = 0, ev_threads = -1;
    CLI::App* ev = app.add_subcommand("evaluate", "Run an experiment and write report tables");
    ev->add_option("--config", ev_config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
    ev->add_option("--out", ev_out, "Output directory")->required();
    CLI::Option* ev_seed_opt = ev->add_option("--seed", ev_seed, "Master seed (overrides the config)");
    ev->add_option("--scenes", ev_scenes, "Scene count override")->check(CLI::PositiveNumber);
    ev->add_option("--threads", ev_threads, "Worker threads (0: all cores)")->check(CLI::NonNegativeNumber);

    fs::path ipm_cams, ipm_top, ipm_out;
    std::vector<fs::path> ipm_images;
    bool ipm_demo = false;
    CLI::App* ipm = app.add_subcommand("ipm", "Merge tilted views into a top view");
    ipm->add_option("--cameras", ipm_cams, "Camera models (JSON array)")->check(CLI::ExistingFile);
    ipm->add_option("--images", ipm_images, "View images (PNG), one per camera")->check(CLI::ExistingFile);
    ipm->add_option("--top", ipm_top, "Top-view spec (JSON)")->check(CLI::ExistingFile);
    ipm->add_option("--out", ipm_out, "Output directory")->required();
    ipm->add_flag("--demo", ipm_demo, "Use four synthetic checkerboard views");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (app.got_subcommand("plan")) return cmd_plan(plan_o);
        if (app.got_subcommand("tree")) return cmd_tree(tree_o);
        if (app.got_subcommand("symbolic")) return cmd_symbolic(sym_o, sym_replay);
        if (app.got_subcommand("generate"))
            return cmd_generate(gen_config, gen_out, gen_seed, gen_seed_opt->count() > 0, gen_count, gen_outside);
        if (app.got_subcommand("evaluate"))
            return cmd_evaluate(ev_config, ev_out, ev_seed, ev_seed_opt->count() > 0, ev_scenes, ev_threads);
        if (app.got_subcommand("ipm")) return cmd_ipm(ipm_cams, ipm_images, ipm_top, ipm_out, ipm_demo);
    } catch (const Usage& e) {
        std::cerr << "simip: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "simip: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
