#include "simip/planner.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <unordered_set>

#include "simip/errors.hpp"
#include "simip/png_io.hpp"

namespace simip {

namespace fs = std::filesystem;
using nlohmann::json;

void PlannerConfig::check() const {
    if (rotation_step <= 0 || 360 % rotation_step != 0 || rotation_step % kRotationStep != 0)
        throw Error(ErrorKind::InvalidArgument, "rotation step must divide 360 and be a multiple of 15");
    if (max_depth < 0) throw Error(ErrorKind::InvalidArgument, "max_depth must be >= 0");
    if (jitter_samples < 0) throw Error(ErrorKind::InvalidArgument, "jitter_samples must be >= 0");
}

json PlannerConfig::to_json() const {
    return {{"seed", seed},
            {"rotation_step", rotation_step},
            {"allow_flip", allow_flip},
            {"allow_stacking", allow_stacking},
            {"max_depth", max_depth},
            {"mode", mode == PlanMode::Greedy ? "greedy" : "exhaustive"},
            {"jitter_samples", jitter_samples},
            {"threshold", threshold},
            {"max_expansions", max_expansions},
            {"max_failed_nodes", max_failed_nodes}};
}

PlannerConfig PlannerConfig::from_json(const json& j) {
    PlannerConfig c;
    c.seed = j.value("seed", c.seed);
    c.rotation_step = j.value("rotation_step", c.rotation_step);
    c.allow_flip = j.value("allow_flip", c.allow_flip);
    c.allow_stacking = j.value("allow_stacking", c.allow_stacking);
    c.max_depth = j.value("max_depth", c.max_depth);
    std::string mode = j.value("mode", std::string("greedy"));
    if (mode == "greedy") c.mode = PlanMode::Greedy;
    else if (mode == "exhaustive") c.mode = PlanMode::Exhaustive;
    else throw Error(ErrorKind::InvalidArgument, "unknown planner mode '" + mode + "'");
    c.jitter_samples = j.value("jitter_samples", c.jitter_samples);
    c.threshold = j.value("threshold", c.threshold);
    c.max_expansions = j.value("max_expansions", c.max_expansions);
    c.max_failed_nodes = j.value("max_failed_nodes", c.max_failed_nodes);
    c.check();
    return c;
}

std::vector<Action> Plan::actions() const {
    std::vector<Action> out;
    for (const Step& s : steps)
        for (Action& a : s.actions()) out.push_back(std::move(a));
    return out;
}

std::vector<int> rotation_sweep(int step) {
    std::vector<int> out{0};
    for (int d = step; d < 180; d += step) {
        out.push_back(d);
        out.push_back(-d);
    }
    if (180 % step == 0) out.push_back(180);
    return out;
}

namespace {

int threshold_for(const Scene& s, const PlannerConfig& cfg) {
    return cfg.threshold >= 0 ? cfg.threshold : default_threshold(s.width(), s.height());
}

std::string region_name(const Scene& scene, const std::set<int>& lifted, Point p) {
    auto order = draw_order(scene);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        const ObjectInstance& o = **it;
        if (lifted.contains(o.id)) continue;
        BBox b = o.bbox();
        if (b.contains(p) && o.sprite->mask.at(p.x - b.x0, p.y - b.y0)) return o.name;
    }
    for (const Compartment& c : scene.backdrop->compartments)
        if (c.region.at(p.x, p.y)) return c.name;
    return "box";
}

struct Candidate {
    Step step;
    Scene scene;
    ValidationResult validation;
    bool accepted = false;
};

class Search {
public:
    Search(const PlannerConfig& cfg, PlanningTree& tree) : cfg_(cfg), tree_(tree), rng_(cfg.seed) {}

    // Returns the leaf node id of the found path (complete or not).
    int run(const Scene& initial) {
        PlanNode root;
        root.scene = initial;
        tree_.nodes.push_back(std::move(root));
        threshold_ = threshold_for(initial, cfg_);
        if (cfg_.mode == PlanMode::Greedy) return greedy(0);
        int leaf = -1;
        if (exhaustive(0, leaf)) return leaf;
        return best_leaf_;
    }

    bool depth_exceeded = false;
    bool budget_exhausted = false;

private:
    const PlannerConfig& cfg_;
    PlanningTree& tree_;
    std::mt19937_64 rng_;
    int threshold_ = 0;
    std::size_t expansions_ = 0;
    std::unordered_set<std::size_t> dead_;
    int best_leaf_ = 0;
    std::size_t best_outside_ = std::size_t(-1);

    int add_node(int parent, const Candidate& c) {
        PlanNode n;
        n.id = int(tree_.nodes.size());
        n.parent = parent;
        n.depth = tree_.nodes[std::size_t(parent)].depth + 1;
        n.scene = c.scene;
        n.step = c.step;
        n.validation = c.validation;
        tree_.nodes[std::size_t(parent)].children.push_back(n.id);
        tree_.nodes.push_back(std::move(n));
        return int(tree_.nodes.size()) - 1;
    }

    template <class T>
    void shuffle(std::vector<T>& v) {
        std::shuffle(v.begin(), v.end(), rng_);
    }

    std::vector<int> movable_objects(const Scene& s) {
        std::set<int> out = outside_box(s);
        std::vector<int> v(out.begin(), out.end());
        shuffle(v);
        if (cfg_.mode == PlanMode::Exhaustive) {
            // largest footprint first
            std::map<int, std::size_t> area;
            for (int id : v) area[id] = footprint_patch(s, id).mask.count();
            std::stable_sort(v.begin(), v.end(), [&](int a, int b) { return area[a] > area[b]; });
        }
        return v;
    }

    std::vector<Point> targets_for(const Component& c) {
        std::vector<Point> t{c.anchor()};
        for (int k = 0; k < cfg_.jitter_samples; ++k) {
            std::uniform_int_distribution<std::size_t> pick(0, c.pixels.size() - 1);
            t.push_back(c.pixels[pick(rng_)]);
        }
        return t;
    }

    // Enumerates candidates for `object` in sweep order; `visit` returns true to stop.
    template <class Visit>
    void candidates(const Scene& s, const AffordanceMap& map, int object, Visit&& visit) {
        std::vector<PlacementRegion> regions = placement_regions(s, object, cfg_);
        if (cfg_.mode == PlanMode::Greedy) {
            shuffle(regions);
        } else {
            // best fit first
            std::stable_sort(regions.begin(), regions.end(), [](const PlacementRegion& a, const PlacementRegion& b) {
                return a.component.count < b.component.count;
            });
        }
        ConflictField field(s, object);
        const bool can_flip = cfg_.allow_flip && s.dictionary &&
                              s.dictionary->contains(s.at(object).label, other(s.at(object).pose)) &&
                              s.children_of(object).empty();
        const std::vector<int> sweep = rotation_sweep(cfg_.rotation_step);
        for (const PlacementRegion& r : regions) {
            std::optional<Candidate> best_fail;
            bool stop = false;
            for (Point t : targets_for(r.component)) {
                for (int flip = 0; flip <= (can_flip ? 1 : 0) && !stop; ++flip)
                    for (int d : sweep) {
                        Step step{object, flip == 1, d, t, r.name};
                        try {
                            check_step_preconditions(s, map, step);
                        } catch (const Error&) {
                            continue;
                        }
                        Candidate c{step, transform_step(s, step), {}, false};
                        if (subtree_out_of_bounds(c.scene, object)) continue;
                        c.validation = make_result(field.conflict(c.scene, object), threshold_);
                        Patch fp = footprint_patch(c.scene, object);
                        bool inside = count_and(fp, s.backdrop->box_region) == fp.mask.count();
                        c.accepted = c.validation.valid && inside;
                        if (!c.accepted) {
                            if (!best_fail || c.validation.conflict_pixels < best_fail->validation.conflict_pixels)
                                best_fail = std::move(c);
                            continue;
                        }
                        if (visit(c)) {
                            stop = true;
                            break;
                        }
                    }
                if (stop) return;
            }
            if (best_fail) failed_.push_back(std::move(*best_fail));
        }
    }

    std::vector<Candidate> failed_;

    void record_failures(int parent) {
        std::size_t n = std::min(failed_.size(), cfg_.max_failed_nodes);
        for (std::size_t k = 0; k < n; ++k) add_node(parent, failed_[k]);
        failed_.clear();
    }

    int greedy(int node) {
        for (;;) {
            const Scene& s = tree_.nodes[std::size_t(node)].scene;
            if (outside_box(s).empty()) return node;
            if (tree_.nodes[std::size_t(node)].depth >= cfg_.max_depth) {
                depth_exceeded = true;
                return node;
            }
            Rendering ren = render(s);
            std::optional<Candidate> chosen;
            for (int object : movable_objects(s)) {
                if (!has_grasp(s, ren.affordances, object)) continue;
                candidates(s, ren.affordances, object, [&](Candidate& c) {
                    chosen = std::move(c);
                    return true;
                });
                if (chosen) break;
            }
            record_failures(node);
            if (!chosen) return node;
            node = add_node(node, *chosen);
        }
    }

    static std::size_t state_hash(const Scene& s) {
        std::size_t h = 1469598103934665603ULL;
        auto mixin = [&](long v) { h = (h ^ std::size_t(v)) * 1099511628211ULL; };
        for (const ObjectInstance& o : s.objects) {
            mixin(o.id);
            mixin(o.rotation);
            mixin(int(o.pose));
            mixin(o.origin.x);
            mixin(o.origin.y);
            mixin(o.parent.value_or(-1));
        }
        return h;
    }

    bool exhaustive(int node, int& leaf) {
        const Scene s = tree_.nodes[std::size_t(node)].scene;
        std::size_t outside = outside_box(s).size();
        if (outside < best_outside_) {
            best_outside_ = outside;
            best_leaf_ = node;
        }
        if (outside == 0) {
            leaf = node;
            return true;
        }
        if (tree_.nodes[std::size_t(node)].depth >= cfg_.max_depth) {
            depth_exceeded = true;
            return false;
        }
        if (expansions_ >= cfg_.max_expansions) {
            budget_exhausted = true;
            return false;
        }
        std::size_t h = state_hash(s);
        if (dead_.contains(h)) return false;
        ++expansions_;
        Rendering ren = render(s);
        bool found = false;
        for (int object : movable_objects(s)) {
            if (!has_grasp(s, ren.affordances, object)) continue;
            std::unordered_set<std::size_t> seen;
            candidates(s, ren.affordances, object, [&](Candidate& c) {
                if (!seen.insert(state_hash(c.scene)).second) return false;
                int child = add_node(node, c);
                if (exhaustive(child, leaf)) {
                    found = true;
                    return true;
                }
                return budget_exhausted;
            });
            failed_.clear();
            if (found || budget_exhausted) break;
        }
        if (!found && !budget_exhausted) dead_.insert(h);
        return found;
    }
};

Plan extract(PlanningTree& tree, int leaf) {
    Plan p;
    std::vector<int> path;
    for (int n = leaf; n >= 0; n = tree.nodes[std::size_t(n)].parent) path.push_back(n);
    std::reverse(path.begin(), path.end());
    for (int n : path) {
        PlanNode& node = tree.nodes[std::size_t(n)];
        node.on_plan = true;
        p.node_ids.push_back(n);
        p.scenes.push_back(node.scene);
        if (node.step) {
            p.steps.push_back(*node.step);
            p.validations.push_back(*node.validation);
        }
    }
    p.complete = outside_box(p.scenes.back()).empty();
    return p;
}

}  // namespace

std::vector<PlacementRegion> placement_regions(const Scene& scene, int object, const PlannerConfig& cfg) {
    const std::set<int> lifted = subtree(scene, object);
    const int w = scene.width(), h = scene.height();
    Mask support(w, h);
    if (cfg.allow_stacking) {
        AffordanceMap m = composite_affordances(scene, lifted);
        support = mask_andnot(mask_or(m[Affordance::Hole], m[Affordance::PlaceOn]), m[Affordance::Obstruct]);
    } else {
        const AffordanceMap& m = scene.backdrop->affordances;
        support = mask_andnot(mask_or(m[Affordance::Hole], m[Affordance::PlaceOn]), m[Affordance::Obstruct]);
        Mask occupied(w, h);
        for (const ObjectInstance& o : scene.objects)
            if (!lifted.contains(o.id)) or_into(occupied, o.patch());
        support = mask_andnot(support, occupied);
    }
    support = mask_and(support, scene.backdrop->box_region);
    const int thr = threshold_for(scene, cfg);
    std::size_t fp = footprint_patch(scene, object).mask.count();
    const ObjectInstance& o = scene.at(object);
    if (cfg.allow_flip && lifted.size() == 1 && scene.dictionary)
        if (SpritePtr alt = scene.dictionary->find(o.label, other(o.pose))) fp = std::min(fp, alt->mask.count());
    fp = fp * 19 / 20;  // nearest-neighbor rotation changes the count slightly
    const std::size_t min_size = std::max<std::size_t>({std::size_t(std::max(thr, 16)), fp > std::size_t(thr) ? fp - std::size_t(thr) : 1});
    std::vector<PlacementRegion> out;
    for (Component& c : connected_components(support, min_size)) {
        std::string name = region_name(scene, lifted, c.anchor());
        out.push_back({std::move(name), std::move(c)});
    }
    return out;
}

PlanResult plan(const Scene& initial, const PlannerConfig& cfg) {
    cfg.check();
    PlanResult r;
    Search search(cfg, r.tree);
    int leaf = search.run(initial);
    r.plan = extract(r.tree, leaf);
    r.plan.depth_exceeded = search.depth_exceeded && !r.plan.complete;
    r.plan.budget_exhausted = search.budget_exhausted && !r.plan.complete;
    return r;
}

PlanResult plan(const Scene& initial, const std::function<Scene(const Scene&)>& perceive, const PlannerConfig& cfg) {
    return plan(perceive(initial), cfg);
}

Plan baseline_plan(const Scene& initial, const PlannerConfig& cfg) {
    cfg.check();
    std::mt19937_64 rng(cfg.seed);
    const int thr = threshold_for(initial, cfg);
    Plan p;
    p.scenes.push_back(initial);
    const std::size_t n = outside_box(initial).size();
    for (std::size_t k = 0; k < n; ++k) {
        const Scene& s = p.scenes.back();
        std::set<int> out = outside_box(s);
        std::vector<int> pool(out.begin(), out.end());
        if (pool.empty())
            for (const ObjectInstance& o : s.objects)
                if (!o.parent) pool.push_back(o.id);
        int object = pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng)];
        AffordanceMap m = composite_affordances(s, subtree(s, object));
        Mask place = mask_or(m[Affordance::PlaceOn], m[Affordance::Hole]);
        Mask in_box = mask_and(place, s.backdrop->box_region);
        if (in_box.count() > 0) place = std::move(in_box);
        std::vector<Point> pixels;
        for (int y = 0; y < place.height(); ++y)
            for (int x = 0; x < place.width(); ++x)
                if (place.at(x, y)) pixels.push_back({x, y});
        Point target = pixels.empty() ? s.at(object).bbox().center()
                                      : pixels[std::uniform_int_distribution<std::size_t>(0, pixels.size() - 1)(rng)];
        int rot = signed_degrees(kRotationStep * std::uniform_int_distribution<int>(0, 360 / kRotationStep - 1)(rng));
        Step step{object, false, rot, target, region_name(s, subtree(s, object), target)};
        Scene next = transform_step(s, step);
        ValidationResult v = subtree_out_of_bounds(next, object) ? ValidationResult{false, 0, thr}
                                                                 : validate(next, object, thr);
        p.steps.push_back(step);
        p.validations.push_back(v);
        p.scenes.push_back(std::move(next));
    }
    bool all_valid = std::all_of(p.validations.begin(), p.validations.end(), [](const ValidationResult& v) { return v.valid; });
    p.complete = all_valid && outside_box(p.scenes.back()).empty();
    return p;
}

void dump_tree(const PlanningTree& tree, const fs::path& dir) {
    if (tree.nodes.empty()) throw Error(ErrorKind::InvalidArgument, "empty planning tree");
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error(ErrorKind::Io, "cannot create " + dir.string() + ": " + ec.message());
    // Plan nodes come first so that the valid sequence is numbered consecutively.
    std::vector<int> order, number(tree.nodes.size(), -1);
    std::vector<int> path;
    for (const PlanNode& n : tree.nodes)
        if (n.on_plan) path.push_back(n.id);
    std::sort(path.begin(), path.end(), [&](int a, int b) { return tree.nodes[std::size_t(a)].depth < tree.nodes[std::size_t(b)].depth; });
    if (path.empty()) path.push_back(0);
    for (int id : path) order.push_back(id);
    for (const PlanNode& n : tree.nodes)
        if (std::find(order.begin(), order.end(), n.id) == order.end()) order.push_back(n.id);
    for (std::size_t k = 0; k < order.size(); ++k) number[std::size_t(order[k])] = int(k);

    std::ofstream txt(dir / "tree.txt");
    if (!txt) throw Error(ErrorKind::Io, "cannot write " + (dir / "tree.txt").string());
    txt << "# node parent depth on_plan valid conflict threshold action\n";
    for (int id : order) {
        const PlanNode& n = tree.nodes[std::size_t(id)];
        write_png(dir / ("node_" + std::to_string(number[std::size_t(id)]) + ".png"), render(n.scene).image);
        txt << "node_" << number[std::size_t(id)] << ' ' << (n.parent < 0 ? std::string("-") : "node_" + std::to_string(number[std::size_t(n.parent)]))
            << ' ' << n.depth << ' ' << (n.on_plan ? 1 : 0);
        if (n.validation)
            txt << ' ' << (n.validation->valid ? 1 : 0) << ' ' << n.validation->conflict_pixels << ' ' << n.validation->threshold_used;
        else
            txt << " - - -";
        if (n.step) {
            const ObjectInstance* o = n.scene.find(n.step->object);
            txt << ' ' << (o ? o->name : std::to_string(n.step->object));
            if (n.step->flip) txt << " flip";
            if (n.step->rotate) txt << " rotate " << n.step->rotate;
            txt << " place " << n.step->region << " (" << n.step->target.x << ',' << n.step->target.y << ')';
        } else {
            txt << " initial";
        }
        txt << '\n';
    }
    if (!txt) throw Error(ErrorKind::Io, "write failed for tree.txt");
}

bool plan_is_consistent(const Plan& plan, int threshold) {
    if (plan.scenes.size() != plan.steps.size() + 1) return false;
    for (std::size_t k = 0; k < plan.steps.size(); ++k) {
        Scene next;
        try {
            next = apply_step(plan.scenes[k], render(plan.scenes[k]).affordances, plan.steps[k]);
        } catch (const Error&) {
            return false;
        }
        if (!validate(next, plan.steps[k].object, threshold).valid) return false;
        if (render(next).image != render(plan.scenes[k + 1]).image) return false;
    }
    return !plan.complete || goal_reached(plan.scenes.back());
}

}  // namespace simip
