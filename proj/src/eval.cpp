#include "simip/eval.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <thread>

#include "simip/errors.hpp"

namespace simip {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(Method m) {
    switch (m) {
        case Method::Greedy: return "greedy";
        case Method::GreedyNoCompletion: return "greedy-no-completion";
        case Method::Baseline: return "baseline";
        case Method::Exhaustive: return "exhaustive";
    }
    return "?";
}

Method parse_method(std::string_view s) {
    for (Method m : {Method::Greedy, Method::GreedyNoCompletion, Method::Baseline, Method::Exhaustive})
        if (to_string(m) == s) return m;
    throw Error(ErrorKind::InvalidArgument, "unknown method '" + std::string(s) + "'");
}

std::string_view to_string(FailureCause c) {
    switch (c) {
        case FailureCause::None: return "none";
        case FailureCause::Detection: return "detection";
        case FailureCause::Affordance: return "affordance";
        case FailureCause::Search: return "search";
    }
    return "?";
}

CorruptionLevel corruption_preset(std::string_view name) {
    CorruptionLevel l;
    l.name = std::string(name);
    if (name == "oracle") return l;
    if (name == "mild") {
        l.corruption.miss_prob = 0.02;
        l.corruption.split_prob = 0.02;
        l.corruption.misclass_prob = 0.02;
        l.corruption.boundary_jitter = 1;
        l.corruption.affordance_jitter = 1;
        l.corruption.affordance_prob = 0.35;
        return l;
    }
    if (name == "strong") {
        l.corruption.miss_prob = 0.06;
        l.corruption.split_prob = 0.06;
        l.corruption.misclass_prob = 0.06;
        l.corruption.boundary_jitter = 2;
        l.corruption.affordance_jitter = 2;
        l.corruption.affordance_prob = 0.4;
        return l;
    }
    throw Error(ErrorKind::InvalidArgument, "unknown corruption level '" + std::string(name) + "'");
}

void ExperimentConfig::check() const {
    dataset.check();
    planner.check();
    if (n_scenes < 1) throw Error(ErrorKind::InvalidArgument, "n_scenes must be >= 1");
    if (repetitions < 1) throw Error(ErrorKind::InvalidArgument, "repetitions must be >= 1");
    if (methods.empty()) throw Error(ErrorKind::InvalidArgument, "no methods selected");
    if (levels.empty()) throw Error(ErrorKind::InvalidArgument, "no corruption levels");
    std::set<std::string> names;
    for (const CorruptionLevel& l : levels) {
        l.corruption.check();
        if (!names.insert(l.name).second) throw Error(ErrorKind::InvalidArgument, "duplicate level name '" + l.name + "'");
        if (l.target_miou > 1.0) throw Error(ErrorKind::InvalidArgument, "target mIoU must be <= 1");
    }
    if (threads < 0) throw Error(ErrorKind::InvalidArgument, "threads must be >= 0");
    if (max_length < 0) throw Error(ErrorKind::InvalidArgument, "max_length must be >= 0");
}

json ExperimentConfig::to_json() const {
    json ms = json::array();
    for (Method m : methods) ms.push_back(std::string(to_string(m)));
    json ls = json::array();
    for (const CorruptionLevel& l : levels) {
        json e = {{"name", l.name}, {"corruption", l.corruption.to_json()}};
        if (l.target_miou >= 0.0) e["target_miou"] = l.target_miou;
        ls.push_back(e);
    }
    return {{"dataset", dataset.to_json()}, {"n_scenes", n_scenes},       {"methods", ms},
            {"planner", planner.to_json()}, {"levels", ls},               {"repetitions", repetitions},
            {"seed", seed},                 {"out_dir", out_dir.string()}, {"threads", threads},
            {"max_length", max_length}};
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
    ExperimentConfig c;
    try {
        if (j.contains("dataset")) c.dataset = GenConfig::from_json(j.at("dataset"));
        c.n_scenes = j.value("n_scenes", c.n_scenes);
        if (j.contains("methods")) {
            c.methods.clear();
            for (const json& m : j.at("methods")) c.methods.push_back(parse_method(m.get<std::string>()));
        }
        if (j.contains("planner")) c.planner = PlannerConfig::from_json(j.at("planner"));
        if (j.contains("levels")) {
            c.levels.clear();
            for (const json& l : j.at("levels")) {
                CorruptionLevel lv;
                lv.name = l.at("name").get<std::string>();
                if (l.contains("corruption")) lv.corruption = CorruptionConfig::from_json(l.at("corruption"));
                lv.target_miou = l.value("target_miou", -1.0);
                c.levels.push_back(lv);
            }
        }
        c.repetitions = j.value("repetitions", c.repetitions);
        c.seed = j.value("seed", c.seed);
        c.out_dir = j.value("out_dir", std::string());
        c.threads = j.value("threads", c.threads);
        c.max_length = j.value("max_length", c.max_length);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Io, std::string("malformed experiment config: ") + e.what());
    }
    c.check();
    return c;
}

namespace {

std::optional<int> belief_object_named(const Scene& s, const std::string& name) {
    if (const ObjectInstance* o = s.find_by_name(name)) return o->id;
    return std::nullopt;
}

bool maps_equal(const AffordanceMap& a, const AffordanceMap& b) {
    for (int c = 0; c < 4; ++c)
        if (a.channels[std::size_t(c)] != b.channels[std::size_t(c)]) return false;
    return true;
}

// Ground-truth objects outside the box lacking an exact detection.
bool outside_detection_gap(const Scene& gt, const PerceptionReport& report) {
    for (int id : outside_box(gt)) {
        bool ok = false;
        for (const Detection& d : report.objects)
            if (d.source_id == id && d.entity_exact() && d.label == gt.at(id).label) ok = true;
        if (!ok) return true;
    }
    return false;
}

}  // namespace

Execution execute_on_ground_truth(const Scene& gt, const PerceptionReport& report, const Belief& belief,
                                  const Plan& plan) {
    Execution ex;
    Scene cur = gt;
    std::map<int, int> offset = belief.rotation_offset;
    const int thr = default_threshold(gt.width(), gt.height());
    const bool map_exact = maps_equal(report.affordances, composite(gt).affordances);
    bool all_ok = true;
    for (std::size_t k = 0; k < plan.steps.size(); ++k) {
        const Step& step = plan.steps[k];
        const Scene& before = plan.scenes[k];
        StepRecord rec;
        rec.index = int(k) + 1;
        const Detection& det = report.objects[std::size_t(belief.detection.at(step.object))];
        const ObjectInstance* truth = cur.find(det.source_id);
        // A split detection moves only part of an object: the wrong entity.
        const bool identity_ok = truth && !det.split;
        bool exact = det.entity_exact();
        if (auto host = belief_object_named(before, step.region)) {
            const Detection& hd = report.objects[std::size_t(belief.detection.at(*host))];
            exact = exact && hd.entity_exact();
        }
        bool valid = false;
        if (truth) {
            const int src = det.source_id;
            const ObjectInstance& bo = before.at(step.object);
            const int off = offset.contains(step.object) ? offset[step.object] : 0;
            const int want = normalize_degrees((step.flip ? 0 : off) + bo.rotation + step.rotate);
            offset[step.object] = step.flip ? 0 : off;
            Step g{src, step.flip, signed_degrees(want - truth->rotation), {}, step.region};
            try {
                Scene b_mid = reorient(before, step.object, step.flip, step.rotate);
                Scene g_mid = reorient(cur, src, g.flip, g.rotate);
                Point shift = footprint_patch(g_mid, src).tight_box().center() -
                              footprint_patch(b_mid, step.object).tight_box().center();
                g.target = step.target + shift;
                bool pre_ok = true;
                try {
                    check_step_preconditions(cur, render(cur).affordances, g);
                } catch (const Error&) {
                    pre_ok = false;
                }
                Scene next = transform_step(cur, g);
                valid = pre_ok && !subtree_out_of_bounds(next, src) && validate(next, src, thr).valid;
                cur = std::move(next);
            } catch (const Error&) {
                valid = false;  // the robot could not carry the action out at all
            }
        }
        rec.success = identity_ok && valid;
        if (!rec.success) rec.cause = identity_ok && exact ? FailureCause::Affordance : FailureCause::Detection;
        all_ok = all_ok && rec.success;
        ex.steps.push_back(rec);
    }
    ex.goal = goal_reached(cur);
    if (!plan.complete || (all_ok && !ex.goal)) {
        StepRecord miss;
        miss.index = int(plan.steps.size()) + 1;
        miss.attempted = false;
        if (outside_detection_gap(cur, report)) miss.cause = FailureCause::Detection;
        else if (!map_exact) miss.cause = FailureCause::Affordance;
        else miss.cause = plan.complete ? FailureCause::Affordance : FailureCause::Search;
        ex.steps.push_back(miss);
        all_ok = false;
    }
    ex.success = all_ok && ex.goal;
    ex.final_scene = std::move(cur);
    return ex;
}

namespace {

struct Work {
    int scene;
    int rep;
};

std::vector<CaseRecord> run_item(const ExperimentConfig& cfg, const std::vector<CorruptionLevel>& levels, Work w) {
    std::vector<CaseRecord> out;
    const std::uint64_t scene_seed = derive_seed(cfg.seed, std::uint64_t(w.scene));
    const std::uint64_t rep_seed = derive_seed(scene_seed, 1000 + std::uint64_t(w.rep));
    auto blank = [&](Method m, const std::string& level) {
        CaseRecord c;
        c.scene = w.scene;
        c.repetition = w.rep;
        c.method = m;
        c.level = level;
        return c;
    };
    GeneratedScene g;
    try {
        GenConfig gc = cfg.dataset;
        gc.seed = scene_seed;
        g = generate_scene(gc, stratified_outside(cfg.dataset, w.scene));
    } catch (const std::exception& e) {
        for (const CorruptionLevel& l : levels)
            for (Method m : cfg.methods) {
                CaseRecord c = blank(m, l.name);
                c.applicable = false;
                c.error = e.what();
                out.push_back(c);
            }
        return out;
    }
    const Scene& gt = g.scene;
    const int required = int(outside_box(gt).size());
    for (const CorruptionLevel& l : levels) {
        CorruptionConfig cc = l.corruption;
        cc.seed = rep_seed;
        PerceptionReport raw;
        try {
            raw = corrupt(perceive_oracle(gt), cc);
        } catch (const std::exception& e) {
            for (Method m : cfg.methods) {
                CaseRecord c = blank(m, l.name);
                c.required_steps = required;
                c.error = e.what();
                out.push_back(c);
            }
            continue;
        }
        for (Method m : cfg.methods) {
            CaseRecord c = blank(m, l.name);
            c.required_steps = required;
            c.applicable = !(m == Method::Baseline && required == 0);
            try {
                PerceptionReport rep = complete_objects(gt, raw, m != Method::GreedyNoCompletion, *gt.dictionary);
                c.quality = perception_quality(rep, gt);
                Belief b = build_belief(rep, gt);
                PlannerConfig pc = cfg.planner;
                pc.seed = rep_seed;
                pc.mode = m == Method::Exhaustive ? PlanMode::Exhaustive : PlanMode::Greedy;
                Plan p = m == Method::Baseline ? baseline_plan(b.scene, pc) : plan(b.scene, pc).plan;
                if (m == Method::Baseline) p.complete = true;  // it always runs its fixed number of steps
                Execution ex = execute_on_ground_truth(gt, rep, b, p);
                c.plan_steps = int(p.steps.size());
                c.steps = ex.steps;
                c.success = ex.success;
            } catch (const std::exception& e) {
                c.error = e.what();
                c.success = false;
            }
            out.push_back(std::move(c));
        }
    }
    return out;
}

RateCell summarize(const std::vector<std::vector<int>>& per_rep_hits, const std::vector<std::vector<int>>& per_rep_n) {
    RateCell cell;
    std::vector<double> rates;
    int total_n = 0;
    for (std::size_t r = 0; r < per_rep_n.size(); ++r) {
        int n = 0, h = 0;
        for (int v : per_rep_n[r]) n += v;
        for (int v : per_rep_hits[r]) h += v;
        total_n += n;
        if (n > 0) rates.push_back(100.0 * h / n);
    }
    if (rates.empty()) return cell;
    cell.cases = (total_n + int(per_rep_n.size()) - 1) / int(per_rep_n.size());
    double sum = 0.0;
    for (double r : rates) sum += r;
    cell.mean = sum / double(rates.size());
    if (rates.size() > 1) {
        double ss = 0.0;
        for (double r : rates) ss += (r - cell.mean) * (r - cell.mean);
        cell.sd = std::sqrt(ss / double(rates.size() - 1));
    }
    return cell;
}

std::string fmt_cell(const RateCell& c, bool applicable) {
    if (!applicable || !c.populated()) return "--";
    std::ostringstream os;
    os << std::fixed << std::setprecision(2) << c.mean << " (" << c.sd << ")";
    return os.str();
}

}  // namespace

RateCell Report::length_cell(Method m, const std::string& level, int length) const {
    std::vector<std::vector<int>> hits(std::size_t(config.repetitions)), n(std::size_t(config.repetitions));
    for (const CaseRecord& c : cases) {
        if (c.method != m || c.level != level || !c.applicable) continue;
        if (length >= 0 && c.required_steps != length) continue;
        n[std::size_t(c.repetition)].push_back(1);
        hits[std::size_t(c.repetition)].push_back(c.success ? 1 : 0);
    }
    return summarize(hits, n);
}

RateCell Report::step_cell(Method m, const std::string& level, int index) const {
    std::vector<std::vector<int>> hits(std::size_t(config.repetitions)), n(std::size_t(config.repetitions));
    for (const CaseRecord& c : cases) {
        if (c.method != m || c.level != level || !c.applicable) continue;
        for (const StepRecord& s : c.steps) {
            if (index >= 0 && s.index != index) continue;
            n[std::size_t(c.repetition)].push_back(1);
            hits[std::size_t(c.repetition)].push_back(s.success ? 1 : 0);
        }
    }
    return summarize(hits, n);
}

std::string Report::length_table() const {
    std::ostringstream os;
    const int L = config.max_length;
    for (const CorruptionLevel& l : levels) {
        os << "Success rates by plan length, level " << l.name;
        if (level_quality.contains(l.name))
            os << " (affordance mIoU " << std::fixed << std::setprecision(4) << level_quality.at(l.name).affordance_miou << ")";
        os << ", mean (SD) over " << config.repetitions << " repetition(s)\n";
        os << std::left << std::setw(22) << "method";
        for (int k = 0; k <= L; ++k) os << " | " << std::setw(15) << (std::to_string(k) + (k == 1 ? " step" : " steps"));
        os << " | Total\n";
        os << std::setw(22) << "cases";
        for (int k = 0; k <= L; ++k) os << " | " << std::setw(15) << length_cell(config.methods.front(), l.name, k).cases;
        os << " | " << length_cell(config.methods.front(), l.name, -1).cases << "\n";
        for (Method m : config.methods) {
            os << std::setw(22) << to_string(m);
            for (int k = 0; k <= L; ++k)
                os << " | " << std::setw(15) << fmt_cell(length_cell(m, l.name, k), !(m == Method::Baseline && k == 0));
            os << " | " << fmt_cell(length_cell(m, l.name, -1), true) << "\n";
        }
        os << "\n";
    }
    return os.str();
}

std::string Report::step_table() const {
    std::ostringstream os;
    const int L = config.max_length + 1;
    for (const CorruptionLevel& l : levels) {
        os << "Success rates by step, level " << l.name << ", mean (SD) over " << config.repetitions << " repetition(s)\n";
        os << std::left << std::setw(22) << "method";
        for (int k = 1; k <= L; ++k) os << " | " << std::setw(15) << ("step " + std::to_string(k));
        os << " | All\n";
        for (Method m : config.methods) {
            os << std::setw(22) << to_string(m);
            for (int k = 1; k <= L; ++k) os << " | " << std::setw(15) << fmt_cell(step_cell(m, l.name, k), true);
            os << " | " << fmt_cell(step_cell(m, l.name, -1), true) << "\n";
        }
        os << "\n";
    }
    return os.str();
}

std::string Report::csv() const {
    std::ostringstream os;
    os << "method,level,repetition,scene,required_steps,plan_steps,applicable,success,step_success,step_cause,"
          "affordance_miou,instance_miou,detection_score,error\n";
    os << std::setprecision(6);
    for (const CaseRecord& c : cases) {
        std::string ss, sc;
        for (const StepRecord& s : c.steps) {
            if (!ss.empty()) {
                ss += ';';
                sc += ';';
            }
            ss += s.success ? '1' : '0';
            sc += std::string(to_string(s.cause));
        }
        std::string err = c.error;
        std::replace(err.begin(), err.end(), ',', ';');
        std::replace(err.begin(), err.end(), '\n', ' ');
        os << to_string(c.method) << ',' << c.level << ',' << c.repetition << ',' << c.scene << ',' << c.required_steps << ','
           << c.plan_steps << ',' << c.applicable << ',' << c.success << ',' << ss << ',' << sc << ','
           << c.quality.affordance_miou << ',' << c.quality.instance_miou << ',' << c.quality.detection_score << ',' << err
           << '\n';
    }
    return os.str();
}

void Report::write() const {
    if (config.out_dir.empty()) throw Error(ErrorKind::InvalidArgument, "experiment has no output directory");
    std::error_code ec;
    fs::create_directories(config.out_dir, ec);
    if (ec) throw Error(ErrorKind::Io, "cannot create " + config.out_dir.string() + ": " + ec.message());
    std::ofstream txt(config.out_dir / "report.txt");
    txt << length_table() << step_table();
    txt << "Failure causes\n";
    for (const auto& [key, f] : classify_failures(*this))
        txt << "  " << key << ": detection " << f.detection << ", affordance " << f.affordance << ", search " << f.search << "\n";
    txt << "\nTrend checks\n";
    for (const TrendAssertion& t : trend_check(*this)) txt << "  [" << (t.passed ? "pass" : "FAIL") << "] " << t.name << ": " << t.detail << "\n";
    std::ofstream csvf(config.out_dir / "cases.csv");
    csvf << csv();
    std::ofstream cfgf(config.out_dir / "experiment.json");
    cfgf << config.to_json().dump(2) << "\n";
    if (!txt || !csvf || !cfgf) throw Error(ErrorKind::Io, "failed to write report files");
}

Report run(const ExperimentConfig& cfg) {
    cfg.check();
    Report rep;
    rep.config = cfg;
    rep.levels = cfg.levels;
    // Calibration scenes come from the same dataset stream.
    bool need_cal = std::any_of(cfg.levels.begin(), cfg.levels.end(), [](const CorruptionLevel& l) { return l.target_miou >= 0.0; });
    if (need_cal) {
        std::vector<Scene> sample;
        for (int i = 0; i < std::min(cfg.n_scenes, 16); ++i) {
            GenConfig gc = cfg.dataset;
            gc.seed = derive_seed(cfg.seed, std::uint64_t(i));
            try {
                sample.push_back(generate_scene(gc, stratified_outside(cfg.dataset, i)).scene);
            } catch (const Error&) {
            }
        }
        if (!sample.empty())
            for (CorruptionLevel& l : rep.levels)
                if (l.target_miou >= 0.0) l.corruption = calibrate_affordance_noise(sample, l.target_miou, l.corruption);
    }
    std::vector<Work> work;
    for (int i = 0; i < cfg.n_scenes; ++i)
        for (int r = 0; r < cfg.repetitions; ++r) work.push_back({i, r});
    std::vector<std::vector<CaseRecord>> results(work.size());
    std::atomic<std::size_t> next{0};
    int threads = cfg.threads > 0 ? cfg.threads : int(std::max(1u, std::thread::hardware_concurrency()));
    threads = std::min<int>(threads, int(work.size()));
    auto worker = [&] {
        for (std::size_t k = next++; k < work.size(); k = next++) results[k] = run_item(cfg, rep.levels, work[k]);
    };
    std::vector<std::thread> pool;
    for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    for (auto& r : results)
        for (auto& c : r) rep.cases.push_back(std::move(c));
    for (const CorruptionLevel& l : rep.levels) {
        PerceptionQuality q;
        int n = 0;
        for (const CaseRecord& c : rep.cases)
            if (c.level == l.name && c.method == cfg.methods.front() && c.error.empty()) {
                q.affordance_miou += c.quality.affordance_miou;
                q.instance_miou += c.quality.instance_miou;
                q.detection_score += c.quality.detection_score;
                ++n;
            }
        if (n) {
            q.affordance_miou /= n;
            q.instance_miou /= n;
            q.detection_score /= n;
        }
        rep.level_quality[l.name] = q;
    }
    return rep;
}

std::map<std::string, FailureCounts> classify_failures(const Report& report) {
    std::map<std::string, FailureCounts> out;
    FailureCounts& all = out["all"];
    for (const CaseRecord& c : report.cases) {
        if (!c.applicable) continue;
        FailureCounts& f = out[std::string(to_string(c.method)) + "/" + c.level];
        for (const StepRecord& s : c.steps) {
            if (s.success) continue;
            for (FailureCounts* t : {&f, &all}) {
                if (s.cause == FailureCause::Detection) ++t->detection;
                else if (s.cause == FailureCause::Affordance) ++t->affordance;
                else ++t->search;
            }
        }
    }
    return out;
}

std::vector<TrendAssertion> trend_check(const Report& report, double tolerance) {
    std::vector<TrendAssertion> out;
    const auto& levels = report.levels;
    if (levels.size() < 3)
        out.push_back({"levels", false, "need at least 3 corruption levels, got " + std::to_string(levels.size())});
    auto fmt = [](double v) {
        std::ostringstream os;
        os << std::fixed << std::setprecision(2) << v;
        return os.str();
    };
    for (Method m : report.config.methods) {
        if (m == Method::Baseline) continue;
        std::string detail;
        bool ok = true;
        for (std::size_t k = 0; k < levels.size(); ++k) {
            double v = report.length_cell(m, levels[k].name, -1).mean;
            detail += (k ? " >= " : "") + fmt(v);
            if (k && v > report.length_cell(m, levels[k - 1].name, -1).mean + tolerance) ok = false;
        }
        out.push_back({std::string(to_string(m)) + " total success non-increasing in corruption", ok, detail});
        if (!levels.empty()) {
            bool ok2 = true;
            std::string d2;
            for (int s = 1; s <= report.config.max_length + 1; ++s) {
                RateCell base = report.step_cell(m, levels.front().name, s);
                for (std::size_t k = 1; k < levels.size(); ++k) {
                    RateCell c = report.step_cell(m, levels[k].name, s);
                    if (base.populated() && c.populated() && c.mean > base.mean + tolerance) {
                        ok2 = false;
                        d2 += "step " + std::to_string(s) + " at " + levels[k].name + " " + fmt(c.mean) + " > " + fmt(base.mean) + "; ";
                    }
                }
            }
            out.push_back({std::string(to_string(m)) + " per-step success bounded by " + levels.front().name, ok2,
                           d2.empty() ? "all steps within bound" : d2});
        }
    }
    const bool has_baseline = std::find(report.config.methods.begin(), report.config.methods.end(), Method::Baseline) !=
                              report.config.methods.end();
    if (has_baseline)
        for (Method m : report.config.methods) {
            if (m == Method::Baseline) continue;
            for (const CorruptionLevel& l : levels) {
                int nb = 0, hb = 0, nm = 0, hm = 0;
                for (const CaseRecord& c : report.cases) {
                    if (c.level != l.name || c.required_steps < 1) continue;
                    if (c.method == Method::Baseline) {
                        ++nb;
                        hb += c.success;
                    } else if (c.method == m) {
                        ++nm;
                        hm += c.success;
                    }
                }
                double rb = nb ? 100.0 * hb / nb : 0.0, rm = nm ? 100.0 * hm / nm : 0.0;
                out.push_back({"baseline <= " + std::string(to_string(m)) + " at " + l.name, rb <= rm + tolerance,
                               fmt(rb) + " vs " + fmt(rm)});
            }
        }
    return out;
}

}  // namespace simip
