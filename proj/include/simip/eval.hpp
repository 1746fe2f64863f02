#pragma once
// Experiment harness: plan over generated datasets under chosen perception
// settings, judge every step against ground truth and aggregate into
// success-by-plan-length and success-by-step tables.

#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <map>
#include <string>
#include <vector>

#include "simip/perception.hpp"
#include "simip/planner.hpp"
#include "simip/scenegen.hpp"

namespace simip {

enum class Method { Greedy, GreedyNoCompletion, Baseline, Exhaustive };
std::string_view to_string(Method m);
Method parse_method(std::string_view s);

struct CorruptionLevel {
    std::string name;
    CorruptionConfig corruption;
    double target_miou = -1.0;  // >= 0: affordance noise is calibrated to this mIoU before the run
};

// Named corruption strengths: "oracle", "mild", "strong".
CorruptionLevel corruption_preset(std::string_view name);

struct ExperimentConfig {
    GenConfig dataset;
    int n_scenes = 20;
    std::vector<Method> methods = {Method::Greedy, Method::GreedyNoCompletion, Method::Baseline};
    PlannerConfig planner;
    std::vector<CorruptionLevel> levels = {{"oracle", {}, -1.0}};
    int repetitions = 1;
    std::uint64_t seed = 1;
    std::filesystem::path out_dir;
    int threads = 0;  // 0 = hardware concurrency
    int max_length = 7;  // largest plan-length column

    void check() const;
    nlohmann::json to_json() const;
    static ExperimentConfig from_json(const nlohmann::json& j);
};

enum class FailureCause { None, Detection, Affordance, Search };
std::string_view to_string(FailureCause c);

struct StepRecord {
    int index = 0;  // 1-based position in the plan
    bool success = false;
    FailureCause cause = FailureCause::None;
    bool attempted = true;  // false for the missing step of an unfinished plan
};

struct CaseRecord {
    int scene = 0;
    int repetition = 0;
    Method method = Method::Greedy;
    std::string level;
    int required_steps = 0;  // objects outside the box in ground truth
    int plan_steps = 0;
    bool applicable = true;
    bool success = false;
    std::vector<StepRecord> steps;
    PerceptionQuality quality;
    std::string error;  // non-empty when the case could not be run
};

struct RateCell {
    int cases = 0;        // per repetition, summed over repetitions
    double mean = 0.0;    // percent
    double sd = 0.0;
    bool populated() const { return cases > 0; }
};

struct FailureCounts {
    int detection = 0;
    int affordance = 0;
    int search = 0;
    int total() const { return detection + affordance + search; }
};

struct Report {
    ExperimentConfig config;
    std::vector<CorruptionLevel> levels;  // after calibration
    std::vector<CaseRecord> cases;
    std::map<std::string, PerceptionQuality> level_quality;  // mean per level

    // Success by required plan length (column = length, -1 = total).
    RateCell length_cell(Method m, const std::string& level, int length) const;
    // Success of attempted steps by index (-1 = all steps).
    RateCell step_cell(Method m, const std::string& level, int index) const;

    std::string length_table() const;
    std::string step_table() const;
    std::string csv() const;
    // Writes report.txt and cases.csv under config.out_dir.
    void write() const;
};

Report run(const ExperimentConfig& cfg);

// Ground-truth judgement of one perceived plan.
struct Execution {
    std::vector<StepRecord> steps;
    bool goal = false;
    bool success = false;
    Scene final_scene;
};
Execution execute_on_ground_truth(const Scene& ground_truth, const PerceptionReport& report, const Belief& belief,
                                  const Plan& plan);

// Keyed by "method/level"; "all" sums everything.
std::map<std::string, FailureCounts> classify_failures(const Report& report);

struct TrendAssertion {
    std::string name;
    bool passed = false;
    std::string detail;
};
std::vector<TrendAssertion> trend_check(const Report& report, double tolerance = 0.0);

}  // namespace simip
