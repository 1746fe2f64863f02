#include <doctest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct Outcome {
    int code = -1;
    std::string out;
};

// Runs the CLI inside `cwd`, capturing stdout and discarding stderr.
Outcome cli(const fs::path& cwd, const std::string& args) {
    const std::string cmd = "cd '" + cwd.string() + "' && '" SIMIP_CLI_PATH "' " + args + " 2>/dev/null";
    Outcome o;
    FILE* p = popen(cmd.c_str(), "r");
    REQUIRE(p != nullptr);
    char buf[4096];
    std::size_t n;
    while ((n = std::fread(buf, 1, sizeof buf, p)) > 0) o.out.append(buf, n);
    const int status = pclose(p);
    o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return o;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

std::set<std::string> entries(const fs::path& dir) {
    std::set<std::string> out;
    for (const auto& e : fs::directory_iterator(dir)) out.insert(e.path().filename().string());
    return out;
}

struct Sandbox {
    fs::path dir;
    Sandbox() {
        dir = fs::temp_directory_path() / "simip_cli_test";
        fs::remove_all(dir);
        fs::create_directories(dir);
        write(dir / "gen.json", R"({"width": 512, "height": 384, "stack_prob": 0.3})");
    }
    ~Sandbox() { fs::remove_all(dir); }
};

}  // namespace

TEST_CASE("usage errors exit with 2") {
    Sandbox sb;
    CHECK(cli(sb.dir, "").code == 2);
    CHECK(cli(sb.dir, "frobnicate").code == 2);
    CHECK(cli(sb.dir, "plan --out x").code == 2);
    CHECK(cli(sb.dir, "plan --scene gen.json --out x --mode sideways").code == 2);
    CHECK(cli(sb.dir, "--help").code == 0);
    CHECK(entries(sb.dir) == std::set<std::string>{"gen.json"});
}

TEST_CASE("planning is reproducible and confined to the output directory") {
    Sandbox sb;
    Outcome g = cli(sb.dir, "generate --config gen.json --out data --count 1 --outside 3 --seed 5");
    REQUIRE(g.code == 0);
    const fs::path scene = "data/scene_0000/scene.manifest";
    REQUIRE(fs::exists(sb.dir / scene));

    Outcome a = cli(sb.dir, "plan --scene " + scene.string() + " --out run_a --mode exhaustive --require-complete");
    Outcome b = cli(sb.dir, "plan --scene " + scene.string() + " --out run_b --mode exhaustive --require-complete");
    CHECK(a.code == 0);
    CHECK(a.out == b.out);
    CHECK(a.out.find("pick an object") != std::string::npos);
    for (const char* f : {"plan.json", "plan.txt", "strip.png"}) {
        REQUIRE(fs::exists(sb.dir / "run_a" / f));
        CHECK(slurp(sb.dir / "run_a" / f) == slurp(sb.dir / "run_b" / f));
    }
    CHECK(entries(sb.dir) == std::set<std::string>{"data", "gen.json", "run_a", "run_b"});

    Outcome s = cli(sb.dir, "symbolic --scene " + scene.string() + " --out sym --mode exhaustive");
    REQUIRE(s.code == 0);
    const auto sym = entries(sb.dir / "sym");
    CHECK(sym.count("symbolic.json") == 1);
    CHECK(sym.count("image_4.png") == 1);  // three steps, four images
    Outcome r = cli(sb.dir, "symbolic --scene " + scene.string() + " --out rep --replay sym/symbolic.json");
    CHECK(r.code == 0);
    CHECK(r.out.rfind("replayed ", 0) == 0);
    CHECK(fs::exists(sb.dir / "rep" / "final.png"));
}

TEST_CASE("a packed scene needs nothing") {
    Sandbox sb;
    REQUIRE(cli(sb.dir, "generate --config gen.json --out data --count 1 --outside 0").code == 0);
    Outcome o = cli(sb.dir, "plan --scene data/scene_0000/scene.manifest --out run --require-complete");
    CHECK(o.code == 0);
    CHECK(o.out.find("nothing needs to be done") != std::string::npos);
    CHECK(slurp(sb.dir / "run" / "plan.txt") == "nothing needs to be done\n");
}

TEST_CASE("broken inputs exit with 1") {
    Sandbox sb;
    write(sb.dir / "bad.manifest", "not a manifest");
    CHECK(cli(sb.dir, "plan --scene bad.manifest --out run").code == 1);
    write(sb.dir / "bad.json", R"({"n_scenes": -4})");
    CHECK(cli(sb.dir, "evaluate --config bad.json --out ev").code == 1);
}

TEST_CASE("smoke evaluation writes its reports") {
    Sandbox sb;
    write(sb.dir / "exp.json", R"({
        "dataset": {"width": 512, "height": 384, "min_outside": 0, "max_outside": 4},
        "n_scenes": 20,
        "methods": ["greedy", "baseline"],
        "levels": [{"name": "oracle"}],
        "threads": 1
    })");
    Outcome o = cli(sb.dir, "evaluate --config exp.json --out ev");
    REQUIRE(o.code == 0);
    for (const char* f : {"report.txt", "cases.csv", "experiment.json"}) CHECK(fs::exists(sb.dir / "ev" / f));
    const std::string report = slurp(sb.dir / "ev" / "report.txt");
    CHECK(report.find("greedy") != std::string::npos);
    CHECK(report.find("--") != std::string::npos);
    const std::string csv = slurp(sb.dir / "ev" / "cases.csv");
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 2 * 20);
    CHECK(entries(sb.dir) == std::set<std::string>{"ev", "exp.json", "gen.json"});
}
