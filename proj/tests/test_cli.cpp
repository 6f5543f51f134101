#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "lenscale/cli.hpp"

using namespace lenscale;
using namespace lenscale::cli;
using Catch::Approx;

namespace {

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("lenscale_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

fs::path write_config(const fs::path& dir, const json& j) {
    const auto p = dir / "config.json";
    std::ofstream(p) << j.dump();
    return p;
}

void run_in(const fs::path& dir, const std::string& cmd, const json& cfg, const fs::path& out,
            std::optional<fs::path> raster = std::nullopt) {
    Options o;
    o.config = write_config(dir, cfg);
    o.out = out;
    o.raster = std::move(raster);
    std::ostringstream log;
    run(cmd, o, log);
}

json manifest(const fs::path& out) { return json::parse(slurp(out / "manifest.json")); }

}  // namespace

TEST_CASE("config reader rejects unknown, missing and mistyped keys") {
    const json j = {{"a", 1.5}, {"b", "x"}, {"extra", true}};
    ConfigReader r(j, "cfg");
    CHECK(r.required<double>("a") == 1.5);
    CHECK(r.get<int>("missing", 7) == 7);
    CHECK_THROWS_AS(r.required<double>("b"), InvalidInput);
    CHECK_THROWS_WITH(r.finish(), Catch::Matchers::ContainsSubstring("'extra'"));
    ConfigReader r2(j, "cfg");
    CHECK_THROWS_WITH(r2.required<double>("nope"), Catch::Matchers::ContainsSubstring("missing required key 'nope'"));
    CHECK_THROWS_AS(ConfigReader(json::array(), "cfg"), InvalidInput);
}

TEST_CASE("config digest ignores key order") {
    const json a = json::parse(R"({"x": 1, "y": [1, 2]})"), b = json::parse(R"({ "y":[1,2], "x":1 })");
    CHECK(config_digest(a) == config_digest(b));
    CHECK(config_digest(a) != config_digest(json::parse(R"({"x": 2, "y": [1, 2]})")));
    CHECK(fnv1a_bytes("") == 14695981039346656037ULL);
    CHECK(fnv1a_bytes("a") == 0xaf63dc4c8601ec8cULL);  // published FNV-1a 64 test vector
}

TEST_CASE("solve reproduces the two-radius parameter table") {
    const auto rows = solve_cases(parse_solve_config(json::parse(R"({"cases": [
        {"name": "equal", "r_min_solid": 2, "r_min_void": 2},
        {"name": "wide_void", "r_min_solid": 2, "r_min_void": 3}]})")));
    auto find = [&](const std::string& c, double ero) -> const SolveRow* {
        for (const auto& r : rows)
            if (r.case_name == c && std::abs(r.record.thresholds.eta_ero - ero) < 1e-9) return &r;
        return nullptr;
    };
    const auto* a = find("equal", 0.70);
    REQUIRE(a);
    CHECK(a->record.thresholds.eta_dil == Approx(0.30).margin(1e-9));
    CHECK(a->record.r_fil == Approx(4.47).margin(0.01));
    CHECK(a->record.t_ero == Approx(1.03).margin(0.01));
    const auto* b = find("wide_void", 0.70);
    REQUIRE(b);
    CHECK(b->record.thresholds.eta_dil == Approx(0.11).margin(0.005));
    CHECK(b->record.t_dil == Approx(2.41).margin(0.01));
}

TEST_CASE("solve validates its config") {
    CHECK_THROWS_AS(parse_solve_config(json::parse(R"({"r_min_solid": 2})")), InvalidInput);
    CHECK_THROWS_AS(parse_solve_config(json::parse(R"({"r_min_solid": 2, "r_min_void": 2, "t_ero": 1})")),
                    InvalidInput);
    CHECK_THROWS_AS(parse_solve_config(json::parse(R"({"r_min_solid": 2, "r_min_void": 2, "typo": 1})")),
                    InvalidInput);
    CHECK_THROWS_AS(solve_cases(parse_solve_config(json::parse(R"({"r_min_solid": 0.1, "r_min_void": 40})"))),
                    Unsatisfiable);
}

TEST_CASE("solve with a cut-off appends corrected rows") {
    const auto rows =
        solve_cases(parse_solve_config(json::parse(R"({"r_min_solid": 3, "r_min_void": 3, "beta": 32, "epsilon": 0.99})")));
    std::size_t plain = 0, corrected = 0;
    for (const auto& r : rows) (r.beta ? corrected : plain)++;
    CHECK(plain > 0);
    CHECK(corrected == plain);
    // Same filter radius, thresholds shifted down by atanh(0.98) / 32.
    CHECK(rows[plain].record.r_fil == rows[0].record.r_fil);
    CHECK(rows[0].record.thresholds.eta_ero - rows[plain].record.thresholds.eta_ero ==
          Approx(-std::atanh(0.98) / 32).margin(1e-12));
}

TEST_CASE("solve command writes CSV, JSON and a complete manifest") {
    const auto dir = scratch("solve");
    run_in(dir, "solve", {{"r_min_solid", 3}, {"r_min_void", 3}}, dir / "out");
    const auto m = manifest(dir / "out");
    CHECK(m["command"] == "solve");
    CHECK(m["timestamps"].is_null());
    CHECK(m["outputs"].size() == 2);
    for (const auto& f : m["outputs"]) CHECK(fs::exists(dir / "out" / f.get<std::string>()));
    const auto csv = slurp(dir / "out" / "solutions.csv");
    CHECK(csv.rfind("case,eta_ero,eta_int,eta_dil,r_fil", 0) == 0);
    // 0.75 / 0.25 row with distances 1.76.
    CHECK(csv.find("case0,0.75,0.5,0.25,") != std::string::npos);
}

TEST_CASE("analytic curves contain the chart reading at (0.75, 0.25)") {
    const auto dir = scratch("curves");
    run_in(dir, "curves", json::object(), dir / "out");
    for (const char* stem : {"size_solid", "size_void", "distance_erosion", "distance_dilation"}) {
        CHECK(fs::exists(dir / "out" / (std::string(stem) + ".csv")));
        const auto svg = slurp(dir / "out" / (std::string(stem) + ".svg"));
        CHECK(svg.rfind("<svg", 0) == 0);
        CHECK(svg.find("<polyline") != std::string::npos);
        CHECK(svg.find("</svg>") != std::string::npos);
    }
    std::istringstream ero(slurp(dir / "out" / "distance_erosion.csv"));
    std::string line;
    double v = -1.0;
    while (std::getline(ero, line))
        if (line.rfind("0.25,0.75,", 0) == 0) v = std::stod(line.substr(10));
    CHECK(v == Approx(0.58).margin(0.01));
    CHECK(manifest(dir / "out")["outputs"].size() == 9);
}

TEST_CASE("numeric overlay stays on the analytic curves") {
    json cfg = json::parse(R"({"solid_eta_i": [0.3, 0.5], "void_eta_i": [0.5, 0.7], "step": 0.1,
                               "numeric": {"n": 2000, "r_fil": 200, "beta": 500}})");
    const auto dir = scratch("overlay");
    Artifacts art(dir / "out");
    std::ostringstream log;
    const auto s = cmd_curves(cfg, art, log);
    CHECK(s.numeric_points > 10);
    // Rounding of one element in the radius is 2 / r_fil in normalized size.
    CHECK(s.max_deviation_solid <= 2.0 / 200);
    CHECK(s.max_deviation_void <= 2.0 / 200);
}

TEST_CASE("verify1d rejects unknown studies and keys") {
    const auto dir = scratch("verify_bad");
    Artifacts art(dir / "out");
    std::ostringstream log;
    CHECK_THROWS_AS(cmd_verify1d(json::parse(R"({"studies": ["wobble"]})"), art, log), InvalidInput);
    CHECK_THROWS_AS(cmd_verify1d(json::parse(R"({"studies": ["rounding"], "rounding": {"rfil": [10]}})"), art, log),
                    InvalidInput);
}

TEST_CASE("verify1d rounding study lies in the rounding band") {
    const auto dir = scratch("verify");
    Artifacts art(dir / "out");
    std::ostringstream log;
    const auto out = cmd_verify1d(json::parse(R"({"studies": ["rounding"]})"), art, log);
    REQUIRE(out.at("rounding").size() == 2);
    for (const auto& c : out.at("rounding")) CHECK(c.max_deviation() <= c.band + 1e-12);
    CHECK(fs::exists(dir / "out" / "rounding.csv"));
    CHECK(fs::exists(dir / "out" / "rounding.svg"));
}

TEST_CASE("measure command reads a raster and reports both phases") {
    const auto dir = scratch("measure");
    std::vector<double> v(12 * 9, 0.0);
    for (std::size_t j = 3; j < 6; ++j)
        for (std::size_t i = 0; i < 12; ++i) v[j * 12 + i] = 1.0;
    io::write_raster(dir / "bar.csv", Field2D(12, 9, v));
    run_in(dir, "measure", {{"edge", "opposite"}}, dir / "out", dir / "bar.csv");
    const auto m = json::parse(slurp(dir / "out" / "measurement.json"));
    CHECK(m["r_min_solid_measured"]["radius"] == 1.5);
    CHECK(m["edge"] == "opposite");
    CHECK(fs::exists(dir / "out" / "overlay.pgm"));
    CHECK(manifest(dir / "out")["inputs"].size() == 1);

    std::ofstream(dir / "empty.csv").close();
    CHECK_THROWS_AS(run_in(dir, "measure", json::object(), dir / "out2", dir / "empty.csv"), IoError);
    CHECK_FALSE(fs::exists(dir / "out2" / "manifest.json"));
    CHECK_THROWS_AS(run_in(dir, "measure", {{"edge", "closed"}}, dir / "out3", dir / "bar.csv"), InvalidInput);
}

TEST_CASE("topopt config needs the mesh, radius, thresholds and volume") {
    const json ok = json::parse(R"({"nx": 10, "ny": 10, "r_fil": 1.5, "thresholds": [0.7, 0.5, 0.3],
                                    "volume_fraction": 0.3})");
    CHECK(parse_topopt_config(ok).size() == 1);
    for (const char* key : {"nx", "ny", "r_fil", "thresholds", "volume_fraction"}) {
        json bad = ok;
        bad.erase(key);
        CHECK_THROWS_WITH(parse_topopt_config(bad), Catch::Matchers::ContainsSubstring(key));
    }
    json typo = ok;
    typo["volume_fracton"] = 0.2;
    CHECK_THROWS_AS(parse_topopt_config(typo), InvalidInput);
    json mode = ok;
    mode["mode"] = "robust";
    CHECK_THROWS_AS(parse_topopt_config(mode), InvalidInput);
    json nested = ok;
    nested["beta_schedule"] = {{"every", 10}, {"fnial_beta", 8}};
    CHECK_THROWS_AS(parse_topopt_config(nested), InvalidInput);
}

TEST_CASE("topopt runs patch shared keys") {
    json cfg = json::parse(R"({"nx": 10, "ny": 8, "r_fil": 1.5, "thresholds": [0.7, 0.5, 0.3],
                               "volume_fraction": 0.3, "mode": "dilated",
                               "runs": [{"name": "a"}, {"name": "b", "mode": "intermediate",
                                        "thresholds": [0.6, 0.5, 0.14]}]})");
    const auto runs = parse_topopt_config(cfg);
    REQUIRE(runs.size() == 2);
    CHECK(runs[0].config.mode == topopt2d::ConstraintMode::Dilated);
    CHECK(runs[1].config.mode == topopt2d::ConstraintMode::Intermediate);
    CHECK(runs[1].config.thresholds.eta_dil == 0.14);
    CHECK(runs[1].problem.ny == 8);
    cfg["runs"][1]["name"] = "a";
    CHECK_THROWS_AS(parse_topopt_config(cfg), InvalidInput);
}

TEST_CASE("topopt command is deterministic and lists every artifact") {
    const json cfg = json::parse(R"({"nx": 16, "ny": 16, "r_fil": 1.5, "thresholds": [0.7, 0.5, 0.3],
                                     "volume_fraction": 0.3, "max_iterations": 6})");
    const auto dir = scratch("topopt");
    run_in(dir, "topopt", cfg, dir / "a");
    run_in(dir, "topopt", cfg, dir / "b");
    const auto m = manifest(dir / "a");
    CHECK(m["outputs"].size() == 13);
    for (const auto& f : m["outputs"]) {
        const auto rel = f.get<std::string>();
        REQUIRE(fs::exists(dir / "a" / rel));
        CHECK(slurp(dir / "a" / rel) == slurp(dir / "b" / rel));
    }
    CHECK(slurp(dir / "a" / "manifest.json") == slurp(dir / "b" / "manifest.json"));
    const auto hist = slurp(dir / "a" / "run" / "history.csv");
    CHECK(std::count(hist.begin(), hist.end(), '\n') == 7);
}

TEST_CASE("unknown command is an error") {
    Options o;
    o.out = scratch("unknown") / "out";
    std::ostringstream log;
    CHECK_THROWS_AS(run("plot", o, log), InvalidInput);
}
