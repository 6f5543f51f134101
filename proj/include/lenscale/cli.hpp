#pragma once

// Command implementations behind the `lenscale` tool. Each command reads a
// JSON config (unknown keys are errors), writes its artifacts under an output
// directory and finishes with manifest.json listing every file it wrote.
// Outputs depend only on the config and inputs; wall-clock times go into the
// manifest only when asked for.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "lenscale/analytic.hpp"
#include "lenscale/core.hpp"
#include "lenscale/fields.hpp"
#include "lenscale/measure2d.hpp"
#include "lenscale/numeric1d.hpp"
#include "lenscale/paramsolve.hpp"
#include "lenscale/raster_io.hpp"
#include "lenscale/svg.hpp"
#include "lenscale/thermal.hpp"
#include "lenscale/topopt2d.hpp"

#ifndef LENSCALE_VERSION
#define LENSCALE_VERSION "0.0.0"
#endif

namespace lenscale::cli {

using json = nlohmann::json;
namespace fs = std::filesystem;

/// Typed access to a JSON object that remembers which keys were read, so
/// leftovers can be reported as unknown.
class ConfigReader {
public:
    ConfigReader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
        if (!j_.is_object()) throw InvalidInput(where_ + ": expected a JSON object");
    }

    bool has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }

    const json& raw(const std::string& key) {
        used_.insert(key);
        if (!j_.contains(key)) throw InvalidInput(where_ + ": missing required key '" + key + "'");
        return j_.at(key);
    }

    template <class T>
    T required(const std::string& key) {
        return convert<T>(key, raw(key));
    }

    template <class T>
    T get(const std::string& key, T fallback) {
        used_.insert(key);
        if (!has(key)) return fallback;
        return convert<T>(key, j_.at(key));
    }

    template <class T>
    std::optional<T> optional(const std::string& key) {
        used_.insert(key);
        if (!has(key)) return std::nullopt;
        return convert<T>(key, j_.at(key));
    }

    /// Marks a key as known without reading it.
    void allow(const std::string& key) { used_.insert(key); }

    void finish() const {
        std::vector<std::string> unknown;
        for (const auto& [k, v] : j_.items())
            if (!used_.count(k)) unknown.push_back(k);
        if (unknown.empty()) return;
        std::string msg = where_ + ": unknown key";
        msg += unknown.size() > 1 ? "s" : "";
        for (std::size_t k = 0; k < unknown.size(); ++k) msg += (k ? ", '" : " '") + unknown[k] + "'";
        throw InvalidInput(msg);
    }

    const std::string& where() const noexcept { return where_; }

private:
    template <class T>
    T convert(const std::string& key, const json& v) const {
        try {
            return v.get<T>();
        } catch (const json::exception&) {
            throw InvalidInput(where_ + ": key '" + key + "' has the wrong type");
        }
    }

    const json& j_;
    std::string where_;
    std::set<std::string> used_;
};

/// FNV-1a 64 over bytes.
inline std::uint64_t fnv1a_bytes(std::string_view s) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << v;
    return os.str();
}

/// Digest of a config independent of key order and whitespace.
inline std::string config_digest(const json& config) { return hex64(fnv1a_bytes(config.dump())); }

struct Options {
    std::optional<fs::path> config;
    fs::path out = "out";
    std::optional<fs::path> raster;
    bool record_time = false;
};

/// Collects written files (relative to the output directory) for the manifest.
class Artifacts {
public:
    explicit Artifacts(fs::path root) : root_(std::move(root)) { fs::create_directories(root_); }

    const fs::path& root() const noexcept { return root_; }

    fs::path path(const fs::path& rel) const { return root_ / rel; }

    fs::path add(const fs::path& rel) {
        files_.insert(rel.generic_string());
        return root_ / rel;
    }

    void write_text(const fs::path& rel, const std::string& text) {
        const auto p = add(rel);
        if (p.has_parent_path()) fs::create_directories(p.parent_path());
        std::ofstream out(p, std::ios::binary);
        if (!out) throw IoError("cannot open for writing: " + p.string());
        out << text;
        if (!out) throw IoError("write failed: " + p.string());
    }

    void write_json(const fs::path& rel, const nlohmann::ordered_json& j) { write_text(rel, j.dump(2) + "\n"); }

    void write_raster(const fs::path& rel_csv, const Field2D& f) {
        fs::create_directories(path(rel_csv).parent_path());
        io::write_raster(add(rel_csv), f);
        auto meta = rel_csv;
        add(meta.replace_extension(".json"));
    }

    const std::set<std::string>& files() const noexcept { return files_; }

private:
    fs::path root_;
    std::set<std::string> files_;
};

namespace detail {

inline std::string num(double v) { return std::isfinite(v) ? io::format_double(v) : std::string(); }

inline std::string utc_now() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
}

inline std::vector<double> range_grid(ConfigReader& r, const std::string& key, double lo, double hi, double step) {
    if (r.has(key)) {
        const auto v = r.required<std::vector<double>>(key);
        if (v.size() != 2) throw InvalidInput(r.where() + ": '" + key + "' must be [lo, hi]");
        lo = v[0];
        hi = v[1];
    } else {
        r.allow(key);
    }
    return numeric1d::threshold_grid(lo, hi, step);
}

inline std::string zone_label(const analytic::ZoneId& z) { return std::to_string(analytic::table_row(z)); }

}  // namespace detail

// ---------------------------------------------------------------- solve

struct SolveCase {
    std::string name;
    paramsolve::LengthScaleSpec spec;
};

inline SolveCase parse_solve_case(const json& j, const std::string& where, const std::string& fallback_name) {
    ConfigReader r(j, where);
    SolveCase c;
    c.name = r.get<std::string>("name", fallback_name);
    auto& s = c.spec;
    s.r_min_solid_int = r.required<double>("r_min_solid");
    s.r_min_void_int = r.required<double>("r_min_void");
    s.eta_int = r.get("eta_int", s.eta_int);
    s.t_ero = r.optional<double>("t_ero");
    s.t_dil = r.optional<double>("t_dil");
    s.grid_resolution = r.get("grid_resolution", s.grid_resolution);
    s.eta_ero_min = r.get("eta_ero_min", s.eta_ero_min);
    s.eta_ero_max = r.get("eta_ero_max", s.eta_ero_max);
    s.epsilon = r.optional<double>("epsilon");
    s.beta = r.optional<double>("beta");
    r.finish();
    if (s.t_ero.has_value() != s.t_dil.has_value())
        throw InvalidInput(where + ": give both t_ero and t_dil or neither");
    if (s.epsilon.has_value() != s.beta.has_value())
        throw InvalidInput(where + ": a cut-off correction needs both epsilon and beta");
    s.validate();
    return c;
}

inline std::vector<SolveCase> parse_solve_config(const json& cfg) {
    std::vector<SolveCase> cases;
    if (cfg.is_object() && cfg.contains("cases")) {
        ConfigReader top(cfg, "solve config");
        const auto& arr = top.raw("cases");
        top.finish();
        if (!arr.is_array() || arr.empty()) throw InvalidInput("solve config: 'cases' must be a non-empty array");
        for (std::size_t k = 0; k < arr.size(); ++k)
            cases.push_back(parse_solve_case(arr[k], "solve case " + std::to_string(k), "case" + std::to_string(k)));
    } else {
        cases.push_back(parse_solve_case(cfg, "solve config", "case0"));
    }
    return cases;
}

struct SolveRow {
    std::string case_name;
    paramsolve::SolutionRecord record;
    std::optional<double> beta, epsilon;  ///< set on cut-off corrected rows
};

inline std::vector<SolveRow> solve_cases(const std::vector<SolveCase>& cases) {
    std::vector<SolveRow> rows;
    for (const auto& c : cases) {
        std::vector<paramsolve::SolutionRecord> recs;
        if (c.spec.t_ero) recs.push_back(paramsolve::solve_determined(c.spec));
        else recs = paramsolve::solve_free(c.spec);
        for (const auto& r : recs) rows.push_back({c.name, r, std::nullopt, std::nullopt});
        if (c.spec.beta)
            for (const auto& r : recs)
                rows.push_back({c.name, paramsolve::apply_cutoff_correction(r, *c.spec.beta, *c.spec.epsilon),
                                c.spec.beta, c.spec.epsilon});
    }
    return rows;
}

inline nlohmann::ordered_json to_json(const SolveRow& row) {
    nlohmann::ordered_json j;
    const auto& r = row.record;
    j["case"] = row.case_name;
    j["eta_ero"] = r.thresholds.eta_ero;
    j["eta_int"] = r.thresholds.eta_int;
    j["eta_dil"] = r.thresholds.eta_dil;
    j["r_fil"] = r.r_fil;
    j["r_min_solid"] = r.r_min_solid_int;
    j["r_min_void"] = r.r_min_void_int;
    j["t_ero"] = r.t_ero;
    j["t_dil"] = r.t_dil;
    j["solid_zone"] = analytic::table_row(r.solid_zone);
    j["void_zone"] = analytic::table_row(r.void_zone);
    j["recommended"] = r.recommended;
    j["cutoff_beta"] = row.beta ? json(*row.beta) : json();
    j["cutoff_epsilon"] = row.epsilon ? json(*row.epsilon) : json();
    return j;
}

inline void cmd_solve(const json& cfg, Artifacts& art, std::ostream& log) {
    const auto rows = solve_cases(parse_solve_config(cfg));
    std::ostringstream csv;
    csv << "case,eta_ero,eta_int,eta_dil,r_fil,r_min_solid,r_min_void,t_ero,t_dil,solid_zone,void_zone,recommended,"
           "cutoff_beta,cutoff_epsilon\n";
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    using detail::num;
    for (const auto& row : rows) {
        const auto& r = row.record;
        csv << row.case_name << ',' << num(r.thresholds.eta_ero) << ',' << num(r.thresholds.eta_int) << ','
            << num(r.thresholds.eta_dil) << ',' << num(r.r_fil) << ',' << num(r.r_min_solid_int) << ','
            << num(r.r_min_void_int) << ',' << num(r.t_ero) << ',' << num(r.t_dil) << ','
            << detail::zone_label(r.solid_zone) << ',' << detail::zone_label(r.void_zone) << ','
            << (r.recommended ? 1 : 0) << ',' << (row.beta ? num(*row.beta) : "") << ','
            << (row.epsilon ? num(*row.epsilon) : "") << '\n';
        arr.push_back(to_json(row));
    }
    art.write_text("solutions.csv", csv.str());
    art.write_json("solutions.json", {{"records", arr}});
    log << rows.size() << " parameter set(s) written\n";
}

// ---------------------------------------------------------------- curves

struct CurvesConfig {
    double step = 0.05;
    std::vector<double> eta_ero_grid, eta_dil_grid;
    std::vector<double> solid_eta_i{0.1, 0.2, 0.3, 0.4, 0.5};
    std::vector<double> void_eta_i{0.5, 0.6, 0.7, 0.8, 0.9};
    double distance_eta_int = 0.5;
    std::vector<double> erosion_distance_eta_dil{0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4};
    std::vector<double> dilation_distance_eta_ero{0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9};
    std::optional<numeric1d::Numeric1DConfig> numeric;
};

inline CurvesConfig parse_curves_config(const json& cfg) {
    ConfigReader r(cfg, "curves config");
    CurvesConfig c;
    c.step = r.get("step", c.step);
    if (!(c.step > 0.0 && c.step <= 0.25)) throw InvalidInput("curves config: step must lie in (0, 0.25]");
    c.eta_ero_grid = detail::range_grid(r, "eta_ero_range", 0.55, 0.95, c.step);
    c.eta_dil_grid = detail::range_grid(r, "eta_dil_range", 0.05, 0.45, c.step);
    c.solid_eta_i = r.get("solid_eta_i", c.solid_eta_i);
    c.void_eta_i = r.get("void_eta_i", c.void_eta_i);
    c.distance_eta_int = r.get("distance_eta_int", c.distance_eta_int);
    c.erosion_distance_eta_dil = r.get("erosion_distance_eta_dil", c.erosion_distance_eta_dil);
    c.dilation_distance_eta_ero = r.get("dilation_distance_eta_ero", c.dilation_distance_eta_ero);
    if (r.has("numeric")) {
        ConfigReader n(r.raw("numeric"), "curves config 'numeric'");
        numeric1d::Numeric1DConfig nc;
        nc.n = n.get("n", nc.n);
        nc.r_fil = n.get("r_fil", nc.r_fil);
        nc.beta = n.get("beta", nc.beta);
        nc.epsilon = n.get("epsilon", nc.epsilon);
        n.finish();
        nc.validate();
        c.numeric = nc;
    } else {
        r.allow("numeric");
    }
    r.finish();
    return c;
}

struct CurvesSummary {
    double max_deviation_solid = 0.0, max_deviation_void = 0.0;  ///< numeric vs analytic; 0 when analytic only
    std::size_t numeric_points = 0;
};

inline CurvesSummary cmd_curves(const json& cfg, Artifacts& art, std::ostream& log) {
    const auto c = parse_curves_config(cfg);
    CurvesSummary sum;
    using detail::num;

    // Size curves: one series per eta_i, x = the erosion or dilation threshold.
    auto size_curves = [&](Phase phase) {
        const bool solid = phase == Phase::Solid;
        const auto& eta_i = solid ? c.solid_eta_i : c.void_eta_i;
        const auto& grid = solid ? c.eta_ero_grid : c.eta_dil_grid;
        std::vector<numeric1d::CurvePoint> pts;
        if (c.numeric)
            pts = solid ? numeric1d::sweep_solid(*c.numeric, eta_i, grid) : numeric1d::sweep_void(*c.numeric, eta_i, grid);
        auto find = [&](double ei, double t) -> const numeric1d::CurvePoint* {
            for (const auto& p : pts)
                if (std::abs(p.eta_i - ei) < 1e-12 && std::abs(p.eta_threshold - t) < 1e-12) return &p;
            return nullptr;
        };
        const std::string thr = solid ? "eta_ero" : "eta_dil";
        std::ostringstream csv;
        csv << "eta_i," << thr << ",analytic" << (c.numeric ? ",numeric,h_star" : "") << '\n';
        svg::Chart chart;
        chart.title = std::string(solid ? "Solid" : "Void") + " minimum size of the intermediate design";
        chart.x_label = thr;
        chart.y_label = "2 r_min / r_fil";
        double& dev = solid ? sum.max_deviation_solid : sum.max_deviation_void;
        for (double ei : eta_i) {
            svg::Series a{"eta_i=" + num(ei), {}, {}}, nm{"numeric " + num(ei), {}, {}, false, true};
            for (double t : grid) {
                const bool ok = solid ? ei <= t + 1e-12 : ei >= t - 1e-12;
                if (!ok) continue;
                const double an = numeric1d::analytic_size(phase, ei, t);
                csv << num(ei) << ',' << num(t) << ',' << num(an);
                a.x.push_back(t);
                a.y.push_back(an);
                if (c.numeric) {
                    const auto* p = find(ei, t);
                    if (p) {
                        csv << ',' << num(p->normalized_size) << ',' << p->h_star;
                        nm.x.push_back(t);
                        nm.y.push_back(p->normalized_size);
                        dev = std::max(dev, std::abs(p->normalized_size - an));
                        ++sum.numeric_points;
                    } else {
                        csv << ",,";
                    }
                }
                csv << '\n';
            }
            chart.series.push_back(std::move(a));
            if (c.numeric) chart.series.push_back(std::move(nm));
        }
        const std::string stem = solid ? "size_solid" : "size_void";
        art.write_text(stem + ".csv", csv.str());
        svg::write(art.add(stem + ".svg"), chart);
    };
    size_curves(Phase::Solid);
    size_curves(Phase::Void);

    // Distance curves, normalized by the intermediate radius they offset.
    auto distance_curves = [&](bool erosion) {
        const auto& family = erosion ? c.erosion_distance_eta_dil : c.dilation_distance_eta_ero;
        const auto& grid = erosion ? c.eta_ero_grid : c.eta_dil_grid;
        std::ostringstream csv;
        csv << (erosion ? "eta_dil,eta_ero,t_ero_over_r_void\n" : "eta_ero,eta_dil,t_dil_over_r_solid\n");
        svg::Chart chart;
        chart.title = erosion ? "Erosion distance" : "Dilation distance";
        chart.x_label = erosion ? "eta_ero" : "eta_dil";
        chart.y_label = erosion ? "t_ero / r_min_void" : "t_dil / r_min_solid";
        for (double other : family) {
            svg::Series s{(erosion ? "eta_dil=" : "eta_ero=") + num(other), {}, {}};
            for (double t : grid) {
                const double ero = erosion ? t : other, dil = erosion ? other : t;
                if (!(dil < c.distance_eta_int && c.distance_eta_int < ero)) continue;
                double v = 0.0;
                try {
                    const auto d = analytic::normalized_distances(analytic::ThresholdTriple(ero, c.distance_eta_int, dil));
                    v = erosion ? d.t_ero : d.t_dil;
                } catch (const DomainError&) {
                    continue;
                }
                csv << num(other) << ',' << num(t) << ',' << num(v) << '\n';
                s.x.push_back(t);
                s.y.push_back(v);
            }
            chart.series.push_back(std::move(s));
        }
        const std::string stem = erosion ? "distance_erosion" : "distance_dilation";
        art.write_text(stem + ".csv", csv.str());
        svg::write(art.add(stem + ".svg"), chart);
    };
    distance_curves(true);
    distance_curves(false);

    nlohmann::ordered_json s;
    s["numeric"] = c.numeric.has_value();
    s["numeric_points"] = sum.numeric_points;
    s["max_deviation_solid"] = sum.max_deviation_solid;
    s["max_deviation_void"] = sum.max_deviation_void;
    art.write_json("summary.json", s);
    log << "curves written" << (c.numeric ? ", max numeric deviation " + num(std::max(sum.max_deviation_solid, sum.max_deviation_void)) : "")
        << '\n';
    return sum;
}

// ---------------------------------------------------------------- verify1d

struct StudySpec {
    std::string kind;  ///< rounding | cutoff | alpha
    numeric1d::Numeric1DConfig base;
    std::vector<double> parameters;
    std::vector<double> eta_i{0.5};
    std::vector<double> eta_ero_grid;
};

inline StudySpec parse_study(const std::string& kind, const json& j) {
    ConfigReader r(j, "verify1d study '" + kind + "'");
    StudySpec s;
    s.kind = kind;
    double lo = 0.55, hi = 0.95;
    if (kind == "rounding") {
        lo = 0.60;
        s.parameters = {10.0, 20.0};
        s.base.beta = 500.0;
    } else if (kind == "cutoff") {
        s.parameters = {0.01, 0.5, 0.99};
        s.base.n = 2000;
        s.base.r_fil = 200.0;
        s.base.beta = 30.0;
        hi = 0.90;
    } else if (kind == "alpha") {
        s.parameters = {0.1, 0.3, 0.5};
        s.base.beta = 512.0;
    } else {
        throw InvalidInput("verify1d: unknown study '" + kind + "' (expected rounding, cutoff or alpha)");
    }
    const std::string pkey = kind == "rounding" ? "r_fil" : kind == "cutoff" ? "epsilon" : "alpha";
    s.parameters = r.get(pkey, s.parameters);
    if (kind != "rounding") {
        s.base.n = r.get("n", s.base.n);
        s.base.r_fil = r.get("r_fil", s.base.r_fil);
    }
    s.base.beta = r.get("beta", s.base.beta);
    s.eta_i = r.get("eta_i", s.eta_i);
    const double step = r.get("step", 0.05);
    s.eta_ero_grid = detail::range_grid(r, "eta_ero_range", lo, hi, step);
    r.finish();
    if (s.parameters.empty()) throw InvalidInput("verify1d study '" + kind + "': no parameter values");
    return s;
}

inline std::vector<numeric1d::StudyCurve> run_study(const StudySpec& s) {
    if (s.kind == "rounding") return numeric1d::study_rounding(s.base, s.parameters, s.eta_i, s.eta_ero_grid);
    if (s.kind == "cutoff") return numeric1d::study_cutoff(s.base, s.parameters, s.eta_i, s.eta_ero_grid);
    return numeric1d::study_alpha(s.base, s.parameters, s.eta_i, s.eta_ero_grid);
}

inline std::map<std::string, std::vector<numeric1d::StudyCurve>> cmd_verify1d(const json& cfg, Artifacts& art,
                                                                               std::ostream& log) {
    ConfigReader r(cfg, "verify1d config");
    std::vector<std::string> kinds = r.get<std::vector<std::string>>("studies", {"rounding", "cutoff", "alpha"});
    std::vector<StudySpec> specs;
    for (const auto& k : kinds) specs.push_back(parse_study(k, r.has(k) ? r.raw(k) : json::object()));
    for (const char* k : {"rounding", "cutoff", "alpha"}) r.allow(k);
    r.finish();

    using detail::num;
    std::map<std::string, std::vector<numeric1d::StudyCurve>> out;
    nlohmann::ordered_json summary;
    for (const auto& s : specs) {
        const auto curves = run_study(s);
        std::ostringstream csv;
        csv << "label,parameter,eta_i,eta_ero,h_star,numeric,analytic,corrected,exact,band\n";
        svg::Chart chart;
        chart.title = s.kind + " study";
        chart.x_label = "eta_ero";
        chart.y_label = "2 r_min / r_fil";
        nlohmann::ordered_json js = nlohmann::ordered_json::array();
        for (const auto& c : curves) {
            svg::Series nm{c.label, {}, {}, false, true}, an{c.label + " analytic", {}, {}}, co{c.label + " shifted", {}, {}, true};
            for (std::size_t k = 0; k < c.points.size(); ++k) {
                const auto& p = c.points[k];
                csv << c.label << ',' << num(c.parameter) << ',' << num(p.eta_i) << ',' << num(p.eta_threshold) << ','
                    << p.h_star << ',' << num(p.normalized_size) << ',' << num(c.analytic[k]) << ','
                    << num(c.corrected[k]) << ',' << num(c.exact[k]) << ',' << num(c.band) << '\n';
                nm.x.push_back(p.eta_threshold);
                nm.y.push_back(p.normalized_size);
                an.x.push_back(p.eta_threshold);
                an.y.push_back(c.analytic[k]);
                co.x.push_back(p.eta_threshold);
                co.y.push_back(c.corrected[k]);
            }
            chart.series.push_back(std::move(nm));
            chart.series.push_back(std::move(an));
            if (s.kind == "cutoff") chart.series.push_back(std::move(co));
            using R = numeric1d::StudyCurve::Reference;
            nlohmann::ordered_json jc;
            jc["label"] = c.label;
            jc["parameter"] = c.parameter;
            jc["band"] = c.band;
            jc["max_deviation_analytic"] = c.max_deviation(R::Analytic);
            jc["max_deviation_corrected"] = c.max_deviation(R::Corrected);
            jc["max_deviation_exact"] = c.max_deviation(R::Exact);
            js.push_back(jc);
        }
        art.write_text(s.kind + ".csv", csv.str());
        svg::write(art.add(s.kind + ".svg"), chart);
        summary[s.kind] = js;
        log << s.kind << ": " << curves.size() << " curve(s)\n";
        out[s.kind] = curves;
    }
    art.write_json("summary.json", summary);
    return out;
}

// ---------------------------------------------------------------- measure

inline measure2d::MeasureOptions parse_measure_options(const json& j, const std::string& where) {
    ConfigReader r(j, where);
    measure2d::MeasureOptions o;
    o.epsilon = r.get("epsilon", o.epsilon);
    o.ignore_area = r.get("ignore_area", o.ignore_area);
    const auto edge = r.get<std::string>("edge", "open");
    if (edge == "open") o.edge = measure2d::EdgePolicy::Open;
    else if (edge == "opposite") o.edge = measure2d::EdgePolicy::Opposite;
    else throw InvalidInput(where + ": edge must be 'open' or 'opposite'");
    o.ridge_rate = r.get("ridge_rate", o.ridge_rate);
    o.taper_rate = r.get("taper_rate", o.taper_rate);
    r.finish();
    if (!(o.epsilon > 0.0 && o.epsilon < 1.0)) throw InvalidInput(where + ": epsilon must lie in (0, 1)");
    if (!(o.ridge_rate > 0.0 && o.ridge_rate <= 1.0)) throw InvalidInput(where + ": ridge_rate must lie in (0, 1]");
    if (!(o.taper_rate >= 0.0)) throw InvalidInput(where + ": taper_rate must be >= 0");
    return o;
}

/// Measures whichever phases are present; a missing phase is reported as null.
inline nlohmann::ordered_json measure_report(const Field2D& f, const measure2d::MeasureOptions& o,
                                             measure2d::MeasurementReport& report) {
    report.options = o;
    auto one = [&](Phase p, measure2d::PhaseMeasurement& m) {
        try {
            m = p == Phase::Solid ? measure2d::measure_min_solid(f, o) : measure2d::measure_min_void(f, o);
            return true;
        } catch (const InvalidInput&) {
            m = {};
            m.phase = p;
            return false;
        }
    };
    const bool has_solid = one(Phase::Solid, report.solid);
    const bool has_void = one(Phase::Void, report.void_);
    auto j = measure2d::to_json(report);
    if (!has_solid) j["r_min_solid_measured"] = nullptr;
    if (!has_void) j["r_min_void_measured"] = nullptr;
    return j;
}

inline measure2d::MeasurementReport cmd_measure(const json& cfg, const fs::path& raster, Artifacts& art,
                                                std::ostream& log) {
    const auto opt = parse_measure_options(cfg, "measure config");
    const Field2D f = io::read_raster(raster);
    const auto report = measure2d::measure(f, opt);
    art.write_json("measurement.json", measure2d::to_json(report));
    measure2d::write_overlay(art.add("overlay.pgm"), f, report);
    log << "r_min_solid " << (report.solid.radius ? detail::num(*report.solid.radius) : "none") << ", r_min_void "
        << (report.void_.radius ? detail::num(*report.void_.radius) : "none") << '\n';
    return report;
}

// ---------------------------------------------------------------- topopt

struct TopoptRun {
    std::string name;
    thermal::HeatProblem problem;
    topopt2d::RobustConfig config;
    std::string initial = "base";
    measure2d::MeasureOptions measure;
};

inline topopt2d::ConstraintMode parse_mode(const std::string& s, const std::string& where) {
    if (s == "intermediate") return topopt2d::ConstraintMode::Intermediate;
    if (s == "dilated") return topopt2d::ConstraintMode::Dilated;
    if (s == "minmax") return topopt2d::ConstraintMode::MinMaxFull;
    throw InvalidInput(where + ": mode must be 'intermediate', 'dilated' or 'minmax'");
}

inline TopoptRun parse_topopt_run(const json& j, const std::string& where, const std::string& fallback_name) {
    ConfigReader r(j, where);
    TopoptRun run;
    run.name = r.get<std::string>("name", fallback_name);
    if (run.name.empty() || run.name.find_first_of("/\\") != std::string::npos || run.name == "." || run.name == "..")
        throw InvalidInput(where + ": run name must be a plain directory name");
    auto& p = run.problem;
    p.nx = r.required<std::size_t>("nx");
    p.ny = r.required<std::size_t>("ny");
    if (r.has("problem")) {
        ConfigReader q(r.raw("problem"), where + " 'problem'");
        p.k_min = q.get("k_min", p.k_min);
        p.penal = q.get("penal", p.penal);
        p.heat = q.get("heat", p.heat);
        p.sink_centre = q.get("sink_centre", p.sink_centre);
        p.sink_extent = q.get("sink_extent", p.sink_extent);
        q.finish();
    } else {
        r.allow("problem");
    }
    p.validate();

    auto& c = run.config;
    const auto th = r.required<std::vector<double>>("thresholds");
    if (th.size() != 3) throw InvalidInput(where + ": thresholds must be [eta_ero, eta_int, eta_dil]");
    c.thresholds = analytic::ThresholdTriple(th[0], th[1], th[2]);
    c.r_fil = r.required<double>("r_fil");
    c.volume_fraction = r.required<double>("volume_fraction");
    c.mode = parse_mode(r.get<std::string>("mode", "dilated"), where);
    if (r.has("beta_schedule")) {
        ConfigReader b(r.raw("beta_schedule"), where + " 'beta_schedule'");
        auto& s = c.schedule;
        s.start = b.get("start", s.start);
        s.increment = b.get("increment", s.increment);
        s.max = b.get("max", s.max);
        s.every = b.get("every", s.every);
        s.final_beta = b.get("final_beta", s.final_beta);
        s.final_iterations = b.get("final_iterations", s.final_iterations);
        b.finish();
    } else {
        r.allow("beta_schedule");
    }
    c.max_iterations = r.get("max_iterations", c.max_iterations);
    c.move = r.get("move", c.move);
    c.bound_update_every = r.get("bound_update_every", c.bound_update_every);
    c.change_tol = r.get("change_tol", c.change_tol);
    c.record_all_compliances = r.get("record_all_compliances", c.record_all_compliances);
    c.validate();
    run.initial = r.get<std::string>("initial", run.initial);
    if (run.initial != "base" && run.initial != "uniform")
        throw InvalidInput(where + ": initial must be 'base' or 'uniform'");
    run.measure = parse_measure_options(r.has("measure") ? r.raw("measure") : json::object(), where + " 'measure'");
    r.allow("measure");
    r.finish();
    return run;
}

/// A single run, or `runs`: an array of objects patched over the shared keys.
inline std::vector<TopoptRun> parse_topopt_config(const json& cfg) {
    if (!cfg.is_object()) throw InvalidInput("topopt config: expected a JSON object");
    std::vector<TopoptRun> runs;
    if (!cfg.contains("runs")) {
        runs.push_back(parse_topopt_run(cfg, "topopt config", "run"));
        return runs;
    }
    const auto& arr = cfg.at("runs");
    if (!arr.is_array() || arr.empty()) throw InvalidInput("topopt config: 'runs' must be a non-empty array");
    json shared = cfg;
    shared.erase("runs");
    std::set<std::string> names;
    for (std::size_t k = 0; k < arr.size(); ++k) {
        if (!arr[k].is_object()) throw InvalidInput("topopt run " + std::to_string(k) + ": expected a JSON object");
        json merged = shared;
        merged.merge_patch(arr[k]);
        runs.push_back(parse_topopt_run(merged, "topopt run " + std::to_string(k), "run" + std::to_string(k)));
        if (!names.insert(runs.back().name).second)
            throw InvalidInput("topopt config: duplicate run name '" + runs.back().name + "'");
    }
    return runs;
}

struct TopoptResult {
    std::string name;
    topopt2d::DesignState2D state;
    measure2d::MeasurementReport report;
};

inline std::vector<TopoptResult> cmd_topopt(const json& cfg, Artifacts& art, std::ostream& log) {
    const auto runs = parse_topopt_config(cfg);
    std::vector<TopoptResult> results;
    nlohmann::ordered_json summary = nlohmann::ordered_json::array();
    using detail::num;
    for (const auto& run : runs) {
        const auto& p = run.problem;
        const Field2D init = run.initial == "base"
                                 ? topopt2d::base_structure(p.nx, p.ny, run.config.volume_fraction)
                                 : Field2D::constant(p.nx, p.ny, run.config.volume_fraction,
                                                     1.0 / static_cast<double>(std::max(p.nx, p.ny)));
        log << run.name << ": " << p.nx << "x" << p.ny << ", " << topopt2d::to_string(run.config.mode) << ", "
            << run.config.iterations() << " iterations\n";
        TopoptResult res;
        res.name = run.name;
        res.state = topopt2d::optimize(p, run.config, init);
        const auto& st = res.state;

        const fs::path dir = run.name;
        art.write_raster(dir / "design.csv", st.rho);
        art.write_raster(dir / "eroded.csv", st.ero);
        art.write_raster(dir / "intermediate.csv", st.int_);
        art.write_raster(dir / "dilated.csv", st.dil);
        io::write_pgm(art.add(dir / "intermediate.pgm"), st.int_);
        topopt2d::write_history_csv(art.add(dir / "history.csv"), st.history);
        const auto mj = measure_report(st.int_, run.measure, res.report);
        art.write_json(dir / "measurement.json", mj);
        measure2d::write_overlay(art.add(dir / "overlay.pgm"), st.int_, res.report);

        const auto& last = st.history.back();
        nlohmann::ordered_json js;
        js["name"] = run.name;
        js["nx"] = p.nx;
        js["ny"] = p.ny;
        js["mode"] = std::string(topopt2d::to_string(run.config.mode));
        js["thresholds"] = {run.config.thresholds.eta_ero, run.config.thresholds.eta_int, run.config.thresholds.eta_dil};
        js["r_fil"] = run.config.r_fil;
        js["iterations"] = st.iterations;
        js["final_beta"] = st.beta;
        js["c_ero"] = last.c_ero;
        js["v_int"] = last.v_int;
        js["v_dil_bound"] = run.config.mode == topopt2d::ConstraintMode::Intermediate ? json() : json(st.v_dil_bound);
        js["converged"] = st.converged;
        js["oscillating"] = st.oscillating;
        js["feasible"] = st.feasible;
        js["final_design_hash"] = hex64(topopt2d::fnv1a(st.rho.values()));
        js["r_min_solid_measured"] = res.report.solid.radius ? json(*res.report.solid.radius) : json();
        js["r_min_void_measured"] = res.report.void_.radius ? json(*res.report.void_.radius) : json();
        summary.push_back(js);
        log << run.name << ": c_ero " << num(last.c_ero) << ", r_min_solid "
            << (res.report.solid.radius ? num(*res.report.solid.radius) : "none") << ", r_min_void "
            << (res.report.void_.radius ? num(*res.report.void_.radius) : "none") << '\n';
        results.push_back(std::move(res));
    }
    art.write_json("summary.json", {{"runs", summary}});
    return results;
}

// ---------------------------------------------------------------- driver

inline json load_config(const std::optional<fs::path>& path) {
    if (!path) return json::object();
    std::ifstream in(*path);
    if (!in) throw IoError("cannot open config: " + path->string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw InvalidInput("config " + path->string() + " is not valid JSON: " + e.what());
    }
}

inline void write_manifest(const std::string& command, const json& config, const Options& opt, Artifacts& art,
                           const std::optional<std::pair<std::string, std::string>>& times) {
    nlohmann::ordered_json m;
    m["command"] = command;
    m["tool_version"] = LENSCALE_VERSION;
    m["config_digest"] = config_digest(config);
    m["config"] = config;
    m["inputs"] = opt.raster ? json::array({opt.raster->generic_string()}) : json::array();
    m["outputs"] = art.files();
    if (times) m["timestamps"] = {{"started", times->first}, {"finished", times->second}};
    else m["timestamps"] = nullptr;
    std::ofstream out(art.path("manifest.json"), std::ios::binary);
    if (!out) throw IoError("cannot write manifest in " + art.root().string());
    out << m.dump(2) << '\n';
}

/// Runs one command. Throws on bad input or failure; the manifest is written
/// only when every artifact was produced.
inline void run(const std::string& command, const Options& opt, std::ostream& log) {
    const json config = load_config(opt.config);
    const std::string started = opt.record_time ? detail::utc_now() : std::string();
    Artifacts art(opt.out);
    if (command == "solve") {
        cmd_solve(config, art, log);
    } else if (command == "curves") {
        cmd_curves(config, art, log);
    } else if (command == "verify1d") {
        cmd_verify1d(config, art, log);
    } else if (command == "topopt") {
        if (!opt.config) throw InvalidInput("topopt needs --config");
        cmd_topopt(config, art, log);
    } else if (command == "measure") {
        if (!opt.raster) throw InvalidInput("measure needs --raster");
        cmd_measure(config, *opt.raster, art, log);
    } else {
        throw InvalidInput("unknown command '" + command + "'");
    }
    std::optional<std::pair<std::string, std::string>> times;
    if (opt.record_time) times = std::make_pair(started, detail::utc_now());
    write_manifest(command, config, opt, art, times);
}

}  // namespace lenscale::cli
