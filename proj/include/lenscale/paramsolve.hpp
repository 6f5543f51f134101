#pragma once

// Parameter selection: from desired intermediate-design radii to admissible
// {eta_ero, eta_int, eta_dil, r_fil} sets.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <utility>
#include <vector>

#include "lenscale/analytic.hpp"
#include "lenscale/core.hpp"

namespace lenscale::paramsolve {

using analytic::ThresholdTriple;
using analytic::ZoneId;

struct LengthScaleSpec {
    double r_min_solid_int = 3.0;  ///< elements
    double r_min_void_int = 3.0;   ///< elements
    std::optional<double> t_ero;   ///< elements
    std::optional<double> t_dil;   ///< elements
    double eta_int = 0.5;
    double grid_resolution = 0.05;
    double eta_ero_min = 0.60;
    double eta_ero_max = 0.90;
    std::optional<double> epsilon;
    std::optional<double> beta;

    void validate() const {
        lenscale::detail::require(r_min_solid_int > 0.0 && std::isfinite(r_min_solid_int),
                        "r_min_solid_int must be > 0");
        lenscale::detail::require(r_min_void_int > 0.0 && std::isfinite(r_min_void_int),
                        "r_min_void_int must be > 0");
        lenscale::detail::require(grid_resolution > 0.0 && grid_resolution <= 0.1,
                        "grid_resolution must lie in (0, 0.1]");
        lenscale::detail::require(eta_int > 0.0 && eta_int < 1.0, "eta_int must lie in (0,1)");
        lenscale::detail::require(eta_ero_min > 0.0 && eta_ero_max < 1.0 && eta_ero_min <= eta_ero_max,
                        "erosion threshold range must lie in (0,1)");
        if (t_ero) lenscale::detail::require(*t_ero > 0.0, "t_ero must be > 0");
        if (t_dil) lenscale::detail::require(*t_dil > 0.0, "t_dil must be > 0");
    }
};

struct SolutionRecord {
    ThresholdTriple thresholds;
    double r_fil = 0.0;           ///< elements
    double r_min_solid_int = 0.0;  ///< elements, as realized by the thresholds
    double r_min_void_int = 0.0;   ///< elements
    double t_ero = 0.0;           ///< elements
    double t_dil = 0.0;           ///< elements
    ZoneId solid_zone;
    ZoneId void_zone;
    bool recommended = false;
};

namespace detail {

inline constexpr double kTol = 1e-9;

/// Steep-projection recommendation (ero >= 0.75, dil <= 0.25) intersected
/// with the oscillation-avoiding band (0.60 <= ero <= 0.90, 0.10 <= dil <= 0.40).
inline bool is_recommended(const ThresholdTriple& t) {
    const bool steep = t.eta_ero >= 0.75 - kTol && t.eta_dil <= 0.25 + kTol;
    const bool stable = t.eta_ero >= 0.60 - kTol && t.eta_ero <= 0.90 + kTol && t.eta_dil >= 0.10 - kTol &&
                        t.eta_dil <= 0.40 + kTol;
    return steep && stable;
}

/// Thresholds eta_dil in (0, eta_i) with min_size_void(eta_i, eta_dil) == s,
/// by inverting each void row in closed form and keeping the candidates whose
/// zone matches.
inline std::optional<double> invert_void(double eta_i, double s) {
    std::vector<double> candidates;
    const auto sq = [](double v) { return v * v; };
    {
        const double root = std::sqrt(2.0 * eta_i) - 0.5 * s;  // row 1
        if (root > 0.0) candidates.push_back(sq(root));
    }
    candidates.push_back(eta_i - 0.25 * s * s);  // row 2
    {
        const double root = 0.5 * (4.0 - s - 2.0 * std::sqrt(2.0 - 2.0 * eta_i));  // row 3
        if (root > 0.0) candidates.push_back(sq(root));
    }
    if (s < 2.0) {
        const double root = 1.0 - (1.0 - eta_i) / (2.0 - s);  // row 4
        if (root > 0.0) candidates.push_back(sq(root));
    }
    std::optional<double> best;
    double best_err = 1e-9;
    for (double d : candidates) {
        if (!(d > 0.0 && d < eta_i)) continue;
        const double err = std::abs(analytic::min_size_void(eta_i, d) - s);
        if (err <= best_err) {
            best_err = err;
            best = d;
        }
    }
    return best;
}

}  // namespace detail

/// Completes a record from thresholds and filter radius.
inline SolutionRecord make_record(const ThresholdTriple& t, double r_fil) {
    t.validate();
    SolutionRecord rec;
    rec.thresholds = t;
    rec.r_fil = r_fil;
    rec.r_min_solid_int = 0.5 * r_fil * analytic::min_size_solid(t.eta_int, t.eta_ero);
    rec.r_min_void_int = 0.5 * r_fil * analytic::min_size_void(t.eta_int, t.eta_dil);
    const auto dist = analytic::distances(t, r_fil);
    rec.t_ero = dist.t_ero;
    rec.t_dil = dist.t_dil;
    rec.solid_zone = analytic::solid_zone(t.eta_int, t.eta_ero);
    rec.void_zone = analytic::void_zone(t.eta_int, t.eta_dil);
    rec.recommended = detail::is_recommended(t);
    return rec;
}

/// Erosion thresholds on the grid, generated from integer steps so that
/// values such as 0.75 come out exact.
inline std::vector<double> erosion_grid(const LengthScaleSpec& spec) {
    std::vector<double> grid;
    const long k0 = std::lround(std::ceil(spec.eta_ero_min / spec.grid_resolution - 1e-9));
    const long k1 = std::lround(std::floor(spec.eta_ero_max / spec.grid_resolution + 1e-9));
    for (long k = k0; k <= k1; ++k) {
        const double e = std::round(static_cast<double>(k) * spec.grid_resolution * 1e12) / 1e12;
        grid.push_back(e);
    }
    return grid;
}

/// All admissible records for the indeterminate problem (radii only).
inline std::vector<SolutionRecord> solve_free(const LengthScaleSpec& spec) {
    spec.validate();
    std::vector<SolutionRecord> out;
    for (double e : erosion_grid(spec)) {
        if (!(e > spec.eta_int)) continue;
        const double s_solid = analytic::min_size_solid(spec.eta_int, e);
        if (!(s_solid > 0.0)) continue;
        const double r_fil = 2.0 * spec.r_min_solid_int / s_solid;
        const double s_void = 2.0 * spec.r_min_void_int / r_fil;
        if (!(s_void < 2.0)) continue;
        const auto d = detail::invert_void(spec.eta_int, s_void);
        if (!d) continue;
        out.push_back(make_record(ThresholdTriple(e, spec.eta_int, *d), r_fil));
    }
    if (out.empty()) {
        std::ostringstream os;
        os << "no admissible thresholds for r_min_solid=" << spec.r_min_solid_int
           << ", r_min_void=" << spec.r_min_void_int << " with eta_int=" << spec.eta_int
           << " and eta_ero in [" << spec.eta_ero_min << ", " << spec.eta_ero_max << "]";
        throw Unsatisfiable(os.str());
    }
    return out;
}

namespace detail {

struct Eliminated {
    double eta_int = 0.0;
    double r_fil = 0.0;
};

/// For fixed (eta_ero, eta_dil), the radius ratio fixes eta_int (the solid
/// size falls and the void size rises with eta_int) and then r_fil.
inline std::optional<Eliminated> eliminate(double eta_ero, double eta_dil, double r_solid, double r_void) {
    if (!(0.0 < eta_dil && eta_dil < eta_ero && eta_ero < 1.0)) return std::nullopt;
    const double target = r_solid / r_void;
    const auto ratio_gap = [&](double ei) {
        return analytic::min_size_solid(ei, eta_ero) - target * analytic::min_size_void(ei, eta_dil);
    };
    double lo = eta_dil, hi = eta_ero;
    // gap(lo) = solid > 0, gap(hi) = -target*void < 0: strictly decreasing.
    for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
        const double mid = 0.5 * (lo + hi);
        (ratio_gap(mid) > 0.0 ? lo : hi) = mid;
    }
    const double ei = 0.5 * (lo + hi);
    if (!(ei > eta_dil && ei < eta_ero)) return std::nullopt;
    const double s = analytic::min_size_solid(ei, eta_ero);
    if (!(s > 0.0)) return std::nullopt;
    return Eliminated{ei, 2.0 * r_solid / s};
}

}  // namespace detail

namespace detail {

/// Record with eta_int held at the requested value: eta_ero sets r_fil from
/// the solid radius and eta_dil from the void radius.
inline std::optional<SolutionRecord> pinned_record(const LengthScaleSpec& spec, double eta_ero) {
    if (!(eta_ero > spec.eta_int && eta_ero < 1.0)) return std::nullopt;
    const double s_solid = analytic::min_size_solid(spec.eta_int, eta_ero);
    if (!(s_solid > 0.0)) return std::nullopt;
    const double r_fil = 2.0 * spec.r_min_solid_int / s_solid;
    const double s_void = 2.0 * spec.r_min_void_int / r_fil;
    if (!(s_void < 2.0)) return std::nullopt;
    const auto d = invert_void(spec.eta_int, s_void);
    if (!d) return std::nullopt;
    return make_record(ThresholdTriple(eta_ero, spec.eta_int, *d), r_fil);
}

/// Root of the t_ero equation along the pinned family, accepted only if the
/// t_dil equation holds there too.
inline std::optional<SolutionRecord> solve_pinned(const LengthScaleSpec& spec, double tolerance) {
    const double te = *spec.t_ero, td = *spec.t_dil;
    const int samples = 4000;
    const double lo = spec.eta_int, span = 1.0 - spec.eta_int;
    std::optional<SolutionRecord> best;
    double best_norm = std::numeric_limits<double>::infinity();
    bool have_prev = false;
    double prev_e = 0.0, prev_g = 0.0;  // last sample and its t_ero residual
    for (int k = 1; k < samples; ++k) {
        const double e = lo + span * k / samples;
        const auto rec = pinned_record(spec, e);
        if (!rec) {
            have_prev = false;
            continue;
        }
        const double g = rec->t_ero - te;
        if (have_prev && (prev_g <= 0.0) != (g <= 0.0)) {
            double a = prev_e, b = e, ga = prev_g;
            for (int it = 0; it < 200 && b - a > 1e-16; ++it) {
                const double m = 0.5 * (a + b);
                const auto rm = pinned_record(spec, m);
                if (!rm) break;
                const double gm = rm->t_ero - te;
                if ((gm <= 0.0) == (ga <= 0.0)) {
                    a = m;
                    ga = gm;
                } else {
                    b = m;
                }
            }
            if (const auto root = pinned_record(spec, 0.5 * (a + b))) {
                const double nrm = std::hypot(root->t_ero - te, root->t_dil - td);
                if (nrm < best_norm) {
                    best_norm = nrm;
                    best = root;
                }
            }
        }
        have_prev = true;
        prev_e = e;
        prev_g = g;
    }
    if (best && best_norm <= tolerance) return best;
    return std::nullopt;
}

}  // namespace detail

struct DeterminedOptions {
    double tolerance = 1e-10;  ///< on the residual norm, elements
    int max_iterations = 100;
};

/// Unique parameter set matching both radii and both distances.
inline SolutionRecord solve_determined(const LengthScaleSpec& spec, const DeterminedOptions& opt = {}) {
    spec.validate();
    lenscale::detail::require(spec.t_ero.has_value() && spec.t_dil.has_value(),
                    "solve_determined needs both t_ero and t_dil");
    // Where the active rows depend only on threshold differences, shifting all
    // three thresholds together leaves every size unchanged and the roots form
    // a curve. Holding eta_int at the requested value picks one; the free 2D
    // solve below handles targets that need a different eta_int.
    if (auto pinned = detail::solve_pinned(spec, opt.tolerance)) return *pinned;

    const double rs = spec.r_min_solid_int, rv = spec.r_min_void_int;
    const double te = *spec.t_ero, td = *spec.t_dil;

    struct Eval {
        bool ok = false;
        std::array<double, 2> f{};
        detail::Eliminated el;
    };
    const auto residual = [&](double e, double d) -> Eval {
        Eval ev;
        const auto el = detail::eliminate(e, d, rs, rv);
        if (!el) return ev;
        const ThresholdTriple t(e, el->eta_int, d);
        const auto dist = analytic::distances(t, el->r_fil);
        ev.ok = true;
        ev.f = {dist.t_ero - te, dist.t_dil - td};
        ev.el = *el;
        return ev;
    };
    const auto norm = [](const std::array<double, 2>& f) { return std::hypot(f[0], f[1]); };
    const auto inside = [](double e, double d) { return d > 1e-6 && e < 1.0 - 1e-6 && d < e; };

    // The system can have more than one root (seen for unequal radii near
    // the lower end of the erosion range), so every start is run and the
    // root whose eta_int is closest to the requested one is kept.
    double best_norm = std::numeric_limits<double>::infinity();
    std::array<double, 2> best_x{};
    detail::Eliminated best_el;
    bool have_root = false;

    // Corners of the recommended box first, then a coarse grid over the
    // compromise band so roots near its edges are also reached.
    std::vector<std::array<double, 2>> starts{{0.75, 0.10}, {0.75, 0.25}, {0.90, 0.10}, {0.90, 0.25}};
    for (double e0 : {0.60, 0.65, 0.70, 0.80, 0.85})
        for (double d0 : {0.10, 0.20, 0.30, 0.40, 0.45}) starts.push_back({e0, d0});
    for (const auto& x0 : starts) {
        double e = x0[0], d = x0[1];
        Eval cur = residual(e, d);
        if (!cur.ok) continue;
        for (int it = 0; it < opt.max_iterations && norm(cur.f) > opt.tolerance; ++it) {
            // Forward-difference Jacobian, step scaled to the admissible gap.
            const double he = 1e-7, hd = 1e-7;
            const Eval fe = residual(e - he, d);
            const Eval fd = residual(e, d + hd);
            if (!fe.ok || !fd.ok) break;
            const double j00 = (cur.f[0] - fe.f[0]) / he, j10 = (cur.f[1] - fe.f[1]) / he;
            const double j01 = (fd.f[0] - cur.f[0]) / hd, j11 = (fd.f[1] - cur.f[1]) / hd;
            const double det = j00 * j11 - j01 * j10;
            if (!(std::abs(det) > 1e-300)) break;
            const double de = -(j11 * cur.f[0] - j01 * cur.f[1]) / det;
            const double dd = -(-j10 * cur.f[0] + j00 * cur.f[1]) / det;
            double step = 1.0;
            bool moved = false;
            for (int ls = 0; ls < 40; ++ls, step *= 0.5) {
                const double en = e + step * de, dn = d + step * dd;
                if (!inside(en, dn)) continue;
                const Eval trial = residual(en, dn);
                if (trial.ok && norm(trial.f) < norm(cur.f)) {
                    e = en;
                    d = dn;
                    cur = trial;
                    moved = true;
                    break;
                }
            }
            if (!moved) break;
        }
        const double nf = norm(cur.f);
        if (nf <= opt.tolerance) {
            const bool closer = !have_root || std::abs(cur.el.eta_int - spec.eta_int) <
                                                  std::abs(best_el.eta_int - spec.eta_int) - 1e-12;
            if (closer) {
                best_norm = nf;
                best_x = {e, d};
                best_el = cur.el;
            }
            have_root = true;
        } else if (!have_root && nf < best_norm) {
            best_norm = nf;
            best_x = {e, d};
            best_el = cur.el;
        }
    }

    if (!(best_norm <= opt.tolerance)) {
        std::ostringstream os;
        os << "determined system has no solution for targets (r_solid=" << rs << ", r_void=" << rv
           << ", t_ero=" << te << ", t_dil=" << td << "); final residual " << best_norm;
        throw NoSolution(os.str(), best_norm);
    }
    return make_record(ThresholdTriple(best_x[0], best_el.eta_int, best_x[1]), best_el.r_fil);
}

/// Shifts every threshold by atanh(2 eps - 1) / beta and re-evaluates the
/// realized radii and distances at the same filter radius.
inline SolutionRecord apply_cutoff_correction(const SolutionRecord& rec, double beta, double epsilon) {
    const double shift = analytic::cutoff_shift_term(beta, epsilon);
    ThresholdTriple t = rec.thresholds;
    t.eta_ero += shift;
    t.eta_int += shift;
    t.eta_dil += shift;
    t.beta = beta;
    return make_record(t, rec.r_fil);
}

}  // namespace lenscale::paramsolve
