#pragma once

// Discrete 1D measurement of minimum sizes. A centred slab (solid) or cavity
// (void) of integer width h is filtered, projected with a smooth Heaviside and
// cut off at epsilon. h is grown until the eroded (dilated) design keeps a
// member (cavity) of the requested floor width; the same filtered field is
// then projected at eta_i and the surviving run is measured.

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "lenscale/analytic.hpp"
#include "lenscale/core.hpp"
#include "lenscale/fields.hpp"

namespace lenscale::numeric1d {

struct Numeric1DConfig {
    std::size_t n = 10000;
    double r_fil = 1000.0;
    double beta = 500.0;
    double epsilon = 0.5;
    double alpha = 0.0;  ///< floor width is max(1, round(alpha * r_fil)) elements
    Phase phase = Phase::Solid;

    void validate() const {
        lenscale::detail::require(r_fil >= 1.0 && std::isfinite(r_fil), "r_fil must be >= 1 element");
        lenscale::detail::require(static_cast<double>(n) >= 4.0 * r_fil,
                                  "domain too short: need n >= 4 r_fil");
        lenscale::detail::require(beta > 0.0 && !std::isnan(beta), "beta must be > 0");
        lenscale::detail::require(epsilon > 0.0 && epsilon < 1.0, "cut-off must lie in (0,1)");
        lenscale::detail::require(alpha >= 0.0 && alpha <= 0.5, "alpha must lie in [0, 0.5]");
    }

    std::size_t floor_width() const {
        return std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(alpha * r_fil)));
    }
};

struct CurvePoint {
    double eta_threshold = 0.0;  ///< eta_ero (solid) or eta_dil (void)
    double eta_i = 0.0;
    double normalized_size = 0.0;  ///< measured width / r_fil
    std::size_t h_star = 0;
};

/// Longest contiguous run of `phase` in a {0,1} field.
inline std::size_t measure_width(std::span<const double> binary, Phase phase = Phase::Solid) {
    const double target = phase == Phase::Solid ? 1.0 : 0.0;
    std::size_t best = 0, run = 0;
    for (double v : binary) {
        run = (v == target) ? run + 1 : 0;
        best = std::max(best, run);
    }
    return best;
}

inline std::size_t measure_width(const Field1D& f, Phase phase = Phase::Solid) {
    return measure_width(f.values(), phase);
}

/// Centred block of width h set to the phase of interest, the rest to the other phase.
inline std::vector<double> centred_block(std::size_t n, std::size_t h, Phase phase) {
    const double inside = phase == Phase::Solid ? 1.0 : 0.0;
    std::vector<double> x(n, 1.0 - inside);
    const std::size_t start = (n - h) / 2;
    for (std::size_t i = start; i < start + h; ++i) x[i] = inside;
    return x;
}

namespace detail {

inline std::size_t projected_width(std::span<const double> filtered, double beta, double eta, double eps,
                                   Phase phase) {
    const ProjectionParams p(beta, eta);
    std::vector<double> b(filtered.size());
    for (std::size_t i = 0; i < filtered.size(); ++i) {
        const double rho = lenscale::detail::clamp01(project_smooth(filtered[i], p));
        b[i] = rho >= eps ? 1.0 : 0.0;
    }
    return measure_width(b, phase);
}

}  // namespace detail

/// Filtered field of the centred block of width h.
inline std::vector<double> filtered_block(const Numeric1DConfig& cfg, const Filter1D& filt, std::size_t h) {
    return filt.apply(centred_block(cfg.n, h, cfg.phase));
}

namespace detail {

inline std::size_t find_robust_h(const Numeric1DConfig& cfg, const Filter1D& filt, double eta_threshold) {
    lenscale::detail::require_domain(eta_threshold > 0.0 && eta_threshold < 1.0,
                                     "threshold must lie in (0,1)");
    const std::size_t floor = cfg.floor_width();
    auto ok = [&](std::size_t h) {
        const auto f = filtered_block(cfg, filt, h);
        return projected_width(f, cfg.beta, eta_threshold, cfg.epsilon, cfg.phase) >= floor;
    };
    std::size_t lo = 1;
    std::size_t hi = static_cast<std::size_t>(std::ceil(2.0 * cfg.r_fil));
    if (!ok(hi)) {
        std::ostringstream os;
        os << "no slab width in [1, " << hi << "] survives projection at " << eta_threshold
           << " with floor " << floor;
        throw SearchFailure(os.str());
    }
    if (ok(lo)) return lo;
    while (hi - lo > 1) {
        const std::size_t mid = lo + (hi - lo) / 2;
        (ok(mid) ? hi : lo) = mid;
    }
    return hi;
}

}  // namespace detail

/// Smallest slab (cavity) width whose eroded (dilated) projection keeps at
/// least the floor width. eta_threshold is eta_ero for solid and eta_dil for void.
inline std::size_t find_robust_h(const Numeric1DConfig& cfg, double eta_threshold) {
    cfg.validate();
    return detail::find_robust_h(cfg, Filter1D(cfg.n, cfg.r_fil), eta_threshold);
}

namespace detail {

inline std::vector<CurvePoint> sweep(Numeric1DConfig cfg, Phase phase, const std::vector<double>& eta_i_grid,
                                     const std::vector<double>& threshold_grid) {
    cfg.phase = phase;
    cfg.validate();
    const Filter1D filt(cfg.n, cfg.r_fil);
    std::vector<CurvePoint> out;
    for (double t : threshold_grid) {
        const std::size_t h = find_robust_h(cfg, filt, t);
        const auto f = filtered_block(cfg, filt, h);
        for (double ei : eta_i_grid) {
            // Solid sizes need eta_i <= eta_ero, void sizes eta_i >= eta_dil.
            const bool admissible = phase == Phase::Solid ? ei <= t + 1e-12 : ei >= t - 1e-12;
            if (!admissible) continue;
            const std::size_t w = projected_width(f, cfg.beta, ei, cfg.epsilon, phase);
            out.push_back({t, ei, static_cast<double>(w) / cfg.r_fil, h});
        }
    }
    return out;
}

}  // namespace detail

inline std::vector<CurvePoint> sweep_solid(const Numeric1DConfig& cfg, const std::vector<double>& eta_i_grid,
                                           const std::vector<double>& eta_ero_grid) {
    return detail::sweep(cfg, Phase::Solid, eta_i_grid, eta_ero_grid);
}

inline std::vector<CurvePoint> sweep_void(const Numeric1DConfig& cfg, const std::vector<double>& eta_i_grid,
                                          const std::vector<double>& eta_dil_grid) {
    return detail::sweep(cfg, Phase::Void, eta_i_grid, eta_dil_grid);
}

/// lo, lo+step, ..., hi with integer stepping so grid values do not drift.
inline std::vector<double> threshold_grid(double lo, double hi, double step) {
    lenscale::detail::require(step > 0.0 && hi >= lo, "bad grid bounds");
    std::vector<double> g;
    const auto count = static_cast<long>(std::floor((hi - lo) / step + 1e-9));
    for (long k = 0; k <= count; ++k) g.push_back(std::round((lo + k * step) * 1e12) / 1e12);
    return g;
}

/// Analytic normalized size for a curve point of the given phase.
inline double analytic_size(Phase phase, double eta_i, double eta_threshold) {
    return phase == Phase::Solid ? analytic::min_size_solid(eta_i, eta_threshold)
                                 : analytic::min_size_void(eta_i, eta_threshold);
}

/// One numerically measured curve with its analytic counterparts. `corrected`
/// holds the analytic values after the large-beta cut-off shift and `exact`
/// after the exact per-threshold shift (NaN where the shifted thresholds leave
/// the admissible range); both equal `analytic` when no cut-off applies.
struct StudyCurve {
    std::string label;
    double parameter = 0.0;
    Numeric1DConfig config;
    std::vector<CurvePoint> points;
    std::vector<double> analytic;
    std::vector<double> corrected;
    std::vector<double> exact;
    double band = 0.0;  ///< rounding half-band 2 / r_fil

    enum class Reference { Analytic, Corrected, Exact };

    const std::vector<double>& reference(Reference r) const {
        return r == Reference::Analytic ? analytic : r == Reference::Corrected ? corrected : exact;
    }

    double max_deviation(Reference r = Reference::Analytic) const {
        double m = 0.0;
        const auto& ref = reference(r);
        for (std::size_t k = 0; k < points.size(); ++k)
            if (std::isfinite(ref[k])) m = std::max(m, std::abs(points[k].normalized_size - ref[k]));
        return m;
    }
};

namespace detail {

inline double nan() { return std::numeric_limits<double>::quiet_NaN(); }

inline bool inside_unit(double v) { return v > 0.0 && v < 1.0; }

inline StudyCurve make_curve(std::string label, double parameter, const Numeric1DConfig& cfg,
                             std::vector<CurvePoint> pts, bool cutoff = false) {
    const double shift = cutoff ? analytic::cutoff_shift_term(cfg.beta, cfg.epsilon) : 0.0;
    StudyCurve c;
    c.label = std::move(label);
    c.parameter = parameter;
    c.config = cfg;
    c.band = analytic::rounding_band(cfg.r_fil);
    for (const auto& p : pts) {
        c.analytic.push_back(analytic_size(cfg.phase, p.eta_i, p.eta_threshold));
        const double ei = p.eta_i + shift, et = p.eta_threshold + shift;
        c.corrected.push_back(inside_unit(ei) && inside_unit(et) ? analytic_size(cfg.phase, ei, et) : nan());
        if (!cutoff) {
            c.exact.push_back(c.analytic.back());
            continue;
        }
        double ex = nan();
        try {
            const double xi = analytic::cutoff_threshold_exact(p.eta_i, cfg.beta, cfg.epsilon);
            const double xt = analytic::cutoff_threshold_exact(p.eta_threshold, cfg.beta, cfg.epsilon);
            if (inside_unit(xi) && inside_unit(xt)) ex = analytic_size(cfg.phase, xi, xt);
        } catch (const DomainError&) {
        }
        c.exact.push_back(ex);
    }
    c.points = std::move(pts);
    return c;
}

}  // namespace detail

/// Solid curves for each cut-off value, with analytic curves shifted by
/// atanh(2 eps - 1) / beta.
inline std::vector<StudyCurve> study_cutoff(Numeric1DConfig cfg, const std::vector<double>& epsilons,
                                            const std::vector<double>& eta_i_grid,
                                            const std::vector<double>& eta_ero_grid) {
    cfg.phase = Phase::Solid;
    std::vector<StudyCurve> out;
    for (double eps : epsilons) {
        cfg.epsilon = eps;
        std::ostringstream label;
        label << "epsilon=" << eps;
        out.push_back(
            detail::make_curve(label.str(), eps, cfg, sweep_solid(cfg, eta_i_grid, eta_ero_grid), true));
    }
    return out;
}

/// Solid curves with the eroded design kept alpha * r_fil wide instead of one element.
inline std::vector<StudyCurve> study_alpha(Numeric1DConfig cfg, const std::vector<double>& alphas,
                                           const std::vector<double>& eta_i_grid,
                                           const std::vector<double>& eta_ero_grid) {
    cfg.phase = Phase::Solid;
    std::vector<StudyCurve> out;
    for (double a : alphas) {
        cfg.alpha = a;
        std::ostringstream label;
        label << "alpha=" << a;
        out.push_back(detail::make_curve(label.str(), a, cfg, sweep_solid(cfg, eta_i_grid, eta_ero_grid)));
    }
    return out;
}

/// Solid curves on coarse grids, one per filter radius, with n = 10 r_fil.
inline std::vector<StudyCurve> study_rounding(Numeric1DConfig cfg, const std::vector<double>& radii,
                                              const std::vector<double>& eta_i_grid,
                                              const std::vector<double>& eta_ero_grid) {
    cfg.phase = Phase::Solid;
    std::vector<StudyCurve> out;
    for (double r : radii) {
        cfg.r_fil = r;
        cfg.n = static_cast<std::size_t>(std::lround(10.0 * r));
        std::ostringstream label;
        label << "r_fil=" << r;
        out.push_back(detail::make_curve(label.str(), r, cfg, sweep_solid(cfg, eta_i_grid, eta_ero_grid)));
    }
    return out;
}

}  // namespace lenscale::numeric1d
