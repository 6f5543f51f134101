#pragma once

// Closed-form minimum length scale of a 1D robust design under a linear cone
// filter and a perfect Heaviside step.
//
// Sizes are normalized, s = 2 r / r_fil, in [0, 4). Each phase has four
// zones, set by where the projected edge and the slab edge sit relative to
// each other and to the filter support. Within a phase the formulas are
// continuous across zone boundaries, so a point on a shared boundary is
// assigned the lowest-numbered zone.
//
// Solid rows (eta_i = projection threshold of interest, e = erosion threshold,
// q = sqrt(1 - e)):
//   1  eta_i <= 2e - 1            and eta_i >= 1/2      s = 2 sqrt(2 - 2 eta_i) - 2q
//   2  eta_i >= 2e - 2 + 2q       and eta_i >  2e - 1   s = 2 sqrt(e - eta_i)
//   3  eta_i <  4 - 4q - 2e       and eta_i <  1/2      s = 4 - 2q - 2 sqrt(2 eta_i)
//   4  eta_i >= 4 - 4q - 2e       and eta_i <  2e-2+2q  s = 2 - eta_i / (1 - q)
//
// Void rows (d = dilation threshold, p = sqrt(d)):
//   1  eta_i >= 2d                and eta_i <= 1/2      s = 2 sqrt(2 eta_i) - 2p
//   2  eta_i <= 2d + 1 - 2p       and eta_i <  2d       s = 2 sqrt(eta_i - d)
//   3  eta_i >= 4p - 2d - 1       and eta_i >  1/2      s = 4 - 2p - 2 sqrt(2 - 2 eta_i)
//   4  eta_i <  4p - 2d - 1       and eta_i >  2d+1-2p  s = 2 - (1 - eta_i) / (1 - p)

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>

#include "lenscale/core.hpp"

namespace lenscale::analytic {

inline constexpr double kInfiniteBeta = std::numeric_limits<double>::infinity();

struct ThresholdTriple {
    double eta_ero = 0.75;
    double eta_int = 0.5;
    double eta_dil = 0.25;
    double beta = kInfiniteBeta;

    ThresholdTriple() = default;
    ThresholdTriple(double ero, double intermediate, double dil, double beta_ = kInfiniteBeta)
        : eta_ero(ero), eta_int(intermediate), eta_dil(dil), beta(beta_) {
        validate();
    }

    void validate() const {
        if (!(0.0 < eta_dil && eta_dil < eta_int && eta_int < eta_ero && eta_ero < 1.0)) {
            std::ostringstream os;
            os << "thresholds must satisfy 0 < eta_dil < eta_int < eta_ero < 1, got (" << eta_ero << ", "
               << eta_int << ", " << eta_dil << ")";
            throw DomainError(os.str());
        }
        lenscale::detail::require_domain(beta > 0.0 && !std::isnan(beta), "projection steepness must be > 0");
    }
};

struct ZoneId {
    Phase phase = Phase::Solid;
    int row = 1;  ///< 1..4 within the phase block

    friend bool operator==(const ZoneId&, const ZoneId&) = default;
};

/// Global row number 1..8 as laid out in the reference table (void rows follow solid).
inline int table_row(const ZoneId& z) noexcept { return z.phase == Phase::Solid ? z.row : z.row + 4; }

namespace detail {

inline void check_solid_args(double eta_i, double eta_ero) {
    lenscale::detail::require_domain(eta_ero > 0.0 && eta_ero < 1.0, "erosion threshold must lie in (0,1)");
    lenscale::detail::require_domain(eta_i > 0.0, "projection threshold must be > 0");
    if (!(eta_i <= eta_ero)) {
        std::ostringstream os;
        os << "solid size requires eta_i <= eta_ero, got eta_i=" << eta_i << " eta_ero=" << eta_ero;
        throw DomainError(os.str());
    }
}

inline void check_void_args(double eta_i, double eta_dil) {
    lenscale::detail::require_domain(eta_dil > 0.0 && eta_dil < 1.0, "dilation threshold must lie in (0,1)");
    lenscale::detail::require_domain(eta_i < 1.0, "projection threshold must be < 1");
    if (!(eta_i >= eta_dil)) {
        std::ostringstream os;
        os << "void size requires eta_i >= eta_dil, got eta_i=" << eta_i << " eta_dil=" << eta_dil;
        throw DomainError(os.str());
    }
}

inline double safe_sqrt(double v) { return std::sqrt(std::max(0.0, v)); }

inline bool solid_row_holds(int row, double ei, double e) {
    const double q = std::sqrt(1.0 - e);
    switch (row) {
        case 1: return ei <= 2.0 * e - 1.0 && ei >= 0.5;
        case 2: return ei >= 2.0 * e - 2.0 + 2.0 * q && ei > 2.0 * e - 1.0;
        case 3: return ei < 4.0 - 4.0 * q - 2.0 * e && ei < 0.5;
        case 4: return ei >= 4.0 - 4.0 * q - 2.0 * e && ei < 2.0 * e - 2.0 + 2.0 * q;
        default: return false;
    }
}

inline bool void_row_holds(int row, double ei, double d) {
    const double p = std::sqrt(d);
    switch (row) {
        case 1: return ei >= 2.0 * d && ei <= 0.5;
        case 2: return ei <= 2.0 * d + 1.0 - 2.0 * p && ei < 2.0 * d;
        case 3: return ei >= 4.0 * p - 2.0 * d - 1.0 && ei > 0.5;
        case 4: return ei < 4.0 * p - 2.0 * d - 1.0 && ei > 2.0 * d + 1.0 - 2.0 * p;
        default: return false;
    }
}

}  // namespace detail

/// Normalized solid size for a given table row, without zone checks.
inline double solid_row_formula(int row, double eta_i, double eta_ero) {
    const double q = std::sqrt(1.0 - eta_ero);
    using detail::safe_sqrt;
    switch (row) {
        case 1: return 2.0 * safe_sqrt(2.0 - 2.0 * eta_i) - 2.0 * q;
        case 2: return 2.0 * safe_sqrt(eta_ero - eta_i);
        case 3: return 4.0 - 2.0 * q - 2.0 * safe_sqrt(2.0 * eta_i);
        case 4: return 2.0 - eta_i / (1.0 - q);
        default: throw std::out_of_range("solid row must be 1..4");
    }
}

inline double void_row_formula(int row, double eta_i, double eta_dil) {
    const double p = std::sqrt(eta_dil);
    using detail::safe_sqrt;
    switch (row) {
        case 1: return 2.0 * safe_sqrt(2.0 * eta_i) - 2.0 * p;
        case 2: return 2.0 * safe_sqrt(eta_i - eta_dil);
        case 3: return 4.0 - 2.0 * p - 2.0 * safe_sqrt(2.0 - 2.0 * eta_i);
        case 4: return 2.0 - (1.0 - eta_i) / (1.0 - p);
        default: throw std::out_of_range("void row must be 1..4");
    }
}

inline bool solid_zone_contains(int row, double eta_i, double eta_ero) {
    return detail::solid_row_holds(row, eta_i, eta_ero);
}

inline bool void_zone_contains(int row, double eta_i, double eta_dil) {
    return detail::void_row_holds(row, eta_i, eta_dil);
}

inline ZoneId solid_zone(double eta_i, double eta_ero) {
    detail::check_solid_args(eta_i, eta_ero);
    for (int row = 1; row <= 4; ++row)
        if (detail::solid_row_holds(row, eta_i, eta_ero)) return {Phase::Solid, row};
    // The four conditions tile the admissible triangle; reaching here means a
    // rounding gap on a boundary, where neighbouring rows agree anyway.
    return {Phase::Solid, eta_i >= 0.5 ? 2 : 4};
}

inline ZoneId void_zone(double eta_i, double eta_dil) {
    detail::check_void_args(eta_i, eta_dil);
    for (int row = 1; row <= 4; ++row)
        if (detail::void_row_holds(row, eta_i, eta_dil)) return {Phase::Void, row};
    return {Phase::Void, eta_i <= 0.5 ? 2 : 4};
}

/// 2 r_min.Solid / r_fil for a design projected at eta_i, robust to erosion at eta_ero.
inline double min_size_solid(double eta_i, double eta_ero) {
    const ZoneId z = solid_zone(eta_i, eta_ero);
    return std::max(0.0, solid_row_formula(z.row, eta_i, eta_ero));
}

/// 2 r_min.Void / r_fil for a design projected at eta_i, robust to dilation at eta_dil.
inline double min_size_void(double eta_i, double eta_dil) {
    const ZoneId z = void_zone(eta_i, eta_dil);
    return std::max(0.0, void_row_formula(z.row, eta_i, eta_dil));
}

/// Slab width whose filtered centre value equals eta_ero.
inline double slab_width_h(double eta_ero, double r_fil) {
    lenscale::detail::require_domain(eta_ero > 0.0 && eta_ero < 1.0, "erosion threshold must lie in (0,1)");
    lenscale::detail::require_domain(r_fil > 0.0, "filter radius must be > 0");
    return 2.0 * r_fil * (1.0 - std::sqrt(1.0 - eta_ero));
}

struct Distances {
    double t_ero = 0.0;  ///< elements
    double t_dil = 0.0;  ///< elements
};

/// Erosion/dilation offsets of the intermediate design, in elements.
inline Distances distances(const ThresholdTriple& t, double r_fil) {
    t.validate();
    lenscale::detail::require_domain(r_fil > 0.0, "filter radius must be > 0");
    const double half = 0.5 * r_fil;
    Distances d;
    d.t_dil = half * (min_size_solid(t.eta_dil, t.eta_ero) - min_size_solid(t.eta_int, t.eta_ero));
    d.t_ero = half * (min_size_void(t.eta_ero, t.eta_dil) - min_size_void(t.eta_int, t.eta_dil));
    return d;
}

/// t_ero per unit of the intermediate void radius and t_dil per unit of the
/// intermediate solid radius. Independent of r_fil.
inline Distances normalized_distances(const ThresholdTriple& t) {
    const double s_solid = min_size_solid(t.eta_int, t.eta_ero);
    const double s_void = min_size_void(t.eta_int, t.eta_dil);
    lenscale::detail::require_domain(s_solid > 0.0 && s_void > 0.0,
                                     "intermediate design has no length scale at these thresholds");
    const Distances d = distances(t, 2.0);  // r_fil = 2 makes the sizes radii
    return {d.t_ero / s_void, d.t_dil / s_solid};
}

/// atanh(2 eps - 1) / beta; zero for an infinite steepness.
inline double cutoff_shift_term(double beta, double epsilon) {
    lenscale::detail::require_domain(epsilon > 0.0 && epsilon < 1.0,
                                     "cut-off must lie strictly inside (0,1)");
    lenscale::detail::require_domain(beta > 0.0, "projection steepness must be > 0");
    if (std::isinf(beta)) return 0.0;
    return std::atanh(2.0 * epsilon - 1.0) / beta;
}

/// Perfect-step threshold equivalent to a smooth projection at eta_i followed
/// by a cut-off at epsilon. Valid for beta > 10.
inline double cutoff_shift(double eta_i, double beta, double epsilon) {
    lenscale::detail::require_domain(std::isinf(beta) || beta > 10.0,
                                     "cut-off shift is only valid for beta > 10");
    return eta_i + cutoff_shift_term(beta, epsilon);
}

/// Threshold at which a perfect step reproduces the edge of a smooth projection
/// at eta_i cut off at epsilon, without the large-beta simplification.
/// Throws when the cut-off lies outside the projection's range.
inline double cutoff_threshold_exact(double eta_i, double beta, double epsilon) {
    lenscale::detail::require_domain(epsilon > 0.0 && epsilon < 1.0,
                                     "cut-off must lie strictly inside (0,1)");
    lenscale::detail::require_domain(eta_i > 0.0 && eta_i < 1.0, "threshold must lie in (0,1)");
    lenscale::detail::require_domain(beta > 0.0, "projection steepness must be > 0");
    if (std::isinf(beta)) return eta_i;
    const double a = std::tanh(beta * eta_i);
    const double b = std::tanh(beta * (1.0 - eta_i));
    const double t = epsilon * (a + b) - a;
    lenscale::detail::require_domain(t > -1.0 && t < 1.0, "cut-off not reached by the projection");
    return eta_i + std::atanh(t) / beta;
}

/// Vertical half-band on normalized-size curves from one element of rounding
/// in the radius.
inline double rounding_band(double r_fil_elements) {
    lenscale::detail::require_domain(r_fil_elements > 0.0, "filter radius must be > 0");
    if (std::isinf(r_fil_elements)) return 0.0;
    return 2.0 / r_fil_elements;
}

/// Maximum-size radius to impose on the dilated design.
inline double dilated_max_size(double r_max_int, double t_dil) {
    lenscale::detail::require_domain(r_max_int >= 0.0 && t_dil >= 0.0, "radii must be >= 0");
    return r_max_int + t_dil;
}

}  // namespace lenscale::analytic
