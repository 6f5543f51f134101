#pragma once

// Realized minimum length scale of a binary 2D design.
//
// Elements are unit squares, element (i, j) covering [i, i+1] x [j, j+1].
// Candidate circle centres sit on the half-element lattice (a/2, b/2). For a
// centre c, D(c) is the exact Euclidean distance to the nearest point of any
// closed square of the opposite phase; the largest inscribed circle there has
// radius floor(2 D) / 2. Because clamping a half-lattice point onto an
// integer-bounded square lands on the half lattice again, D is an exact
// distance transform on a (2 nx + 1) x (2 ny + 1) lattice whose feature points
// are the lattice points inside opposite squares.
//
// The minimum size is the smallest D over ridge points: lattice points where D
// is a local maximum along one of four directions and falls off at no less
// than kappa per unit length on both sides. kappa = 0.75 keeps member cross
// sections and corners sharper than about 83 degrees and drops the ridges of
// right-angle and obtuse corners, which carry no size information. Ridge
// points on the tapering end of a member (the ridge followed for one radius
// drops at taper_rate or faster on one side and not at all on the other) are
// skipped too: the end of a branch is not a member cross section.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <queue>
#include <string>
#include <vector>

#include <json.hpp>

#include "lenscale/core.hpp"
#include "lenscale/fields.hpp"
#include "lenscale/raster_io.hpp"

namespace lenscale::measure2d {

/// How the outside of the domain is treated.
///  Open: unknown; only in-domain opposite elements bound a circle and circles
///        crossing the domain edge are not candidates.
///  Opposite: the outside counts as the opposite phase.
enum class EdgePolicy { Open, Opposite };

struct MeasureOptions {
    double epsilon = 0.5;        ///< binarization cut-off
    std::size_t ignore_area = 2;  ///< features with fewer elements are flipped
    EdgePolicy edge = EdgePolicy::Open;
    double ridge_rate = 0.75;  ///< kappa
    double taper_rate = 0.5;   ///< ridge ends falling faster than this are not members; 0 keeps them
};

/// Per-element distance from the element centre to the nearest opposite-phase
/// square (elements). Opposite-phase elements hold 0.
struct DistanceMap {
    std::size_t nx = 0, ny = 0;
    std::vector<double> values;

    double at(std::size_t i, std::size_t j) const { return values[j * nx + i]; }
};

struct PhaseMeasurement {
    Phase phase = Phase::Solid;
    std::optional<double> radius;    ///< multiple of 0.5 elements; empty if no candidate
    std::optional<double> distance;  ///< exact D at the minimizer
    double x = 0.0, y = 0.0;         ///< circle centre, element units
    std::size_t i = 0, j = 0;        ///< an element of `phase` touching the centre
    std::size_t candidates = 0;
};

struct MeasurementReport {
    PhaseMeasurement solid;
    PhaseMeasurement void_;
    MeasureOptions options;
};

namespace detail {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// 1D squared distance transform (lower envelope of parabolas).
inline void edt_1d(const double* f, std::size_t n, std::size_t stride, double* out, std::vector<double>& d,
                   std::vector<int>& v, std::vector<double>& z) {
    d.assign(n, 0.0);
    v.assign(n, 0);
    z.assign(n + 1, 0.0);
    int k = -1;
    for (std::size_t q = 0; q < n; ++q) {
        const double fq = f[q * stride];
        if (!std::isfinite(fq)) continue;
        const double qq = static_cast<double>(q);
        double s = 0.0;
        while (k >= 0) {
            const double p = v[k];
            s = ((fq + qq * qq) - (f[static_cast<std::size_t>(p) * stride] + p * p)) / (2.0 * (qq - p));
            if (s <= z[k]) --k;
            else break;
        }
        ++k;
        v[k] = static_cast<int>(q);
        z[k] = k == 0 ? -kInf : s;
        z[k + 1] = kInf;
    }
    if (k < 0) {
        for (std::size_t q = 0; q < n; ++q) out[q * stride] = kInf;
        return;
    }
    int m = 0;
    for (std::size_t q = 0; q < n; ++q) {
        const double qq = static_cast<double>(q);
        while (z[m + 1] < qq) ++m;
        const double p = v[m];
        d[q] = (qq - p) * (qq - p) + f[static_cast<std::size_t>(p) * stride];
    }
    for (std::size_t q = 0; q < n; ++q) out[q * stride] = d[q];
}

/// Exact squared Euclidean distance to the nearest feature on a W x H grid.
inline std::vector<double> edt_squared(const std::vector<std::uint8_t>& feature, std::size_t W, std::size_t H) {
    std::vector<double> g(W * H);
    for (std::size_t k = 0; k < g.size(); ++k) g[k] = feature[k] ? 0.0 : kInf;
    std::vector<double> tmp(std::max(W, H)), d;
    std::vector<int> v;
    std::vector<double> z;
    // columns
    for (std::size_t x = 0; x < W; ++x) edt_1d(g.data() + x, H, W, g.data() + x, d, v, z);
    // rows
    for (std::size_t y = 0; y < H; ++y) {
        std::copy(g.begin() + static_cast<long>(y * W), g.begin() + static_cast<long>((y + 1) * W), tmp.begin());
        edt_1d(tmp.data(), W, 1, g.data() + y * W, d, v, z);
    }
    return g;
}

inline std::vector<std::uint8_t> binarize(const Field2D& f, double eps) {
    std::vector<std::uint8_t> b(f.size());
    for (std::size_t e = 0; e < f.size(); ++e) b[e] = f.values()[e] >= eps ? 1 : 0;
    return b;
}

/// Flips every 8-connected component (of either phase) with fewer than
/// `min_area` elements. Components are found on the input, so the result
/// does not depend on the order phases are processed in.
inline std::vector<std::uint8_t> remove_specks(const std::vector<std::uint8_t>& b, std::size_t nx, std::size_t ny,
                                               std::size_t min_area) {
    std::vector<std::uint8_t> out = b;
    if (min_area <= 1) return out;
    std::vector<int> seen(b.size(), 0);
    std::vector<std::size_t> comp;
    for (std::size_t s = 0; s < b.size(); ++s) {
        if (seen[s]) continue;
        comp.clear();
        std::queue<std::size_t> q;
        q.push(s);
        seen[s] = 1;
        while (!q.empty()) {
            const std::size_t e = q.front();
            q.pop();
            comp.push_back(e);
            const long i = static_cast<long>(e % nx), j = static_cast<long>(e / nx);
            for (long dj = -1; dj <= 1; ++dj)
                for (long di = -1; di <= 1; ++di) {
                    const long a = i + di, c = j + dj;
                    if (a < 0 || c < 0 || a >= static_cast<long>(nx) || c >= static_cast<long>(ny)) continue;
                    const std::size_t n = static_cast<std::size_t>(c) * nx + static_cast<std::size_t>(a);
                    if (!seen[n] && b[n] == b[s]) {
                        seen[n] = 1;
                        q.push(n);
                    }
                }
        }
        if (comp.size() < min_area)
            for (std::size_t e : comp) out[e] = b[s] ? 0 : 1;
    }
    return out;
}

/// Flips one-element spurs: elements with at least three in-domain edge
/// neighbours of the other phase. One pass on the input for both phases, so
/// a one-element-wide bar loses only its end elements.
inline std::vector<std::uint8_t> remove_spurs(const std::vector<std::uint8_t>& b, std::size_t nx, std::size_t ny) {
    std::vector<std::uint8_t> out = b;
    const long W = static_cast<long>(nx), H = static_cast<long>(ny);
    for (long j = 0; j < H; ++j)
        for (long i = 0; i < W; ++i) {
            const std::uint8_t v = b[static_cast<std::size_t>(j * W + i)];
            int opp = 0;
            const long nb[4][2] = {{i - 1, j}, {i + 1, j}, {i, j - 1}, {i, j + 1}};
            for (const auto& q : nb)
                if (q[0] >= 0 && q[1] >= 0 && q[0] < W && q[1] < H && b[static_cast<std::size_t>(q[1] * W + q[0])] != v)
                    ++opp;
            if (opp >= 3) out[static_cast<std::size_t>(j * W + i)] = v ? 0 : 1;
        }
    return out;
}

/// Binarization followed by removal of features below the ignore area:
/// components and, once the ignore area exceeds one element, spurs.
inline std::vector<std::uint8_t> clean(const Field2D& f, double eps, std::size_t ignore_area) {
    auto b = remove_specks(binarize(f, eps), f.nx(), f.ny(), ignore_area);
    if (ignore_area >= 2) b = remove_spurs(b, f.nx(), f.ny());
    return b;
}

/// Distance on the half-element lattice, in elements.
struct LatticeDistance {
    std::size_t W = 0, H = 0;  ///< 2 nx + 1, 2 ny + 1
    std::vector<double> D;
    // Opposite: the outside is the other phase, distance 0. Open: unknown, and
    // NaN makes every ridge comparison that reaches outside fail.
    double outside = 0.0;

    double at(long a, long b) const {
        if (a < 0 || b < 0 || a >= static_cast<long>(W) || b >= static_cast<long>(H)) return outside;
        return D[static_cast<std::size_t>(b) * W + static_cast<std::size_t>(a)];
    }
};

inline LatticeDistance lattice_distance(const std::vector<std::uint8_t>& b, std::size_t nx, std::size_t ny,
                                        Phase phase, EdgePolicy edge) {
    const std::uint8_t opp = phase == Phase::Solid ? 0 : 1;
    LatticeDistance L;
    L.W = 2 * nx + 1;
    L.H = 2 * ny + 1;
    if (edge == EdgePolicy::Open) L.outside = std::numeric_limits<double>::quiet_NaN();
    std::vector<std::uint8_t> feat(L.W * L.H, 0);
    for (std::size_t j = 0; j < ny; ++j)
        for (std::size_t i = 0; i < nx; ++i) {
            if (b[j * nx + i] != opp) continue;
            for (std::size_t db = 0; db <= 2; ++db)
                for (std::size_t da = 0; da <= 2; ++da) feat[(2 * j + db) * L.W + 2 * i + da] = 1;
        }
    if (edge == EdgePolicy::Opposite) {
        for (std::size_t a = 0; a < L.W; ++a) feat[a] = feat[(L.H - 1) * L.W + a] = 1;
        for (std::size_t c = 0; c < L.H; ++c) feat[c * L.W] = feat[c * L.W + L.W - 1] = 1;
    }
    const auto sq = edt_squared(feat, L.W, L.H);
    L.D.resize(sq.size());
    for (std::size_t k = 0; k < sq.size(); ++k) L.D[k] = std::isfinite(sq[k]) ? 0.5 * std::sqrt(sq[k]) : kInf;
    return L;
}

inline constexpr std::array<std::array<int, 2>, 4> kRidgeDirs{{{1, 0}, {0, 1}, {1, 1}, {1, -1}}};

/// D reached by following the ridge `steps` lattice steps along t, each step
/// free to shift sideways by one step along u (rastered ridges wiggle). NaN if
/// the walk leaves a domain with an open edge.
inline double follow_ridge(const LatticeDistance& L, long a, long b, const std::array<int, 2>& t,
                           const std::array<int, 2>& u, long steps) {
    double d = L.at(a, b);
    for (long k = 0; k < steps; ++k) {
        long ba = a + t[0], bb = b + t[1];
        double best = L.at(ba, bb);
        for (int s : {-1, 1}) {
            const long ca = a + t[0] + s * u[0], cb = b + t[1] + s * u[1];
            const double v = L.at(ca, cb);
            if (v > best || (std::isnan(best) && !std::isnan(v))) {
                best = v;
                ba = ca;
                bb = cb;
            }
        }
        if (std::isnan(best)) return best;
        a = ba;
        b = bb;
        d = best;
    }
    return d;
}

inline bool is_ridge(const LatticeDistance& L, long a, long b, double kappa, double taper) {
    const double d0 = L.at(a, b);
    for (const auto& u : kRidgeDirs) {
        const double step = 0.5 * std::hypot(u[0], u[1]);
        const double need = kappa * step - 1e-12;
        const double dm = L.at(a - u[0], b - u[1]);
        const double dp = L.at(a + u[0], b + u[1]);
        if (!(d0 >= dm && d0 >= dp)) continue;
        if (d0 - dm < need) continue;
        // A crest lying between two lattice points shows up as a short first
        // drop followed by a full one.
        const bool plus = d0 - dp >= need || dp - L.at(a + 2 * u[0], b + 2 * u[1]) >= need;
        if (!plus) continue;
        if (taper > 0.0) {
            // Tapering end of a member: following the ridge for one radius, D
            // falls steeply on one side and not at all on the other. Walks that
            // leave an open edge count as no fall. The walk covers at least one
            // element so raster staircases average out.
            const std::array<int, 2> t{-u[1], u[0]};
            const double len = 0.5 * std::hypot(t[0], t[1]);
            const long steps = std::max(2L, static_cast<long>(std::ceil(d0 / len - 1e-9)));
            const double run = len * static_cast<double>(steps);
            const double s1 = (d0 - follow_ridge(L, a, b, t, u, steps)) / run;
            const double s2 = (d0 - follow_ridge(L, a, b, {-t[0], -t[1]}, u, steps)) / run;
            const bool steep1 = s1 >= taper - 1e-12, steep2 = s2 >= taper - 1e-12;
            const bool fall1 = s1 > 1e-12, fall2 = s2 > 1e-12;
            if ((steep1 && !fall2) || (steep2 && !fall1)) continue;
        }
        return true;
    }
    return false;
}

inline PhaseMeasurement measure_phase(const std::vector<std::uint8_t>& b, std::size_t nx, std::size_t ny,
                                      Phase phase, const MeasureOptions& opt) {
    const std::uint8_t mine = phase == Phase::Solid ? 1 : 0;
    if (std::none_of(b.begin(), b.end(), [&](std::uint8_t v) { return v == mine; }))
        throw InvalidInput(std::string("design has no ") + std::string(to_string(phase)) + " elements");
    const auto L = lattice_distance(b, nx, ny, phase, opt.edge);
    PhaseMeasurement m;
    m.phase = phase;
    double best = kInf;
    long best_a = -1, best_b = -1;
    for (long c = 0; c < static_cast<long>(L.H); ++c)
        for (long a = 0; a < static_cast<long>(L.W); ++a) {
            const double d = L.at(a, c);
            if (!(d > 0.0) || !std::isfinite(d)) continue;
            if (opt.edge == EdgePolicy::Open) {
                const long edge_steps =
                    std::min({a, static_cast<long>(L.W) - 1 - a, c, static_cast<long>(L.H) - 1 - c});
                if (d > 0.5 * static_cast<double>(edge_steps)) continue;
            }
            if (!is_ridge(L, a, c, opt.ridge_rate, opt.taper_rate)) continue;
            ++m.candidates;
            if (d < best) {
                best = d;
                best_a = a;
                best_b = c;
            }
        }
    if (best_a < 0) return m;
    m.distance = best;
    m.radius = std::floor(2.0 * best + 1e-9) / 2.0;
    m.x = 0.5 * static_cast<double>(best_a);
    m.y = 0.5 * static_cast<double>(best_b);
    // Any in-domain element touching the centre is of this phase (D > 0).
    const long i = std::clamp<long>((best_a - 1) / 2, 0, static_cast<long>(nx) - 1);
    const long j = std::clamp<long>((best_b - 1) / 2, 0, static_cast<long>(ny) - 1);
    m.i = static_cast<std::size_t>(i);
    m.j = static_cast<std::size_t>(j);
    return m;
}

}  // namespace detail

/// Binary design after cut-off and speck removal, as 0/1 doubles.
inline Field2D cleaned(const Field2D& f, const MeasureOptions& opt = {}) {
    const auto b = detail::clean(f, opt.epsilon, opt.ignore_area);
    return Field2D(f.nx(), f.ny(), std::vector<double>(b.begin(), b.end()), f.element_size());
}

/// Distance from each element centre to the nearest square of the other phase.
inline DistanceMap distance_transform(const Field2D& f, Phase phase, EdgePolicy edge = EdgePolicy::Opposite,
                                      double epsilon = 0.5) {
    const auto b = detail::binarize(f, epsilon);
    const auto L = detail::lattice_distance(b, f.nx(), f.ny(), phase, edge);
    DistanceMap m;
    m.nx = f.nx();
    m.ny = f.ny();
    m.values.resize(f.size());
    for (std::size_t j = 0; j < f.ny(); ++j)
        for (std::size_t i = 0; i < f.nx(); ++i)
            m.values[j * f.nx() + i] = L.at(static_cast<long>(2 * i + 1), static_cast<long>(2 * j + 1));
    return m;
}

inline PhaseMeasurement measure_min_solid(const Field2D& f, const MeasureOptions& opt = {}) {
    const auto b = detail::clean(f, opt.epsilon, opt.ignore_area);
    return detail::measure_phase(b, f.nx(), f.ny(), Phase::Solid, opt);
}

inline PhaseMeasurement measure_min_void(const Field2D& f, const MeasureOptions& opt = {}) {
    const auto b = detail::clean(f, opt.epsilon, opt.ignore_area);
    return detail::measure_phase(b, f.nx(), f.ny(), Phase::Void, opt);
}

inline MeasurementReport measure(const Field2D& f, const MeasureOptions& opt = {}) {
    MeasurementReport r;
    r.options = opt;
    r.solid = measure_min_solid(f, opt);
    r.void_ = measure_min_void(f, opt);
    return r;
}

inline nlohmann::ordered_json to_json(const PhaseMeasurement& m) {
    nlohmann::ordered_json j;
    j["phase"] = std::string(to_string(m.phase));
    j["radius"] = m.radius ? nlohmann::ordered_json(*m.radius) : nlohmann::ordered_json(nullptr);
    j["distance"] = m.distance ? nlohmann::ordered_json(*m.distance) : nlohmann::ordered_json(nullptr);
    j["centre"] = {m.x, m.y};
    j["element"] = {m.i, m.j};
    j["candidates"] = m.candidates;
    return j;
}

inline nlohmann::ordered_json to_json(const MeasurementReport& r) {
    nlohmann::ordered_json j;
    j["r_min_solid_measured"] = to_json(r.solid);
    j["r_min_void_measured"] = to_json(r.void_);
    j["epsilon"] = r.options.epsilon;
    j["ignore_area"] = r.options.ignore_area;
    j["edge"] = r.options.edge == EdgePolicy::Open ? "open" : "opposite";
    j["ridge_rate"] = r.options.ridge_rate;
    j["taper_rate"] = r.options.taper_rate;
    return j;
}

/// Cleaned design with the solid minimizer marked mid-gray and the void one light gray.
inline void write_overlay(const std::filesystem::path& path, const Field2D& f, const MeasurementReport& r) {
    std::vector<io::PgmMarker> marks;
    if (r.solid.radius) marks.push_back({r.solid.i, r.solid.j, 96});
    if (r.void_.radius) marks.push_back({r.void_.i, r.void_.j, 176});
    io::write_pgm(path, cleaned(f, r.options), marks);
}

}  // namespace lenscale::measure2d
