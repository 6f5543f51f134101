#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>

#include "lenscale/analytic.hpp"
#include "lenscale/fields.hpp"

using namespace lenscale;
using namespace lenscale::analytic;
using Catch::Approx;

TEST_CASE("solid zone selection follows the row conditions") {
    CHECK(solid_zone(0.5, 0.70) == ZoneId{Phase::Solid, 2});
    CHECK(solid_zone(0.5, 0.80) == ZoneId{Phase::Solid, 1});
    CHECK(solid_zone(0.30, 0.70) == ZoneId{Phase::Solid, 3});
    CHECK(table_row(void_zone(0.5, 0.25)) == 5);
    CHECK_THROWS_AS(solid_zone(0.8, 0.7), DomainError);
    CHECK_THROWS_AS(void_zone(0.2, 0.3), DomainError);
    CHECK_THROWS_AS(solid_zone(0.5, 1.0), DomainError);
}

TEST_CASE("normalized minimum sizes") {
    CHECK(min_size_solid(0.5, 0.70) == Approx(2.0 * std::sqrt(0.20)).epsilon(1e-14));
    CHECK(2.0 * 2.0 / min_size_solid(0.5, 0.70) == Approx(4.47).margin(0.01));
    CHECK(min_size_solid(0.30, 0.70) == Approx(4.0 - 2.0 * std::sqrt(0.30) - 2.0 * std::sqrt(0.60)).epsilon(1e-14));
    CHECK(min_size_solid(0.30, 0.70) == Approx(1.3554).margin(1e-4));
    CHECK(min_size_solid(0.7, 0.7) == 0.0);
    CHECK(min_size_void(0.5, 0.25) == Approx(1.0).epsilon(1e-14));
    CHECK(min_size_void(0.3, 0.3) == 0.0);
    CHECK(min_size_void(0.5, 0.11) == Approx(1.3367).margin(1e-4));
    // Small eta_i: the whole filtered support, 4 - 2 sqrt(1 - eta_ero) as eta_i -> 0.
    CHECK(min_size_solid(1e-12, 0.75) == Approx(3.0).margin(1e-5));
}

TEST_CASE("adjacent row formulas agree on every zone boundary") {
    int checked = 0;
    for (int k = 1; k < 400; ++k) {
        const double e = k / 400.0;
        const double q = std::sqrt(1.0 - e);
        struct Edge {
            double eta;
            int a, b;
        };
        const Edge edges[] = {
            {2 * e - 1, 1, 2}, {0.5, 1, 3}, {2 * e - 2 + 2 * q, 2, 4}, {4 - 4 * q - 2 * e, 3, 4}};
        for (const auto& ed : edges) {
            if (!(ed.eta > 0.0 && ed.eta < e)) continue;
            REQUIRE(solid_row_formula(ed.a, ed.eta, e) == Approx(solid_row_formula(ed.b, ed.eta, e)).margin(1e-10));
            // The void table is the mirror image: thresholds 1 - eta, 1 - e.
            REQUIRE(void_row_formula(ed.a, 1 - ed.eta, 1 - e) ==
                    Approx(void_row_formula(ed.b, 1 - ed.eta, 1 - e)).margin(1e-10));
            // Dispatch through the zone function is continuous across the edge
            // (away from eta_i = eta_ero, where the size has a square-root cusp).
            if (e - ed.eta < 1e-4) continue;
            const double lo = std::max(1e-9, ed.eta - 1e-9), hi = std::min(e, ed.eta + 1e-9);
            REQUIRE(min_size_solid(lo, e) == Approx(min_size_solid(hi, e)).margin(1e-7));
            ++checked;
        }
    }
    CHECK(checked >= 100);
}

TEST_CASE("exactly one solid zone holds away from boundaries") {
    for (int a = 1; a < 100; ++a)
        for (int b = 1; b < a; ++b) {
            const double e = a / 100.0 + 0.00123, ei = b / 100.0 + 0.00071;
            if (!(ei < e && e < 1.0)) continue;
            int n = 0;
            for (int row = 1; row <= 4; ++row) n += solid_zone_contains(row, ei, e);
            REQUIRE(n == 1);
        }
}

TEST_CASE("solid and void sizes are dual") {
    for (int a = 1; a < 60; ++a)
        for (int b = a; b < 60; ++b) {
            const double d = a / 60.0, ei = b / 60.0;
            REQUIRE(min_size_void(ei, d) == Approx(min_size_solid(1.0 - ei, 1.0 - d)).margin(1e-12));
        }
}

TEST_CASE("sizes are monotone in both thresholds") {
    for (double e : {0.55, 0.7, 0.85, 0.95}) {
        double prev = std::numeric_limits<double>::infinity();
        for (int k = 1; k <= 200; ++k) {
            const double ei = e * k / 200.0;
            const double s = min_size_solid(ei, e);
            REQUIRE(s < prev);
            prev = s;
        }
    }
    for (double ei : {0.3, 0.5, 0.6}) {
        double prev = -1.0;
        for (int k = 0; k < 100; ++k) {
            const double e = ei + (1.0 - ei) * (k + 0.5) / 100.0;
            const double s = min_size_solid(ei, e);
            REQUIRE(s > prev);
            prev = s;
        }
    }
    for (double d : {0.1, 0.25, 0.4}) {
        double prev = -1.0;
        for (int k = 1; k <= 200; ++k) {
            const double ei = d + (1.0 - d) * k / 201.0;
            const double s = min_size_void(ei, d);
            REQUIRE(s > prev);
            prev = s;
        }
    }
}

TEST_CASE("slab width puts the erosion threshold at the slab centre") {
    CHECK(slab_width_h(0.75, 10.0) == Approx(10.0));
    for (double e : {0.6, 0.75, 0.9})
        CHECK(filtered_slab_value(0.0, slab_width_h(e, 7.0), 7.0) == Approx(e).margin(1e-13));
}

TEST_CASE("erosion and dilation distances") {
    // r_fil from the solid radius 3: r_fil = 6 / s(0.5, eta_ero).
    const double pairs[][3] = {{0.75, 0.25, 1.76}, {0.80, 0.20, 1.99}, {0.85, 0.15, 2.21}, {0.90, 0.10, 2.43}};
    for (const auto& p : pairs) {
        const ThresholdTriple t(p[0], 0.5, p[1]);
        const double r_fil = 6.0 / min_size_solid(0.5, p[0]);
        const auto d = distances(t, r_fil);
        CHECK(d.t_dil == Approx(p[2]).margin(0.01));
        CHECK(d.t_ero == Approx(p[2]).margin(0.01));
        CHECK(d.t_ero == Approx(d.t_dil).margin(1e-12));
    }
    const auto d = distances(ThresholdTriple(0.70, 0.5, 0.30), 4.472136);
    CHECK(d.t_dil == Approx(1.03).margin(0.01));
    CHECK(d.t_ero == Approx(1.03).margin(0.01));
    // Scaling with r_fil.
    const ThresholdTriple t(0.8, 0.45, 0.15);
    const auto d1 = distances(t, 3.0), d2 = distances(t, 7.5);
    CHECK(d1.t_ero > 0.0);
    CHECK(d1.t_dil > 0.0);
    CHECK(d2.t_ero == Approx(2.5 * d1.t_ero));
    CHECK(d2.t_dil == Approx(2.5 * d1.t_dil));
    CHECK_THROWS_AS(ThresholdTriple(0.4, 0.5, 0.3), DomainError);
}

TEST_CASE("normalized distances read off the design charts") {
    const auto n = normalized_distances(ThresholdTriple(0.75, 0.5, 0.25));
    CHECK(n.t_ero == Approx(0.58).margin(0.01));
    CHECK(n.t_dil == Approx(0.58).margin(0.01));
    // Same ratio as the distances over the matching radii at any r_fil.
    const ThresholdTriple t(0.8, 0.45, 0.15);
    const double r_fil = 7.5;
    const auto d = distances(t, r_fil);
    const auto m = normalized_distances(t);
    CHECK(m.t_ero == Approx(d.t_ero / (0.5 * r_fil * min_size_void(0.45, 0.15))));
    CHECK(m.t_dil == Approx(d.t_dil / (0.5 * r_fil * min_size_solid(0.45, 0.8))));
}

TEST_CASE("cut-off shift") {
    CHECK(cutoff_shift(0.5, 32.0, 0.5) == 0.5);
    // atanh(0.98) = ln(99) / 2.
    const double s = 0.5 * std::log(99.0) / 32.0;
    CHECK(cutoff_shift(0.5, 32.0, 0.99) == Approx(0.5 + s).epsilon(1e-14));
    CHECK(cutoff_shift(0.5, 32.0, 0.99) == Approx(0.5718).margin(1e-4));
    CHECK(cutoff_shift(0.5, 32.0, 0.01) == Approx(0.5 - s).epsilon(1e-14));
    CHECK(cutoff_shift(0.4, std::numeric_limits<double>::infinity(), 0.9) == 0.4);
    CHECK_THROWS_AS(cutoff_shift(0.5, 32.0, 1.0), DomainError);
    CHECK_THROWS_AS(cutoff_shift(0.5, 32.0, 0.0), DomainError);
    CHECK_THROWS_AS(cutoff_shift(0.5, 5.0, 0.9), DomainError);
    double prev = 0.0;
    for (int k = 1; k < 100; ++k) {
        const double v = cutoff_shift(0.5, 20.0, k / 100.0);
        REQUIRE(v > prev);
        prev = v;
    }
}

TEST_CASE("exact cut-off threshold inverts the smooth projection") {
    for (double beta : {12.0, 30.0, 64.0})
        for (double eta : {0.5, 0.75, 0.9})
            for (double eps : {0.01, 0.5, 0.99}) {
                const double x = cutoff_threshold_exact(eta, beta, eps);
                REQUIRE(project_smooth(x, ProjectionParams(beta, eta)) == Approx(eps).margin(1e-12));
            }
    // Agrees with the large-beta shift once both hyperbolic factors saturate.
    CHECK(cutoff_threshold_exact(0.5, 200.0, 0.99) == Approx(cutoff_shift(0.5, 200.0, 0.99)).margin(1e-12));
    // ... and departs from it when beta (1 - eta) is small.
    CHECK(std::abs(cutoff_threshold_exact(0.9, 30.0, 0.99) - cutoff_shift(0.9, 30.0, 0.99)) > 1e-3);
}

TEST_CASE("rounding band and dilated maximum size") {
    CHECK(rounding_band(10.0) == Approx(0.2));
    CHECK(rounding_band(20.0) == Approx(0.1));
    CHECK(rounding_band(std::numeric_limits<double>::infinity()) == 0.0);
    CHECK(dilated_max_size(3.0, 1.03) == Approx(4.03));
    CHECK(dilated_max_size(3.0, 2.41) == Approx(5.41));
    CHECK(dilated_max_size(2.5, 0.0) == 2.5);
}
