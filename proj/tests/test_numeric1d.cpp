#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "lenscale/numeric1d.hpp"

using namespace lenscale;
using namespace lenscale::numeric1d;
using Catch::Approx;

namespace {

Numeric1DConfig coarse(double r, double beta = 500.0) {
    Numeric1DConfig c;
    c.r_fil = r;
    c.n = static_cast<std::size_t>(10 * r);
    c.beta = beta;
    return c;
}

}  // namespace

TEST_CASE("width measurement") {
    CHECK(measure_width(Field1D::constant(12, 0.0)) == 0);
    std::vector<double> one(21, 0.0);
    for (int i = 7; i < 14; ++i) one[i] = 1.0;
    CHECK(measure_width(Field1D(one)) == 7);
    const std::vector<double> two{1, 1, 1, 0, 0, 1, 1, 1, 1, 1, 0};
    CHECK(measure_width(Field1D(two)) == 5);
    CHECK(measure_width(Field1D(two), Phase::Void) == 2);
}

TEST_CASE("robust slab width follows the slab relation") {
    Numeric1DConfig c;  // n = 1e4, r = 1e3, beta = 500
    const auto h = find_robust_h(c, 0.75);
    CHECK(static_cast<double>(h) / c.r_fil == Approx(1.0).margin(2.0 / c.r_fil));
    const auto h99 = find_robust_h(c, 0.99);
    CHECK(static_cast<double>(h99) / c.r_fil == Approx(1.8).margin(2.0 / c.r_fil));

    Numeric1DConfig a = coarse(40);
    const auto h0 = find_robust_h(a, 0.8);
    a.alpha = 0.5;
    CHECK(find_robust_h(a, 0.8) > h0);
}

TEST_CASE("robust slab search fails when no width survives") {
    Numeric1DConfig c = coarse(10);
    c.alpha = 0.5;
    c.epsilon = 0.999;
    c.beta = 2.0;  // projection never reaches the cut-off
    CHECK_THROWS_AS(find_robust_h(c, 0.9), SearchFailure);
}

TEST_CASE("configuration is validated") {
    Numeric1DConfig c;
    c.n = 3000;
    CHECK_THROWS_AS(find_robust_h(c, 0.7), InvalidInput);
    c = Numeric1DConfig{};
    c.alpha = 0.7;
    CHECK_THROWS_AS(find_robust_h(c, 0.7), InvalidInput);
}

TEST_CASE("solid sweep agrees with the closed form in the continuous setting") {
    const Numeric1DConfig c;
    const auto pts = sweep_solid(c, {0.3, 0.5}, {0.70});
    REQUIRE(pts.size() == 2);
    CHECK(pts[0].normalized_size == Approx(analytic::min_size_solid(0.3, 0.7)).margin(0.01));
    CHECK(pts[1].normalized_size == Approx(0.894).margin(0.01));
}

TEST_CASE("void sweep agrees with the closed form") {
    const Numeric1DConfig c;
    const auto pts = sweep_void(c, {0.5}, {0.25, 0.11});
    REQUIRE(pts.size() == 2);
    CHECK(pts[0].normalized_size == Approx(1.0).margin(0.01));
    CHECK(pts[1].normalized_size == Approx(1.337).margin(0.01));
}

TEST_CASE("coarse grid stays inside the rounding band") {
    const auto pts = sweep_solid(coarse(10), {0.5}, {0.80});
    REQUIRE(pts.size() == 1);
    CHECK(std::abs(pts[0].normalized_size - 1.1056) <= 0.2);
}

TEST_CASE("projecting at the erosion threshold reproduces the eroded width") {
    // The eroded run need not be a single element: one more element of slab
    // lifts the flat top of the filtered profile over a finite span.
    const Numeric1DConfig c = coarse(50);
    const auto pts = sweep_solid(c, {0.8}, {0.8});
    REQUIRE(pts.size() == 1);
    const Filter1D filt(c.n, c.r_fil);
    const auto f = filt.apply(centred_block(c.n, pts[0].h_star, Phase::Solid));
    const auto eroded = binarize_cutoff(project(f, ProjectionParams(c.beta, 0.8)), c.epsilon);
    CHECK(pts[0].normalized_size * c.r_fil == Approx(static_cast<double>(measure_width(eroded))));
    CHECK(measure_width(eroded) >= 1);
}

TEST_CASE("solid and void sweeps are mirror images") {
    // A non-integer radius keeps filtered values off the dyadic thresholds,
    // where the solid (>=) and void (<) cut-offs would treat ties differently.
    Numeric1DConfig c = coarse(30.7, 64.0);
    const std::vector<double> eta_i{0.125, 0.25, 0.375, 0.5, 0.625, 0.75, 0.875};
    const std::vector<double> ero{0.625, 0.75, 0.875};
    std::vector<double> dil, eta_m;
    for (double e : ero) dil.push_back(1.0 - e);
    for (double e : eta_i) eta_m.push_back(1.0 - e);
    const auto s = sweep_solid(c, eta_i, ero);
    const auto v = sweep_void(c, eta_m, dil);
    REQUIRE(s.size() == v.size());
    for (const auto& p : s) {
        bool found = false;
        for (const auto& q : v)
            if (q.eta_threshold == 1.0 - p.eta_threshold && q.eta_i == 1.0 - p.eta_i) {
                CHECK(q.normalized_size == p.normalized_size);
                CHECK(q.h_star == p.h_star);
                found = true;
            }
        CHECK(found);
    }
}

TEST_CASE("refining the grid does not increase the deviation") {
    const auto grid_i = threshold_grid(0.1, 0.5, 0.1);
    const auto grid_e = threshold_grid(0.6, 0.9, 0.1);
    double prev = std::numeric_limits<double>::infinity();
    for (double r : {10.0, 20.0, 40.0, 80.0}) {
        const auto curve = study_rounding(coarse(r), {r}, grid_i, grid_e).front();
        const double dev = curve.max_deviation();
        CHECK(dev <= curve.band + 1e-12);
        CHECK(dev <= prev + 1e-12);
        prev = dev;
    }
}

TEST_CASE("cut-off study") {
    Numeric1DConfig c;
    c.n = 2000;
    c.r_fil = 200;
    c.beta = 30;
    const auto curves = study_cutoff(c, {0.01, 0.5, 0.99}, {0.5}, threshold_grid(0.6, 0.85, 0.05));
    REQUIRE(curves.size() == 3);
    const double band = analytic::rounding_band(200);
    CHECK(curves[1].max_deviation() <= band);
    CHECK(curves[0].max_deviation(StudyCurve::Reference::Corrected) <= band);
    CHECK(curves[2].max_deviation(StudyCurve::Reference::Corrected) <= band);
    // High cut-off keeps less solid for a given slab, so the robust slab and
    // the intermediate member both grow.
    CHECK(curves[2].points.back().normalized_size > curves[1].points.back().normalized_size + band);
}

TEST_CASE("alpha study orders the curves") {
    const auto curves = study_alpha(coarse(100), {0.0, 0.1, 0.3, 0.5}, {0.5}, threshold_grid(0.6, 0.9, 0.1));
    for (std::size_t k = 0; k < curves.front().points.size(); ++k) {
        double prev = -1.0;
        for (const auto& c : curves) {
            REQUIRE(c.points[k].normalized_size >= prev);
            prev = c.points[k].normalized_size;
        }
        CHECK(curves.back().points[k].normalized_size >= curves.back().analytic[k]);
    }
}

TEST_CASE("threshold grid is exact on the decimal steps") {
    const auto g = threshold_grid(0.55, 0.95, 0.05);
    REQUIRE(g.size() == 9);
    CHECK(g[4] == 0.75);
    CHECK(g.back() == 0.95);
}
