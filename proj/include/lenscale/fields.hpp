#pragma once

// Three-field scheme primitives: design field -> density filter -> Heaviside
// projection, plus cut-off binarization. Distances are measured in elements
// between element centroids; element volumes are uniform, so they cancel out
// of the filter's normalization.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "lenscale/core.hpp"

namespace lenscale {

namespace detail {

inline void check_densities(std::span<const double> values) {
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double v = values[i];
        if (!std::isfinite(v))
            throw InvalidInput("non-finite density at index " + std::to_string(i));
        if (v < 0.0 || v > 1.0)
            throw InvalidInput("density outside [0,1] at index " + std::to_string(i) + ": " +
                               std::to_string(v));
    }
}

inline double clamp01(double v) noexcept { return std::clamp(v, 0.0, 1.0); }

}  // namespace detail

class Field1D {
public:
    Field1D() = default;

    explicit Field1D(std::vector<double> values, double element_size = 1.0)
        : values_(std::move(values)), element_size_(element_size) {
        detail::require(!values_.empty(), "Field1D needs at least one element");
        detail::require(element_size_ > 0.0 && std::isfinite(element_size_),
                        "Field1D element size must be positive");
        detail::check_densities(values_);
    }

    static Field1D constant(std::size_t n, double value, double element_size = 1.0) {
        return Field1D(std::vector<double>(n, value), element_size);
    }

    std::size_t size() const noexcept { return values_.size(); }
    double element_size() const noexcept { return element_size_; }
    std::span<const double> values() const noexcept { return values_; }
    double operator[](std::size_t i) const { return values_[i]; }

private:
    std::vector<double> values_;
    double element_size_ = 1.0;
};

/// Row-major 2D density raster: value(i, j) = values[j * nx + i], with i the
/// column (x) and j the row (y).
class Field2D {
public:
    Field2D() = default;

    Field2D(std::size_t nx, std::size_t ny, std::vector<double> values, double element_size = 1.0)
        : nx_(nx), ny_(ny), values_(std::move(values)), element_size_(element_size) {
        detail::require(nx_ >= 1 && ny_ >= 1, "Field2D needs nx, ny >= 1");
        detail::require(values_.size() == nx_ * ny_, "Field2D: nx*ny does not match value count");
        detail::require(element_size_ > 0.0 && std::isfinite(element_size_),
                        "Field2D element size must be positive");
        detail::check_densities(values_);
    }

    static Field2D constant(std::size_t nx, std::size_t ny, double value, double element_size = 1.0) {
        return Field2D(nx, ny, std::vector<double>(nx * ny, value), element_size);
    }

    std::size_t nx() const noexcept { return nx_; }
    std::size_t ny() const noexcept { return ny_; }
    std::size_t size() const noexcept { return values_.size(); }
    double element_size() const noexcept { return element_size_; }
    double element_volume() const noexcept { return element_size_ * element_size_; }
    std::span<const double> values() const noexcept { return values_; }

    double at(std::size_t i, std::size_t j) const { return values_[j * nx_ + i]; }
    std::size_t index(std::size_t i, std::size_t j) const noexcept { return j * nx_ + i; }

    /// Volume fraction (mean density, uniform element volumes).
    double mean() const {
        double s = 0.0;
        for (double v : values_) s += v;
        return s / static_cast<double>(values_.size());
    }

private:
    std::size_t nx_ = 0;
    std::size_t ny_ = 0;
    std::vector<double> values_;
    double element_size_ = 1.0;
};

// ---------------------------------------------------------------------------
// Density filter

/// Largest integer centroid offset with a positive cone weight: |d| < r.
inline int filter_reach(double r_fil) {
    detail::require(r_fil > 0.0 && std::isfinite(r_fil), "filter radius must be positive and finite");
    return static_cast<int>(std::ceil(r_fil)) - 1;
}

inline double cone_weight(double distance, double r_fil) noexcept {
    return std::max(0.0, 1.0 - distance / r_fil);
}

/// Linear-cone density filter on a 1D grid. The normalization of every element
/// is precomputed; application runs in O(n) through prefix sums of the field
/// and its first moment, independent of the radius.
class Filter1D {
public:
    Filter1D(std::size_t n, double r_fil) : n_(n), r_(r_fil), reach_(filter_reach(r_fil)) {
        detail::require(n >= 1, "filter grid needs at least one element");
        denom_.resize(n_);
        for (std::size_t i = 0; i < n_; ++i) {
            const long lo = std::max<long>(0, static_cast<long>(i) - reach_);
            const long hi = std::min<long>(static_cast<long>(n_) - 1, static_cast<long>(i) + reach_);
            double s = 0.0;
            for (long j = lo; j <= hi; ++j)
                s += cone_weight(std::abs(static_cast<double>(j) - static_cast<double>(i)), r_);
            denom_[i] = s;
        }
    }

    std::size_t size() const noexcept { return n_; }
    double radius() const noexcept { return r_; }
    int reach() const noexcept { return reach_; }

    std::vector<double> apply(std::span<const double> x) const {
        detail::require(x.size() == n_, "Filter1D: field length mismatch");
        // long double keeps the first-moment prefix exact enough for n ~ 1e5.
        std::vector<long double> s0(n_ + 1, 0.0L), s1(n_ + 1, 0.0L);
        for (std::size_t j = 0; j < n_; ++j) {
            s0[j + 1] = s0[j] + x[j];
            s1[j + 1] = s1[j] + static_cast<long double>(j) * x[j];
        }
        const long double r = r_;
        std::vector<double> out(n_);
        for (std::size_t i = 0; i < n_; ++i) {
            const long ii = static_cast<long>(i);
            const std::size_t lo = static_cast<std::size_t>(std::max<long>(0, ii - reach_));
            const std::size_t hi =
                static_cast<std::size_t>(std::min<long>(static_cast<long>(n_) - 1, ii + reach_));
            const long double fi = static_cast<long double>(i);
            // left: sum_{j=lo..i} x_j (1 - (i-j)/r)
            const long double left = (1.0L - fi / r) * (s0[i + 1] - s0[lo]) + (s1[i + 1] - s1[lo]) / r;
            // right: sum_{j=i+1..hi} x_j (1 - (j-i)/r)
            const long double right =
                (1.0L + fi / r) * (s0[hi + 1] - s0[i + 1]) - (s1[hi + 1] - s1[i + 1]) / r;
            out[i] = detail::clamp01(static_cast<double>((left + right) / denom_[i]));
        }
        return out;
    }

private:
    std::size_t n_;
    double r_;
    int reach_;
    std::vector<double> denom_;
};

/// Linear-cone density filter on a 2D grid with clipped-kernel
/// renormalization at the domain boundary. Stores only the stencil and the
/// per-element normalization, so memory stays O(n + r^2).
class Filter2D {
public:
    Filter2D(std::size_t nx, std::size_t ny, double r_fil)
        : nx_(nx), ny_(ny), r_(r_fil), reach_(filter_reach(r_fil)) {
        detail::require(nx >= 1 && ny >= 1, "filter grid needs nx, ny >= 1");
        const int k = reach_;
        rows_.resize(static_cast<std::size_t>(2 * k + 1));
        for (int dj = -k; dj <= k; ++dj) {
            Row& row = rows_[static_cast<std::size_t>(dj + k)];
            row.dj = dj;
            int half = -1;
            for (int di = 0; di <= k; ++di)
                if (std::hypot(di, dj) < r_) half = di;
            row.half = half;
            for (int di = -half; di <= half; ++di)
                row.w.push_back(cone_weight(std::hypot(di, dj), r_));
        }
        std::vector<double> ones(nx_ * ny_, 1.0);
        denom_ = weighted_sum(ones);
    }

    std::size_t nx() const noexcept { return nx_; }
    std::size_t ny() const noexcept { return ny_; }
    double radius() const noexcept { return r_; }

    /// Filtered field: H x with H_ij = w_ij / sum_k w_ik.
    std::vector<double> apply(std::span<const double> x) const {
        detail::require(x.size() == nx_ * ny_, "Filter2D: field size mismatch");
        std::vector<double> out = weighted_sum(x);
        for (std::size_t e = 0; e < out.size(); ++e) out[e] /= denom_[e];
        return out;
    }

    /// Transposed operator H^T g, used for chain-ruling sensitivities.
    std::vector<double> apply_transpose(std::span<const double> g) const {
        detail::require(g.size() == nx_ * ny_, "Filter2D: gradient size mismatch");
        std::vector<double> scaled(g.size());
        for (std::size_t e = 0; e < g.size(); ++e) scaled[e] = g[e] / denom_[e];
        return weighted_sum(scaled);
    }

private:
    struct Row {
        int dj = 0;
        int half = -1;
        std::vector<double> w;  // weights for di = -half..half
    };

    std::vector<double> weighted_sum(std::span<const double> x) const {
        const long nx = static_cast<long>(nx_), ny = static_cast<long>(ny_);
        std::vector<double> out(nx_ * ny_, 0.0);
        for (long j = 0; j < ny; ++j) {
            for (const Row& row : rows_) {
                if (row.half < 0) continue;
                const long jj = j + row.dj;
                if (jj < 0 || jj >= ny) continue;
                const double* src = x.data() + jj * nx;
                double* dst = out.data() + j * nx;
                for (long i = 0; i < nx; ++i) {
                    const long lo = std::max<long>(-row.half, -i);
                    const long hi = std::min<long>(row.half, nx - 1 - i);
                    const double* w = row.w.data() + row.half;
                    double s = 0.0;
                    for (long d = lo; d <= hi; ++d) s += w[d] * src[i + d];
                    dst[i] += s;
                }
            }
        }
        return out;
    }

    std::size_t nx_, ny_;
    double r_;
    int reach_;
    std::vector<Row> rows_;
    std::vector<double> denom_;
};

inline Field1D filter_1d(const Field1D& field, double r_fil) {
    Filter1D f(field.size(), r_fil);
    return Field1D(f.apply(field.values()), field.element_size());
}

inline Field2D filter_2d(const Field2D& field, double r_fil) {
    Filter2D f(field.nx(), field.ny(), r_fil);
    auto out = f.apply(field.values());
    for (double& v : out) v = detail::clamp01(v);
    return Field2D(field.nx(), field.ny(), std::move(out), field.element_size());
}

/// Continuous cone filter of a unit slab occupying [-h/2, h/2], evaluated at x.
/// Exact piecewise-quadratic closed form of the convolution integral.
inline double filtered_slab_value(double x, double h, double r_fil) {
    detail::require(h >= 0.0 && r_fil > 0.0, "slab width must be >= 0 and filter radius > 0");
    // Cumulative distribution of the normalized cone kernel (1/r)(1 - |s|/r)+.
    const auto cdf = [r_fil](double t) {
        if (t <= -r_fil) return 0.0;
        if (t >= r_fil) return 1.0;
        const double u = (r_fil - std::abs(t)) / r_fil;
        return t <= 0.0 ? 0.5 * u * u : 1.0 - 0.5 * u * u;
    };
    return cdf(x + 0.5 * h) - cdf(x - 0.5 * h);
}

// ---------------------------------------------------------------------------
// Projection

struct ProjectionParams {
    double beta = 1.0;  ///< steepness; +inf selects the perfect step
    double eta = 0.5;   ///< threshold

    ProjectionParams() = default;
    ProjectionParams(double beta_, double eta_) : beta(beta_), eta(eta_) {
        detail::require_domain(beta > 0.0 && !std::isnan(beta), "projection steepness must be > 0");
        detail::require_domain(eta > 0.0 && eta < 1.0, "projection threshold must lie in (0,1)");
    }
};

/// Perfect Heaviside step; the threshold itself maps to solid.
inline double project_perfect(double value, double eta) noexcept { return value >= eta ? 1.0 : 0.0; }

/// Smoothed Heaviside (tanh sum form) with fixed points at 0 and 1.
inline double project_smooth(double value, const ProjectionParams& p) {
    if (std::isinf(p.beta)) return project_perfect(value, p.eta);
    const double a = std::tanh(p.beta * p.eta);
    const double b = std::tanh(p.beta * (1.0 - p.eta));
    return (a + std::tanh(p.beta * (value - p.eta))) / (a + b);
}

inline double project_smooth_derivative(double value, const ProjectionParams& p) {
    if (std::isinf(p.beta)) return 0.0;
    const double a = std::tanh(p.beta * p.eta);
    const double b = std::tanh(p.beta * (1.0 - p.eta));
    const double t = std::tanh(p.beta * (value - p.eta));
    return p.beta * (1.0 - t * t) / (a + b);
}

inline std::vector<double> project(std::span<const double> values, const ProjectionParams& p) {
    std::vector<double> out(values.size());
    for (std::size_t i = 0; i < values.size(); ++i)
        out[i] = detail::clamp01(project_smooth(values[i], p));
    return out;
}

inline Field1D project(const Field1D& f, const ProjectionParams& p) {
    return Field1D(project(f.values(), p), f.element_size());
}

inline Field2D project(const Field2D& f, const ProjectionParams& p) {
    return Field2D(f.nx(), f.ny(), project(f.values(), p), f.element_size());
}

inline std::vector<double> binarize_cutoff(std::span<const double> values, double epsilon) {
    std::vector<double> out(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) out[i] = values[i] >= epsilon ? 1.0 : 0.0;
    return out;
}

inline Field1D binarize_cutoff(const Field1D& f, double epsilon) {
    return Field1D(binarize_cutoff(f.values(), epsilon), f.element_size());
}

inline Field2D binarize_cutoff(const Field2D& f, double epsilon) {
    return Field2D(f.nx(), f.ny(), binarize_cutoff(f.values(), epsilon), f.element_size());
}

}  // namespace lenscale
