#pragma once

// Steady heat conduction on a unit square meshed with nx x ny bilinear
// elements. Nodes are numbered row by row, node (i, j) -> j (nx + 1) + i, with
// (0, 0) the lower-left corner. Uniform volumetric heat generation; the
// temperature is held at zero on a segment of the left edge.

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include "lenscale/core.hpp"

namespace lenscale::thermal {

struct HeatProblem {
    std::size_t nx = 100, ny = 100;
    double k0 = 1.0;     ///< solid conductivity
    double k_min = 1e-3;  ///< void conductivity
    double penal = 3.0;  ///< SIMP exponent
    double heat = 1.0;   ///< volumetric heat generation per unit area
    double sink_centre = 0.5;  ///< y of the sink centre on the left edge, in [0, 1]
    double sink_extent = 0.1;  ///< sink length as a fraction of the edge

    void validate() const {
        using lenscale::detail::require;
        require(nx >= 1 && ny >= 1, "heat problem needs nx, ny >= 1");
        require(k0 > 0.0 && std::isfinite(k0), "k0 must be positive");
        require(k_min > 0.0 && k_min < k0, "k_min must lie in (0, k0)");
        require(penal >= 1.0, "SIMP penalization must be >= 1");
        require(std::isfinite(heat) && heat >= 0.0, "heat load must be finite and >= 0");
        require(sink_extent >= 0.0 && sink_extent <= 1.0, "sink extent must lie in [0, 1]");
        require(sink_centre >= 0.0 && sink_centre <= 1.0, "sink centre must lie in [0, 1]");
    }

    std::size_t elements() const noexcept { return nx * ny; }
    std::size_t nodes() const noexcept { return (nx + 1) * (ny + 1); }
    double element_size() const noexcept { return 1.0 / static_cast<double>(std::max(nx, ny)); }
};

/// SIMP conductivity of one element.
inline double simp(double rho, const HeatProblem& p) {
    return p.k_min + (p.k0 - p.k_min) * std::pow(rho, p.penal);
}

inline double simp_derivative(double rho, const HeatProblem& p) {
    return (p.k0 - p.k_min) * p.penal * std::pow(rho, p.penal - 1.0);
}

/// Unit-conductivity stiffness of a square bilinear element, nodes ordered
/// counter-clockwise from the lower-left corner. Independent of element size.
inline constexpr std::array<std::array<double, 4>, 4> kElementMatrix{{
    {4.0 / 6, -1.0 / 6, -2.0 / 6, -1.0 / 6},
    {-1.0 / 6, 4.0 / 6, -1.0 / 6, -2.0 / 6},
    {-2.0 / 6, -1.0 / 6, 4.0 / 6, -1.0 / 6},
    {-1.0 / 6, -2.0 / 6, -1.0 / 6, 4.0 / 6},
}};

struct ThermalSolution {
    std::vector<double> temperature;  ///< per node; zero on the sink
    double compliance = 0.0;          ///< f^T T
};

class ThermalModel {
public:
    explicit ThermalModel(HeatProblem problem) : p_(std::move(problem)) {
        p_.validate();
        const std::size_t nn = p_.nodes();
        fixed_.assign(nn, 0);
        const double h = 1.0 / static_cast<double>(p_.ny);
        const double lo = p_.sink_centre - 0.5 * p_.sink_extent, hi = p_.sink_centre + 0.5 * p_.sink_extent;
        for (std::size_t j = 0; j <= p_.ny; ++j) {
            const double y = static_cast<double>(j) * h;
            if (y >= lo - 1e-12 && y <= hi + 1e-12) fixed_[j * (p_.nx + 1)] = 1;
        }
        free_of_.assign(nn, -1);
        for (std::size_t n = 0; n < nn; ++n)
            if (!fixed_[n]) free_of_[n] = static_cast<long>(nfree_++);
        if (nfree_ == nn) {
            std::ostringstream os;
            os << "heat problem has no fixed temperature: all " << nn << " nodal DOFs are unconstrained";
            throw SingularSystem(os.str());
        }

        // Load: each element spreads heat * area equally over its four nodes.
        const double he = p_.element_size();
        load_.assign(nn, 0.0);
        for (std::size_t e = 0; e < p_.elements(); ++e)
            for (std::size_t n : element_nodes(e)) load_[n] += 0.25 * p_.heat * he * he;

        // Fixed sparsity (lower triangle of the free-free block) and, for each
        // element entry, the slot it accumulates into.
        std::vector<Eigen::Triplet<double>> trip;
        trip.reserve(p_.elements() * 10);
        for (std::size_t e = 0; e < p_.elements(); ++e) {
            const auto en = element_nodes(e);
            for (int a = 0; a < 4; ++a)
                for (int b = 0; b < 4; ++b) {
                    const long r = free_of_[en[a]], c = free_of_[en[b]];
                    if (r >= 0 && c >= 0 && r >= c) trip.emplace_back(r, c, 1.0);
                }
        }
        K_.resize(static_cast<long>(nfree_), static_cast<long>(nfree_));
        K_.setFromTriplets(trip.begin(), trip.end());
        K_.makeCompressed();
        slot_.assign(p_.elements() * 16, -1);
        for (std::size_t e = 0; e < p_.elements(); ++e) {
            const auto en = element_nodes(e);
            for (int a = 0; a < 4; ++a)
                for (int b = 0; b < 4; ++b) {
                    const long r = free_of_[en[a]], c = free_of_[en[b]];
                    if (r >= 0 && c >= 0 && r >= c)
                        slot_[e * 16 + a * 4 + b] = &K_.coeffRef(r, c) - K_.valuePtr();
                }
        }
        solver_.analyzePattern(K_);
    }

    const HeatProblem& problem() const noexcept { return p_; }
    std::size_t free_dofs() const noexcept { return nfree_; }
    const std::vector<double>& load() const noexcept { return load_; }
    bool is_fixed(std::size_t node) const { return fixed_[node] != 0; }

    /// Nodes of element e = j nx + i, counter-clockwise from lower-left.
    std::array<std::size_t, 4> element_nodes(std::size_t e) const {
        const std::size_t i = e % p_.nx, j = e / p_.nx, w = p_.nx + 1;
        return {j * w + i, j * w + i + 1, (j + 1) * w + i + 1, (j + 1) * w + i};
    }

    /// Solves K(k) T = f for per-element conductivities k.
    ThermalSolution solve(std::span<const double> conductivity) {
        lenscale::detail::require(conductivity.size() == p_.elements(), "conductivity field size mismatch");
        double* val = K_.valuePtr();
        std::fill(val, val + K_.nonZeros(), 0.0);
        for (std::size_t e = 0; e < p_.elements(); ++e) {
            const double k = conductivity[e];
            lenscale::detail::require(k > 0.0 && std::isfinite(k), "conductivities must be positive and finite");
            for (int a = 0; a < 4; ++a)
                for (int b = 0; b < 4; ++b) {
                    const long s = slot_[e * 16 + a * 4 + b];
                    if (s >= 0) val[s] += k * kElementMatrix[a][b];
                }
        }
        solver_.factorize(K_);
        if (solver_.info() != Eigen::Success) {
            std::ostringstream os;
            os << "conductivity matrix is not positive definite (" << nfree_ << " free DOFs)";
            throw SingularSystem(os.str());
        }
        Eigen::VectorXd f(static_cast<long>(nfree_));
        for (std::size_t n = 0; n < load_.size(); ++n)
            if (free_of_[n] >= 0) f[free_of_[n]] = load_[n];
        const Eigen::VectorXd t = solver_.solve(f);
        ThermalSolution out;
        out.temperature.assign(load_.size(), 0.0);
        for (std::size_t n = 0; n < load_.size(); ++n)
            if (free_of_[n] >= 0) out.temperature[n] = t[free_of_[n]];
        out.compliance = f.dot(t);
        return out;
    }

    /// T_e^T K0 T_e per element (unit conductivity). The compliance gradient
    /// with respect to element conductivity is minus this.
    std::vector<double> element_energy(const std::vector<double>& T) const {
        std::vector<double> out(p_.elements());
        for (std::size_t e = 0; e < out.size(); ++e) {
            const auto en = element_nodes(e);
            double s = 0.0;
            for (int a = 0; a < 4; ++a) {
                double row = 0.0;
                for (int b = 0; b < 4; ++b) row += kElementMatrix[a][b] * T[en[b]];
                s += T[en[a]] * row;
            }
            out[e] = s;
        }
        return out;
    }

private:
    HeatProblem p_;
    std::vector<std::uint8_t> fixed_;
    std::vector<long> free_of_;
    std::size_t nfree_ = 0;
    std::vector<double> load_;
    Eigen::SparseMatrix<double> K_;
    std::vector<long> slot_;
    Eigen::SimplicialLLT<Eigen::SparseMatrix<double>, Eigen::Lower> solver_;
};

}  // namespace lenscale::thermal
