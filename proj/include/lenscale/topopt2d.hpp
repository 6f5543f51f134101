#pragma once

// Robust (eroded / intermediate / dilated) topology optimization of the heat
// sink. Design variables rho are filtered once and projected at the three
// thresholds; conductivity follows SIMP on the projected fields.
//
// Modes:
//  Intermediate: min c(ero) s.t. V(int) <= V*_int. Never touches the dilated field.
//  Dilated:      min c(ero) s.t. V(dil) <= V*_dil, with V*_dil rescaled from V*_int.
//  MinMaxFull:   min max(c(ero), c(int), c(dil)) s.t. V(dil) <= V*_dil, as a bound
//                formulation (MMA's z bounds the three scaled compliances).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "lenscale/analytic.hpp"
#include "lenscale/core.hpp"
#include "lenscale/fields.hpp"
#include "lenscale/mma.hpp"
#include "lenscale/raster_io.hpp"
#include "lenscale/thermal.hpp"

namespace lenscale::topopt2d {

using thermal::HeatProblem;

enum class ConstraintMode { Intermediate, Dilated, MinMaxFull };

inline std::string_view to_string(ConstraintMode m) noexcept {
    switch (m) {
        case ConstraintMode::Intermediate: return "intermediate";
        case ConstraintMode::Dilated: return "dilated";
        case ConstraintMode::MinMaxFull: return "minmax";
    }
    return "?";
}

/// Stepped continuation: start, +increment every `every` iterates up to
/// `max`, then `final_iterations` iterates at `final_beta`.
struct BetaSchedule {
    double start = 1.0;
    double increment = 1.0;
    double max = 16.0;
    std::size_t every = 20;
    double final_beta = 32.0;
    std::size_t final_iterations = 20;

    void validate() const {
        using lenscale::detail::require;
        require(start > 0.0 && increment >= 0.0 && max >= start, "beta schedule must be positive and nondecreasing");
        require(final_beta >= max, "final beta must not be below the ramp maximum");
        require(every >= 1, "beta schedule stage length must be >= 1");
    }

    std::size_t ramp_stages() const {
        if (increment <= 0.0) return 1;
        return static_cast<std::size_t>(std::floor((max - start) / increment + 1e-9)) + 1;
    }

    std::size_t total() const { return ramp_stages() * every + final_iterations; }

    /// Beta for 0-based iterate k.
    double at(std::size_t k) const {
        const std::size_t stage = k / every;
        if (stage < ramp_stages()) return std::min(max, start + increment * static_cast<double>(stage));
        return final_beta;
    }
};

struct RobustConfig {
    analytic::ThresholdTriple thresholds{0.70, 0.5, 0.30};
    double r_fil = 2.24;
    double volume_fraction = 0.2;  ///< V*_int
    ConstraintMode mode = ConstraintMode::Dilated;
    BetaSchedule schedule;
    std::size_t max_iterations = 0;  ///< 0: the schedule length
    double move = 0.2;
    std::size_t bound_update_every = 20;
    double change_tol = 0.01;
    bool record_all_compliances = true;  ///< extra solves for the history only

    void validate() const {
        using lenscale::detail::require;
        thresholds.validate();
        require(r_fil > 0.0 && std::isfinite(r_fil), "r_fil must be positive");
        require(volume_fraction > 0.0 && volume_fraction < 1.0, "volume fraction must lie in (0, 1)");
        require(move > 0.0 && move <= 1.0, "move limit must lie in (0, 1]");
        require(bound_update_every >= 1, "bound update cadence must be >= 1");
        schedule.validate();
    }

    std::size_t iterations() const { return max_iterations ? max_iterations : schedule.total(); }
};

struct HistoryRow {
    std::size_t iter = 0;
    double beta = 0.0;
    double c_ero = 0.0, c_int = 0.0, c_dil = 0.0;  ///< NaN when not evaluated
    double v_ero = 0.0, v_int = 0.0, v_dil = 0.0;
    double v_dil_bound = 0.0;
    double change = 0.0;  ///< max change of the intermediate design since the previous iterate; NaN at 0
    std::uint64_t design_hash = 0;  ///< FNV-1a of the design variables entering this iterate
};

struct DesignState2D {
    Field2D rho, rho_tilde, ero, int_, dil;
    double beta = 1.0;
    std::size_t iterations = 0;
    std::vector<HistoryRow> history;
    double v_dil_bound = 0.0;
    bool converged = false;
    bool oscillating = false;
    bool feasible = false;
};

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

inline std::uint64_t fnv1a(std::span<const double> v) {
    std::uint64_t h = 14695981039346656037ull;
    const auto* p = reinterpret_cast<const unsigned char*>(v.data());
    for (std::size_t k = 0; k < v.size() * sizeof(double); ++k) {
        h ^= p[k];
        h *= 1099511628211ull;
    }
    return h;
}

/// V*_dil = V*_int * V(dil) / V(int); keeps `previous` when V(int) is zero.
inline double scale_dilated_bound(double v_int_target, double v_dil, double v_int, double previous) {
    if (!(v_int > 0.0)) return previous;
    return v_int_target * v_dil / v_int;
}

/// Starting design: a trunk from the sink with four branches at full density
/// over a uniform background, mean density equal to `volume`.
inline Field2D base_structure(std::size_t nx, std::size_t ny, double volume) {
    struct Seg {
        double x0, y0, x1, y1;
    };
    const Seg segs[] = {{0.0, 0.5, 0.8, 0.5},   {0.25, 0.5, 0.55, 0.85}, {0.25, 0.5, 0.55, 0.15},
                        {0.5, 0.5, 0.85, 0.75}, {0.5, 0.5, 0.85, 0.25}};
    const double half_width = 0.015;
    std::vector<double> v(nx * ny, 0.0);
    std::size_t ns = 0;
    for (std::size_t j = 0; j < ny; ++j)
        for (std::size_t i = 0; i < nx; ++i) {
            const double x = (i + 0.5) / static_cast<double>(nx), y = (j + 0.5) / static_cast<double>(ny);
            for (const auto& s : segs) {
                const double dx = s.x1 - s.x0, dy = s.y1 - s.y0;
                const double t = std::clamp(((x - s.x0) * dx + (y - s.y0) * dy) / (dx * dx + dy * dy), 0.0, 1.0);
                if (std::hypot(x - s.x0 - t * dx, y - s.y0 - t * dy) <= half_width) {
                    v[j * nx + i] = 1.0;
                    ++ns;
                    break;
                }
            }
        }
    const double n = static_cast<double>(nx * ny);
    const double bg = ns < nx * ny ? std::clamp((volume * n - static_cast<double>(ns)) / (n - static_cast<double>(ns)), 0.0, 1.0)
                                   : 1.0;
    for (double& x : v)
        if (x == 0.0) x = bg;
    return Field2D(nx, ny, std::move(v), 1.0 / static_cast<double>(std::max(nx, ny)));
}

/// Objective and constraint pieces for one design; gradients are with respect
/// to the design variables.
struct Evaluation {
    std::vector<double> rho_tilde, ero, int_, dil;  ///< dil empty unless requested
    double c_ero = kNaN, c_int = kNaN, c_dil = kNaN;
    double v_ero = kNaN, v_int = kNaN, v_dil = kNaN;
    std::vector<double> dc_ero, dc_int, dc_dil, dv_int, dv_dil;
};

struct Needs {
    bool c_ero = true, c_int = false, c_dil = false;
    bool grad_c_int = false, grad_c_dil = false;
    bool dil = false;  ///< whether the dilated field may be formed at all
    bool dv_int = false, dv_dil = false;
};

class RobustModel {
public:
    RobustModel(HeatProblem problem, RobustConfig config)
        : cfg_(std::move(config)), fe_(std::move(problem)), filter_(fe_.problem().nx, fe_.problem().ny, cfg_.r_fil) {
        cfg_.validate();
    }

    const RobustConfig& config() const noexcept { return cfg_; }
    const HeatProblem& problem() const noexcept { return fe_.problem(); }
    thermal::ThermalModel& fe() noexcept { return fe_; }
    const Filter2D& filter() const noexcept { return filter_; }

    Evaluation evaluate(std::span<const double> rho, double beta, const Needs& need) {
        const auto& t = cfg_.thresholds;
        Evaluation ev;
        ev.rho_tilde = filter_.apply(rho);
        const ProjectionParams pe(beta, t.eta_ero), pi(beta, t.eta_int);
        ev.ero = project(ev.rho_tilde, pe);
        ev.int_ = project(ev.rho_tilde, pi);
        ev.v_ero = mean(ev.ero);
        ev.v_int = mean(ev.int_);
        if (need.c_ero) compliance(ev.ero, ev.rho_tilde, pe, true, ev.c_ero, ev.dc_ero);
        if (need.c_int) compliance(ev.int_, ev.rho_tilde, pi, need.grad_c_int, ev.c_int, ev.dc_int);
        if (need.dv_int) ev.dv_int = volume_gradient(ev.rho_tilde, pi);
        if (need.dil) {
            const ProjectionParams pd(beta, t.eta_dil);
            ev.dil = project(ev.rho_tilde, pd);
            ev.v_dil = mean(ev.dil);
            if (need.c_dil) compliance(ev.dil, ev.rho_tilde, pd, need.grad_c_dil, ev.c_dil, ev.dc_dil);
            if (need.dv_dil) ev.dv_dil = volume_gradient(ev.rho_tilde, pd);
        }
        return ev;
    }

private:
    static double mean(const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) s += x;
        return s / static_cast<double>(v.size());
    }

    void compliance(const std::vector<double>& rho_bar, const std::vector<double>& rho_tilde,
                    const ProjectionParams& pp, bool grad, double& c, std::vector<double>& dc) {
        const auto& P = fe_.problem();
        std::vector<double> k(rho_bar.size());
        for (std::size_t e = 0; e < k.size(); ++e) k[e] = thermal::simp(rho_bar[e], P);
        const auto sol = fe_.solve(k);
        c = sol.compliance;
        if (!grad) return;
        const auto w = fe_.element_energy(sol.temperature);
        std::vector<double> g(rho_bar.size());
        for (std::size_t e = 0; e < g.size(); ++e)
            g[e] = -thermal::simp_derivative(rho_bar[e], P) * w[e] * project_smooth_derivative(rho_tilde[e], pp);
        dc = filter_.apply_transpose(g);
    }

    std::vector<double> volume_gradient(const std::vector<double>& rho_tilde, const ProjectionParams& pp) const {
        const double inv = 1.0 / static_cast<double>(rho_tilde.size());
        std::vector<double> g(rho_tilde.size());
        for (std::size_t e = 0; e < g.size(); ++e) g[e] = project_smooth_derivative(rho_tilde[e], pp) * inv;
        return filter_.apply_transpose(g);
    }

    RobustConfig cfg_;
    thermal::ThermalModel fe_;
    Filter2D filter_;
};

using IterationCallback = std::function<void(const HistoryRow&)>;

inline DesignState2D optimize(const HeatProblem& problem, const RobustConfig& config, const Field2D& initial,
                              const IterationCallback& on_iter = {}) {
    lenscale::detail::require(initial.nx() == problem.nx && initial.ny() == problem.ny,
                              "initial design does not match the mesh");
    RobustModel model(problem, config);
    const auto& cfg = model.config();
    const std::size_t n = initial.size();
    const bool pi_mode = cfg.mode == ConstraintMode::Intermediate;
    const bool minmax = cfg.mode == ConstraintMode::MinMaxFull;

    // Constraint rows: [volume] or [volume, c_ero <= z, c_int <= z, c_dil <= z].
    const std::size_t m = minmax ? 4 : 1;
    auto st = mma::Structure::standard(n, m);
    if (minmax) {
        for (std::size_t i = 1; i < 4; ++i) st.a[i] = 1.0;
    }
    mma::Settings ms;
    ms.move = cfg.move;
    mma::Optimizer opt(st, ms);

    std::vector<double> x(initial.values().begin(), initial.values().end());
    DesignState2D out;
    out.v_dil_bound = cfg.volume_fraction;
    double c_ref = 0.0;
    double prev_obj = kNaN, prev_delta = 0.0;
    std::size_t sign_flips = 0;
    std::vector<double> prev_int;
    const std::size_t iters = cfg.iterations();

    Needs need;
    need.c_ero = true;
    need.c_int = cfg.record_all_compliances || minmax;
    need.grad_c_int = minmax;
    need.dil = !pi_mode;
    need.c_dil = !pi_mode && (cfg.record_all_compliances || minmax);
    need.grad_c_dil = minmax;
    need.dv_int = pi_mode;
    need.dv_dil = !pi_mode;

    for (std::size_t k = 0; k < iters; ++k) {
        const double beta = cfg.schedule.at(k);
        auto ev = model.evaluate(x, beta, need);
        if (k == 0) c_ref = std::max(ev.c_ero, 1e-300);
        if (!pi_mode && k % cfg.bound_update_every == 0)
            out.v_dil_bound = scale_dilated_bound(cfg.volume_fraction, ev.v_dil, ev.v_int, out.v_dil_bound);

        HistoryRow row;
        row.iter = k;
        row.beta = beta;
        row.c_ero = ev.c_ero;
        row.c_int = ev.c_int;
        row.c_dil = ev.c_dil;
        row.v_ero = ev.v_ero;
        row.v_int = ev.v_int;
        row.v_dil = ev.v_dil;
        row.v_dil_bound = pi_mode ? kNaN : out.v_dil_bound;
        row.design_hash = fnv1a(x);

        std::vector<double> df0(n, 0.0), fval(m), dfdx(m * n);
        const double vol_bound = pi_mode ? cfg.volume_fraction : out.v_dil_bound;
        const double vol = pi_mode ? ev.v_int : ev.v_dil;
        const auto& dvol = pi_mode ? ev.dv_int : ev.dv_dil;
        fval[0] = vol / vol_bound - 1.0;
        for (std::size_t j = 0; j < n; ++j) dfdx[j] = dvol[j] / vol_bound;
        double obj = ev.c_ero / c_ref;
        if (minmax) {
            const double* cs[3] = {&ev.c_ero, &ev.c_int, &ev.c_dil};
            const std::vector<double>* gs[3] = {&ev.dc_ero, &ev.dc_int, &ev.dc_dil};
            obj = 0.0;
            for (std::size_t i = 0; i < 3; ++i) {
                fval[i + 1] = *cs[i] / c_ref;
                obj = std::max(obj, fval[i + 1]);
                for (std::size_t j = 0; j < n; ++j) dfdx[(i + 1) * n + j] = (*gs[i])[j] / c_ref;
            }
        } else {
            for (std::size_t j = 0; j < n; ++j) df0[j] = ev.dc_ero[j] / c_ref;
        }

        // Variables with no influence on the projected fields keep moving at
        // the move limit, so progress is judged on the intermediate design.
        row.change = kNaN;
        if (!prev_int.empty()) {
            row.change = 0.0;
            for (std::size_t j = 0; j < n; ++j) row.change = std::max(row.change, std::abs(ev.int_[j] - prev_int[j]));
        }
        prev_int = ev.int_;
        x = opt.update(x, obj, df0, fval, dfdx);
        out.history.push_back(row);
        if (on_iter) on_iter(row);

        // Oscillation: the objective keeps reversing direction at the final beta.
        if (beta == cfg.schedule.final_beta && std::isfinite(prev_obj)) {
            const double delta = obj - prev_obj;
            sign_flips = delta * prev_delta < 0.0 ? sign_flips + 1 : 0;
            prev_delta = delta;
        }
        prev_obj = obj;
        out.beta = beta;
        out.iterations = k + 1;
    }

    // Final fields at the last beta.
    Needs fin = need;
    fin.dil = true;  // reporting only; the iterates above never formed it in P.I
    fin.c_dil = false;
    fin.c_int = false;
    fin.dv_int = fin.dv_dil = false;
    fin.grad_c_int = fin.grad_c_dil = false;
    const auto ev = model.evaluate(x, out.beta, fin);
    const std::size_t nx = problem.nx, ny = problem.ny;
    const double h = 1.0 / static_cast<double>(std::max(nx, ny));
    out.rho = Field2D(nx, ny, x, h);
    out.rho_tilde = Field2D(nx, ny, ev.rho_tilde, h);
    out.ero = Field2D(nx, ny, ev.ero, h);
    out.int_ = Field2D(nx, ny, ev.int_, h);
    out.dil = Field2D(nx, ny, ev.dil, h);
    out.oscillating = sign_flips >= 10;
    out.converged = !out.history.empty() && out.history.back().change < cfg.change_tol && !out.oscillating;
    const double vol = pi_mode ? ev.v_int : ev.v_dil;
    const double bound = pi_mode ? cfg.volume_fraction : out.v_dil_bound;
    out.feasible = vol <= bound + 1e-3;
    return out;
}

inline void write_history_csv(const std::filesystem::path& path, const std::vector<HistoryRow>& rows) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot write " + path.string());
    auto num = [](double v) { return std::isfinite(v) ? io::format_double(v) : std::string(); };
    os << "iter,beta,c_ero,c_int,c_dil,v_ero,v_int,v_dil,v_dil_bound,change,design_hash\n";
    for (const auto& r : rows)
        os << r.iter << ',' << num(r.beta) << ',' << num(r.c_ero) << ',' << num(r.c_int) << ',' << num(r.c_dil) << ','
           << num(r.v_ero) << ',' << num(r.v_int) << ',' << num(r.v_dil) << ',' << num(r.v_dil_bound) << ','
           << num(r.change) << ',' << std::hex << r.design_hash << std::dec << '\n';
    if (!os) throw IoError("failed writing " + path.string());
}

}  // namespace lenscale::topopt2d
