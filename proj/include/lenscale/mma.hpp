#pragma once

// Method of moving asymptotes for
//   min  f0(x) + a0 z + sum_i (c_i y_i + d_i y_i^2 / 2)
//   s.t. f_i(x) - a_i z - y_i <= 0,  xmin <= x <= xmax,  y, z >= 0.
// With a0 = 1, a_i = 0 and large c_i this is an ordinary constrained problem;
// with f0 = 0 and a_i = 1 the variable z bounds the f_i, which turns a
// min-max objective into constraints. The convex subproblem is solved by a
// primal-dual interior point method on the (m + 1) x (m + 1) dual system.

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "lenscale/core.hpp"

namespace lenscale::mma {

struct Settings {
    double move = 0.2;  ///< fraction of (xmax - xmin) a variable may move per iterate
    double asy_init = 0.5;
    double asy_incr = 1.2;
    double asy_decr = 0.7;
    double albefa = 0.1;
    double raa0 = 1e-5;
};

/// Problem data that stays fixed across iterates.
struct Structure {
    std::size_t n = 0, m = 0;
    std::vector<double> xmin, xmax;
    double a0 = 1.0;
    std::vector<double> a, c, d;

    static Structure standard(std::size_t n, std::size_t m, double lo = 0.0, double hi = 1.0) {
        Structure s;
        s.n = n;
        s.m = m;
        s.xmin.assign(n, lo);
        s.xmax.assign(n, hi);
        s.a.assign(m, 0.0);
        s.c.assign(m, 1000.0);
        s.d.assign(m, 1.0);
        return s;
    }
};

namespace detail {

struct Sub {
    std::size_t n, m;
    const std::vector<double>&low, &upp, &alfa, &beta, &p0, &q0;
    const Eigen::MatrixXd &P, &Q;  // m x n
    double a0;
    const std::vector<double>&a, &b, &c, &d;
};

struct Point {
    std::vector<double> x, xsi, eta;
    std::vector<double> y, lam, mu, s;
    double z = 1.0, zet = 1.0;
};

inline double residual(const Sub& S, const Point& v, double epsi, double* maxabs) {
    const std::size_t n = S.n, m = S.m;
    double sum = 0.0, mx = 0.0;
    auto acc = [&](double r) {
        sum += r * r;
        mx = std::max(mx, std::abs(r));
    };
    std::vector<double> gvec(m, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        const double ux = S.upp[j] - v.x[j], xl = v.x[j] - S.low[j];
        double plam = S.p0[j], qlam = S.q0[j];
        for (std::size_t i = 0; i < m; ++i) {
            plam += S.P(i, j) * v.lam[i];
            qlam += S.Q(i, j) * v.lam[i];
            gvec[i] += S.P(i, j) / ux + S.Q(i, j) / xl;
        }
        acc(plam / (ux * ux) - qlam / (xl * xl) - v.xsi[j] + v.eta[j]);
        acc(v.xsi[j] * (v.x[j] - S.alfa[j]) - epsi);
        acc(v.eta[j] * (S.beta[j] - v.x[j]) - epsi);
    }
    double alam = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        alam += S.a[i] * v.lam[i];
        acc(S.c[i] + S.d[i] * v.y[i] - v.mu[i] - v.lam[i]);
        acc(gvec[i] - S.a[i] * v.z - v.y[i] + v.s[i] - S.b[i]);
        acc(v.mu[i] * v.y[i] - epsi);
        acc(v.lam[i] * v.s[i] - epsi);
    }
    acc(S.a0 - v.zet - alam);
    acc(v.zet * v.z - epsi);
    if (maxabs) *maxabs = mx;
    return std::sqrt(sum);
}

inline Point subsolve(const Sub& S) {
    const std::size_t n = S.n, m = S.m;
    const double epsimin = 1e-7;
    Point v;
    v.x.resize(n);
    v.xsi.resize(n);
    v.eta.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
        v.x[j] = 0.5 * (S.alfa[j] + S.beta[j]);
        v.xsi[j] = std::max(1.0, 1.0 / (v.x[j] - S.alfa[j]));
        v.eta[j] = std::max(1.0, 1.0 / (S.beta[j] - v.x[j]));
    }
    v.y.assign(m, 1.0);
    v.lam.assign(m, 1.0);
    v.s.assign(m, 1.0);
    v.mu.resize(m);
    for (std::size_t i = 0; i < m; ++i) v.mu[i] = std::max(1.0, 0.5 * S.c[i]);

    std::vector<double> delx(n), diagx(n), dx(n), dxsi(n), deta(n);
    std::vector<double> dy(m), dlam(m), dmu(m), ds(m), dely(m), dellam(m), diagy(m), gvec(m);
    Eigen::MatrixXd GG(m, n);
    double epsi = 1.0;
    while (epsi > epsimin) {
        double resmax = 0.0;
        double resnorm = residual(S, v, epsi, &resmax);
        for (int it = 0; it < 200 && resmax > 0.9 * epsi; ++it) {
            std::fill(gvec.begin(), gvec.end(), 0.0);
            for (std::size_t j = 0; j < n; ++j) {
                const double ux = S.upp[j] - v.x[j], xl = v.x[j] - S.low[j];
                const double ux2 = ux * ux, xl2 = xl * xl;
                double plam = S.p0[j], qlam = S.q0[j];
                for (std::size_t i = 0; i < m; ++i) {
                    plam += S.P(i, j) * v.lam[i];
                    qlam += S.Q(i, j) * v.lam[i];
                    gvec[i] += S.P(i, j) / ux + S.Q(i, j) / xl;
                    GG(i, j) = S.P(i, j) / ux2 - S.Q(i, j) / xl2;
                }
                const double xa = v.x[j] - S.alfa[j], bx = S.beta[j] - v.x[j];
                delx[j] = plam / ux2 - qlam / xl2 - epsi / xa + epsi / bx;
                diagx[j] = 2.0 * (plam / (ux2 * ux) + qlam / (xl2 * xl)) + v.xsi[j] / xa + v.eta[j] / bx;
            }
            double alam = 0.0;
            for (std::size_t i = 0; i < m; ++i) alam += S.a[i] * v.lam[i];
            const double delz = S.a0 - alam - epsi / v.z;
            for (std::size_t i = 0; i < m; ++i) {
                dely[i] = S.c[i] + S.d[i] * v.y[i] - v.lam[i] - epsi / v.y[i];
                dellam[i] = gvec[i] - S.a[i] * v.z - v.y[i] - S.b[i] + epsi / v.lam[i];
                diagy[i] = S.d[i] + v.mu[i] / v.y[i];
            }
            // Reduced (m + 1) system in (dlam, dz).
            Eigen::MatrixXd AA = Eigen::MatrixXd::Zero(static_cast<long>(m + 1), static_cast<long>(m + 1));
            Eigen::VectorXd bb(static_cast<long>(m + 1));
            for (std::size_t i = 0; i < m; ++i) {
                double gx = 0.0;
                for (std::size_t j = 0; j < n; ++j) gx += GG(i, j) * delx[j] / diagx[j];
                bb[i] = dellam[i] + dely[i] / diagy[i] - gx;
                for (std::size_t k = 0; k <= i; ++k) {
                    double s = 0.0;
                    for (std::size_t j = 0; j < n; ++j) s += GG(i, j) * GG(k, j) / diagx[j];
                    AA(i, k) = AA(k, i) = s;
                }
                AA(i, i) += v.s[i] / v.lam[i] + 1.0 / diagy[i];
                AA(i, m) = AA(m, i) = S.a[i];
            }
            AA(m, m) = -v.zet / v.z;
            bb[m] = delz;
            const Eigen::VectorXd sol = AA.partialPivLu().solve(bb);
            for (std::size_t i = 0; i < m; ++i) dlam[i] = sol[i];
            const double dz = sol[m];
            for (std::size_t j = 0; j < n; ++j) {
                double g = 0.0;
                for (std::size_t i = 0; i < m; ++i) g += GG(i, j) * dlam[i];
                dx[j] = -(delx[j] + g) / diagx[j];
                const double xa = v.x[j] - S.alfa[j], bx = S.beta[j] - v.x[j];
                dxsi[j] = -v.xsi[j] + epsi / xa - v.xsi[j] * dx[j] / xa;
                deta[j] = -v.eta[j] + epsi / bx + v.eta[j] * dx[j] / bx;
            }
            for (std::size_t i = 0; i < m; ++i) {
                dy[i] = (-dely[i] + dlam[i]) / diagy[i];
                dmu[i] = -v.mu[i] + epsi / v.y[i] - v.mu[i] * dy[i] / v.y[i];
                ds[i] = -v.s[i] + epsi / v.lam[i] - v.s[i] * dlam[i] / v.lam[i];
            }
            const double dzet = -v.zet + epsi / v.z - v.zet * dz / v.z;

            // Largest step keeping every positive quantity positive.
            double stm = 1.0;
            auto bound = [&](double val, double dval) { stm = std::max(stm, -1.01 * dval / val); };
            for (std::size_t i = 0; i < m; ++i) {
                bound(v.y[i], dy[i]);
                bound(v.lam[i], dlam[i]);
                bound(v.mu[i], dmu[i]);
                bound(v.s[i], ds[i]);
            }
            bound(v.z, dz);
            bound(v.zet, dzet);
            for (std::size_t j = 0; j < n; ++j) {
                bound(v.xsi[j], dxsi[j]);
                bound(v.eta[j], deta[j]);
                stm = std::max(stm, -1.01 * dx[j] / (v.x[j] - S.alfa[j]));
                stm = std::max(stm, 1.01 * dx[j] / (S.beta[j] - v.x[j]));
            }
            double step = 1.0 / stm;

            const Point old = v;
            double resnew = 2.0 * resnorm;
            for (int k = 0; k < 50 && resnew > resnorm; ++k) {
                for (std::size_t j = 0; j < n; ++j) {
                    v.x[j] = old.x[j] + step * dx[j];
                    v.xsi[j] = old.xsi[j] + step * dxsi[j];
                    v.eta[j] = old.eta[j] + step * deta[j];
                }
                for (std::size_t i = 0; i < m; ++i) {
                    v.y[i] = old.y[i] + step * dy[i];
                    v.lam[i] = old.lam[i] + step * dlam[i];
                    v.mu[i] = old.mu[i] + step * dmu[i];
                    v.s[i] = old.s[i] + step * ds[i];
                }
                v.z = old.z + step * dz;
                v.zet = old.zet + step * dzet;
                resnew = residual(S, v, epsi, &resmax);
                step *= 0.5;
            }
            resnorm = resnew;
        }
        epsi *= 0.1;
    }
    return v;
}

}  // namespace detail

/// Stateful optimizer; call update() once per design iterate.
class Optimizer {
public:
    Optimizer(Structure s, Settings settings = {}) : s_(std::move(s)), set_(settings) {
        lenscale::detail::require(s_.xmin.size() == s_.n && s_.xmax.size() == s_.n, "MMA bounds size mismatch");
        lenscale::detail::require(s_.a.size() == s_.m && s_.c.size() == s_.m && s_.d.size() == s_.m,
                                  "MMA constraint data size mismatch");
        low_.resize(s_.n);
        upp_.resize(s_.n);
    }

    const Structure& structure() const noexcept { return s_; }
    /// Auxiliary variable z of the last subproblem.
    double z() const noexcept { return z_; }

    /// One MMA step. `dfdx` holds m rows of n derivatives, row-major.
    /// Returns the new design; x is not modified.
    std::vector<double> update(std::span<const double> x, double /*f0*/, std::span<const double> df0dx,
                               std::span<const double> fval, std::span<const double> dfdx) {
        const std::size_t n = s_.n, m = s_.m;
        lenscale::detail::require(x.size() == n && df0dx.size() == n, "MMA design size mismatch");
        lenscale::detail::require(fval.size() == m && dfdx.size() == m * n, "MMA constraint size mismatch");
        ++iter_;
        if (iter_ <= 2) {
            for (std::size_t j = 0; j < n; ++j) {
                const double r = s_.xmax[j] - s_.xmin[j];
                low_[j] = x[j] - set_.asy_init * r;
                upp_[j] = x[j] + set_.asy_init * r;
            }
        } else {
            for (std::size_t j = 0; j < n; ++j) {
                const double zzz = (x[j] - xold1_[j]) * (xold1_[j] - xold2_[j]);
                const double factor = zzz > 0.0 ? set_.asy_incr : zzz < 0.0 ? set_.asy_decr : 1.0;
                low_[j] = x[j] - factor * (xold1_[j] - low_[j]);
                upp_[j] = x[j] + factor * (upp_[j] - xold1_[j]);
                const double r = std::max(s_.xmax[j] - s_.xmin[j], 1e-5);
                low_[j] = std::clamp(low_[j], x[j] - 10.0 * r, x[j] - 0.01 * r);
                upp_[j] = std::clamp(upp_[j], x[j] + 0.01 * r, x[j] + 10.0 * r);
            }
        }
        std::vector<double> alfa(n), beta(n), p0(n), q0(n), b(m);
        Eigen::MatrixXd P(static_cast<long>(m), static_cast<long>(n)), Q(static_cast<long>(m), static_cast<long>(n));
        for (std::size_t i = 0; i < m; ++i) b[i] = -fval[i];
        for (std::size_t j = 0; j < n; ++j) {
            const double r = std::max(s_.xmax[j] - s_.xmin[j], 1e-5);
            alfa[j] = std::max({low_[j] + set_.albefa * (x[j] - low_[j]), x[j] - set_.move * r, s_.xmin[j]});
            beta[j] = std::min({upp_[j] - set_.albefa * (upp_[j] - x[j]), x[j] + set_.move * r, s_.xmax[j]});
            const double ux2 = (upp_[j] - x[j]) * (upp_[j] - x[j]), xl2 = (x[j] - low_[j]) * (x[j] - low_[j]);
            const double g = df0dx[j];
            const double pq = 0.001 * std::abs(g) + set_.raa0 / r;
            p0[j] = (std::max(g, 0.0) + pq) * ux2;
            q0[j] = (std::max(-g, 0.0) + pq) * xl2;
            for (std::size_t i = 0; i < m; ++i) {
                const double gi = dfdx[i * n + j];
                const double pqi = 0.001 * std::abs(gi) + set_.raa0 / r;
                P(i, j) = (std::max(gi, 0.0) + pqi) * ux2;
                Q(i, j) = (std::max(-gi, 0.0) + pqi) * xl2;
                b[i] += P(i, j) / (upp_[j] - x[j]) + Q(i, j) / (x[j] - low_[j]);
            }
        }
        const detail::Sub sub{n, m, low_, upp_, alfa, beta, p0, q0, P, Q, s_.a0, s_.a, b, s_.c, s_.d};
        const auto pt = detail::subsolve(sub);
        z_ = pt.z;
        xold2_ = xold1_;
        xold1_.assign(x.begin(), x.end());
        return pt.x;
    }

private:
    Structure s_;
    Settings set_;
    std::size_t iter_ = 0;
    std::vector<double> low_, upp_, xold1_, xold2_;
    double z_ = 0.0;
};

}  // namespace lenscale::mma
