#pragma once

// Lagrangian tooling: marker sets with lifted coordinates, velocity sampling
// at arbitrary points, flow-map integration (alone or co-integrated with the
// Euler solver and passive scalars), Jacobian and Weber checks, winding
// numbers, mixing pairings, periods of closed orbits, and gradient growth of
// transported scalars.

#include "eulerlab/errors.hpp"
#include "eulerlab/euler2d.hpp"
#include "eulerlab/spectral.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace eulerlab {

// ---------------------------------------------------------------------------
// Markers

struct ParticleSet {
    double lx = kTwoPi, ly = kTwoPi;
    double t = 0.0;
    std::vector<double> x, y;    // wrapped into [0, lx) x [0, ly)
    std::vector<double> X, Y;    // lifts in the universal cover
    std::vector<double> x0, y0;  // lifts at t = 0
    int lattice_nx = 0, lattice_ny = 0;  // > 0 when the markers form a lattice, index i * lattice_ny + j

    std::size_t size() const { return X.size(); }
    bool is_lattice() const { return lattice_nx > 0 && lattice_ny > 0; }

    void rewrap() {
        x.resize(X.size());
        y.resize(Y.size());
        for (std::size_t p = 0; p < X.size(); ++p) {
            x[p] = X[p] - lx * std::floor(X[p] / lx);
            y[p] = Y[p] - ly * std::floor(Y[p] / ly);
        }
    }

    static ParticleSet from_points(const std::vector<std::array<double, 2>>& pts, double lx = kTwoPi, double ly = kTwoPi) {
        ParticleSet s;
        s.lx = lx;
        s.ly = ly;
        for (const auto& p : pts) {
            s.X.push_back(p[0]);
            s.Y.push_back(p[1]);
        }
        s.x0 = s.X;
        s.y0 = s.Y;
        s.rewrap();
        return s;
    }

    /// Markers at (i lx / nx, j ly / ny), so they coincide with a Grid2(nx, ny) collocation grid.
    static ParticleSet lattice(int nx, int ny, double lx = kTwoPi, double ly = kTwoPi) {
        require(nx >= 2 && ny >= 2, "marker lattice needs at least 2 x 2 points");
        ParticleSet s;
        s.lx = lx;
        s.ly = ly;
        s.lattice_nx = nx;
        s.lattice_ny = ny;
        for (int i = 0; i < nx; ++i)
            for (int j = 0; j < ny; ++j) {
                s.X.push_back(i * lx / nx);
                s.Y.push_back(j * ly / ny);
            }
        s.x0 = s.X;
        s.y0 = s.Y;
        s.rewrap();
        return s;
    }
};

struct FlowMapSnapshot {
    ParticleSet particles;
    double h = 0.0;  // initial lattice spacing in x
};

inline FlowMapSnapshot snapshot(const ParticleSet& p) {
    require(p.is_lattice(), "flow-map snapshot needs a lattice-structured marker set");
    return {p, p.lx / p.lattice_nx};
}

// ---------------------------------------------------------------------------
// Velocity sampling

/// Samples a periodic vector field at arbitrary points. Exact trigonometric
/// summation over the active modes when there are at most `direct_mode_limit`
/// of them; otherwise 4-point Lagrange (bicubic) interpolation of the grid
/// values. Coefficients below 1e-14 of the largest are not active.
class VelocitySampler {
public:
    enum class Method { direct, bicubic };

    explicit VelocitySampler(const VectorField2& u, std::size_t direct_mode_limit = 64 * 64) : grid_(u.grid()) {
        double cmax = 0.0;
        for (const auto* f : {&u.u1, &u.u2})
            for (const auto& c : f->coeffs()) cmax = std::max(cmax, std::abs(c));
        const double floor = 1e-14 * cmax;
        for (int ix = 0; ix < grid_.nx; ++ix)
            for (int iy = 0; iy < grid_.nky(); ++iy) {
                const cplx a = u.u1(ix, iy), b = u.u2(ix, iy);
                if (std::abs(a) > floor || std::abs(b) > floor || (ix == 0 && iy == 0 && cmax > 0.0)) {
                    const double w = grid_.column_weight(iy);
                    modes_.push_back({grid_.mode_x(ix), iy, w * a, w * b});
                    max_mx_ = std::max(max_mx_, std::abs(grid_.mode_x(ix)));
                    max_my_ = std::max(max_my_, iy);
                }
            }
        if (modes_.size() > direct_mode_limit) {
            method_ = Method::bicubic;
            modes_.clear();
            u1_ = u.u1.to_physical();
            u2_ = u.u2.to_physical();
        }
    }

    Method method() const { return method_; }
    const char* method_name() const { return method_ == Method::direct ? "direct" : "bicubic"; }

    std::array<double, 2> operator()(double x, double y) const {
        return method_ == Method::direct ? direct(x, y) : bicubic(x, y);
    }

    /// Samples at many points.
    void sample(const std::vector<double>& xs, const std::vector<double>& ys, std::vector<double>& u,
                std::vector<double>& v) const {
        u.resize(xs.size());
        v.resize(xs.size());
        for (std::size_t p = 0; p < xs.size(); ++p) {
            const auto w = (*this)(xs[p], ys[p]);
            u[p] = w[0];
            v[p] = w[1];
        }
    }

private:
    struct Mode {
        int mx, my;
        cplx a, b;
    };

    std::array<double, 2> direct(double x, double y) const {
        const cplx ex = std::polar(1.0, kTwoPi * x / grid_.lx);
        const cplx ey = std::polar(1.0, kTwoPi * y / grid_.ly);
        thread_local std::vector<cplx> px, py;
        px.assign(static_cast<std::size_t>(2 * max_mx_ + 1), cplx{});
        py.assign(static_cast<std::size_t>(max_my_ + 1), cplx{});
        px[max_mx_] = 1.0;
        for (int m = 1; m <= max_mx_; ++m) {
            px[max_mx_ + m] = px[max_mx_ + m - 1] * ex;
            px[max_mx_ - m] = std::conj(px[max_mx_ + m]);
        }
        py[0] = 1.0;
        for (int m = 1; m <= max_my_; ++m) py[m] = py[m - 1] * ey;
        double s1 = 0.0, s2 = 0.0;
        for (const auto& md : modes_) {
            const cplx e = px[max_mx_ + md.mx] * py[md.my];
            s1 += (md.a * e).real();
            s2 += (md.b * e).real();
        }
        return {s1, s2};
    }

    static void weights(double s, double w[4]) {
        w[0] = -s * (s - 1.0) * (s - 2.0) / 6.0;
        w[1] = (s + 1.0) * (s - 1.0) * (s - 2.0) / 2.0;
        w[2] = -(s + 1.0) * s * (s - 2.0) / 2.0;
        w[3] = (s + 1.0) * s * (s - 1.0) / 6.0;
    }

    std::array<double, 2> bicubic(double x, double y) const {
        const int nx = grid_.nx, ny = grid_.ny;
        const double fx = x / grid_.dx(), fy = y / grid_.dy();
        const double bx = std::floor(fx), by = std::floor(fy);
        double wx[4], wy[4];
        weights(fx - bx, wx);
        weights(fy - by, wy);
        const int ix0 = static_cast<int>(bx), iy0 = static_cast<int>(by);
        double s1 = 0.0, s2 = 0.0;
        for (int a = 0; a < 4; ++a) {
            const int i = ((ix0 - 1 + a) % nx + nx) % nx;
            double r1 = 0.0, r2 = 0.0;
            for (int b = 0; b < 4; ++b) {
                const int j = ((iy0 - 1 + b) % ny + ny) % ny;
                const std::size_t k = static_cast<std::size_t>(i) * ny + j;
                r1 += wy[b] * u1_[k];
                r2 += wy[b] * u2_[k];
            }
            s1 += wx[a] * r1;
            s2 += wx[a] * r2;
        }
        return {s1, s2};
    }

    Grid2 grid_;
    Method method_ = Method::direct;
    std::vector<Mode> modes_;
    int max_mx_ = 0, max_my_ = 0;
    RealVec u1_, u2_;
};

/// Constant velocity (a, b); carries a nonzero mean so it is not a Biot-Savart field.
inline VectorField2 uniform_velocity(const Grid2& g, double a, double b) {
    VectorField2 u{SpectralField2(g), SpectralField2(g)};
    u.u1(0, 0) = cplx{a, 0.0};
    u.u2(0, 0) = cplx{b, 0.0};
    return u;
}

/// RK4 on the lifts for an explicit source src(t, x, y) -> {u, v}, evaluated
/// at wrapped positions.
template <class Source>
ParticleSet advect(const ParticleSet& p, Source&& src, double dt) {
    const std::size_t n = p.size();
    ParticleSet out = p;
    auto wrapx = [&](double v) { return v - p.lx * std::floor(v / p.lx); };
    auto wrapy = [&](double v) { return v - p.ly * std::floor(v / p.ly); };
    for (std::size_t q = 0; q < n; ++q) {
        const double X = p.X[q], Y = p.Y[q], t = p.t;
        const auto k1 = src(t, wrapx(X), wrapy(Y));
        const auto k2 = src(t + 0.5 * dt, wrapx(X + 0.5 * dt * k1[0]), wrapy(Y + 0.5 * dt * k1[1]));
        const auto k3 = src(t + 0.5 * dt, wrapx(X + 0.5 * dt * k2[0]), wrapy(Y + 0.5 * dt * k2[1]));
        const auto k4 = src(t + dt, wrapx(X + dt * k3[0]), wrapy(Y + dt * k3[1]));
        out.X[q] = X + dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]);
        out.Y[q] = Y + dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]);
    }
    out.t = p.t + dt;
    out.rewrap();
    return out;
}

/// Advects with a fixed step up to t_end (last step shortened).
template <class Source>
ParticleSet advect_to(ParticleSet p, Source&& src, double t_end, double dt) {
    while (p.t < t_end - 1e-14 * std::max(1.0, t_end)) p = advect(p, src, std::min(dt, t_end - p.t));
    return p;
}

// ---------------------------------------------------------------------------
// Co-integration of vorticity, passive scalars and markers

/// State of a transport run. With `omega` present the velocity is the
/// Biot-Savart velocity of an Euler-evolved vorticity; otherwise the frozen
/// field `velocity` is used.
struct TransportState {
    double t = 0.0;
    std::optional<SpectralField2> omega;
    VectorField2 velocity;
    std::vector<SpectralField2> scalars;
    ParticleSet particles;

    VectorField2 current_velocity() const { return omega ? biot_savart(*omega) : velocity; }
};

namespace detail {

struct TransportVars {
    std::optional<SpectralField2> omega;
    std::vector<SpectralField2> scalars;
    std::vector<double> X, Y;

    TransportVars& axpy(double a, const TransportVars& o) {
        if (omega) omega->axpy(a, *o.omega);
        for (std::size_t k = 0; k < scalars.size(); ++k) scalars[k].axpy(a, o.scalars[k]);
        for (std::size_t p = 0; p < X.size(); ++p) {
            X[p] += a * o.X[p];
            Y[p] += a * o.Y[p];
        }
        return *this;
    }
};

/// -u . grad f on the grid, dealiased.
inline SpectralField2 advection_term(const RealVec& u1, const RealVec& u2, const SpectralField2& f) {
    const auto fx = dx(f).to_physical();
    const auto fy = dy(f).to_physical();
    RealVec a(fx.size());
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = -(u1[i] * fx[i] + u2[i] * fy[i]);
    auto out = SpectralField2::from_physical(f.grid(), a);
    dealias_in_place(out);
    return out;
}

inline TransportVars transport_rhs(const TransportVars& v, const VectorField2& frozen, double lx, double ly,
                                   std::size_t direct_limit) {
    const VectorField2 u = v.omega ? biot_savart(*v.omega) : frozen;
    TransportVars out;
    if (v.omega || !v.scalars.empty()) {
        const auto u1 = u.u1.to_physical();
        const auto u2 = u.u2.to_physical();
        if (v.omega) {
            out.omega = advection_term(u1, u2, *v.omega);
            (*out.omega)(0, 0) = cplx{};
        }
        for (const auto& s : v.scalars) out.scalars.push_back(advection_term(u1, u2, s));
    }
    if (!v.X.empty()) {
        const VelocitySampler sampler(u, direct_limit);
        out.X.resize(v.X.size());
        out.Y.resize(v.Y.size());
        for (std::size_t p = 0; p < v.X.size(); ++p) {
            const double xw = v.X[p] - lx * std::floor(v.X[p] / lx);
            const double yw = v.Y[p] - ly * std::floor(v.Y[p] / ly);
            const auto w = sampler(xw, yw);
            out.X[p] = w[0];
            out.Y[p] = w[1];
        }
    }
    return out;
}

}  // namespace detail

/// One RK4 step of the full transport system. All components see the same
/// stage velocities.
inline TransportState transport_step(const TransportState& s, double dt, std::size_t direct_limit = 64 * 64) {
    require(dt > 0.0, "dt must be positive");
    detail::TransportVars v{s.omega, s.scalars, s.particles.X, s.particles.Y};
    const double lx = s.particles.lx, ly = s.particles.ly;
    const auto rhs = [&](const detail::TransportVars& w) {
        return detail::transport_rhs(w, s.velocity, lx, ly, direct_limit);
    };
    auto next = rk4_field_step(v, dt, rhs);
    TransportState out = s;
    out.t = s.t + dt;
    out.omega = std::move(next.omega);
    out.scalars = std::move(next.scalars);
    out.particles.X = std::move(next.X);
    out.particles.Y = std::move(next.Y);
    out.particles.t = out.t;
    out.particles.rewrap();
    if (out.omega) check_finite(*out.omega, out.t);
    for (const auto& f : out.scalars) check_finite(f, out.t);
    return out;
}

struct TransportRunOptions {
    double t_end = 1.0;
    double cfl = 0.4;
    double dt_max = std::numeric_limits<double>::infinity();
    double record_every = 0.1;
    std::size_t direct_mode_limit = 64 * 64;
};

/// Integrates with CFL-limited steps, calling on_record(state) at t = 0, every
/// record_every, and at t_end.
template <class OnRecord>
TransportState run_transport(TransportState s, const TransportRunOptions& opt, OnRecord&& on_record) {
    require(opt.record_every > 0.0, "record_every must be positive");
    require(opt.cfl > 0.0 && opt.cfl <= 0.5, "cfl must lie in (0, 0.5]");
    if (s.omega) require(s.omega->mean_free(), "nonzero mean");
    on_record(s);
    std::size_t k = 1;
    while (s.t < opt.t_end) {
        const double stop = std::min(opt.t_end, k * opt.record_every);
        while (s.t < stop * (1.0 - 1e-14)) {
            const double dt = next_step(s.t, stop, cfl_time_step(s.current_velocity(), opt.cfl), opt.dt_max);
            s = transport_step(s, dt, opt.direct_mode_limit);
        }
        s.t = stop;
        s.particles.t = stop;
        on_record(s);
        ++k;
    }
    return s;
}

// ---------------------------------------------------------------------------
// Flow-map diagnostics

namespace detail {

/// Lift of marker (i + di, j + dj) on the lattice, adjusted across the wrap.
inline std::array<double, 2> lattice_lift(const ParticleSet& p, int i, int j) {
    const int nx = p.lattice_nx, ny = p.lattice_ny;
    const int wi = (i % nx + nx) % nx, wj = (j % ny + ny) % ny;
    const double sx = std::floor(static_cast<double>(i) / nx), sy = std::floor(static_cast<double>(j) / ny);
    const std::size_t k = static_cast<std::size_t>(wi) * ny + wj;
    return {p.X[k] + sx * p.lx, p.Y[k] + sy * p.ly};
}

/// grad Phi at lattice node (i, j) by central differences of order 2, 4, 6 or 8.
inline std::array<double, 4> lattice_gradient(const ParticleSet& p, int i, int j, int order) {
    static const std::array<std::vector<double>, 4> weights = {{
        {1.0 / 2},
        {2.0 / 3, -1.0 / 12},
        {3.0 / 4, -3.0 / 20, 1.0 / 60},
        {4.0 / 5, -1.0 / 5, 4.0 / 105, -1.0 / 280},
    }};
    require(order == 2 || order == 4 || order == 6 || order == 8, "lattice_gradient order must be 2, 4, 6 or 8");
    const auto& w = weights[order / 2 - 1];
    const double hx = p.lx / p.lattice_nx, hy = p.ly / p.lattice_ny;
    std::array<double, 4> G{};  // dX/da, dX/db, dY/da, dY/db
    for (std::size_t m = 0; m < w.size(); ++m) {
        const int s = static_cast<int>(m) + 1;
        const auto ip = lattice_lift(p, i + s, j), im = lattice_lift(p, i - s, j);
        const auto jp = lattice_lift(p, i, j + s), jm = lattice_lift(p, i, j - s);
        for (int c = 0; c < 2; ++c) {
            G[2 * c] += w[m] * (ip[c] - im[c]) / hx;
            G[2 * c + 1] += w[m] * (jp[c] - jm[c]) / hy;
        }
    }
    return G;
}

/// Largest singular value of a 2x2 matrix.
inline double spectral_norm2(const std::array<double, 4>& G) {
    const double a = G[0], b = G[1], c = G[2], d = G[3];
    const double s = a * a + b * b + c * c + d * d;
    const double det = a * d - b * c;
    return std::sqrt(0.5 * (s + std::sqrt(std::max(0.0, s * s - 4 * det * det))));
}

}  // namespace detail

struct JacobianReport {
    double max_abs_dev_from_1 = 0.0;
    double grad_norm_inf = 0.0;  // max over markers of the spectral norm of grad Phi
};

/// Second-order central differences of the lifts. Throws "lattice folding"
/// when some cell has non-positive Jacobian.
inline JacobianReport jacobian_det(const FlowMapSnapshot& fm) {
    const auto& p = fm.particles;
    require(p.is_lattice(), "jacobian_det needs a lattice-structured marker set");
    JacobianReport r;
    for (int i = 0; i < p.lattice_nx; ++i)
        for (int j = 0; j < p.lattice_ny; ++j) {
            const auto G = detail::lattice_gradient(p, i, j, 2);
            const double det = G[0] * G[3] - G[1] * G[2];
            if (!(det > 0.0))
                throw NumericalError("lattice folding at marker (" + std::to_string(i) + ", " + std::to_string(j) +
                                     "): lattice spacing too coarse for this flow map");
            r.max_abs_dev_from_1 = std::max(r.max_abs_dev_from_1, std::abs(det - 1.0));
            r.grad_norm_inf = std::max(r.grad_norm_inf, detail::spectral_norm2(G));
        }
    return r;
}

/// Spectral resampling onto another grid of the same lengths (truncation or zero padding).
inline SpectralField2 resample(const SpectralField2& f, const Grid2& g) {
    const Grid2& s = f.grid();
    require(s.lx == g.lx && s.ly == g.ly, "resample needs matching domain lengths");
    SpectralField2 out(g);
    for (int ix = 0; ix < s.nx; ++ix) {
        const int mx = s.mode_x(ix);
        if (2 * std::abs(mx) >= g.nx || 2 * std::abs(mx) >= s.nx) continue;
        const int jx = mx >= 0 ? mx : mx + g.nx;
        for (int iy = 0; iy < s.nky(); ++iy) {
            if (2 * iy >= g.ny || 2 * iy >= s.ny) continue;
            out(jx, iy) = f(ix, iy);
        }
    }
    return out;
}

inline VectorField2 resample(const VectorField2& v, const Grid2& g) { return {resample(v.u1, g), resample(v.u2, g)}; }

/// L2 norm (torus measure) of P((grad Phi_t)^T (u(t) o Phi_t)) - u0, with
/// grad Phi from central differences (eighth order by default) on the marker lattice and
/// the projection done on the marker lattice's own grid.
inline double weber_residual(const EulerState& s, const FlowMapSnapshot& fm, const VectorField2& u0, int fd_order = 8) {
    const auto& p = fm.particles;
    require(p.is_lattice(), "weber_residual needs a lattice-structured marker set");
    if (std::abs(s.t - p.t) > 1e-12 * std::max(1.0, std::abs(s.t)))
        throw PreconditionError("flow map / state time mismatch: state t = " + std::to_string(s.t) +
                                ", flow map t = " + std::to_string(p.t));
    const Grid2 mg(p.lattice_nx, p.lattice_ny, p.lx, p.ly);
    const VelocitySampler sampler(s.velocity());
    RealVec w1(mg.size()), w2(mg.size());
    for (int i = 0; i < p.lattice_nx; ++i)
        for (int j = 0; j < p.lattice_ny; ++j) {
            const std::size_t k = static_cast<std::size_t>(i) * p.lattice_ny + j;
            const auto G = detail::lattice_gradient(p, i, j, fd_order);
            const auto u = sampler(p.x[k], p.y[k]);
            w1[k] = G[0] * u[0] + G[2] * u[1];
            w2[k] = G[1] * u[0] + G[3] * u[1];
        }
    const VectorField2 w{SpectralField2::from_physical(mg, w1), SpectralField2::from_physical(mg, w2)};
    const auto diff = leray_project(w) - resample(u0, mg);
    return diff.l2_norm();
}

/// max |f(t) o Phi_t - f0| over markers, with f0 given as a callable of the initial lift.
template <class F0>
double transport_defect(const SpectralField2& f, const ParticleSet& p, F0&& f0) {
    const VelocitySampler sampler(VectorField2{f, SpectralField2(f.grid())});
    double m = 0.0;
    for (std::size_t q = 0; q < p.size(); ++q) m = std::max(m, std::abs(sampler(p.x[q], p.y[q])[0] - f0(p.x0[q], p.y0[q])));
    return m;
}

// ---------------------------------------------------------------------------
// Winding and twisting

struct WindingRecord {
    double t = 0.0;
    std::vector<double> winding;  // (X(t) - X(0)) / lx
    double spread = 0.0;          // sup - inf of the real winding numbers
    double integer_spread = 0.0;  // same for floor(winding)
};

inline WindingRecord winding(const ParticleSet& p) {
    WindingRecord r;
    r.t = p.t;
    r.winding.resize(p.size());
    if (p.size() == 0) return r;
    double lo = std::numeric_limits<double>::infinity(), hi = -lo, ilo = lo, ihi = -lo;
    for (std::size_t q = 0; q < p.size(); ++q) {
        const double n = (p.X[q] - p.x0[q]) / p.lx;
        r.winding[q] = n;
        lo = std::min(lo, n);
        hi = std::max(hi, n);
        ilo = std::min(ilo, std::floor(n));
        ihi = std::max(ihi, std::floor(n));
    }
    r.spread = hi - lo;
    r.integer_spread = ihi - ilo;
    return r;
}

/// Winding spread at each of the given times, advecting with an explicit source.
template <class Source>
std::vector<WindingRecord> twisting_series(ParticleSet p, Source&& src, const std::vector<double>& times, double dt) {
    std::vector<WindingRecord> out;
    for (double t : times) {
        p = advect_to(std::move(p), src, t, dt);
        out.push_back(winding(p));
    }
    return out;
}

struct StabilityMetrics {
    double t = 0.0;
    double m1 = 0.0;  // |u*(Phi_2(t)) - u*(y)|_L2 over markers
    double m2 = 0.0;  // |Phi~_1(t) - t u*(Phi~_2(t)) - x_1|_L2 over markers
};

/// Marker L2 norms use the weight lx ly / count per marker.
template <class Shear>
StabilityMetrics lagrangian_stability_metrics(const ParticleSet& p, Shear&& ustar) {
    StabilityMetrics m;
    m.t = p.t;
    if (p.size() == 0) return m;
    const double w = p.lx * p.ly / static_cast<double>(p.size());
    double s1 = 0.0, s2 = 0.0;
    for (std::size_t q = 0; q < p.size(); ++q) {
        const double a = ustar(p.Y[q]) - ustar(p.y0[q]);
        const double b = p.X[q] - p.t * ustar(p.Y[q]) - p.x0[q];
        s1 += a * a;
        s2 += b * b;
    }
    m.m1 = std::sqrt(s1 * w);
    m.m2 = std::sqrt(s2 * w);
    return m;
}

// ---------------------------------------------------------------------------
// Passive scalar mixing

struct PassiveScalarResult {
    std::vector<double> times;
    std::vector<std::vector<double>> pairings;  // pairings[j][i] = (u . grad f(t_i), phi_j)
    SpectralField2 final_field;
};

/// (u . grad f, phi) by grid quadrature.
inline double transport_pairing(const VectorField2& u, const SpectralField2& f, const SpectralField2& phi) {
    const Grid2& g = f.grid();
    const auto u1 = u.u1.to_physical(), u2 = u.u2.to_physical();
    const auto fx = dx(f).to_physical(), fy = dy(f).to_physical();
    const auto ph = phi.to_physical();
    double s = 0.0;
    for (std::size_t i = 0; i < ph.size(); ++i) s += (u1[i] * fx[i] + u2[i] * fy[i]) * ph[i];
    return s * g.dx() * g.dy();
}

/// Solves d_t f + u . grad f = 0 for a steady u and samples the pairings
/// against each test function every sample_every.
inline PassiveScalarResult passive_scalar_evolve(const VectorField2& u, const SpectralField2& f0, double t_end,
                                                 const std::vector<SpectralField2>& test_functions,
                                                 double sample_every = 0.1, double cfl = 0.4) {
    require(divergence(u).max_abs() <= 1e-10 * std::max(1.0, u.max_speed()), "passive transport needs a divergence-free velocity");
    PassiveScalarResult r;
    r.pairings.resize(test_functions.size());
    TransportState s;
    s.velocity = u;
    s.scalars = {f0};
    TransportRunOptions opt;
    opt.t_end = t_end;
    opt.cfl = cfl;
    opt.record_every = sample_every;
    const auto out = run_transport(s, opt, [&](const TransportState& cur) {
        r.times.push_back(cur.t);
        for (std::size_t j = 0; j < test_functions.size(); ++j)
            r.pairings[j].push_back(transport_pairing(u, cur.scalars[0], test_functions[j]));
    });
    r.final_field = out.scalars[0];
    return r;
}

/// Fitted power-law exponent of the decreasing envelope max_{s >= t} |p(s)|
/// over samples with t in [t0, t1].
inline double envelope_decay_exponent(const std::vector<double>& times, const std::vector<double>& values, double t0,
                                      double t1) {
    std::vector<double> t, e;
    double run = 0.0;
    for (std::size_t k = times.size(); k-- > 0;) {
        if (times[k] > t1) continue;
        run = std::max(run, std::abs(values[k]));
        if (times[k] >= t0) {
            t.push_back(times[k]);
            e.push_back(run);
        }
    }
    require(t.size() >= 2, "decay fit needs at least two samples in the window");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) {
        const double a = std::log(t[i]), b = std::log(e[i]);
        sx += a;
        sy += b;
        sxx += a * a;
        sxy += a * b;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

// ---------------------------------------------------------------------------
// Closed orbits

struct PeriodResult {
    bool returned = false;  // false: "non-returning"
    double period = 0.0;
};

struct PeriodOptions {
    double dt = 1e-3;
    double t_max = 200.0;
    double tol = 1e-3;  // return proximity, also the "left the seed" radius
};

/// First return time to the seed (modulo the period lattice) along the orbit
/// of a steady source src(x, y) -> {u, v}. The closest approach is refined by
/// Newton on (p(t) - seed) . u(p(t)) = 0.
template <class Source>
PeriodResult period_of_orbit(Source&& src, std::array<double, 2> seed, double lx, double ly, const PeriodOptions& opt = {}) {
    auto timed = [&](double, double x, double y) { return src(x, y); };
    auto dist = [&](const ParticleSet& p, std::array<double, 2>* d = nullptr) {
        double ddx = p.x[0] - seed[0], ddy = p.y[0] - seed[1];
        ddx -= lx * std::round(ddx / lx);
        ddy -= ly * std::round(ddy / ly);
        if (d) *d = {ddx, ddy};
        return std::hypot(ddx, ddy);
    };
    ParticleSet p = ParticleSet::from_points({seed}, lx, ly);
    const double speed0 = std::hypot(src(p.x[0], p.y[0])[0], src(p.x[0], p.y[0])[1]);
    const double capture = opt.tol + speed0 * opt.dt;
    bool left = false;
    ParticleSet prev = p, prev2 = p;
    double dprev = 0.0, dprev2 = 0.0;
    while (p.t < opt.t_max) {
        prev2 = prev;
        dprev2 = dprev;
        prev = p;
        dprev = dist(prev);
        p = advect(p, timed, opt.dt);
        const double d = dist(p);
        if (!left) {
            if (d > 2.0 * capture) left = true;
            continue;
        }
        if (dprev <= dprev2 && dprev < d && dprev < capture) {
            ParticleSet q = prev;
            for (int it = 0; it < 20; ++it) {
                std::array<double, 2> dd{};
                dist(q, &dd);
                const auto u = src(q.x[0], q.y[0]);
                const double uu = u[0] * u[0] + u[1] * u[1];
                if (uu == 0.0) break;
                const double tau = -(dd[0] * u[0] + dd[1] * u[1]) / uu;
                if (std::abs(tau) < 1e-15 * std::max(1.0, q.t)) break;
                const int nsub = std::max(1, static_cast<int>(std::ceil(std::abs(tau) / opt.dt)));
                for (int k = 0; k < nsub; ++k) q = advect(q, timed, tau / nsub);
            }
            if (dist(q) < opt.tol) return {true, q.t};
        }
    }
    return {false, 0.0};
}

/// Periods for each seed under a steady spectral velocity field.
inline std::vector<PeriodResult> period_function(const VectorField2& u, const std::vector<std::array<double, 2>>& seeds,
                                                 const PeriodOptions& opt = {}) {
    const VelocitySampler sampler(u);
    const Grid2& g = u.grid();
    std::vector<PeriodResult> out;
    for (const auto& s : seeds) out.push_back(period_of_orbit(sampler, s, g.lx, g.ly, opt));
    return out;
}

// ---------------------------------------------------------------------------
// Gradient growth of transported scalars

inline double max_gradient(const SpectralField2& f) {
    const auto a = dx(f).to_physical(), b = dy(f).to_physical();
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::hypot(a[i], b[i]));
    return m;
}

struct GradientGrowth {
    std::vector<double> times;
    std::vector<std::vector<double>> lambda;  // lambda[j][i] = |grad g_j(t_i)|_inf
};

/// Transports each g0 with the run's velocity (Euler-evolved when `state.omega`
/// is set, frozen otherwise) and records the gradient sup norms.
inline GradientGrowth gradient_growth(TransportState state, const std::vector<SpectralField2>& g0_list,
                                      const TransportRunOptions& opt) {
    GradientGrowth r;
    r.lambda.resize(g0_list.size());
    state.scalars = g0_list;
    run_transport(std::move(state), opt, [&](const TransportState& cur) {
        r.times.push_back(cur.t);
        for (std::size_t j = 0; j < cur.scalars.size(); ++j) r.lambda[j].push_back(max_gradient(cur.scalars[j]));
    });
    return r;
}

/// Least-squares growth rate sigma of log(lambda) = c + sigma t over t in [t0, t1].
inline double exponential_rate(const std::vector<double>& times, const std::vector<double>& lambda, double t0, double t1) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0, n = 0;
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (times[i] < t0 || times[i] > t1) continue;
        const double a = times[i], b = std::log(lambda[i]);
        sx += a;
        sy += b;
        sxx += a * a;
        sxy += a * b;
        n += 1;
    }
    require(n >= 2, "rate fit needs at least two samples in the window");
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace eulerlab
