#pragma once

// 2D incompressible Euler in vorticity form on the torus,
//     d_t omega + u . grad omega = 0,   u = grad-perp inv_laplacian(omega),
// discretized pseudo-spectrally with 2/3 dealiasing and classical RK4.

#include "eulerlab/errors.hpp"
#include "eulerlab/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace eulerlab {

struct EulerState {
    SpectralField2 omega;  // mean-free
    double t = 0.0;

    const Grid2& grid() const { return omega.grid(); }
    VectorField2 velocity() const { return biot_savart(omega); }
};

/// -u . grad omega, computed in physical space and truncated; the output is mean-free.
inline SpectralField2 euler_rhs(const SpectralField2& omega) {
    const Grid2& g = omega.grid();
    const auto u = biot_savart(omega);
    const auto u1 = u.u1.to_physical();
    const auto u2 = u.u2.to_physical();
    const auto wx = dx(omega).to_physical();
    const auto wy = dy(omega).to_physical();
    RealVec adv(u1.size());
    for (std::size_t i = 0; i < adv.size(); ++i) adv[i] = -(u1[i] * wx[i] + u2[i] * wy[i]);
    auto out = SpectralField2::from_physical(g, adv);
    dealias_in_place(out);
    out(0, 0) = cplx{};
    return out;
}

inline SpectralField2 euler_rhs(const EulerState& s) { return euler_rhs(s.omega); }

/// Largest dt allowed by `cfl` for velocity `u`.
inline double cfl_time_step(const VectorField2& u, double cfl) {
    const Grid2& g = u.grid();
    const double umax = u.max_speed();
    if (umax <= 0.0) return std::numeric_limits<double>::infinity();
    return cfl * std::min(g.dx(), g.dy()) / umax;
}

inline void check_finite(const SpectralField2& f, double t) {
    if (!f.all_finite()) throw NumericalError("numerical blow-up at t = " + std::to_string(t));
}

/// Classical RK4 step of a field ODE df/dt = rhs(f).
template <class Field, class Rhs>
Field rk4_field_step(const Field& f, double dt, Rhs&& rhs) {
    const Field k1 = rhs(f);
    Field y = f;
    y.axpy(0.5 * dt, k1);
    const Field k2 = rhs(y);
    y = f;
    y.axpy(0.5 * dt, k2);
    const Field k3 = rhs(y);
    y = f;
    y.axpy(dt, k3);
    const Field k4 = rhs(y);
    Field out = f;
    out.axpy(dt / 6.0, k1).axpy(dt / 3.0, k2).axpy(dt / 3.0, k3).axpy(dt / 6.0, k4);
    return out;
}

/// One RK4 step. Throws PreconditionError when dt exceeds cfl * dx / |u|_inf
/// (cfl must be <= 0.5) and NumericalError on NaN/Inf.
inline EulerState step_rk4(const EulerState& s, double dt, double cfl = 0.5) {
    require(cfl > 0.0 && cfl <= 0.5, "cfl must lie in (0, 0.5]");
    require(dt > 0.0, "dt must be positive");
    const double limit = cfl_time_step(s.velocity(), cfl);
    if (dt > limit * (1.0 + 1e-12)) throw PreconditionError("dt violates CFL condition");
    EulerState out{rk4_field_step(s.omega, dt, [](const SpectralField2& w) { return euler_rhs(w); }), s.t + dt};
    check_finite(out.omega, out.t);
    return out;
}

// ---------------------------------------------------------------------------
// Diagnostics

struct DiagnosticsRecord {
    double t = 0.0;
    double energy = 0.0;     // 1/2 int |u|^2
    double enstrophy = 0.0;  // int omega^2
    std::vector<double> casimirs;  // int omega^p for the configured powers
    double omega_max = 0.0;  // collocation max, a lower bound of the sup norm
    double bkm_integral = 0.0;
    double palinstrophy = 0.0;  // int |grad omega|^2
};

inline double kinetic_energy(const SpectralField2& omega) {
    return 0.5 * weighted_mode_sum(omega, [](double kx, double ky) {
               const double k2 = kx * kx + ky * ky;
               return k2 > 0.0 ? 1.0 / k2 : 0.0;
           });
}

/// Grid quadrature of int f^p.
inline double power_integral(const RealVec& samples, const Grid2& g, int p) {
    double s = 0.0;
    for (double v : samples) s += std::pow(v, p);
    return s * g.dx() * g.dy();
}

inline DiagnosticsRecord diagnose(const EulerState& s, const std::vector<int>& casimir_powers, double bkm_integral) {
    DiagnosticsRecord r;
    r.t = s.t;
    r.energy = kinetic_energy(s.omega);
    r.enstrophy = weighted_mode_sum(s.omega, [](double, double) { return 1.0; });
    r.palinstrophy = weighted_mode_sum(s.omega, [](double kx, double ky) { return kx * kx + ky * ky; });
    const auto w = s.omega.to_physical();
    for (int p : casimir_powers) r.casimirs.push_back(power_integral(w, s.grid(), p));
    for (double v : w) r.omega_max = std::max(r.omega_max, std::abs(v));
    r.bkm_integral = bkm_integral;
    return r;
}

struct EulerRunOptions {
    double t_end = 1.0;
    double cfl = 0.4;
    double diag_every = 0.1;  // time between diagnostics records
    std::vector<int> casimir_powers{2, 4};
    double dt_max = std::numeric_limits<double>::infinity();
};

/// Time-step generator shared by the 2D runners: the CFL step, clipped so that
/// diagnostics times and t_end are hit exactly.
inline double next_step(double t, double t_next_stop, double cfl_dt, double dt_max) {
    double dt = std::min(cfl_dt, dt_max);
    const double remaining = t_next_stop - t;
    if (dt >= remaining * (1.0 - 1e-12)) return remaining;
    // Avoid leaving a sliver step before the stop.
    const double nsteps = std::ceil(remaining / dt);
    return remaining / nsteps;
}

/// Integrates to t_end, invoking on_record(state, record) at t = 0, every
/// diag_every, and at t_end. Returns the final state.
template <class OnRecord>
EulerState run_euler(EulerState s, const EulerRunOptions& opt, OnRecord&& on_record) {
    require(opt.t_end >= 0.0, "t_end must be non-negative");
    require(opt.diag_every > 0.0, "diag_every must be positive");
    require(s.omega.mean_free(), "nonzero mean");
    double bkm = 0.0;
    double wmax_prev = s.omega.max_abs();
    on_record(s, diagnose(s, opt.casimir_powers, bkm));
    std::size_t k = 1;
    while (s.t < opt.t_end) {
        const double stop = std::min(opt.t_end, k * opt.diag_every);
        while (s.t < stop * (1.0 - 1e-14)) {
            const double dt = next_step(s.t, stop, cfl_time_step(s.velocity(), opt.cfl), opt.dt_max);
            s = step_rk4(s, dt, 0.5);
            const double wmax = s.omega.max_abs();
            bkm += 0.5 * dt * (wmax + wmax_prev);
            wmax_prev = wmax;
        }
        s.t = stop;
        on_record(s, diagnose(s, opt.casimir_powers, bkm));
        ++k;
    }
    return s;
}

}  // namespace eulerlab
