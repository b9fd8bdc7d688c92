#pragma once

// Incompressible porous media on the torus,
//     u + grad p = -rho e2,  div u = 0,  d_t rho + u . grad rho = 0.
//
// The density is split as rho = G (y - ly/2) + theta with theta periodic. The
// linear part is odd about the middle of the cell and its contribution
// -G (y - ly/2) e2 is a gradient absorbed by the pressure, so u = P(-theta e2) and
//     d_t theta + u . grad theta = -G u2.
// G = 0 is the fully periodic system. A periodic profile such as -sin y is
// heavy over light in the middle of the cell and light over heavy across its
// edge; a globally stable stratification needs G < 0.

#include "eulerlab/errors.hpp"
#include "eulerlab/euler2d.hpp"
#include "eulerlab/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace eulerlab {

/// Velocity u = P(-rho e2) of a periodic density. The mean of -rho e2 is a
/// uniform force balanced by a hydrostatic pressure and is dropped.
inline VectorField2 ipm_velocity(const SpectralField2& rho) {
    const Grid2& g = rho.grid();
    VectorField2 force{SpectralField2(g), -1.0 * rho};
    auto u = leray_project(force);
    u.u1(0, 0) = cplx{};
    u.u2(0, 0) = cplx{};
    return u;
}

struct IpmState {
    SpectralField2 rho;        // periodic part theta
    double stratification = 0.0;  // G; total density G (y - ly/2) + rho
    double t = 0.0;

    const Grid2& grid() const { return rho.grid(); }
    VectorField2 velocity() const { return ipm_velocity(rho); }

    /// Total density at the collocation points.
    RealVec total_density() const {
        const Grid2& g = grid();
        RealVec r = rho.to_physical();
        for (int i = 0; i < g.nx; ++i)
            for (int j = 0; j < g.ny; ++j) r[static_cast<std::size_t>(i) * g.ny + j] += stratification * (g.y(j) - 0.5 * g.ly);
        return r;
    }
};

/// -u . grad theta - G u2, truncated by the 2/3 rule.
inline SpectralField2 ipm_rhs(const SpectralField2& rho, double stratification) {
    const Grid2& g = rho.grid();
    const auto u = ipm_velocity(rho);
    const auto u1 = u.u1.to_physical();
    const auto u2 = u.u2.to_physical();
    const auto rx = dx(rho).to_physical();
    const auto ry = dy(rho).to_physical();
    RealVec r(u1.size());
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = -(u1[i] * rx[i] + u2[i] * (ry[i] + stratification));
    auto out = SpectralField2::from_physical(g, r);
    dealias_in_place(out);
    return out;
}

inline IpmState ipm_step_rk4(const IpmState& s, double dt) {
    require(dt > 0.0, "dt must be positive");
    const double G = s.stratification;
    IpmState out{rk4_field_step(s.rho, dt, [G](const SpectralField2& r) { return ipm_rhs(r, G); }), G, s.t + dt};
    check_finite(out.rho, out.t);
    return out;
}

/// int rho y over [0, lx) x [0, ly) with the unwrapped coordinate y. Only the
/// x-averaged profile contributes, and int_0^L y e^{iky} dy = -iL/k is used
/// mode by mode, so the sawtooth weight introduces no quadrature error.
inline double potential_energy(const IpmState& s) {
    const Grid2& g = s.grid();
    const double L = g.ly;
    double e = s.stratification * g.lx * L * L * L / 12.0;
    double profile = s.rho(0, 0).real() * L * L / 2.0;
    for (int iy = 1; iy < g.nky(); ++iy) {
        const double k = g.ky(iy);
        // conjugate pairs: 2 Re(c (-iL/k)) = 2 L Im(c) / k
        profile += g.column_weight(iy) * L * s.rho(0, iy).imag() / k;
    }
    return e + g.lx * profile;
}

struct IpmRecord {
    double t = 0.0;
    double grad_max = 0.0;      // collocation max of |grad rho|
    double potential = 0.0;     // int rho y
    double mass = 0.0;          // int theta; the linear part integrates to zero
    double rho2 = 0.0;          // int theta^2
    double rho4 = 0.0;          // int theta^4
    double u_max = 0.0;
    double tail_fraction = 0.0;
    bool resolved = true;
};

inline IpmRecord ipm_diagnose(const IpmState& s, double tail_threshold) {
    const Grid2& g = s.grid();
    IpmRecord r;
    r.t = s.t;
    const auto gx = dx(s.rho).to_physical();
    const auto gy = dy(s.rho).to_physical();
    for (std::size_t i = 0; i < gx.size(); ++i) r.grad_max = std::max(r.grad_max, std::hypot(gx[i], gy[i] + s.stratification));
    r.potential = potential_energy(s);
    r.mass = s.rho.mean() * g.area();
    const auto th = s.rho.to_physical();
    r.rho2 = power_integral(th, g, 2);
    r.rho4 = power_integral(th, g, 4);
    r.u_max = s.velocity().max_speed();
    r.tail_fraction = spectral_tail_fraction(s.rho);
    r.resolved = r.tail_fraction <= tail_threshold;
    return r;
}

struct IpmRunOptions {
    double t_end = 1.0;
    double cfl = 0.4;
    double diag_every = 0.1;
    double dt_max = 0.05;  // u vanishes on rest states; keeps the step finite
    double tail_threshold = 1e-8;
};

struct IpmRunResult {
    IpmState final_state;
    std::vector<IpmRecord> records;
    bool under_resolved = false;
    double resolved_until = 0.0;  // last record time before the tail threshold was crossed
};

/// Integrates to t_end, recording at t = 0, every diag_every and at t_end.
/// on_record(state, record) sees each record as it is made.
template <class OnRecord>
IpmRunResult ipm_run(IpmState s, const IpmRunOptions& opt, OnRecord&& on_record) {
    require(opt.t_end >= 0.0, "t_end must be non-negative");
    require(opt.diag_every > 0.0, "diag_every must be positive");
    require(opt.cfl > 0.0 && opt.cfl <= 0.5, "cfl must lie in (0, 0.5]");
    require(opt.dt_max > 0.0, "dt_max must be positive");
    IpmRunResult res;
    auto record = [&](const IpmState& st) {
        res.records.push_back(ipm_diagnose(st, opt.tail_threshold));
        if (res.records.back().resolved && !res.under_resolved)
            res.resolved_until = st.t;
        else
            res.under_resolved = true;
        on_record(st, res.records.back());
    };
    record(s);
    std::size_t k = 1;
    while (s.t < opt.t_end) {
        const double stop = std::min(opt.t_end, k * opt.diag_every);
        while (s.t < stop * (1.0 - 1e-14)) {
            const double dt = next_step(s.t, stop, cfl_time_step(s.velocity(), opt.cfl), opt.dt_max);
            s = ipm_step_rk4(s, dt);
        }
        s.t = stop;
        record(s);
        ++k;
    }
    res.final_state = std::move(s);
    return res;
}

inline IpmRunResult ipm_run(const IpmState& s, const IpmRunOptions& opt) {
    return ipm_run(s, opt, [](const IpmState&, const IpmRecord&) {});
}

/// Least-squares slope of `values` against `times`.
inline double trend_slope(const std::vector<double>& times, const std::vector<double>& values) {
    require(times.size() == values.size() && times.size() >= 2, "trend fit needs at least two samples");
    const double n = static_cast<double>(times.size());
    double mt = 0.0, mv = 0.0;
    for (std::size_t i = 0; i < times.size(); ++i) {
        mt += times[i] / n;
        mv += values[i] / n;
    }
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < times.size(); ++i) {
        num += (times[i] - mt) * (values[i] - mv);
        den += (times[i] - mt) * (times[i] - mt);
    }
    require(den > 0.0, "trend fit needs distinct times");
    return num / den;
}

/// Least-squares slopes over consecutive windows of `window` samples.
inline std::vector<double> windowed_slopes(const std::vector<double>& times, const std::vector<double>& values,
                                           std::size_t window) {
    require(window >= 2 && times.size() == values.size(), "bad trend window");
    std::vector<double> out;
    for (std::size_t i = 0; i + window <= times.size(); ++i)
        out.push_back(trend_slope({times.begin() + i, times.begin() + i + window},
                                  {values.begin() + i, values.begin() + i + window}));
    return out;
}

}  // namespace eulerlab
