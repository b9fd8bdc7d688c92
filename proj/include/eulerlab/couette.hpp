#pragma once

// Linearized Euler around the Couette flow (y, 0) on T x R, evolved exactly on
// the Fourier side. Vorticity is freely transported,
//     omega_hat(k, eta, t) = omega_hat_0(k, eta + k t),
// so a mode launched at (k, eta0) sits at eta(t) = eta0 - k t, and the velocity is
//     u_hat = (i eta, -i k) omega_hat / (k^2 + eta^2).

#include "eulerlab/errors.hpp"

#include <cmath>
#include <complex>
#include <vector>

namespace eulerlab {

struct CouetteMode {
    double kx = 1.0;
    double eta0 = 0.0;
    double amplitude = 1.0;
};

struct CouetteNorms {
    double t = 0.0;
    double u1_l2 = 0.0;
    double u2_l2 = 0.0;
    double omega_h1 = 0.0;
    // kx = 0 content is not damped; it is reported on its own.
    double shear_u1_l2 = 0.0;
    double shear_omega_h1 = 0.0;
};

inline CouetteNorms couette_linear_evolve(const std::vector<CouetteMode>& modes, double t) {
    CouetteNorms out;
    out.t = t;
    double s1 = 0, s2 = 0, sh = 0, z1 = 0, zh = 0;
    for (const auto& m : modes) {
        const double a2 = m.amplitude * m.amplitude;
        const double k = m.kx;
        const double eta = m.eta0 - k * t;
        const double q = k * k + eta * eta;
        const double h1 = (1.0 + q) * a2;
        if (k == 0.0) {
            // The shear mode has q = eta0^2, constant in time.
            if (q > 0.0) z1 += eta * eta * a2 / (q * q);
            zh += h1;
            continue;
        }
        s1 += eta * eta * a2 / (q * q);
        s2 += k * k * a2 / (q * q);
        sh += h1;
    }
    out.u1_l2 = std::sqrt(s1);
    out.u2_l2 = std::sqrt(s2);
    out.omega_h1 = std::sqrt(sh);
    out.shear_u1_l2 = std::sqrt(z1);
    out.shear_omega_h1 = std::sqrt(zh);
    return out;
}

inline std::vector<CouetteNorms> couette_series(const std::vector<CouetteMode>& modes, const std::vector<double>& times) {
    std::vector<CouetteNorms> out;
    out.reserve(times.size());
    for (double t : times) out.push_back(couette_linear_evolve(modes, t));
    return out;
}

/// n log-spaced times in [t0, t1].
inline std::vector<double> log_spaced(double t0, double t1, int n) {
    require(t0 > 0.0 && t1 > t0 && n >= 2, "log_spaced needs 0 < t0 < t1 and n >= 2");
    std::vector<double> t(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) t[i] = t0 * std::pow(t1 / t0, static_cast<double>(i) / (n - 1));
    return t;
}

/// Least-squares slope of log y against log t.
inline double loglog_fit_slope(const std::vector<double>& t, const std::vector<double>& y) {
    require(t.size() == y.size() && t.size() >= 2, "fit needs matching series of length >= 2");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) {
        const double lx = std::log(t[i]), ly = std::log(y[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace eulerlab
