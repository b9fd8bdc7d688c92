#pragma once

// Shared helpers for the unit suites. Random fields here are generated
// independently of the library's presets.

#include "eulerlab/spectral.hpp"
#include "eulerlab/spectral1d.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

namespace eulerlab::testing {

inline SpectralField2 random_field(const Grid2& g, unsigned seed, int kmax, bool mean_free = true) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    SpectralField2 f(g);
    for (int ix = 0; ix < g.nx; ++ix)
        for (int iy = 0; iy < g.nky(); ++iy) {
            const int mx = g.mode_x(ix);
            if (std::abs(mx) <= kmax && iy <= kmax) f(ix, iy) = cplx{u(rng), u(rng)};
        }
    if (mean_free) f(0, 0) = cplx{};
    else f(0, 0) = cplx{u(rng), 0.0};
    return symmetrize(f);
}

inline SpectralField1 random_field1(const Grid1& g, unsigned seed, int kmax) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    SpectralField1 f(g);
    f[0] = cplx{u(rng), 0.0};
    for (int k = 1; k <= kmax; ++k) f[k] = cplx{u(rng), u(rng)};
    return f;
}

inline double max_diff(const RealVec& a, const RealVec& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

inline double max_abs(const RealVec& a) {
    double m = 0.0;
    for (double v : a) m = std::max(m, std::abs(v));
    return m;
}

inline double max_diff(const SpectralField2& a, const SpectralField2& b) { return max_diff(a.to_physical(), b.to_physical()); }

/// Least-squares slope of log(y) against log(t).
inline double loglog_slope(const std::vector<double>& t, const std::vector<double>& y) {
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

}  // namespace eulerlab::testing
