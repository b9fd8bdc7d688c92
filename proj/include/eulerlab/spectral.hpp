#pragma once

// Doubly periodic pseudo-spectral fields and the Fourier-side calculus shared
// by every 2D solver in the lab.
//
// Storage is the FFTW half spectrum: coefficient (ix, iy) with ix in [0, nx)
// and iy in [0, ny/2]. Coefficients are normalized so that
//     f(x, y) = sum_k fhat_k exp(i k.x),
// i.e. fhat = FFT(f) / (nx*ny). Hermitian symmetry is implicit in the layout.
// Physical samples f(x_i, y_j) live at offset i*ny + j.

#include "eulerlab/errors.hpp"
#include "eulerlab/fft.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <string>

namespace eulerlab {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Grid2 {
    int nx = 64;
    int ny = 64;
    double lx = kTwoPi;
    double ly = kTwoPi;

    Grid2() = default;
    Grid2(int nx_, int ny_, double lx_ = kTwoPi, double ly_ = kTwoPi) : nx(nx_), ny(ny_), lx(lx_), ly(ly_) {
        validate();
    }

    void validate() const {
        require(nx >= 8 && ny >= 8, "grid sizes must be >= 8");
        require(nx % 2 == 0 && ny % 2 == 0, "grid sizes must be even");
        require(lx > 0.0 && ly > 0.0, "domain lengths must be positive");
    }

    int nky() const { return ny / 2 + 1; }
    std::size_t size() const { return static_cast<std::size_t>(nx) * ny; }
    std::size_t spectral_size() const { return static_cast<std::size_t>(nx) * nky(); }
    std::size_t index(int ix, int iy) const { return static_cast<std::size_t>(ix) * nky() + iy; }

    /// Integer wavenumber of row ix, in [-nx/2, nx/2).
    int mode_x(int ix) const { return ix < nx / 2 ? ix : ix - nx; }
    int mode_y(int iy) const { return iy; }
    double kx(int ix) const { return kTwoPi / lx * mode_x(ix); }
    double ky(int iy) const { return kTwoPi / ly * iy; }
    bool nyquist(int ix, int iy) const { return ix == nx / 2 || iy == ny / 2; }
    /// Multiplicity of a half-spectrum column when summing over the full spectrum.
    double column_weight(int iy) const { return (iy == 0 || iy == ny / 2) ? 1.0 : 2.0; }

    double dx() const { return lx / nx; }
    double dy() const { return ly / ny; }
    double x(int i) const { return i * dx(); }
    double y(int j) const { return j * dy(); }
    double area() const { return lx * ly; }

    bool operator==(const Grid2& o) const { return nx == o.nx && ny == o.ny && lx == o.lx && ly == o.ly; }
};

class SpectralField2 {
public:
    SpectralField2() = default;
    explicit SpectralField2(const Grid2& g) : grid_(g), c_(g.spectral_size(), cplx{0.0, 0.0}) { g.validate(); }

    static SpectralField2 from_physical(const Grid2& g, std::span<const double> samples) {
        require(samples.size() == g.size(), "sample count does not match grid");
        SpectralField2 f(g);
        RealVec r(samples.begin(), samples.end());
        fft_r2c(g.nx, g.ny, r, f.c_);
        const double scale = 1.0 / static_cast<double>(g.size());
        for (auto& v : f.c_) v *= scale;
        return f;
    }

    /// Samples `fn(x, y)` on the collocation grid and transforms.
    template <class Fn>
    static SpectralField2 from_function(const Grid2& g, Fn&& fn) {
        RealVec r(g.size());
        for (int i = 0; i < g.nx; ++i)
            for (int j = 0; j < g.ny; ++j) r[static_cast<std::size_t>(i) * g.ny + j] = fn(g.x(i), g.y(j));
        return from_physical(g, r);
    }

    RealVec to_physical() const {
        RealVec out;
        fft_c2r(grid_.nx, grid_.ny, c_, out);
        return out;
    }

    const Grid2& grid() const { return grid_; }
    CplxVec& coeffs() { return c_; }
    const CplxVec& coeffs() const { return c_; }
    cplx& operator()(int ix, int iy) { return c_[grid_.index(ix, iy)]; }
    const cplx& operator()(int ix, int iy) const { return c_[grid_.index(ix, iy)]; }

    double mean() const { return c_.empty() ? 0.0 : c_[0].real(); }

    /// Root-mean-square over the torus, computed from the coefficients.
    double rms() const {
        double s = 0.0;
        for (int ix = 0; ix < grid_.nx; ++ix)
            for (int iy = 0; iy < grid_.nky(); ++iy) s += grid_.column_weight(iy) * std::norm((*this)(ix, iy));
        return std::sqrt(s);
    }

    /// L2 norm with the torus measure, (integral |f|^2)^(1/2).
    double l2_norm() const { return rms() * std::sqrt(grid_.area()); }

    bool mean_free(double rel_tol = 1e-12) const {
        return std::abs(c_[0]) <= rel_tol * std::max(rms(), std::numeric_limits<double>::min());
    }

    /// Max over collocation points; a lower bound of the true sup norm.
    double max_abs() const {
        const auto r = to_physical();
        double m = 0.0;
        for (double v : r) m = std::max(m, std::abs(v));
        return m;
    }

    /// Direct Fourier summation at an arbitrary point.
    double evaluate(double x, double y) const {
        double s = 0.0;
        for (int ix = 0; ix < grid_.nx; ++ix) {
            const double kx = grid_.kx(ix);
            for (int iy = 0; iy < grid_.nky(); ++iy) {
                const cplx c = (*this)(ix, iy);
                if (c == cplx{}) continue;
                const double ph = kx * x + grid_.ky(iy) * y;
                s += grid_.column_weight(iy) * (c.real() * std::cos(ph) - c.imag() * std::sin(ph));
            }
        }
        return s;
    }

    bool all_finite() const {
        return std::all_of(c_.begin(), c_.end(), [](const cplx& v) { return std::isfinite(v.real()) && std::isfinite(v.imag()); });
    }

    SpectralField2& operator+=(const SpectralField2& o) {
        check_same(o);
        for (std::size_t i = 0; i < c_.size(); ++i) c_[i] += o.c_[i];
        return *this;
    }
    SpectralField2& operator-=(const SpectralField2& o) {
        check_same(o);
        for (std::size_t i = 0; i < c_.size(); ++i) c_[i] -= o.c_[i];
        return *this;
    }
    SpectralField2& operator*=(double a) {
        for (auto& v : c_) v *= a;
        return *this;
    }
    /// this += a * o
    SpectralField2& axpy(double a, const SpectralField2& o) {
        check_same(o);
        for (std::size_t i = 0; i < c_.size(); ++i) c_[i] += a * o.c_[i];
        return *this;
    }

    friend SpectralField2 operator+(SpectralField2 a, const SpectralField2& b) { return a += b; }
    friend SpectralField2 operator-(SpectralField2 a, const SpectralField2& b) { return a -= b; }
    friend SpectralField2 operator*(double s, SpectralField2 a) { return a *= s; }

    /// Applies `symbol(kx, ky, ix, iy)` mode by mode.
    template <class Symbol>
    SpectralField2 map_modes(Symbol&& symbol) const {
        SpectralField2 out(grid_);
        for (int ix = 0; ix < grid_.nx; ++ix) {
            const double kx = grid_.kx(ix);
            for (int iy = 0; iy < grid_.nky(); ++iy) out(ix, iy) = symbol(kx, grid_.ky(iy), ix, iy) * (*this)(ix, iy);
        }
        return out;
    }

private:
    void check_same(const SpectralField2& o) const { require(grid_ == o.grid_, "fields live on different grids"); }

    Grid2 grid_;
    CplxVec c_;
};

struct VectorField2 {
    SpectralField2 u1;
    SpectralField2 u2;

    const Grid2& grid() const { return u1.grid(); }
    double l2_norm() const { return std::hypot(u1.l2_norm(), u2.l2_norm()); }
    double max_speed() const {
        const auto a = u1.to_physical();
        const auto b = u2.to_physical();
        double m = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::hypot(a[i], b[i]));
        return m;
    }
    VectorField2& operator-=(const VectorField2& o) {
        u1 -= o.u1;
        u2 -= o.u2;
        return *this;
    }
    friend VectorField2 operator-(VectorField2 a, const VectorField2& b) { return a -= b; }
};

// ---------------------------------------------------------------------------
// Spectral calculus

enum class SpectralOp { dx, dy, laplacian, inv_laplacian };

inline SpectralField2 dx(const SpectralField2& f) {
    const Grid2& g = f.grid();
    return f.map_modes([&](double kx, double, int ix, int) { return ix == g.nx / 2 ? cplx{} : cplx{0.0, kx}; });
}

inline SpectralField2 dy(const SpectralField2& f) {
    const Grid2& g = f.grid();
    return f.map_modes([&](double, double ky, int, int iy) { return iy == g.ny / 2 ? cplx{} : cplx{0.0, ky}; });
}

inline SpectralField2 laplacian(const SpectralField2& f) {
    return f.map_modes([](double kx, double ky, int, int) { return cplx{-(kx * kx + ky * ky), 0.0}; });
}

inline void require_mean_free(const SpectralField2& f) {
    if (!f.mean_free()) throw PreconditionError("nonzero mean");
}

/// Inverse Laplacian on mean-free fields; output is mean-free.
inline SpectralField2 inv_laplacian(const SpectralField2& f) {
    require_mean_free(f);
    return f.map_modes([](double kx, double ky, int ix, int iy) {
        return (ix == 0 && iy == 0) ? cplx{} : cplx{-1.0 / (kx * kx + ky * ky), 0.0};
    });
}

inline SpectralField2 spectral_calculus(const SpectralField2& f, SpectralOp op) {
    switch (op) {
        case SpectralOp::dx: return dx(f);
        case SpectralOp::dy: return dy(f);
        case SpectralOp::laplacian: return laplacian(f);
        case SpectralOp::inv_laplacian: return inv_laplacian(f);
    }
    return f;
}

/// (-d_y f, d_x f)
inline VectorField2 perp_gradient(const SpectralField2& f) {
    auto a = dy(f);
    a *= -1.0;
    return {std::move(a), dx(f)};
}

inline VectorField2 gradient(const SpectralField2& f) { return {dx(f), dy(f)}; }

inline SpectralField2 curl(const VectorField2& v) { return dx(v.u2) - dy(v.u1); }
inline SpectralField2 divergence(const VectorField2& v) { return dx(v.u1) + dy(v.u2); }

/// Velocity u = grad-perp inv_laplacian(omega).
inline VectorField2 biot_savart(const SpectralField2& omega) { return perp_gradient(inv_laplacian(omega)); }

/// Orthogonal projection onto divergence-free fields. The k = 0 (mean) mode is
/// divergence-free and is kept.
inline VectorField2 leray_project(const VectorField2& v) {
    const Grid2& g = v.grid();
    VectorField2 out{SpectralField2(g), SpectralField2(g)};
    for (int ix = 0; ix < g.nx; ++ix) {
        const double kx = g.kx(ix);
        for (int iy = 0; iy < g.nky(); ++iy) {
            const double ky = g.ky(iy);
            const cplx a = v.u1(ix, iy), b = v.u2(ix, iy);
            const double k2 = kx * kx + ky * ky;
            if (k2 == 0.0) {
                out.u1(ix, iy) = a;
                out.u2(ix, iy) = b;
                continue;
            }
            const cplx kdot = (kx * a + ky * b) / k2;
            out.u1(ix, iy) = a - kx * kdot;
            out.u2(ix, iy) = b - ky * kdot;
        }
    }
    return out;
}

/// Integer-index test for the 2/3 truncation.
inline bool above_two_thirds(const Grid2& g, int ix, int iy) {
    const int mx = std::abs(g.mode_x(ix));
    return 3 * mx > g.nx || 3 * iy > g.ny;
}

/// 2/3-rule truncation: zeroes modes with |mx| > nx/3 or |my| > ny/3.
inline SpectralField2 dealias(const SpectralField2& f) {
    const Grid2& g = f.grid();
    return f.map_modes([&](double, double, int ix, int iy) { return above_two_thirds(g, ix, iy) ? cplx{} : cplx{1.0, 0.0}; });
}

inline void dealias_in_place(SpectralField2& f) {
    const Grid2& g = f.grid();
    for (int ix = 0; ix < g.nx; ++ix)
        for (int iy = 0; iy < g.nky(); ++iy)
            if (above_two_thirds(g, ix, iy)) f(ix, iy) = cplx{};
}

/// Pointwise product of physical samples, transformed and truncated.
inline SpectralField2 product_dealiased(const Grid2& g, const RealVec& a, const RealVec& b) {
    RealVec p(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) p[i] = a[i] * b[i];
    auto f = SpectralField2::from_physical(g, p);
    dealias_in_place(f);
    return f;
}

/// Torus inner product (integral f g).
inline double inner(const SpectralField2& f, const SpectralField2& g) {
    const Grid2& gr = f.grid();
    double s = 0.0;
    for (int ix = 0; ix < gr.nx; ++ix)
        for (int iy = 0; iy < gr.nky(); ++iy) {
            const cplx a = f(ix, iy), b = g(ix, iy);
            s += gr.column_weight(iy) * (a.real() * b.real() + a.imag() * b.imag());
        }
    return s * gr.area();
}

/// Sum over full-spectrum modes of `weight(kx, ky) * |fhat|^2`, times the cell area.
template <class Weight>
double weighted_mode_sum(const SpectralField2& f, Weight&& weight) {
    const Grid2& g = f.grid();
    double s = 0.0;
    for (int ix = 0; ix < g.nx; ++ix) {
        const double kx = g.kx(ix);
        for (int iy = 0; iy < g.nky(); ++iy) s += g.column_weight(iy) * weight(kx, g.ky(iy)) * std::norm(f(ix, iy));
    }
    return s * g.area();
}

/// Fraction of L2 energy in the outer third of the retained (2/3-rule) band;
/// a cheap under-resolution indicator.
inline double spectral_tail_fraction(const SpectralField2& f) {
    const Grid2& g = f.grid();
    double total = 0.0, tail = 0.0;
    for (int ix = 0; ix < g.nx; ++ix) {
        const int mx = std::abs(g.mode_x(ix));
        for (int iy = 0; iy < g.nky(); ++iy) {
            const double e = g.column_weight(iy) * std::norm(f(ix, iy));
            total += e;
            if (9 * mx > 2 * g.nx || 9 * iy > 2 * g.ny) tail += e;
        }
    }
    return total > 0.0 ? tail / total : 0.0;
}

/// Re-imposes exact Hermitian symmetry on the iy = 0 and iy = ny/2 columns by a
/// physical-space round trip.
inline SpectralField2 symmetrize(const SpectralField2& f) {
    return SpectralField2::from_physical(f.grid(), f.to_physical());
}

}  // namespace eulerlab
