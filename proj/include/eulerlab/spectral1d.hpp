#pragma once

// Periodic fields on the circle of length 2*pi, for the 1D blow-up models.
// Same normalization as SpectralField2: f(x) = sum_k fhat_k exp(ikx).

#include "eulerlab/errors.hpp"
#include "eulerlab/fft.hpp"
#include "eulerlab/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <span>

namespace eulerlab {

struct Grid1 {
    int n = 256;

    Grid1() = default;
    explicit Grid1(int n_) : n(n_) { validate(); }
    void validate() const { require(n >= 8 && n % 2 == 0, "1D grid size must be even and >= 8"); }

    int nk() const { return n / 2 + 1; }
    double dx() const { return kTwoPi / n; }
    double x(int i) const { return i * dx(); }
    double column_weight(int k) const { return (k == 0 || k == n / 2) ? 1.0 : 2.0; }
    bool operator==(const Grid1& o) const { return n == o.n; }
};

class SpectralField1 {
public:
    SpectralField1() = default;
    explicit SpectralField1(const Grid1& g) : grid_(g), c_(static_cast<std::size_t>(g.nk()), cplx{}) { g.validate(); }

    static SpectralField1 from_physical(const Grid1& g, std::span<const double> samples) {
        require(static_cast<int>(samples.size()) == g.n, "sample count does not match grid");
        SpectralField1 f(g);
        RealVec r(samples.begin(), samples.end());
        fft_r2c(0, g.n, r, f.c_);
        for (auto& v : f.c_) v /= static_cast<double>(g.n);
        return f;
    }

    template <class Fn>
    static SpectralField1 from_function(const Grid1& g, Fn&& fn) {
        RealVec r(static_cast<std::size_t>(g.n));
        for (int i = 0; i < g.n; ++i) r[i] = fn(g.x(i));
        return from_physical(g, r);
    }

    RealVec to_physical() const {
        RealVec out;
        fft_c2r(0, grid_.n, c_, out);
        return out;
    }

    const Grid1& grid() const { return grid_; }
    cplx& operator[](int k) { return c_[static_cast<std::size_t>(k)]; }
    const cplx& operator[](int k) const { return c_[static_cast<std::size_t>(k)]; }
    CplxVec& coeffs() { return c_; }
    const CplxVec& coeffs() const { return c_; }

    double mean() const { return c_[0].real(); }
    double max_abs() const {
        const auto r = to_physical();
        double m = 0.0;
        for (double v : r) m = std::max(m, std::abs(v));
        return m;
    }
    double evaluate(double x) const {
        double s = 0.0;
        for (int k = 0; k < grid_.nk(); ++k)
            s += grid_.column_weight(k) * (c_[k].real() * std::cos(k * x) - c_[k].imag() * std::sin(k * x));
        return s;
    }
    /// d/dx of the trigonometric interpolant at x.
    double evaluate_derivative(double x) const {
        double s = 0.0;
        for (int k = 1; k < grid_.nk(); ++k)
            s -= grid_.column_weight(k) * k * (c_[k].real() * std::sin(k * x) + c_[k].imag() * std::cos(k * x));
        return s;
    }
    bool all_finite() const {
        return std::all_of(c_.begin(), c_.end(), [](const cplx& v) { return std::isfinite(v.real()) && std::isfinite(v.imag()); });
    }

    SpectralField1& axpy(double a, const SpectralField1& o) {
        for (std::size_t i = 0; i < c_.size(); ++i) c_[i] += a * o.c_[i];
        return *this;
    }
    SpectralField1& operator-=(const SpectralField1& o) { return axpy(-1.0, o); }
    SpectralField1& operator+=(const SpectralField1& o) { return axpy(1.0, o); }
    SpectralField1& operator*=(double a) {
        for (auto& v : c_) v *= a;
        return *this;
    }
    friend SpectralField1 operator-(SpectralField1 a, const SpectralField1& b) { return a -= b; }
    friend SpectralField1 operator+(SpectralField1 a, const SpectralField1& b) { return a += b; }

    template <class Symbol>
    SpectralField1 map_modes(Symbol&& symbol) const {
        SpectralField1 out(grid_);
        for (int k = 0; k < grid_.nk(); ++k) out.c_[k] = symbol(k) * c_[k];
        return out;
    }

private:
    Grid1 grid_;
    CplxVec c_;
};

/// H e^{ikx} = -i sgn(k) e^{ikx}; so H cos = sin, H sin = -cos. The Nyquist
/// mode has no sign and is dropped.
inline SpectralField1 hilbert_transform(const SpectralField1& f) {
    const int nyq = f.grid().n / 2;
    return f.map_modes([nyq](int k) { return (k == 0 || k == nyq) ? cplx{} : cplx{0.0, -1.0}; });
}

inline SpectralField1 ddx(const SpectralField1& f) {
    const int nyq = f.grid().n / 2;
    return f.map_modes([nyq](int k) { return k == nyq ? cplx{} : cplx{0.0, static_cast<double>(k)}; });
}

/// Zero-mean antiderivative.
inline SpectralField1 antiderivative(const SpectralField1& f) {
    const int nyq = f.grid().n / 2;
    return f.map_modes([nyq](int k) { return (k == 0 || k == nyq) ? cplx{} : cplx{0.0, -1.0 / k}; });
}

inline void dealias_in_place(SpectralField1& f) {
    const int n = f.grid().n;
    for (int k = 0; k < f.grid().nk(); ++k)
        if (3 * k > n) f[k] = cplx{};
}

inline SpectralField1 dealias(SpectralField1 f) {
    dealias_in_place(f);
    return f;
}

inline double spectral_tail_fraction(const SpectralField1& f) {
    const Grid1& g = f.grid();
    double total = 0.0, tail = 0.0;
    for (int k = 0; k < g.nk(); ++k) {
        const double e = g.column_weight(k) * std::norm(f[k]);
        total += e;
        if (9 * k > 2 * g.n) tail += e;
    }
    return total > 0.0 ? tail / total : 0.0;
}

}  // namespace eulerlab
