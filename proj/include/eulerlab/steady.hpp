#pragma once

// Steady 2D Euler flows on the torus: the Poisson-bracket residual
// {psi, lap psi}, the semilinear problem lap psi = F(psi), a first-Arnold
// stability certificate, and a probe of the kernel of lap - F'(psi).
//
// On the torus the mean-free constraint on psi plays the role of the
// constant-on-the-boundary condition: the mean of F(psi) is absorbed into F
// (reported as `mean_shift`).

#include "eulerlab/euler2d.hpp"
#include "eulerlab/errors.hpp"
#include "eulerlab/gmres.hpp"
#include "eulerlab/spectral.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <vector>

namespace eulerlab {

using ScalarFn = std::function<double(double)>;

/// L2 norm of the dealiased bracket d1 psi d2 lap psi - d2 psi d1 lap psi.
/// Coefficients below 1e-14 of the largest one are treated as round-off and
/// dropped first (Krasny filter); the third derivatives would otherwise lift
/// transform noise to O(n^3 eps).
inline double steady_residual(const SpectralField2& psi_in) {
    const Grid2& g = psi_in.grid();
    SpectralField2 psi = psi_in;
    double cmax = 0.0;
    for (const auto& v : psi.coeffs()) cmax = std::max(cmax, std::abs(v));
    for (auto& v : psi.coeffs())
        if (std::abs(v) <= 1e-14 * cmax) v = cplx{};
    const auto lap = laplacian(psi);
    const auto a = dx(psi).to_physical();
    const auto b = dy(lap).to_physical();
    const auto c = dy(psi).to_physical();
    const auto d = dx(lap).to_physical();
    RealVec j(a.size());
    for (std::size_t i = 0; i < j.size(); ++i) j[i] = a[i] * b[i] - c[i] * d[i];
    auto f = SpectralField2::from_physical(g, j);
    dealias_in_place(f);
    return f.l2_norm();
}

struct SteadyState {
    SpectralField2 psi;
    ScalarFn F;
    ScalarFn Fprime;
    double residual = std::numeric_limits<double>::infinity();  // |lap psi - F(psi) + mean F(psi)|_L2
    double mean_shift = 0.0;
    int iterations = 0;
    bool converged = false;
};

namespace detail {

inline SpectralField2 apply_pointwise(const SpectralField2& psi, const ScalarFn& fn) {
    auto r = psi.to_physical();
    for (auto& v : r) v = fn(v);
    return SpectralField2::from_physical(psi.grid(), r);
}

/// lap v - m v on the collocation grid, projected to mean zero.
inline SpectralField2 apply_linearization(const SpectralField2& v, const RealVec& m) {
    auto vr = v.to_physical();
    for (std::size_t i = 0; i < vr.size(); ++i) vr[i] *= m[i];
    auto out = laplacian(v) - SpectralField2::from_physical(v.grid(), vr);
    out(0, 0) = cplx{};
    return out;
}

inline double semilinear_residual(const SpectralField2& psi, const ScalarFn& F, SpectralField2& r, double& shift) {
    r = laplacian(psi) - apply_pointwise(psi, F);
    shift = -r(0, 0).real();  // mean of F(psi)
    r(0, 0) = cplx{};
    return r.l2_norm();
}

}  // namespace detail

struct SemilinearOptions {
    double tol = 1e-10;
    int max_iterations = 60;
    double linear_rel_tol = 1e-3;  // inexact Newton forcing term
    int krylov_restart = 40;
    int krylov_max_iterations = 800;
};

/// Inexact Newton for lap psi = F(psi) on mean-free psi. Each step solves
/// (lap - F'(psi)) d = -r with GMRES preconditioned by inv_laplacian.
inline SteadyState semilinear_solve(const ScalarFn& F, const ScalarFn& Fprime, const SpectralField2& guess,
                                    const SemilinearOptions& opt = {}) {
    SteadyState st;
    st.F = F;
    st.Fprime = Fprime;
    st.psi = guess;
    st.psi(0, 0) = cplx{};
    SpectralField2 r;
    st.residual = detail::semilinear_residual(st.psi, F, r, st.mean_shift);
    const auto precond = [](const SpectralField2& v) { return inv_laplacian(v); };
    while (st.residual >= opt.tol) {
        if (st.iterations >= opt.max_iterations)
            throw NumericalError("semilinear Newton diverged: residual " + std::to_string(st.residual) + " after " +
                                 std::to_string(st.iterations) + " iterations");
        auto m = st.psi.to_physical();
        for (auto& v : m) v = Fprime(v);
        const auto apply = [&m](const SpectralField2& v) { return detail::apply_linearization(v, m); };
        auto rhs = r;
        rhs *= -1.0;
        SpectralField2 step(st.psi.grid());
        const auto gm = gmres(apply, precond, rhs, step, opt.linear_rel_tol, opt.krylov_restart, opt.krylov_max_iterations);
        if (!gm.converged || !step.all_finite())
            throw NumericalError("degenerate linearization at Newton iteration " + std::to_string(st.iterations));
        const double scale = std::max(1.0, st.psi.l2_norm());
        if (step.l2_norm() > 1e8 * scale)
            throw NumericalError("degenerate linearization at Newton iteration " + std::to_string(st.iterations));
        st.psi += step;
        st.psi(0, 0) = cplx{};
        ++st.iterations;
        st.residual = detail::semilinear_residual(st.psi, F, r, st.mean_shift);
        if (!std::isfinite(st.residual)) throw NumericalError("semilinear Newton produced a non-finite residual");
    }
    st.converged = true;
    return st;
}

// ---------------------------------------------------------------------------
// Stability certificate

/// H2 distance at the stream-function level,
/// (int sum (1 + |k|^2)^2 |psi_hat - psi_hat_ref|^2)^(1/2).
inline double h2_distance(const SpectralField2& psi, const SpectralField2& psi_ref) {
    const auto d = psi - psi_ref;
    return std::sqrt(weighted_mode_sum(d, [](double kx, double ky) {
        const double w = 1.0 + kx * kx + ky * ky;
        return w * w;
    }));
}

struct ArnoldCertificate {
    bool certified = false;
    double min_Fprime = 0.0;
    double epsilon = 0.0;
    double perturbation_time = 0.0;
    double h2_sup = 0.0;  // sup over the run of |psi(t) - psi*|_H2
};

struct ArnoldOptions {
    double epsilon = 1e-3;
    double t_end = 20.0;
    double cfl = 0.4;
    double sample_every = 0.5;
    unsigned seed = 1;
    int range_samples = 257;
};

/// Unit-H2, mean-free, band-limited perturbation direction.
inline SpectralField2 unit_h2_perturbation(const Grid2& g, unsigned seed, int kmax = 4) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    SpectralField2 eta(g);
    for (int ix = 0; ix < g.nx; ++ix)
        for (int iy = 0; iy < g.nky(); ++iy)
            if (std::abs(g.mode_x(ix)) <= kmax && iy <= kmax) eta(ix, iy) = cplx{u(rng), u(rng)};
    eta(0, 0) = cplx{};
    eta = symmetrize(eta);
    eta *= 1.0 / h2_distance(eta, SpectralField2(g));
    return eta;
}

/// Certified iff inf F' > 0 over the attained range of psi*. Also evolves
/// psi* + eps eta with the Euler solver and records the H2 excursion.
inline ArnoldCertificate arnold_certificate(const SteadyState& st, const ArnoldOptions& opt = {}) {
    require(st.converged, "arnold_certificate needs a converged steady state");
    ArnoldCertificate c;
    const auto r = st.psi.to_physical();
    const auto [lo, hi] = std::minmax_element(r.begin(), r.end());
    c.min_Fprime = std::numeric_limits<double>::infinity();
    for (int i = 0; i < opt.range_samples; ++i) {
        const double s = *lo + (*hi - *lo) * i / std::max(1, opt.range_samples - 1);
        c.min_Fprime = std::min(c.min_Fprime, st.Fprime(s));
    }
    for (double v : r) c.min_Fprime = std::min(c.min_Fprime, st.Fprime(v));
    c.certified = c.min_Fprime > 0.0;

    c.epsilon = opt.epsilon;
    c.perturbation_time = opt.t_end;
    auto psi0 = st.psi;
    psi0.axpy(opt.epsilon, unit_h2_perturbation(st.psi.grid(), opt.seed));
    EulerState s{laplacian(psi0), 0.0};
    EulerRunOptions ro;
    ro.t_end = opt.t_end;
    ro.cfl = opt.cfl;
    ro.diag_every = opt.sample_every;
    ro.casimir_powers = {};
    run_euler(s, ro, [&](const EulerState& cur, const DiagnosticsRecord&) {
        c.h2_sup = std::max(c.h2_sup, h2_distance(inv_laplacian(cur.omega), st.psi));
    });
    return c;
}

// ---------------------------------------------------------------------------
// Kernel probe

struct KernelProbe {
    std::vector<double> smallest_singular_values;  // ascending, symmetry-reduced
    std::vector<double> raw_smallest_singular_values;  // mean-free only
    double sigma_max = 0.0;
    int symmetry_directions_removed = 0;
    bool kernel_flag = false;
};

namespace detail {

/// Collocation second-derivative matrix on a periodic grid of n points, length len.
inline Eigen::MatrixXd second_derivative_matrix(int n, double len) {
    Eigen::MatrixXd D(n, n);
    const double s = kTwoPi / len;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const double d = kTwoPi * (i - j) / n;
            double v = 0.0;
            for (int k = 1; k < n / 2; ++k) v -= 2.0 * k * k * std::cos(k * d);
            v -= 0.25 * n * n * std::cos(0.5 * n * d);
            D(i, j) = v * s * s / n;
        }
    return D;
}

}  // namespace detail

/// Smallest singular values of lap - F'(psi*) on mean-free grid functions. The
/// translation directions d_x psi*, d_y psi* are always in the kernel on the
/// torus; they are projected out before flagging. Dense, so intended for grids
/// up to about 40 x 40.
inline KernelProbe kernel_probe(const SteadyState& st, int m = 6, double rel_tol = 1e-10) {
    require(st.converged, "kernel_probe needs a converged steady state");
    const Grid2& g = st.psi.grid();
    const int nx = g.nx, ny = g.ny;
    const int N = nx * ny;
    require(N <= 4096, "kernel_probe is dense; use a grid of at most 64 x 64");
    const Eigen::MatrixXd Dxx = detail::second_derivative_matrix(nx, g.lx);
    const Eigen::MatrixXd Dyy = detail::second_derivative_matrix(ny, g.ly);
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(N, N);
    const auto psi = st.psi.to_physical();
    for (int i = 0; i < nx; ++i)
        for (int j = 0; j < ny; ++j) {
            const int row = i * ny + j;
            for (int jj = 0; jj < ny; ++jj) A(row, i * ny + jj) += Dyy(j, jj);
            for (int ii = 0; ii < nx; ++ii) A(row, ii * ny + j) += Dxx(i, ii);
            A(row, row) -= st.Fprime(psi[static_cast<std::size_t>(row)]);
        }

    auto orthonormal = [N](const std::vector<Eigen::VectorXd>& dirs) {
        std::vector<Eigen::VectorXd> basis;
        for (auto v : dirs) {
            const double n0 = v.norm();
            for (const auto& b : basis) v -= b.dot(v) * b;
            if (n0 > 0.0 && v.norm() > 1e-8 * n0) basis.push_back(v / v.norm());
        }
        Eigen::MatrixXd B(N, static_cast<int>(basis.size()));
        for (std::size_t k = 0; k < basis.size(); ++k) B.col(static_cast<int>(k)) = basis[k];
        return B;
    };
    auto smallest = [&](const Eigen::MatrixXd& B, double& sigma_max) {
        const Eigen::MatrixXd P = Eigen::MatrixXd::Identity(N, N) - B * B.transpose();
        const double shift = 2.0 * A.cwiseAbs().rowwise().sum().maxCoeff() + 1.0;
        const Eigen::MatrixXd Ar = P * A * P + shift * B * B.transpose();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (Ar + Ar.transpose()), Eigen::EigenvaluesOnly);
        std::vector<double> s(es.eigenvalues().data(), es.eigenvalues().data() + N);
        for (auto& v : s) v = std::abs(v);
        std::sort(s.begin(), s.end());
        s.resize(static_cast<std::size_t>(N - B.cols()));  // the shifted directions sit on top
        sigma_max = s.back();
        s.resize(static_cast<std::size_t>(std::min<int>(m, static_cast<int>(s.size()))));
        return s;
    };

    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(N);
    KernelProbe out;
    double smax_raw = 0.0;
    out.raw_smallest_singular_values = smallest(orthonormal({ones}), smax_raw);

    const auto px = dx(st.psi).to_physical();
    const auto py = dy(st.psi).to_physical();
    Eigen::VectorXd sx(N), sy(N);
    for (int i = 0; i < N; ++i) {
        sx(i) = px[static_cast<std::size_t>(i)];
        sy(i) = py[static_cast<std::size_t>(i)];
    }
    const Eigen::MatrixXd B = orthonormal({ones, sx, sy});
    out.symmetry_directions_removed = static_cast<int>(B.cols()) - 1;
    out.smallest_singular_values = smallest(B, out.sigma_max);
    out.kernel_flag = out.smallest_singular_values.front() < rel_tol * out.sigma_max;
    return out;
}

}  // namespace eulerlab
