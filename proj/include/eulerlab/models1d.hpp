#pragma once

// 1D vorticity-stretching models on the circle:
//     CLM            d_t w = w H(w)
//     De Gregorio    d_t w + u d_x w = w d_x u,  d_x u = H(w), mean(u) = 0
// with the closed-form CLM solution, blow-up time from the initial data,
// blow-up monitoring (sup norm, BKM integral, c/(T - t) fit) and
// self-similar rescaling of the solution near the blow-up point.

#include "eulerlab/errors.hpp"
#include "eulerlab/euler2d.hpp"
#include "eulerlab/spectral1d.hpp"

#include <Eigen/Dense>
#include <boost/math/tools/minima.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace eulerlab {

enum class Model { clm, degregorio };

inline const char* model_name(Model m) { return m == Model::clm ? "clm" : "degregorio"; }

struct ModelState {
    SpectralField1 omega;
    double t = 0.0;
    Model model = Model::clm;
};

namespace detail {

inline SpectralField1 product_dealiased(const Grid1& g, const RealVec& a, const RealVec& b) {
    RealVec p(a.size());
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = a[i] * b[i];
    auto f = SpectralField1::from_physical(g, p);
    dealias_in_place(f);
    return f;
}

}  // namespace detail

/// w H(w), dealiased.
inline SpectralField1 clm_rhs(const SpectralField1& omega) {
    return detail::product_dealiased(omega.grid(), omega.to_physical(), hilbert_transform(omega).to_physical());
}

/// Zero-mean velocity with d_x u = H(w).
inline SpectralField1 degregorio_velocity(const SpectralField1& omega) { return antiderivative(hilbert_transform(omega)); }

/// -u d_x w + w d_x u, dealiased.
inline SpectralField1 degregorio_rhs(const SpectralField1& omega) {
    const Grid1& g = omega.grid();
    const auto u = degregorio_velocity(omega).to_physical();
    const auto ux = hilbert_transform(omega).to_physical();
    const auto w = omega.to_physical();
    const auto wx = ddx(omega).to_physical();
    RealVec r(w.size());
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = -u[i] * wx[i] + w[i] * ux[i];
    auto f = SpectralField1::from_physical(g, r);
    dealias_in_place(f);
    return f;
}

inline SpectralField1 model_rhs(Model m, const SpectralField1& omega) {
    return m == Model::clm ? clm_rhs(omega) : degregorio_rhs(omega);
}

/// Pointwise defect of the Riccati structure: with z = H w + i w and
/// w_t = w H w, returns max |dz/dt - z^2 / 2| on the grid.
inline double riccati_defect(const SpectralField1& omega) {
    const auto wt = clm_rhs(omega);
    const auto hwt = hilbert_transform(wt).to_physical();
    const auto wtp = wt.to_physical();
    const auto h = hilbert_transform(omega).to_physical();
    const auto w = omega.to_physical();
    double m = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double re = hwt[i] - 0.5 * (h[i] * h[i] - w[i] * w[i]);
        const double im = wtp[i] - h[i] * w[i];
        m = std::max(m, std::hypot(re, im));
    }
    return m;
}

// ---------------------------------------------------------------------------
// Exact CLM solution

struct BlowupTime {
    bool global = true;  // no zero of w0 with H w0 > 0
    double t_star = std::numeric_limits<double>::infinity();
    double x_star = 0.0;  // zero of w0 attaining the max of H w0
};

/// t* = 2 / max{H w0(x) : w0(x) = 0}. Zeros of the trigonometric interpolant
/// are bracketed on a grid refined `refine` times (zero-padded transform) and
/// bisected with exact point evaluation.
inline BlowupTime clm_blowup_time(const SpectralField1& omega0, int refine = 8) {
    const auto h = hilbert_transform(omega0);
    const int n = omega0.grid().n;
    const Grid1 fine(n * refine);
    SpectralField1 padded(fine);
    for (int k = 0; k < omega0.grid().nk(); ++k) padded[k] = k == n / 2 ? 0.5 * omega0[k] : omega0[k];
    const RealVec samples = padded.to_physical();
    const int m = fine.n;
    const double dx = fine.dx();
    BlowupTime r;
    double best = 0.0;
    double a = 0.0, fa = samples[0];
    for (int i = 1; i <= m; ++i) {
        const double b = i * dx, fb = samples[static_cast<std::size_t>(i % m)];
        if (fa == 0.0 || fa * fb < 0.0) {
            double lo = a, hi = b, flo = omega0.evaluate(a);
            if (fa != 0.0) {
                for (int it = 0; it < 80 && hi - lo > 1e-15; ++it) {
                    const double mid = 0.5 * (lo + hi), fm = omega0.evaluate(mid);
                    if ((fm < 0.0) == (flo < 0.0)) {
                        lo = mid;
                        flo = fm;
                    } else {
                        hi = mid;
                    }
                }
            } else {
                hi = lo;
            }
            const double x0 = 0.5 * (lo + hi);
            const double hv = h.evaluate(x0);
            if (hv > best) {
                best = hv;
                r.global = false;
                r.x_star = x0;
            }
        }
        a = b;
        fa = fb;
    }
    if (!r.global) r.t_star = 2.0 / best;
    return r;
}

/// 4 w0 / ((2 - t H w0)^2 + t^2 w0^2) on the grid of omega0.
inline RealVec clm_exact(const SpectralField1& omega0, double t) {
    const auto bt = clm_blowup_time(omega0);
    if (!bt.global && t >= bt.t_star) throw PreconditionError("past blow-up: t = " + std::to_string(t) + " >= t* = " + std::to_string(bt.t_star));
    const auto w = omega0.to_physical();
    const auto h = hilbert_transform(omega0).to_physical();
    RealVec out(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double a = 2.0 - t * h[i], b = t * w[i];
        out[i] = 4.0 * w[i] / (a * a + b * b);
    }
    return out;
}

/// Same formula at an arbitrary point.
inline double clm_exact_at(const SpectralField1& omega0, const SpectralField1& h0, double t, double x) {
    const double w = omega0.evaluate(x), h = h0.evaluate(x);
    const double a = 2.0 - t * h, b = t * w;
    return 4.0 * w / (a * a + b * b);
}

// ---------------------------------------------------------------------------
// Sup norm of the interpolant

/// |f|_inf refined from the grid maximum by Newton on f' = 0.
inline double refined_sup(const SpectralField1& f, double* where = nullptr) {
    const auto r = f.to_physical();
    std::size_t imax = 0;
    for (std::size_t i = 1; i < r.size(); ++i)
        if (std::abs(r[i]) > std::abs(r[imax])) imax = i;
    const double dx = f.grid().dx();
    double x = f.grid().x(static_cast<int>(imax));
    double best = std::abs(r[imax]);
    const auto d1 = ddx(f);
    for (int it = 0; it < 8; ++it) {
        const double g = f.evaluate_derivative(x);
        const double gp = d1.evaluate_derivative(x);
        if (gp == 0.0) break;
        double step = -g / gp;
        step = std::clamp(step, -dx, dx);
        x += step;
        if (std::abs(step) < 1e-14) break;
    }
    const double v = std::abs(f.evaluate(x));
    if (v > best) {
        best = v;
        if (where) *where = x;
    } else if (where) {
        *where = f.grid().x(static_cast<int>(imax));
    }
    return best;
}

// ---------------------------------------------------------------------------
// Blow-up monitoring

struct ModelRunOptions {
    Model model = Model::clm;
    double t_end = 10.0;
    double cfl = 0.1;  // dt = cfl / |w|_inf
    double dt_max = 0.05;
    double omega_cap = 1e3;
    double tail_threshold = 1e-10;  // spectral energy fraction above 2/9 n
    double fit_fraction = 0.3;
    // De Gregorio only: dt <= advective_cfl * dx / |u|_inf as well.
    double advective_cfl = 0.5;
    bool refine_sup = true;
};

struct BlowupReport {
    bool detected = false;
    std::optional<double> t_star_estimate;
    bool under_resolved = false;
    double under_resolved_at = 0.0;
    bool cap_reached = false;
    bool accelerating = false;
    std::vector<double> times;
    std::vector<double> omega_max_series;
    std::vector<double> bkm_series;
    double x_star = 0.0;  // location of the sup at the last sample
    std::vector<double> argmax_series;
    // Zero of the final state next to the peak. Odd self-similar profiles
    // collapse onto it, while the peak itself sits O(T - t) away.
    std::optional<double> x_star_limit;
    ModelState final_state;
};

/// Nearest sign change of w on either side of x0, refined by bisection on the
/// trigonometric interpolant. Returns x0 if w has no zero.
inline double adjacent_zero(const SpectralField1& w, double x0) {
    const double h = w.grid().dx() / 4.0;
    const double f0 = w.evaluate(x0);
    if (f0 == 0.0) return x0;
    const int steps = 4 * w.grid().n;
    for (int k = 1; k <= steps; ++k) {
        for (double dir : {1.0, -1.0}) {
            double a = x0 + dir * (k - 1) * h, b = x0 + dir * k * h;
            double fa = w.evaluate(a);
            if (fa * w.evaluate(b) > 0.0) continue;
            for (int it = 0; it < 200 && std::abs(b - a) > 1e-15; ++it) {
                const double c = 0.5 * (a + b), fc = w.evaluate(c);
                if ((fa < 0.0) == (fc < 0.0)) {
                    a = c;
                    fa = fc;
                } else {
                    b = c;
                }
            }
            return 0.5 * (a + b);
        }
    }
    return x0;
}

/// dt = cfl / |w|_inf capped by dt_max; the transport term of De Gregorio adds
/// an advective limit.
inline double model_time_step(const SpectralField1& w, double sup, const ModelRunOptions& opt) {
    double dt = sup > 0.0 ? std::min(opt.dt_max, opt.cfl / sup) : opt.dt_max;
    if (opt.model == Model::degregorio) {
        const double umax = degregorio_velocity(w).max_abs();
        if (umax > 0.0) dt = std::min(dt, opt.advective_cfl * w.grid().dx() / umax);
    }
    return dt;
}

/// Fits |w|_inf = c / (T - t) + d + e (T - t) over the samples, returning T.
/// For fixed T the coefficients come from a linear least-squares solve with
/// relative residuals; T itself is found by Brent's method. The regular terms
/// absorb the O(1) and O(T - t) corrections to the leading pole.
inline double fit_blowup_time(const std::vector<double>& t, const std::vector<double>& m) {
    require(t.size() >= 4 && t.size() == m.size(), "blow-up fit needs at least four samples");
    const double tl = t.back();
    const Eigen::Index n_s = static_cast<Eigen::Index>(t.size());
    // Searched in log(T - t_last) so the tolerance is relative to the gap.
    auto cost = [&](double lg) {
        const double T = tl + std::exp(lg);
        Eigen::MatrixXd A(n_s, 3);
        Eigen::VectorXd rhs = Eigen::VectorXd::Ones(n_s);
        for (Eigen::Index i = 0; i < n_s; ++i) {
            const double tau = T - t[i];
            A(i, 0) = 1.0 / (tau * m[i]);
            A(i, 1) = 1.0 / m[i];
            A(i, 2) = tau / m[i];
        }
        return (A * A.colPivHouseholderQr().solve(rhs) - rhs).squaredNorm();
    };
    // Bracket from the linear fit of 1/m against t.
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) {
        sx += t[i];
        sy += 1.0 / m[i];
        sxx += t[i] * t[i];
        sxy += t[i] / m[i];
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    const double icpt = (sy - slope * sx) / n;
    double T0 = slope < 0.0 ? -icpt / slope : tl + (tl - t.front());
    const double span = std::max(tl - t.front(), 1e-12);
    if (!(T0 > tl)) T0 = tl + 1e-3 * span;
    const double lo = std::log(1e-9 * (T0 - tl)), hi = std::log(5.0 * (T0 - tl));
    const auto r = boost::math::tools::brent_find_minima(cost, lo, hi, 52);
    return tl + std::exp(r.first);
}

/// Integrates the model with dt = cfl / |w|_inf until t_end or until the sup
/// norm reaches omega_cap. The final step is cut where 1/|w|_inf, interpolated
/// linearly in t, hits 1/omega_cap, so the series ends exactly at the cap.
/// on_step(state, sup) is called after every accepted step.
template <class OnStep>
BlowupReport model_run(const SpectralField1& omega0, const ModelRunOptions& opt, OnStep&& on_step) {
    require(opt.cfl > 0.0, "cfl must be positive");
    require(opt.omega_cap > 0.0, "omega_cap must be positive");
    BlowupReport rep;
    ModelState s{omega0, 0.0, opt.model};
    auto sup = [&](const SpectralField1& f, double* where = nullptr) {
        return opt.refine_sup ? refined_sup(f, where) : f.max_abs();
    };
    double m = sup(s.omega, &rep.x_star);
    rep.argmax_series.push_back(rep.x_star);
    double bkm = 0.0;
    rep.times.push_back(0.0);
    rep.omega_max_series.push_back(m);
    rep.bkm_series.push_back(0.0);
    const auto rhs = [&](const SpectralField1& w) { return model_rhs(opt.model, w); };
    while (s.t < opt.t_end && m < opt.omega_cap) {
        double dt = model_time_step(s.omega, m, opt);
        if (s.t + dt > opt.t_end) dt = opt.t_end - s.t;
        ModelState next{rk4_field_step(s.omega, dt, rhs), s.t + dt, s.model};
        if (!next.omega.all_finite()) throw NumericalError("numerical blow-up at t = " + std::to_string(next.t));
        double where = 0.0;
        const double m1 = sup(next.omega, &where);
        if (!rep.under_resolved && spectral_tail_fraction(next.omega) > opt.tail_threshold) {
            rep.under_resolved = true;
            rep.under_resolved_at = next.t;
        }
        if (m1 >= opt.omega_cap) {
            // Cut the step at the cap crossing, 1/m linear in t.
            const double a = 1.0 / m, b = 1.0 / m1, c = 1.0 / opt.omega_cap;
            const double frac = (a - b) > 0.0 ? (a - c) / (a - b) : 1.0;
            const double tc = s.t + frac * dt;
            bkm += 0.5 * (tc - s.t) * (m + opt.omega_cap);
            rep.times.push_back(tc);
            rep.omega_max_series.push_back(opt.omega_cap);
            rep.bkm_series.push_back(bkm);
            rep.cap_reached = true;
            rep.x_star = where;
            rep.argmax_series.push_back(where);
            s = next;
            m = m1;
            on_step(s, m1);
            break;
        }
        bkm += 0.5 * dt * (m + m1);
        s = next;
        m = m1;
        rep.x_star = where;
        rep.argmax_series.push_back(where);
        rep.times.push_back(s.t);
        rep.omega_max_series.push_back(m);
        rep.bkm_series.push_back(bkm);
        on_step(s, m);
    }
    rep.final_state = s;
    if (rep.cap_reached) {
        const std::size_t n = rep.times.size() - 1;  // samples strictly below the cap
        const std::size_t k = std::max<std::size_t>(3, static_cast<std::size_t>(std::ceil(opt.fit_fraction * n)));
        if (n >= 3) {
            const std::size_t first = n - std::min(k, n);
            std::vector<double> ft(rep.times.begin() + first, rep.times.begin() + n);
            std::vector<double> fm(rep.omega_max_series.begin() + first, rep.omega_max_series.begin() + n);
            // Accelerating growth: the mean slope over the second half of the window exceeds the first half's.
            const std::size_t mid = ft.size() / 2;
            const double s1 = (fm[mid] - fm.front()) / (ft[mid] - ft.front());
            const double s2 = (fm.back() - fm[mid]) / (ft.back() - ft[mid]);
            rep.accelerating = s2 > s1 && s1 > 0.0;
            if (rep.accelerating) {
                rep.detected = true;
                rep.t_star_estimate = fit_blowup_time(ft, fm);
                rep.x_star_limit = adjacent_zero(s.omega, rep.x_star);
            }
        }
    }
    return rep;
}

inline BlowupReport model_run(const SpectralField1& omega0, const ModelRunOptions& opt) {
    return model_run(omega0, opt, [](const ModelState&, double) {});
}

/// Linear interpolation of the BKM integral at the time the sup norm first reaches `level`.
inline double bkm_at_level(const BlowupReport& rep, double level) {
    for (std::size_t i = 1; i < rep.times.size(); ++i)
        if (rep.omega_max_series[i] >= level) {
            const double m0 = rep.omega_max_series[i - 1], m1 = rep.omega_max_series[i];
            const double a = 1.0 / m0, b = 1.0 / m1, c = 1.0 / level;
            const double frac = (a - b) > 0.0 ? (a - c) / (a - b) : 1.0;
            const double dt = rep.times[i] - rep.times[i - 1];
            return rep.bkm_series[i - 1] + 0.5 * frac * dt * (m0 + level);
        }
    throw PreconditionError("the run never reached |w|_inf = " + std::to_string(level));
}

// ---------------------------------------------------------------------------
// Self-similar rescaling

struct SelfSimilarExtraction {
    std::vector<double> X;
    std::vector<double> tau;                     // T - t for each profile
    std::vector<std::vector<double>> profiles;   // (T - t) w(x* + (T - t) X, t)
    std::vector<double> cauchy;                  // sup |P_k - P_{k-1}|, k >= 1
};

/// Re-integrates from omega0 to each t = T - tau (tau decreasing) and samples
/// the rescaled profile on X with the trigonometric interpolant. Needs a
/// detected blow-up.
inline SelfSimilarExtraction selfsim_extract(const SpectralField1& omega0, const BlowupReport& rep, double x_star,
                                             const std::vector<double>& taus, const std::vector<double>& X,
                                             const ModelRunOptions& opt, std::optional<double> T_override = {}) {
    if (!rep.detected || !rep.t_star_estimate)
        throw PreconditionError("selfsim_extract needs a run with a detected blow-up");
    const double T = T_override.value_or(*rep.t_star_estimate);
    for (std::size_t k = 1; k < taus.size(); ++k) require(taus[k] < taus[k - 1], "tau values must decrease");
    SelfSimilarExtraction out;
    out.X = X;
    SpectralField1 w = omega0;
    double t = 0.0;
    const auto rhs = [&](const SpectralField1& f) { return model_rhs(opt.model, f); };
    for (double tau : taus) {
        const double target = T - tau;
        require(target > t, "tau sequence reaches before the current time");
        while (t < target) {
            double dt = model_time_step(w, w.max_abs(), opt);
            if (t + dt > target) dt = target - t;
            w = rk4_field_step(w, dt, rhs);
            t += dt;
        }
        std::vector<double> p(X.size());
        for (std::size_t i = 0; i < X.size(); ++i) p[i] = tau * w.evaluate(x_star + tau * X[i]);
        if (!out.profiles.empty()) {
            double d = 0.0;
            for (std::size_t i = 0; i < X.size(); ++i) d = std::max(d, std::abs(p[i] - out.profiles.back()[i]));
            out.cauchy.push_back(d);
        }
        out.tau.push_back(tau);
        out.profiles.push_back(std::move(p));
    }
    return out;
}

}  // namespace eulerlab
