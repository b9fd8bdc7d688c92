#pragma once

// Restarted, right-preconditioned GMRES over any vector type providing
// copy, axpy(a, x), operator*=(a), and a free `inner(x, y)`.

#include <cmath>
#include <cstddef>
#include <vector>

namespace eulerlab {

struct GmresResult {
    bool converged = false;
    int iterations = 0;
    double relative_residual = 1.0;
};

/// Solves A x = b starting from x (in/out). `apply(v)` returns A v, `precond(v)`
/// returns M^{-1} v. Stops when |b - A x| <= rel_tol |b|.
template <class Vec, class Apply, class Precond>
GmresResult gmres(Apply&& apply, Precond&& precond, const Vec& b, Vec& x, double rel_tol, int restart = 40,
                  int max_iters = 400) {
    GmresResult res;
    const double bnorm = std::sqrt(inner(b, b));
    if (bnorm == 0.0) {
        x *= 0.0;
        res.converged = true;
        res.relative_residual = 0.0;
        return res;
    }
    while (res.iterations < max_iters) {
        Vec r = b;
        r.axpy(-1.0, apply(x));
        const double beta = std::sqrt(inner(r, r));
        res.relative_residual = beta / bnorm;
        if (res.relative_residual <= rel_tol) {
            res.converged = true;
            return res;
        }
        std::vector<Vec> V;
        std::vector<Vec> Z;
        V.reserve(restart + 1);
        Z.reserve(restart);
        r *= 1.0 / beta;
        V.push_back(r);
        std::vector<std::vector<double>> H(restart + 1, std::vector<double>(restart, 0.0));
        std::vector<double> cs(restart, 0.0), sn(restart, 0.0), g(restart + 1, 0.0);
        g[0] = beta;
        int j = 0;
        for (; j < restart && res.iterations < max_iters; ++j, ++res.iterations) {
            Z.push_back(precond(V[j]));
            Vec w = apply(Z[j]);
            for (int i = 0; i <= j; ++i) {
                H[i][j] = inner(w, V[i]);
                w.axpy(-H[i][j], V[i]);
            }
            H[j + 1][j] = std::sqrt(inner(w, w));
            for (int i = 0; i < j; ++i) {
                const double t = cs[i] * H[i][j] + sn[i] * H[i + 1][j];
                H[i + 1][j] = -sn[i] * H[i][j] + cs[i] * H[i + 1][j];
                H[i][j] = t;
            }
            const double denom = std::hypot(H[j][j], H[j + 1][j]);
            cs[j] = denom > 0.0 ? H[j][j] / denom : 1.0;
            sn[j] = denom > 0.0 ? H[j + 1][j] / denom : 0.0;
            H[j][j] = denom;
            const double hj1 = H[j + 1][j];
            H[j + 1][j] = 0.0;
            g[j + 1] = -sn[j] * g[j];
            g[j] = cs[j] * g[j];
            const bool breakdown = hj1 <= 1e-300;
            if (!breakdown) {
                w *= 1.0 / hj1;
                V.push_back(w);
            }
            if (std::abs(g[j + 1]) / bnorm <= rel_tol || breakdown) {
                ++j;
                ++res.iterations;
                break;
            }
        }
        // Back substitution for the least-squares coefficients.
        std::vector<double> y(j, 0.0);
        for (int i = j - 1; i >= 0; --i) {
            double s = g[i];
            for (int k = i + 1; k < j; ++k) s -= H[i][k] * y[k];
            y[i] = H[i][i] != 0.0 ? s / H[i][i] : 0.0;
        }
        for (int i = 0; i < j; ++i) x.axpy(y[i], Z[i]);
    }
    Vec r = b;
    r.axpy(-1.0, apply(x));
    res.relative_residual = std::sqrt(inner(r, r)) / bnorm;
    res.converged = res.relative_residual <= rel_tol;
    return res;
}

}  // namespace eulerlab
