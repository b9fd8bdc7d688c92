#pragma once

// Self-similar profiles of the CLM model. Substituting
//     w(x, t) = (T - t)^{-1} Omega(x / (T - t)^lambda)
// into w_t = w H w gives the stationary problem
//     R(Omega, lambda) = Omega + lambda X Omega' - Omega H Omega = 0
// on the line. The exact pair is Omega = -4X / (1 + 4X^2), lambda = 1.
//
// The line is truncated to X = j h, |j| <= M, and functions are read as
// band-limited (sinc) interpolants. Beyond |X| = L the profile is continued as
// a / X + b / X^3 with a and b matched at |X| = L and L/2, and the tail sums
// below add the continuation in closed form (Hurwitz zeta via polygamma).

#include "eulerlab/errors.hpp"

#include <Eigen/Dense>
#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/polygamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>

#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

namespace eulerlab {

struct ProfileProblem {
    double L = 100.0;
    int n = 3200;                   // intervals; the grid has n + 1 nodes and contains X = 0
    double slope_at_zero = -4.0;    // normalization Omega'(0)
    double tail_threshold = 0.75;   // max |Omega(+-L)| / |Omega(+-L/2)| before "tail too large"
    double tol = 1e-8;              // RMS residual
    int max_iterations = 30;
    // Solve in the odd subspace. Besides scaling, the profile equation has a
    // second symmetry: Z = H Omega + i Omega solves Z + X Z' = Z^2 / 2 for
    // Z = 2 / (1 + 2 c X) and any complex c with the pole off the upper half
    // plane, and only one real combination of c is fixed by Omega'(0). The
    // free one is even, so odd profiles remove it.
    bool odd = true;
};

struct ProfileSolution {
    Eigen::VectorXd X;
    Eigen::VectorXd Omega;
    double lambda = 0.0;
    double residual_norm = 0.0;
    int newton_iters = 0;
    bool converged = false;
    std::string status;
    std::vector<double> residual_history;
};

inline double rms(const Eigen::VectorXd& v) { return v.size() ? v.norm() / std::sqrt(double(v.size())) : 0.0; }

/// Discrete line operators on the symmetric grid, tails included.
class LineGrid {
public:
    LineGrid(double L, int n) : L_(L), n_(n) {
        require(n >= 2 && n % 2 == 0, "self-similar grid needs an even interval count");
        require(L >= 10.0, "self-similar grid needs L >= 10");
        M_ = n / 2;
        h_ = L / M_;
        const int m = n + 1;
        X_.resize(m);
        for (int i = 0; i < m; ++i) X_[i] = (i - M_) * h_;
        build_hilbert();
        build_derivative();
    }

    int size() const { return n_ + 1; }
    int center() const { return M_; }
    double h() const { return h_; }
    double L() const { return L_; }
    const Eigen::VectorXd& X() const { return X_; }
    const Eigen::MatrixXd& hilbert() const { return H_; }
    const Eigen::MatrixXd& derivative() const { return D_; }

private:
    static constexpr double pi = std::numbers::pi;

    // sum over k > M with k - j odd of 1 / (k (j - k))
    double tail_hilbert(int j) const {
        const int k0 = ((M_ + 1 - j) % 2 != 0) ? M_ + 1 : M_ + 2;
        if (j == 0) return -0.25 * boost::math::trigamma(k0 / 2.0);
        return 0.5 * (boost::math::digamma((k0 - j) / 2.0) - boost::math::digamma(k0 / 2.0)) / j;
    }
    // sum over k > M with k - j odd of 1 / (k^3 (j - k))
    double tail_hilbert3(int j) const {
        const int k0 = ((M_ + 1 - j) % 2 != 0) ? M_ + 1 : M_ + 2;
        const double q = k0 / 2.0;
        // sums of k^-p over k = k0, k0 + 2, ... as Hurwitz zeta values
        const double a2 = boost::math::trigamma(q) / 4.0;
        const double a3 = -boost::math::polygamma(2, q) / 16.0;
        const double a4 = boost::math::polygamma(3, q) / 96.0;
        if (j == 0) return -a4;
        const double jd = j;
        return a3 / jd + a2 / (jd * jd) +
               0.5 * (boost::math::digamma((k0 - j) / 2.0) - boost::math::digamma(q)) / (jd * jd * jd);
    }
    static double beta(double z) {
        return 0.5 * (boost::math::digamma((z + 1) / 2.0) - boost::math::digamma(z / 2.0));
    }
    // sum over k > M of (-1)^(j-k) / (k (j - k))
    double tail_derivative(int j) const {
        const int k0 = M_ + 1;
        const double s0 = (k0 % 2 == 0) ? 1.0 : -1.0;
        if (j == 0)
            return -s0 * 0.25 * (boost::math::trigamma(k0 / 2.0) - boost::math::trigamma((k0 + 1) / 2.0));
        const double sj = (std::abs(j) % 2 == 0) ? 1.0 : -1.0;
        return sj * s0 * (beta(k0) - beta(k0 - j)) / j;
    }
    // sum over k > M of (-1)^(j-k) / (k^3 (j - k))
    double tail_derivative3(int j) const {
        const int k0 = M_ + 1;
        const double s0 = (k0 % 2 == 0) ? 1.0 : -1.0;
        const double q0 = k0 / 2.0, q1 = (k0 + 1) / 2.0;
        // alternating sums of k^-p over k >= k0
        const double e2 = s0 * (boost::math::trigamma(q0) - boost::math::trigamma(q1)) / 4.0;
        const double e3 = -s0 * (boost::math::polygamma(2, q0) - boost::math::polygamma(2, q1)) / 16.0;
        const double e4 = s0 * (boost::math::polygamma(3, q0) - boost::math::polygamma(3, q1)) / 96.0;
        if (j == 0) return -e4;
        const double jd = j;
        const double sj = (std::abs(j) % 2 == 0) ? 1.0 : -1.0;
        return sj * (e3 / jd + e2 / (jd * jd)) + tail_derivative(j) / (jd * jd);
    }
    // Tail coefficients as linear functionals of the values at x1 = L, x2 = L/2.
    struct TailFit {
        int p;
        double da1, da2, db1, db2;
    };
    TailFit tail_fit() const {
        const int p = M_ / 2;
        const double x1 = M_ * h_, x2 = p * h_;
        const double det = 1.0 / (x1 * x2 * x2 * x2) - 1.0 / (x2 * x1 * x1 * x1);
        return {p, 1.0 / (x2 * x2 * x2 * det), -1.0 / (x1 * x1 * x1 * det), -1.0 / (x2 * det), 1.0 / (x1 * det)};
    }

    void build_hilbert() {
        const int m = size();
        H_ = Eigen::MatrixXd::Zero(m, m);
        for (int a = 0; a < m; ++a)
            for (int b = 0; b < m; ++b) {
                const int d = a - b;
                if (d % 2 != 0) H_(a, b) = 2.0 / (pi * d);
            }
        const auto [p, da1, da2, db1, db2] = tail_fit();
        for (int a = 0; a < m; ++a) {
            const int j = a - M_;
            const double r1 = tail_hilbert(j) * 2.0 / (pi * h_), r3 = tail_hilbert3(j) * 2.0 / (pi * h_ * h_ * h_);
            const double l1 = tail_hilbert(-j) * 2.0 / (pi * h_), l3 = tail_hilbert3(-j) * 2.0 / (pi * h_ * h_ * h_);
            // Right: Omega(x1) = a/x1 + b/x1^3, Omega(x2) likewise. Left tail is
            // the mirror image with a, b read off Omega(-x1), Omega(-x2) and signs flipped.
            H_(a, M_ + M_) += r1 * da1 + r3 * db1;
            H_(a, M_ + p) += r1 * da2 + r3 * db2;
            H_(a, 0) -= l1 * da1 + l3 * db1;
            H_(a, M_ - p) -= l1 * da2 + l3 * db2;
        }
    }

    void build_derivative() {
        const int m = size();
        D_ = Eigen::MatrixXd::Zero(m, m);
        for (int a = 0; a < m; ++a)
            for (int b = 0; b < m; ++b) {
                const int d = a - b;
                if (d != 0) D_(a, b) = ((d % 2 == 0) ? 1.0 : -1.0) / (d * h_);
            }
        const auto [p, da1, da2, db1, db2] = tail_fit();
        for (int a = 0; a < m; ++a) {
            const int j = a - M_;
            const double r1 = tail_derivative(j) / (h_ * h_), r3 = tail_derivative3(j) / (h_ * h_ * h_ * h_);
            const double l1 = tail_derivative(-j) / (h_ * h_), l3 = tail_derivative3(-j) / (h_ * h_ * h_ * h_);
            D_(a, M_ + M_) += r1 * da1 + r3 * db1;
            D_(a, M_ + p) += r1 * da2 + r3 * db2;
            D_(a, 0) -= l1 * da1 + l3 * db1;
            D_(a, M_ - p) -= l1 * da2 + l3 * db2;
        }
    }

    double L_;
    int n_;
    int M_ = 0;
    double h_ = 0.0;
    Eigen::VectorXd X_;
    Eigen::MatrixXd H_, D_;
};

inline Eigen::VectorXd exact_clm_profile(const Eigen::VectorXd& X) {
    return X.unaryExpr([](double x) { return -4.0 * x / (1.0 + 4.0 * x * x); });
}

/// The continuation beyond L needs decay: |Omega(+-L)| may not exceed
/// threshold |Omega(+-L/2)| (a/X decay gives 1/2, a constant gives 1) unless
/// it is negligible against the peak.
inline void check_tail(const LineGrid& g, const Eigen::VectorXd& Omega, double threshold) {
    require(Omega.size() == g.size(), "profile size does not match the grid");
    const double peak = Omega.cwiseAbs().maxCoeff();
    const int c = g.center(), M = g.size() - 1 - c, p = M / 2;
    for (int side : {-1, 1}) {
        const double end = std::abs(Omega[c + side * M]), mid = std::abs(Omega[c + side * p]);
        if (end <= 1e-6 * peak) continue;
        if (!(end <= threshold * mid))
            throw PreconditionError("tail too large: |Omega(" + std::string(side < 0 ? "-" : "+") +
                                    "L)| = " + std::to_string(end) + " against |Omega(L/2)| = " + std::to_string(mid));
    }
}

/// R = Omega + lambda X Omega' - Omega H Omega on the grid.
inline Eigen::VectorXd profile_residual(const LineGrid& g, const Eigen::VectorXd& Omega, double lambda,
                                        double tail_threshold = 0.75) {
    check_tail(g, Omega, tail_threshold);
    const Eigen::VectorXd dO = g.derivative() * Omega;
    const Eigen::VectorXd hO = g.hilbert() * Omega;
    return Omega + lambda * g.X().cwiseProduct(dO) - Omega.cwiseProduct(hO);
}

/// Frechet derivative of the residual in (Omega, lambda): the dense block acts
/// on dOmega, the rank-one column X Omega' multiplies dlambda.
struct LinearizedOperator {
    Eigen::MatrixXd block;
    Eigen::VectorXd lambda_column;

    Eigen::VectorXd apply(const Eigen::VectorXd& dOmega, double dlambda) const {
        return block * dOmega + dlambda * lambda_column;
    }
};

inline LinearizedOperator linearized_operator(const LineGrid& g, const Eigen::VectorXd& Omega, double lambda) {
    const int m = g.size();
    LinearizedOperator op;
    const Eigen::VectorXd hO = g.hilbert() * Omega;
    op.block = lambda * (g.X().asDiagonal() * g.derivative());
    op.block.diagonal() += Eigen::VectorXd::Ones(m) - hO;
    op.block.noalias() -= Omega.asDiagonal() * g.hilbert();
    op.lambda_column = g.X().cwiseProduct(g.derivative() * Omega);
    return op;
}

/// Newton on the bordered system [dR | X Omega' ; e0' D | 0], where the last
/// row pins Omega'(0) and closes the system for lambda. With pb.odd the
/// unknowns are the values at X > 0 and the initial guess is replaced by its
/// odd part.
inline ProfileSolution newton_solve(const LineGrid& g, const ProfileProblem& pb, Eigen::VectorXd Omega, double lambda) {
    const int m = g.size();
    const int c = g.center();
    require(Omega.size() == m, "initial profile size does not match the grid");
    if (pb.odd) Omega = 0.5 * (Omega - Omega.reverse()).eval();
    const Eigen::RowVectorXd norm_row = g.derivative().row(c);
    ProfileSolution sol;
    sol.X = g.X();
    auto residual = [&](const Eigen::VectorXd& w, double lam, Eigen::VectorXd& r, double& nr) {
        r = profile_residual(g, w, lam, pb.tail_threshold);
        nr = norm_row.dot(w) - pb.slope_at_zero;
        return std::max(rms(r), std::abs(nr));
    };
    Eigen::VectorXd r;
    double nr = 0.0;
    double res = residual(Omega, lambda, r, nr);
    require(std::isfinite(res), "initial residual is not finite");
    const double res0 = res;
    sol.residual_history.push_back(res);
    // Reduced unknowns: all nodes, or the nodes X > 0 (X < 0 mirrors with a sign).
    const int nu = pb.odd ? m - c - 1 : m;
    int k = 0;
    for (; k < pb.max_iterations && res > pb.tol; ++k) {
        const auto op = linearized_operator(g, Omega, lambda);
        Eigen::MatrixXd B(nu + 1, nu + 1);
        Eigen::VectorXd rhs(nu + 1);
        if (pb.odd) {
            for (int i = 0; i < nu; ++i) {
                for (int j = 0; j < nu; ++j) B(i, j) = op.block(c + 1 + i, c + 1 + j) - op.block(c + 1 + i, c - 1 - j);
                B(i, nu) = op.lambda_column[c + 1 + i];
                rhs[i] = -r[c + 1 + i];
            }
            for (int j = 0; j < nu; ++j) B(nu, j) = norm_row[c + 1 + j] - norm_row[c - 1 - j];
        } else {
            B.topLeftCorner(m, m) = op.block;
            B.topRightCorner(m, 1) = op.lambda_column;
            B.bottomLeftCorner(1, m) = norm_row;
            rhs.head(m) = -r;
        }
        B(nu, nu) = 0.0;
        rhs[nu] = -nr;
        Eigen::PartialPivLU<Eigen::MatrixXd> lu(B);
        const double rc = lu.rcond();
        const Eigen::VectorXd d = lu.solve(rhs);
        if (!(rc > 1e-14) || !d.allFinite())
            throw NumericalError("nondegeneracy fails at iterate " + std::to_string(k) +
                                 ": bordered system is singular (rcond " + std::to_string(rc) + ")");
        if (pb.odd) {
            for (int j = 0; j < nu; ++j) {
                Omega[c + 1 + j] += d[j];
                Omega[c - 1 - j] -= d[j];
            }
        } else {
            Omega += d.head(m);
        }
        lambda += d[nu];
        try {
            res = residual(Omega, lambda, r, nr);
        } catch (const PreconditionError& e) {
            sol.status = std::string("diverged: ") + e.what();
            res = std::numeric_limits<double>::infinity();
            ++k;
            break;
        }
        sol.residual_history.push_back(res);
        if (!std::isfinite(res) || res > 1e6 * std::max(res0, 1.0)) {
            sol.status = "diverged: residual grew to " + std::to_string(res);
            ++k;
            break;
        }
    }
    sol.Omega = Omega;
    sol.lambda = lambda;
    sol.residual_norm = res;
    sol.newton_iters = k;
    sol.converged = res <= pb.tol;
    if (sol.converged)
        sol.status = "converged";
    else if (sol.status.empty())
        sol.status = "stagnated: residual " + std::to_string(res) + " after " + std::to_string(k) + " iterations";
    return sol;
}

/// RMS of the linearized block applied to the scaling direction X Omega'
/// (dlambda = 0); zero for a true solution by scaling invariance.
inline double scaling_kernel_defect(const LineGrid& g, const ProfileSolution& sol) {
    const auto op = linearized_operator(g, sol.Omega, sol.lambda);
    return rms(op.apply(op.lambda_column, 0.0));
}

struct FrechetCheck {
    double eps = 0.0;
    double error = 0.0;  // RMS of (R(w + eps d) - R(w)) / eps - dR d
};

inline std::vector<FrechetCheck> frechet_check(const LineGrid& g, const Eigen::VectorXd& Omega, double lambda,
                                               const Eigen::VectorXd& dOmega, double dlambda,
                                               const std::vector<double>& eps_list) {
    const auto op = linearized_operator(g, Omega, lambda);
    const Eigen::VectorXd lin = op.apply(dOmega, dlambda);
    const Eigen::VectorXd r0 = profile_residual(g, Omega, lambda);
    std::vector<FrechetCheck> out;
    for (double eps : eps_list) {
        const Eigen::VectorXd r1 = profile_residual(g, Omega + eps * dOmega, lambda + eps * dlambda);
        out.push_back({eps, rms((r1 - r0) / eps - lin)});
    }
    return out;
}

struct OutgoingResult {
    bool certified = false;
    double c_estimate = 0.0;
};

/// min over X != 0 of (lambda X + U(X)) X / X^2, certified iff >= c_floor.
/// U is the profile transport field (zero for CLM).
inline OutgoingResult outgoing_check(const Eigen::VectorXd& X, const Eigen::VectorXd& U, double lambda,
                                     double c_floor) {
    require(X.size() == U.size(), "transport field size does not match the grid");
    double c = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < X.size(); ++i)
        if (X[i] != 0.0) c = std::min(c, (lambda * X[i] + U[i]) * X[i] / (X[i] * X[i]));
    require(std::isfinite(c), "outgoing check needs a nonzero grid point");
    return {c >= c_floor, c};
}

}  // namespace eulerlab
