#pragma once

// Coercive-plus-finite-rank check for transport operators on [0, 1],
//     L f = u f' + g f,   u(0) = u(1) = 0, u'(0) > 0, u > 0 inside, g(1) > 0,
// in the weighted space L^2(x^{-N} dx).
//
// Inner estimate. For f = x^{N/2} F,
//     int L(f) f x^{-N} = int u (F F' + (N/2) F^2 / x) + g F^2,
// so the weighted pairing is computed on F without forming x^{-N}. The ratio to
// int F^2 is evaluated on test functions vanishing to order >= N/2 at 0, and
// integrating by parts shows it is bounded below by the pointwise multiplier
//     g - u'/2 + N u / (2x).
//
// Decomposition. The operator is discretized by upwind differences on a grid
// that is geometric near 0 and uniform further out. With D = diag(x^{-N} dx) the symmetric form is
// A = D^{1/2} L D^{-1/2}; entries only involve weight ratios of nearby nodes,
// taken from log-weights. Eigenmodes of (A + A^T)/2 below the floor are split
// off as a finite-rank symmetric correction K; the rest is coercive. With
// upwinding the only such mode in the model case sits on the first node, the
// inflow boundary.

#include "eulerlab/errors.hpp"

#include <Eigen/Dense>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

namespace eulerlab {

struct WeightedSpaceParams {
    double N = 8.0;
    double delta = 0.1;
};

struct LemmaGridOptions {
    double ratio = 1.1;      // geometric clustering near 0
    double x_min = 1e-8;
    double h_max = 0.005;    // uniform spacing once the geometric steps reach it
    double floor = 0.1;      // symmetric eigenmodes below this are split off
    int max_rank = 4;        // certification requires rank <= max_rank
    double end_tol = 1e-10;  // |u(0)|, |u(1)| tolerance
};

struct OperatorDecomposition {
    Eigen::VectorXd x;
    Eigen::MatrixXd assembled;       // A in the symmetric weighted frame
    Eigen::MatrixXd coercive_part;   // A - K
    Eigen::MatrixXd finite_rank_factors;  // columns v_i
    Eigen::VectorXd finite_rank_weights;  // K = sum w_i v_i v_i^T
    int rank = 0;
    double c_coercivity = 0.0;       // min eigenvalue of the symmetrized coercive part
    double raw_min_eigenvalue = 0.0; // before the split
    double inner_ratio = 0.0;        // worst ratio of the inner estimate over the test family
    double inner_pointwise = 0.0;    // min over (0, delta] of g - u'/2 + N u / (2x)
    bool certified = false;

    Eigen::MatrixXd finite_rank_part() const {
        return finite_rank_factors * finite_rank_weights.asDiagonal() * finite_rank_factors.transpose();
    }
};

namespace detail {

inline double derivative_fd(const std::function<double(double)>& f, double x) {
    const double h = 1e-5;
    if (x - h < 0.0) return (-3.0 * f(x) + 4.0 * f(x + h) - f(x + 2 * h)) / (2 * h);
    if (x + h > 1.0) return (3.0 * f(x) - 4.0 * f(x - h) + f(x - 2 * h)) / (2 * h);
    return (f(x + h) - f(x - h)) / (2 * h);
}

inline std::vector<double> lemma_grid(const LemmaGridOptions& o) {
    std::vector<double> x{o.x_min};
    while (x.back() < 1.0) {
        const double step = std::min((o.ratio - 1.0) * x.back(), o.h_max);
        x.push_back(std::min(1.0, x.back() + step));
    }
    // Merge a sliver of a last cell into its neighbour.
    if (x.size() > 2 && x[x.size() - 1] - x[x.size() - 2] < 0.25 * o.h_max) x.erase(x.end() - 2);
    return x;
}

}  // namespace detail

/// Checks the lemma hypotheses; throws PreconditionError naming the failed one.
inline void check_lemma_hypotheses(const std::function<double(double)>& u, const std::function<double(double)>& g,
                                   const WeightedSpaceParams& p, const LemmaGridOptions& o = {}) {
    if (!(p.N >= 4.0)) throw PreconditionError("weight exponent N must be >= 4");
    if (!(p.delta > 0.0 && p.delta < 0.5)) throw PreconditionError("delta must lie in (0, 1/2)");
    if (std::abs(u(0.0)) > o.end_tol || std::abs(u(1.0)) > o.end_tol)
        throw PreconditionError("hypothesis violated: u must vanish at 0 and 1");
    // The one-sided difference carries an O(h^2) error; 1e-8 separates it from a true zero.
    if (!(detail::derivative_fd(u, 0.0) > 1e-8)) throw PreconditionError("hypothesis violated: u'(0) <= 0");
    for (int i = 1; i < 1000; ++i)
        if (!(u(i / 1000.0) > 0.0)) throw PreconditionError("hypothesis violated: u <= 0 inside (0, 1)");
    if (!(g(1.0) > 0.0)) throw PreconditionError("hypothesis violated: g(1) <= 0");
}

/// Worst ratio int L(f) f x^{-N} / int f^2 x^{-N} over [0, delta] for test
/// functions f = x^{N/2 + q} phi(x / delta).
inline double inner_estimate_ratio(const std::function<double(double)>& u, const std::function<double(double)>& g,
                                   const WeightedSpaceParams& p) {
    using boost::math::quadrature::tanh_sinh;
    static const double pi = std::numbers::pi;
    struct Shape {
        std::function<double(double)> phi, dphi;
    };
    const std::vector<Shape> shapes = {
        {[](double) { return 1.0; }, [](double) { return 0.0; }},
        {[](double s) { return 1.0 - s; }, [](double) { return -1.0; }},
        {[](double s) { return std::cos(pi * s); }, [](double s) { return -pi * std::sin(pi * s); }},
        {[](double s) { return std::cos(3 * pi * s); }, [](double s) { return -3 * pi * std::sin(3 * pi * s); }},
        {[](double s) { return std::sin(2 * pi * s); }, [](double s) { return 2 * pi * std::cos(2 * pi * s); }},
        {[](double s) { return std::exp(-6.0 * s); }, [](double s) { return -6.0 * std::exp(-6.0 * s); }},
    };
    const double d = p.delta;
    tanh_sinh<double> integrator;
    double worst = std::numeric_limits<double>::infinity();
    for (double q : {0.0, 0.5, 1.0, 2.0, 4.0}) {
        for (const auto& sh : shapes) {
            auto F = [&](double x) { return std::pow(x, q) * sh.phi(x / d); };
            auto dF = [&](double x) {
                const double xq1 = q == 0.0 ? 0.0 : q * std::pow(x, q - 1.0);
                return xq1 * sh.phi(x / d) + std::pow(x, q) * sh.dphi(x / d) / d;
            };
            const double num = integrator.integrate(
                [&](double x) {
                    const double f = F(x);
                    return u(x) * (f * dF(x) + 0.5 * p.N * f * f / x) + g(x) * f * f;
                },
                0.0, d);
            const double den = integrator.integrate([&](double x) { return F(x) * F(x); }, 0.0, d);
            worst = std::min(worst, num / den);
        }
    }
    return worst;
}

/// min over (0, delta] of g - u'/2 + N u / (2x), sampled on 2000 points.
inline double inner_pointwise_bound(const std::function<double(double)>& u, const std::function<double(double)>& g,
                                    const WeightedSpaceParams& p) {
    double m = std::numeric_limits<double>::infinity();
    for (int i = 1; i <= 2000; ++i) {
        const double x = p.delta * i / 2000.0;
        m = std::min(m, g(x) - 0.5 * detail::derivative_fd(u, x) + 0.5 * p.N * u(x) / x);
    }
    return m;
}

inline OperatorDecomposition lemma_decomposition_check(const std::function<double(double)>& u,
                                                       const std::function<double(double)>& g,
                                                       const WeightedSpaceParams& p,
                                                       const LemmaGridOptions& o = {}) {
    check_lemma_hypotheses(u, g, p, o);
    OperatorDecomposition out;
    out.inner_ratio = inner_estimate_ratio(u, g, p);
    out.inner_pointwise = inner_pointwise_bound(u, g, p);

    const std::vector<double> xs = detail::lemma_grid(o);
    const int m = static_cast<int>(xs.size());
    out.x = Eigen::Map<const Eigen::VectorXd>(xs.data(), m);

    // Upwind differences (u > 0 carries information from 0 towards 1). Values
    // to the left of the first node are taken as zero: admissible functions
    // vanish to high order at 0.
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(m, m);
    for (int i = 0; i < m; ++i) {
        const double hh = i > 0 ? xs[i] - xs[i - 1] : xs[0];
        L(i, i) += u(xs[i]) / hh;
        if (i > 0) L(i, i - 1) -= u(xs[i]) / hh;
        L(i, i) += g(xs[i]);
    }
    // Trapezoid cells and log-weights log(x^{-N} dx).
    Eigen::VectorXd logw(m);
    for (int i = 0; i < m; ++i) {
        const double lo = i > 0 ? xs[i - 1] : xs[0];
        const double hi = i < m - 1 ? xs[i + 1] : xs[m - 1];
        logw[i] = -p.N * std::log(xs[i]) + std::log(0.5 * (hi - lo));
    }
    out.assembled.resize(m, m);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j)
            out.assembled(i, j) = L(i, j) == 0.0 ? 0.0 : L(i, j) * std::exp(0.5 * (logw[i] - logw[j]));

    const Eigen::MatrixXd S = 0.5 * (out.assembled + out.assembled.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
    const Eigen::VectorXd& mu = es.eigenvalues();
    out.raw_min_eigenvalue = mu[0];
    int r = 0;
    while (r < m && mu[r] < o.floor) ++r;
    out.rank = r;
    out.finite_rank_factors = es.eigenvectors().leftCols(r);
    // Split modes are lifted to the smallest retained eigenvalue.
    const double target = r < m ? mu[r] : o.floor;
    out.finite_rank_weights = (mu.head(r).array() - target).matrix();
    out.coercive_part = out.assembled - out.finite_rank_part();
    const Eigen::MatrixXd Sc = 0.5 * (out.coercive_part + out.coercive_part.transpose());
    out.c_coercivity = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(Sc, Eigen::EigenvaluesOnly).eigenvalues()[0];
    out.certified = out.inner_ratio > 0.0 && out.c_coercivity > 0.0 && out.rank <= o.max_rank;
    return out;
}

}  // namespace eulerlab
