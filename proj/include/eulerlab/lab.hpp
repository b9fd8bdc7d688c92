#pragma once

// Experiment runners behind the euler-lab CLI. execute() runs a parsed config
// in memory and never throws: failures are turned into a status, an exit code
// and whatever output was produced before the failure. run_and_write() commits
// every file with write-then-rename and writes manifest.txt last.
//
// Exit codes: 0 completed, 2 config error (including operators outside the
// lemma's hypotheses), 3 numerical or runner failure, 4 blow-up detected.

#include "eulerlab/config.hpp"
#include "eulerlab/couette.hpp"
#include "eulerlab/errors.hpp"
#include "eulerlab/euler2d.hpp"
#include "eulerlab/io.hpp"
#include "eulerlab/ipm2d.hpp"
#include "eulerlab/lagrangian.hpp"
#include "eulerlab/lemma.hpp"
#include "eulerlab/models1d.hpp"
#include "eulerlab/presets.hpp"
#include "eulerlab/selfsim.hpp"

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <limits>
#include <map>
#include <string>
#include <vector>

#ifndef EULERLAB_VERSION
#define EULERLAB_VERSION "unversioned"
#endif

namespace eulerlab {

inline constexpr const char* kLabVersion = EULERLAB_VERSION;

enum ExitCode : int { exit_ok = 0, exit_config = 2, exit_failure = 3, exit_blowup = 4 };

struct RunArtifacts {
    std::map<std::string, CsvTable> tables;   // file name -> table
    std::map<std::string, std::string> blobs;  // file name -> bytes
    KeyValues summary;
    std::string status = "completed";
    int exit_code = exit_ok;
    std::string error;

    CsvTable& table(const std::string& name, std::vector<std::string> columns) {
        return tables.emplace(name, CsvTable(std::move(columns))).first->second;
    }

    /// Every output file with its bytes, summary.txt included, sorted by name.
    std::map<std::string, std::string> files() const {
        std::map<std::string, std::string> out = blobs;
        for (const auto& [name, t] : tables) out[name] = t.str();
        out["summary.txt"] = summary.str();
        return out;
    }
};

namespace detail {

inline double rel_drift(double v, double v0) {
    return v0 != 0.0 ? std::abs(v - v0) / std::abs(v0) : std::abs(v - v0);
}

inline double max_abs_difference(const RealVec& a, const RealVec& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

inline EulbFrame field_frame(double t, const std::vector<const SpectralField2*>& fields) {
    const Grid2& g = fields.front()->grid();
    EulbFrame f{static_cast<std::uint32_t>(g.nx), static_cast<std::uint32_t>(g.ny), t, {}};
    for (const auto* p : fields) f.blocks.push_back(p->to_physical());
    return f;
}

inline EulbFrame particle_frame(const ParticleSet& p) {
    EulbFrame f{static_cast<std::uint32_t>(p.lattice_nx), static_cast<std::uint32_t>(p.lattice_ny), p.t, {}};
    for (const auto* v : {&p.x, &p.y, &p.X, &p.Y}) f.blocks.emplace_back(v->begin(), v->end());
    return f;
}

inline Grid2 grid_of(const ExperimentConfig& cfg) { return Grid2(cfg.int_value("nx"), cfg.int_value("ny")); }

// ---------------------------------------------------------------------------

inline void run_euler2d(const ExperimentConfig& cfg, RunArtifacts& out) {
    const Grid2 g = grid_of(cfg);
    const auto omega0 = make_vorticity(g, cfg.ic());
    if (!omega0.mean_free()) throw PreconditionError("nonzero mean");
    const auto powers = cfg.int_list("casimirs");
    const int markers = cfg.int_value("markers");
    const double dt_max = cfg.real("dt_max") > 0.0 ? cfg.real("dt_max") : std::numeric_limits<double>::infinity();

    std::vector<std::string> cols{"t", "energy", "enstrophy"};
    for (int p : powers) cols.push_back("casimir_" + std::to_string(p));
    for (const char* c : {"omega_max", "bkm", "palinstrophy", "tail_fraction"}) cols.push_back(c);
    if (markers > 0) {
        cols.push_back("weber_residual");
        cols.push_back("jacobian_dev");
    }
    CsvTable& diag = out.table("diagnostics.csv", cols);
    std::string fields;
    {
        const auto u0 = biot_savart(omega0);
        append_eulb(fields, field_frame(0.0, {&omega0, &u0.u1, &u0.u2}));
    }

    std::vector<DiagnosticsRecord> recs;
    auto add_row = [&](const SpectralField2& w, const DiagnosticsRecord& r, std::vector<double> extra) {
        std::vector<double> row{r.t, r.energy, r.enstrophy};
        row.insert(row.end(), r.casimirs.begin(), r.casimirs.end());
        row.insert(row.end(), {r.omega_max, r.bkm_integral, r.palinstrophy, spectral_tail_fraction(w)});
        row.insert(row.end(), extra.begin(), extra.end());
        diag.add_row(std::move(row));
        recs.push_back(r);
    };

    SpectralField2 final_omega = omega0;
    double final_t = 0.0;
    try {
        if (markers == 0) {
            EulerRunOptions opt;
            opt.t_end = cfg.real("t_end");
            opt.cfl = cfg.real("cfl");
            opt.diag_every = cfg.real("diag_every");
            opt.casimir_powers = powers;
            opt.dt_max = dt_max;
            const auto s = run_euler(EulerState{omega0, 0.0}, opt,
                                     [&](const EulerState& st, const DiagnosticsRecord& r) { add_row(st.omega, r, {}); });
            final_omega = s.omega;
            final_t = s.t;
        } else {
            // Markers ride the same RK4 stages as the vorticity; the BKM integral
            // is accumulated by the trapezoid rule over the records.
            TransportState ts;
            ts.omega = omega0;
            ts.velocity = biot_savart(omega0);
            ts.particles = ParticleSet::lattice(markers, markers, g.lx, g.ly);
            const VectorField2 u0 = ts.velocity;
            std::string particles;
            append_eulb(particles, particle_frame(ts.particles));
            TransportRunOptions opt;
            opt.t_end = cfg.real("t_end");
            opt.cfl = cfg.real("cfl");
            opt.record_every = cfg.real("diag_every");
            opt.dt_max = dt_max;
            opt.direct_mode_limit = static_cast<std::size_t>(cfg.integer("direct_mode_limit"));
            double bkm = 0.0, t_prev = 0.0, w_prev = 0.0;
            bool first = true;
            const auto s = run_transport(ts, opt, [&](const TransportState& st) {
                const EulerState es{*st.omega, st.t};
                const double wmax = st.omega->max_abs();
                if (!first) bkm += 0.5 * (st.t - t_prev) * (wmax + w_prev);
                first = false;
                t_prev = st.t;
                w_prev = wmax;
                const auto fm = snapshot(st.particles);
                const double weber = weber_residual(es, fm, u0);
                const double jac = jacobian_det(fm).max_abs_dev_from_1;
                add_row(es.omega, diagnose(es, powers, bkm), {weber, jac});
            });
            final_omega = *s.omega;
            final_t = s.t;
            append_eulb(particles, particle_frame(s.particles));
            out.blobs["particles.eulb"] = particles;
            out.summary.set("markers", markers);
            out.summary.set("weber_residual_final", diag.rows().back()[diag.columns().size() - 2]);
            out.summary.set("jacobian_dev_final", diag.rows().back().back());
        }
    } catch (...) {
        out.blobs["fields.eulb"] = fields;
        throw;
    }
    const auto u = biot_savart(final_omega);
    append_eulb(fields, field_frame(final_t, {&final_omega, &u.u1, &u.u2}));
    out.blobs["fields.eulb"] = fields;

    const auto& r0 = recs.front();
    double de = 0, dz = 0, tail = 0;
    std::vector<double> dc(powers.size(), 0.0);
    for (std::size_t i = 0; i < recs.size(); ++i) {
        de = std::max(de, rel_drift(recs[i].energy, r0.energy));
        dz = std::max(dz, rel_drift(recs[i].enstrophy, r0.enstrophy));
        for (std::size_t p = 0; p < powers.size(); ++p) dc[p] = std::max(dc[p], rel_drift(recs[i].casimirs[p], r0.casimirs[p]));
        tail = std::max(tail, diag.rows()[i][3 + powers.size() + 3]);
    }
    out.summary.set("final_time", final_t);
    out.summary.set("records", recs.size());
    out.summary.set("energy_drift", de);
    out.summary.set("enstrophy_drift", dz);
    for (std::size_t p = 0; p < powers.size(); ++p) out.summary.set("casimir_" + std::to_string(powers[p]) + "_drift", dc[p]);
    out.summary.set("omega_linf_change", (final_omega - omega0).max_abs());
    out.summary.set("bkm_final", recs.back().bkm_integral);
    out.summary.set("max_tail_fraction", tail);
}

// ---------------------------------------------------------------------------

inline void run_couette(const ExperimentConfig& cfg, RunArtifacts& out) {
    const auto modes = make_couette_modes(cfg.ic());
    std::vector<double> times{0.0};
    const auto ls = log_spaced(cfg.real("t_min"), cfg.real("t_end"), cfg.int_value("samples"));
    times.insert(times.end(), ls.begin(), ls.end());
    const auto series = couette_series(modes, times);
    CsvTable& t = out.table("couette.csv", {"t", "u1_l2", "u2_l2", "omega_h1", "shear_u1_l2", "shear_omega_h1", "u1_ratio", "u2_ratio"});
    const auto& n0 = series.front();
    auto ratio = [](double a, double b) { return b > 0.0 ? a / b : 0.0; };
    for (const auto& n : series)
        t.add_row({n.t, n.u1_l2, n.u2_l2, n.omega_h1, n.shear_u1_l2, n.shear_omega_h1, ratio(n.u1_l2, n0.u1_l2),
                   ratio(n.u2_l2, n0.u2_l2)});

    const auto fit_t = log_spaced(cfg.real("fit_t0"), cfg.real("fit_t1"), cfg.int_value("samples"));
    const auto fit = couette_series(modes, fit_t);
    std::vector<double> a, b;
    for (const auto& n : fit) {
        a.push_back(n.u1_l2);
        b.push_back(n.u2_l2);
    }
    out.summary.set("modes", modes.size());
    out.summary.set("u1_decay_exponent", loglog_fit_slope(fit_t, a));
    out.summary.set("u2_decay_exponent", loglog_fit_slope(fit_t, b));
    out.summary.set("omega_h1_final", series.back().omega_h1);
}

// ---------------------------------------------------------------------------

inline void run_passive_scalar(const ExperimentConfig& cfg, RunArtifacts& out) {
    const Grid2 g = grid_of(cfg);
    const auto flow = make_flow(g, cfg.flow());
    const auto f0 = make_scalar(g, cfg.ic());
    const double t_end = cfg.real("t_end");
    const double every = cfg.real("diag_every");

    if (f0) {
        if (!flow.grid_velocity) throw ConfigError("flow '" + cfg.str("flow") + "' cannot transport a scalar");
        const VectorField2& u = *flow.grid_velocity;
        // Test function of the pairing (u . grad f, phi).
        const auto phi = SpectralField2::from_function(g, [](double x, double y) { return std::cos(x) * std::cos(y) * std::cos(y); });
        CsvTable& mix = out.table("mixing.csv", {"t", "pairing", "scalar_l2"});
        TransportState s;
        s.velocity = u;
        s.scalars = {*f0};
        TransportRunOptions opt;
        opt.t_end = t_end;
        opt.cfl = cfg.real("cfl");
        opt.record_every = every;
        run_transport(s, opt, [&](const TransportState& cur) {
            mix.add_row({cur.t, transport_pairing(u, cur.scalars[0], phi), cur.scalars[0].l2_norm()});
        });
        const auto t = mix.column("t"), p = mix.column("pairing"), l2 = mix.column("scalar_l2");
        double drift = 0.0;
        for (double v : l2) drift = std::max(drift, rel_drift(v, l2.front()));
        out.summary.set("scalar_l2_drift", drift);
        if (t_end >= cfg.real("fit_t1"))
            out.summary.set("pairing_decay_exponent", envelope_decay_exponent(t, p, cfg.real("fit_t0"), cfg.real("fit_t1")));
        else
            out.summary.set("pairing_decay_exponent", "not fitted: t_end < fit_t1");
    }

    const int m = cfg.int_value("markers");
    if (m > 0) {
        const double lo = cfg.real("marker_y_lo"), hi = cfg.real("marker_y_hi");
        std::vector<std::array<double, 2>> pts;
        for (int j = 0; j < m; ++j) pts.push_back({0.0, lo + (hi - lo) * j / (m - 1)});
        std::vector<double> times;
        for (std::size_t k = 1; k * every < t_end * (1.0 + 1e-12); ++k) times.push_back(std::min(t_end, k * every));
        if (times.empty() || times.back() < t_end) times.push_back(t_end);
        const auto series = twisting_series(ParticleSet::from_points(pts, g.lx, g.ly), flow.at, times, cfg.real("marker_dt"));
        CsvTable& w = out.table("winding.csv", {"t", "spread", "integer_spread", "couette_reference"});
        w.add_row({0.0, 0.0, 0.0, 0.0});
        double ratio_min = std::numeric_limits<double>::infinity(), ratio_max = 0.0;
        for (const auto& r : series) {
            const double ref = r.t * (hi - lo) / g.lx;
            w.add_row({r.t, r.spread, r.integer_spread, ref});
            if (ref > 0.0) {
                ratio_min = std::min(ratio_min, r.spread / ref);
                ratio_max = std::max(ratio_max, r.spread / ref);
            }
        }
        out.summary.set("winding_spread_final", series.back().spread);
        out.summary.set("couette_reference_final", series.back().t * (hi - lo) / g.lx);
        if (hi > lo) {
            out.summary.set("spread_ratio_min", ratio_min);
            out.summary.set("spread_ratio_max", ratio_max);
        }
    }
}

// ---------------------------------------------------------------------------

inline void run_model(const ExperimentConfig& cfg, Model model, RunArtifacts& out) {
    const Grid1 g(cfg.int_value("n"));
    const auto w0 = make_line_field(g, cfg.ic());
    ModelRunOptions opt;
    opt.model = model;
    opt.t_end = cfg.real("t_end");
    opt.cfl = cfg.real("cfl");
    opt.dt_max = cfg.real("dt_max");
    opt.omega_cap = cfg.real("omega_cap");
    opt.tail_threshold = cfg.real("tail_threshold");
    opt.fit_fraction = cfg.real("fit_fraction");
    opt.advective_cfl = cfg.real("advective_cfl");
    opt.refine_sup = cfg.boolean("refine_sup");
    const bool compare = model == Model::clm && cfg.boolean("compare_exact");
    const double tol = model == Model::clm ? cfg.real("exact_tolerance") : 0.0;

    std::vector<std::string> cols{"t", "omega_max", "bkm", "tail_fraction"};
    if (compare) cols.push_back("exact_error");
    CsvTable& series = out.table("series.csv", cols);
    // Exact CLM solution 4 w0 / ((2 - t H w0)^2 + t^2 w0^2) on the grid.
    const double t_star = model == Model::clm ? clm_blowup_time(w0).t_star : 0.0;
    const RealVec w0p = w0.to_physical(), h0p = hilbert_transform(w0).to_physical();
    auto exact_error = [&](const ModelState& s) {
        if (s.t >= t_star) return std::numeric_limits<double>::quiet_NaN();
        const auto num = s.omega.to_physical();
        double e = 0.0;
        for (std::size_t i = 0; i < num.size(); ++i) {
            const double a = 2.0 - s.t * h0p[i], b = s.t * w0p[i];
            e = std::max(e, std::abs(num[i] - 4.0 * w0p[i] / (a * a + b * b)));
        }
        return e;
    };
    double bkm = 0.0, t_prev = 0.0, m_prev = 0.0;
    double agree_until = 0.0, err_max = 0.0;
    bool agreeing = true;
    auto add = [&](const ModelState& s, double sup) {
        if (!series.rows().empty()) bkm += 0.5 * (s.t - t_prev) * (sup + m_prev);
        t_prev = s.t;
        m_prev = sup;
        std::vector<double> row{s.t, sup, bkm, spectral_tail_fraction(s.omega)};
        if (compare) {
            const double e = exact_error(s);
            row.push_back(e);
            if (agreeing && e <= tol) agree_until = sup;
            else agreeing = false;
            if (sup <= opt.omega_cap) err_max = std::max(err_max, std::isnan(e) ? std::numeric_limits<double>::infinity() : e);
        }
        series.add_row(std::move(row));
    };
    add(ModelState{w0, 0.0, model}, opt.refine_sup ? refined_sup(w0) : w0.max_abs());
    const auto rep = model_run(w0, opt, add);

    std::string fin;
    EulbFrame fr{static_cast<std::uint32_t>(g.n), 1u, rep.final_state.t, {rep.final_state.omega.to_physical()}};
    append_eulb(fin, fr);
    out.blobs["final.eulb"] = fin;

    auto& s = out.summary;
    s.set("model", model_name(model));
    s.set("final_time", rep.final_state.t);
    s.set("steps", rep.times.size() - 1);
    s.set("omega_max_final", rep.omega_max_series.back());
    s.set("bkm_final", rep.bkm_series.back());
    s.set("cap_reached", rep.cap_reached);
    s.set("accelerating", rep.accelerating);
    s.set("blowup_detected", rep.detected);
    if (rep.t_star_estimate) s.set("t_star_estimate", *rep.t_star_estimate);
    s.set("x_star", rep.x_star);
    if (rep.x_star_limit) s.set("x_star_limit", *rep.x_star_limit);
    s.set("under_resolved", rep.under_resolved);
    if (rep.under_resolved) s.set("under_resolved_at", rep.under_resolved_at);
    if (model == Model::clm) {
        s.set("t_star_exact", t_star);
        if (rep.t_star_estimate && std::isfinite(t_star))
            s.set("t_star_relative_error", std::abs(*rep.t_star_estimate - t_star) / t_star);
    }
    const auto levels = cfg.real_list("bkm_levels");
    double prev = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t i = 0; i < levels.size(); ++i) {
        if (rep.omega_max_series.back() < levels[i]) {
            s.set("bkm_at_" + format_double(levels[i]), "not reached");
            prev = std::numeric_limits<double>::quiet_NaN();
            continue;
        }
        const double b = bkm_at_level(rep, levels[i]);
        s.set("bkm_at_" + format_double(levels[i]), b);
        if (i > 0 && !std::isnan(prev)) s.set("bkm_increment_" + format_double(levels[i - 1]) + "_" + format_double(levels[i]), b - prev);
        prev = b;
    }
    if (compare) {
        s.set("exact_error_max", err_max);
        s.set("exact_agreement_omega", agree_until);
    }
    if (rep.detected) {
        out.status = "completed: blow-up detected";
        out.exit_code = exit_blowup;
    }
}

// ---------------------------------------------------------------------------

inline void run_selfsim(const ExperimentConfig& cfg, RunArtifacts& out) {
    const LineGrid g(cfg.real("L"), cfg.int_value("n"));
    ProfileProblem pb;
    pb.L = cfg.real("L");
    pb.n = cfg.int_value("n");
    pb.slope_at_zero = cfg.real("slope_at_zero");
    pb.tail_threshold = cfg.real("tail_threshold");
    pb.tol = cfg.real("tol");
    pb.max_iterations = cfg.int_value("max_iterations");
    pb.odd = cfg.boolean("odd");
    const auto guess = make_profile(g.X(), cfg.ic());
    const auto sol = newton_solve(g, pb, guess.Omega, guess.lambda);

    const Eigen::VectorXd exact = exact_clm_profile(g.X());
    CsvTable& prof = out.table("profile.csv", {"X", "Omega", "Omega_exact", "initial_guess"});
    for (Eigen::Index i = 0; i < g.X().size(); ++i) prof.add_row({g.X()[i], sol.Omega[i], exact[i], guess.Omega[i]});
    CsvTable& res = out.table("residuals.csv", {"iteration", "residual"});
    for (std::size_t k = 0; k < sol.residual_history.size(); ++k) res.add_row({double(k), sol.residual_history[k]});

    auto& s = out.summary;
    s.set("lambda", sol.lambda);
    s.set("lambda_minus_one", sol.lambda - 1.0);
    s.set("residual_norm", sol.residual_norm);
    s.set("newton_iterations", sol.newton_iters);
    s.set("converged", sol.converged);
    s.set("solver_status", sol.status);
    s.set("exact_profile_deviation", (sol.Omega - exact).cwiseAbs().maxCoeff());
    if (!sol.converged) {
        out.status = "failed: " + sol.status;
        out.exit_code = exit_failure;
        return;
    }
    const double kd = scaling_kernel_defect(g, sol);
    const Eigen::VectorXd dir = g.X().cwiseProduct(g.derivative() * sol.Omega);
    s.set("scaling_kernel_defect", kd);
    s.set("scaling_kernel_defect_relative", kd / rms(dir));

    // Derivative check along an odd, decaying direction with a lambda component.
    const Eigen::VectorXd d = g.X().unaryExpr([](double x) { return x * std::exp(-x * x / 8); });
    const auto checks = frechet_check(g, sol.Omega, sol.lambda, d, 0.3, cfg.real_list("frechet_eps"));
    CsvTable& fc = out.table("frechet.csv", {"eps", "error"});
    for (std::size_t k = 0; k < checks.size(); ++k) {
        fc.add_row({checks[k].eps, checks[k].error});
        if (k > 0) s.set("frechet_order_" + std::to_string(k), std::log(checks[k - 1].error / checks[k].error) /
                                                                  std::log(checks[k - 1].eps / checks[k].eps));
    }
    const auto og = outgoing_check(g.X(), Eigen::VectorXd::Zero(g.X().size()), sol.lambda, cfg.real("outgoing_floor"));
    s.set("outgoing_constant", og.c_estimate);
    s.set("outgoing_certified", og.certified);
}

// ---------------------------------------------------------------------------

inline void run_lemma(const ExperimentConfig& cfg, RunArtifacts& out) {
    const auto op = make_lemma_operator(cfg.ic());
    const WeightedSpaceParams p{cfg.real("N"), cfg.real("delta")};
    LemmaGridOptions o;
    o.ratio = cfg.real("ratio");
    o.x_min = cfg.real("x_min");
    o.h_max = cfg.real("h_max");
    o.floor = cfg.real("floor");
    o.max_rank = cfg.int_value("max_rank");
    try {
        check_lemma_hypotheses(op.u, op.g, p, o);
    } catch (const PreconditionError& e) {
        throw ConfigError(std::string("operator rejected: ") + e.what(), cfg.entry("ic").line);
    }
    const auto d = lemma_decomposition_check(op.u, op.g, p, o);
    const Eigen::MatrixXd S = 0.5 * (d.assembled + d.assembled.transpose());
    const Eigen::MatrixXd Sc = 0.5 * (d.coercive_part + d.coercive_part.transpose());
    const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(S, Eigen::EigenvaluesOnly).eigenvalues();
    const Eigen::VectorXd evc = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(Sc, Eigen::EigenvaluesOnly).eigenvalues();
    CsvTable& sp = out.table("spectrum.csv", {"index", "assembled", "coercive_part"});
    for (Eigen::Index i = 0; i < ev.size(); ++i) sp.add_row({double(i), ev[i], evc[i]});

    auto& s = out.summary;
    s.set("certified", d.certified);
    s.set("inner_ratio", d.inner_ratio);
    s.set("inner_pointwise", d.inner_pointwise);
    s.set("rank", d.rank);
    s.set("c_coercivity", d.c_coercivity);
    s.set("raw_min_eigenvalue", d.raw_min_eigenvalue);
    s.set("grid_points", static_cast<std::size_t>(d.x.size()));
    s.set("split_defect", (d.coercive_part + d.finite_rank_part() - d.assembled).cwiseAbs().maxCoeff());
    if (!d.certified) {
        out.status = "failed: decomposition not certified";
        out.exit_code = exit_failure;
    }
}

// ---------------------------------------------------------------------------

inline void run_ipm(const ExperimentConfig& cfg, RunArtifacts& out) {
    const Grid2 g = grid_of(cfg);
    const IpmState s0 = make_density(g, cfg.ic());
    IpmRunOptions opt;
    opt.t_end = cfg.real("t_end");
    opt.cfl = cfg.real("cfl");
    opt.diag_every = cfg.real("diag_every");
    opt.dt_max = cfg.real("dt_max");
    opt.tail_threshold = cfg.real("tail_threshold");
    CsvTable& t = out.table("ipm.csv", {"t", "grad_max", "potential", "mass", "rho2", "rho4", "u_max", "tail_fraction", "resolved"});
    std::string fields;
    {
        const auto u0 = s0.velocity();
        append_eulb(fields, EulbFrame{static_cast<std::uint32_t>(g.nx), static_cast<std::uint32_t>(g.ny), 0.0,
                                      {s0.total_density(), u0.u1.to_physical(), u0.u2.to_physical()}});
    }
    IpmRunResult res;
    try {
        res = ipm_run(s0, opt, [&](const IpmState&, const IpmRecord& r) {
            t.add_row({r.t, r.grad_max, r.potential, r.mass, r.rho2, r.rho4, r.u_max, r.tail_fraction, r.resolved ? 1.0 : 0.0});
        });
    } catch (...) {
        out.blobs["fields.eulb"] = fields;
        throw;
    }
    const auto& fs = res.final_state;
    const auto u = fs.velocity();
    append_eulb(fields, EulbFrame{static_cast<std::uint32_t>(g.nx), static_cast<std::uint32_t>(g.ny), fs.t,
                                  {fs.total_density(), u.u1.to_physical(), u.u2.to_physical()}});
    out.blobs["fields.eulb"] = fields;

    std::vector<double> tt, ep, gm;
    double rho2_drift = 0.0, rho4_drift = 0.0;
    const auto& r0 = res.records.front();
    for (const auto& r : res.records) {
        if (r.t > res.resolved_until) break;
        tt.push_back(r.t);
        ep.push_back(r.potential);
        gm.push_back(r.grad_max);
        rho2_drift = std::max(rho2_drift, rel_drift(r.rho2, r0.rho2));
        rho4_drift = std::max(rho4_drift, rel_drift(r.rho4, r0.rho4));
    }
    bool monotone = gm.size() >= 2;
    for (std::size_t i = 1; i < gm.size(); ++i) monotone = monotone && gm[i] > gm[i - 1];
    auto& s = out.summary;
    s.set("final_time", fs.t);
    s.set("under_resolved", res.under_resolved);
    s.set("resolved_until", res.resolved_until);
    s.set("resolved_records", tt.size());
    s.set("grad_monotone_increasing", monotone);
    s.set("grad_growth_factor", gm.back() / gm.front());
    s.set("max_deviation", max_abs_difference(fs.total_density(), s0.total_density()));
    s.set("potential_change", ep.back() - ep.front());
    s.set("rho2_drift", rho2_drift);
    s.set("rho4_drift", rho4_drift);
    const std::size_t w = static_cast<std::size_t>(cfg.integer("trend_window"));
    if (tt.size() >= 2) s.set("potential_trend", trend_slope(tt, ep));
    if (tt.size() >= w) {
        const auto sl = windowed_slopes(tt, ep, w);
        s.set("potential_window_slope_max", *std::max_element(sl.begin(), sl.end()));
    }
}

}  // namespace detail

/// Runs `cfg` in memory. Never throws; failures are reported through the
/// status, exit code and error of the returned artifacts.
inline RunArtifacts execute(const ExperimentConfig& cfg) {
    RunArtifacts out;
    try {
        const std::string& s = cfg.system;
        if (s == "euler2d") detail::run_euler2d(cfg, out);
        else if (s == "couette_linear") detail::run_couette(cfg, out);
        else if (s == "passive_scalar") detail::run_passive_scalar(cfg, out);
        else if (s == "clm") detail::run_model(cfg, Model::clm, out);
        else if (s == "degregorio") detail::run_model(cfg, Model::degregorio, out);
        else if (s == "selfsim") detail::run_selfsim(cfg, out);
        else if (s == "lemma_check") detail::run_lemma(cfg, out);
        else if (s == "ipm") detail::run_ipm(cfg, out);
        else throw ConfigError("unknown system '" + s + "'");
    } catch (const ConfigError& e) {
        out.status = "failed: config error";
        out.exit_code = exit_config;
        out.error = e.what();
    } catch (const NumericalError& e) {
        out.status = "failed: numerical error";
        out.exit_code = exit_failure;
        out.error = e.what();
    } catch (const std::exception& e) {
        out.status = "failed: runner error";
        out.exit_code = exit_failure;
        out.error = e.what();
    }
    return out;
}

inline std::string utc_timestamp(std::chrono::system_clock::time_point tp) {
    const std::time_t tt = std::chrono::system_clock::to_time_t(tp);
    std::tm tm{};
    gmtime_r(&tt, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

struct RunOutcome {
    RunArtifacts artifacts;
    std::filesystem::path dir;
    KeyValues manifest;
};

/// Executes `cfg` and commits its files to `dir`, manifest.txt last. A failed
/// run still gets a manifest listing whatever it produced.
inline RunOutcome run_and_write(const ExperimentConfig& cfg, const std::filesystem::path& dir) {
    const auto wall0 = std::chrono::system_clock::now();
    const auto mono0 = std::chrono::steady_clock::now();
    RunOutcome r{execute(cfg), dir, {}};
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - mono0).count();
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw LabError("cannot create output directory " + dir.string() + ": " + ec.message());

    KeyValues& m = r.manifest;
    m.set("status", r.artifacts.status);
    m.set("exit_code", r.artifacts.exit_code);
    m.set("error", r.artifacts.error);
    m.set("version", kLabVersion);
    m.set("system", cfg.system);
    m.set("started_utc", utc_timestamp(wall0));
    m.set("finished_utc", utc_timestamp(std::chrono::system_clock::now()));
    m.set("wall_seconds", wall);
    std::string canon = cfg.canonical();
    for (std::size_t pos = 0; pos < canon.size();) {
        const auto nl = canon.find('\n', pos);
        const std::string line = canon.substr(pos, nl - pos);
        const auto eq = line.find(" = ");
        m.set("config." + line.substr(0, eq), line.substr(eq + 3));
        pos = nl + 1;
    }
    for (const auto& [name, data] : r.artifacts.files()) {
        atomic_write(dir / name, data);
        m.set("file." + name + ".sha256", sha256_hex(data));
        m.set("file." + name + ".bytes", data.size());
    }
    atomic_write(dir / "manifest.txt", m.str());
    return r;
}

/// Checks every file listed in a manifest against the bytes on disk.
inline bool verify_manifest(const std::filesystem::path& dir, std::string* problem = nullptr) {
    const std::string text = read_file(dir / "manifest.txt");
    std::size_t files = 0;
    for (std::size_t pos = 0; pos < text.size();) {
        const auto nl = text.find('\n', pos);
        const std::string line = text.substr(pos, nl - pos);
        pos = nl == std::string::npos ? text.size() : nl + 1;
        const std::string suffix = ".sha256";
        if (line.rfind("file.", 0) != 0) continue;
        const auto eq = line.find(" = ");
        const std::string key = line.substr(0, eq);
        if (key.size() < suffix.size() || key.compare(key.size() - suffix.size(), suffix.size(), suffix) != 0) continue;
        const std::string name = key.substr(5, key.size() - 5 - suffix.size());
        ++files;
        std::string data;
        try {
            data = read_file(dir / name);
        } catch (const LabError&) {
            if (problem) *problem = "missing file " + name;
            return false;
        }
        if (sha256_hex(data) != line.substr(eq + 3)) {
            if (problem) *problem = "checksum mismatch for " + name;
            return false;
        }
    }
    if (files == 0 && problem) *problem = "manifest lists no files";
    return files > 0;
}

}  // namespace eulerlab
