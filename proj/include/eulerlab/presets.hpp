#pragma once

// Named initial data and flows. Every builder is a pure function of
// (name, parameters, seed); random presets draw from mt19937_64 with an
// explicit bit-to-double map, so fields are identical across platforms.

#include "eulerlab/couette.hpp"
#include "eulerlab/errors.hpp"
#include "eulerlab/ipm2d.hpp"
#include "eulerlab/lagrangian.hpp"
#include "eulerlab/selfsim.hpp"
#include "eulerlab/spectral.hpp"
#include "eulerlab/spectral1d.hpp"

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <string>
#include <vector>

namespace eulerlab {

enum class PresetKind { vorticity, density, scalar, flow, line_field, couette_modes, profile, lemma_operator };

inline const char* preset_kind_name(PresetKind k) {
    switch (k) {
        case PresetKind::vorticity: return "vorticity";
        case PresetKind::density: return "density";
        case PresetKind::scalar: return "scalar";
        case PresetKind::flow: return "flow";
        case PresetKind::line_field: return "line field";
        case PresetKind::couette_modes: return "Couette modes";
        case PresetKind::profile: return "profile guess";
        case PresetKind::lemma_operator: return "transport operator";
    }
    return "?";
}

struct PresetParam {
    std::string name;
    double default_value = 0.0;
    bool integer = false;
    std::string doc;
};

struct PresetInfo {
    std::string name;
    PresetKind kind;
    std::vector<PresetParam> params;
    std::string doc;

    const PresetParam* param(const std::string& p) const {
        for (const auto& q : params)
            if (q.name == p) return &q;
        return nullptr;
    }
};

inline const std::vector<PresetInfo>& preset_registry() {
    using K = PresetKind;
    static const std::vector<PresetInfo> reg = {
        {"taylor_green", K::vorticity, {{"amplitude", 1.0, false, "A"}}, "omega = -2 A cos x cos y (steady)"},
        {"perturbed_taylor_green", K::vorticity, {{"epsilon", 0.05, false, "perturbation size"}},
         "omega = -2 cos x cos y + epsilon (cos(2x + y) + sin(x - 3y))"},
        {"shear", K::vorticity, {{"amplitude", 1.0, false, "A"}}, "u = (A sin y, 0), omega = -A cos y (steady)"},
        {"random_bandlimited", K::vorticity,
         {{"kmax", 8, true, "modes with |kx|, |ky| <= kmax"}, {"rms", 0.0, false, "rescale to this rms (0 keeps raw)"}},
         "mean-free random Fourier coefficients, uniform in [-1, 1]"},

        {"heavy_over_light", K::density, {{"epsilon", 1e-2, false, "perturbation size"}, {"amplitude", 1.0, false, "A"}},
         "rho = -A sin y + epsilon cos x: y-odd, heavy over light around y = pi"},
        {"light_over_heavy", K::density, {{"epsilon", 1e-2, false, "perturbation size"}, {"gradient", 1.0, false, "G"}},
         "rho = -G (y - pi) + epsilon cos x: stably stratified everywhere"},
        {"stratified", K::density, {{"amplitude", 1.0, false, "A"}, {"gradient", 0.0, false, "G"}},
         "rho = -A sin y + 0.3 A cos 2y + G (y - pi): depends on y only (rest state)"},
        {"random_bandlimited", K::density,
         {{"kmax", 4, true, "modes with |kx|, |ky| <= kmax"},
          {"rms", 0.02, false, "rescale to this rms (0 keeps raw)"},
          {"mean", 0.0, false, "added constant"}},
         "random periodic density"},

        {"none", K::scalar, {}, "no scalar"},
        {"cos_x", K::scalar, {{"amplitude", 1.0, false, "A"}}, "f = A cos x"},
        {"random_bandlimited", K::scalar,
         {{"kmax", 4, true, "modes with |kx|, |ky| <= kmax"}, {"rms", 0.0, false, "rescale to this rms (0 keeps raw)"}},
         "random mean-free scalar"},

        {"shear_sine", K::flow, {{"amplitude", 1.0, false, "A"}}, "u = (A sin y, 0)"},
        {"rigid", K::flow, {{"speed", 1.0, false, "c"}}, "u = (c, 0): every orbit has period lx / c"},
        {"taylor_green", K::flow, {}, "u = (cos x sin y, -sin x cos y)"},
        {"couette", K::flow, {}, "u = (y, 0) with y in [0, ly); markers only"},
        {"couette_perturbed", K::flow, {{"epsilon", 0.1, false, "L2 size of the perturbation"}},
         "u = (y, 0) + curl-free-at-walls cell flow grad-perp(a sin x sin y), |u - (y, 0)|_L2 = epsilon"},

        {"clm_cosine", K::line_field, {{"amplitude", 1.0, false, "A"}}, "omega = A cos x (CLM blow-up at t = 2 / A)"},
        {"sine", K::line_field, {{"amplitude", 1.0, false, "A"}}, "omega = A sin x"},
        {"random_bandlimited", K::line_field,
         {{"kmax", 4, true, "modes 1..kmax"}, {"rms", 0.0, false, "rescale to this rms (0 keeps raw)"}},
         "random mean-free 1D field"},

        {"couette_mode", K::couette_modes,
         {{"kx", 1.0, false, "horizontal wavenumber"}, {"eta0", 0.0, false, "initial vertical frequency"},
          {"amplitude", 1.0, false, "A"}},
         "single Fourier mode of the vorticity perturbation"},
        {"random_bandlimited", K::couette_modes,
         {{"kmax", 4, true, "|kx| in 1..kmax"}, {"eta_max", 1.0, false, "|eta0| <= eta_max"},
          {"modes", 8, true, "number of modes"}},
         "random modes with no kx = 0 content"},

        {"perturbed_profile", K::profile, {{"epsilon", 0.05, false, "size"}, {"lambda", 1.05, false, "initial lambda"}},
         "Omega = -4X/(1+4X^2) + epsilon e^{-X^2/4} sin 3X"},
        {"odd_gaussian", K::profile, {{"amplitude", -4.0, false, "a"}, {"lambda", 1.0, false, "initial lambda"}},
         "Omega = a X e^{-X^2}"},

        {"lemma_model", K::lemma_operator,
         {{"u_scale", 1.0, false, "a"}, {"u_offset", 0.0, false, "b"}, {"g", 1.0, false, "constant g"}},
         "u = a x (1 - x) + b x, g constant"},
    };
    return reg;
}

inline const PresetInfo* find_preset(const std::string& name, PresetKind kind) {
    for (const auto& p : preset_registry())
        if (p.name == name && p.kind == kind) return &p;
    return nullptr;
}

/// A preset selected in a config: its name, parameters with defaults filled, and the run seed.
struct PresetChoice {
    std::string name;
    PresetKind kind = PresetKind::vorticity;
    std::map<std::string, double> params;
    std::uint64_t seed = 0;

    double operator[](const std::string& p) const {
        const auto it = params.find(p);
        if (it == params.end()) throw ConfigError("preset " + name + " has no parameter " + p);
        return it->second;
    }
};

inline PresetChoice make_choice(const std::string& name, PresetKind kind, std::map<std::string, double> overrides = {},
                                std::uint64_t seed = 0) {
    const PresetInfo* info = find_preset(name, kind);
    if (!info) throw ConfigError("unknown " + std::string(preset_kind_name(kind)) + " preset '" + name + "'");
    PresetChoice c{name, kind, {}, seed};
    for (const auto& p : info->params) c.params[p.name] = p.default_value;
    for (const auto& [k, v] : overrides) {
        if (!info->param(k)) throw ConfigError("preset " + name + " has no parameter '" + k + "'");
        c.params[k] = v;
    }
    return c;
}

namespace detail {

/// Uniform in [-1, 1) from the top 53 bits.
inline double unit_symmetric(std::mt19937_64& rng) {
    return 2.0 * static_cast<double>(rng() >> 11) * 0x1.0p-53 - 1.0;
}

inline SpectralField2 random_bandlimited2(const Grid2& g, std::uint64_t seed, int kmax, double rms) {
    if (kmax < 1) throw ConfigError("random_bandlimited needs kmax >= 1");
    if (3 * kmax > std::min(g.nx, g.ny)) throw ConfigError("random_bandlimited kmax exceeds the dealiased band of the grid");
    std::mt19937_64 rng(seed);
    SpectralField2 f(g);
    for (int mx = -kmax; mx <= kmax; ++mx)
        for (int my = 0; my <= kmax; ++my) {
            if (mx == 0 && my == 0) continue;
            const int ix = mx >= 0 ? mx : g.nx + mx;
            const double re = unit_symmetric(rng), im = unit_symmetric(rng);
            f(ix, my) = cplx{re, im};
        }
    f = symmetrize(f);
    f(0, 0) = cplx{};
    if (rms > 0.0) f *= rms / f.rms();
    return f;
}

}  // namespace detail

inline SpectralField2 make_vorticity(const Grid2& g, const PresetChoice& c) {
    if (c.name == "taylor_green") {
        const double a = c["amplitude"];
        return SpectralField2::from_function(g, [a](double x, double y) { return -2.0 * a * std::cos(x) * std::cos(y); });
    }
    if (c.name == "perturbed_taylor_green") {
        const double e = c["epsilon"];
        return SpectralField2::from_function(g, [e](double x, double y) {
            return -2.0 * std::cos(x) * std::cos(y) + e * (std::cos(2 * x + y) + std::sin(x - 3 * y));
        });
    }
    if (c.name == "shear") {
        const double a = c["amplitude"];
        return SpectralField2::from_function(g, [a](double, double y) { return -a * std::cos(y); });
    }
    if (c.name == "random_bandlimited")
        return detail::random_bandlimited2(g, c.seed, static_cast<int>(c["kmax"]), c["rms"]);
    throw ConfigError("unknown vorticity preset '" + c.name + "'");
}

inline IpmState make_density(const Grid2& g, const PresetChoice& c) {
    if (c.name == "heavy_over_light") {
        const double e = c["epsilon"], a = c["amplitude"];
        return {SpectralField2::from_function(g, [e, a](double x, double y) { return -a * std::sin(y) + e * std::cos(x); }), 0.0, 0.0};
    }
    if (c.name == "light_over_heavy") {
        const double e = c["epsilon"];
        return {SpectralField2::from_function(g, [e](double x, double) { return e * std::cos(x); }), -c["gradient"], 0.0};
    }
    if (c.name == "stratified") {
        const double a = c["amplitude"];
        return {SpectralField2::from_function(g, [a](double, double y) { return -a * std::sin(y) + 0.3 * a * std::cos(2 * y); }),
                c["gradient"], 0.0};
    }
    if (c.name == "random_bandlimited") {
        IpmState s{detail::random_bandlimited2(g, c.seed, static_cast<int>(c["kmax"]), c["rms"]), 0.0, 0.0};
        s.rho(0, 0) = cplx{c["mean"], 0.0};
        return s;
    }
    throw ConfigError("unknown density preset '" + c.name + "'");
}

inline std::optional<SpectralField2> make_scalar(const Grid2& g, const PresetChoice& c) {
    if (c.name == "none") return std::nullopt;
    if (c.name == "cos_x") {
        const double a = c["amplitude"];
        return SpectralField2::from_function(g, [a](double x, double) { return a * std::cos(x); });
    }
    if (c.name == "random_bandlimited")
        return detail::random_bandlimited2(g, c.seed, static_cast<int>(c["kmax"]), c["rms"]);
    throw ConfigError("unknown scalar preset '" + c.name + "'");
}

struct FlowField {
    std::function<std::array<double, 2>(double, double, double)> at;  // (t, x, y), x and y wrapped
    std::optional<VectorField2> grid_velocity;  // absent when the flow is not periodic
};

inline FlowField make_flow(const Grid2& g, const PresetChoice& c) {
    using V = std::array<double, 2>;
    FlowField f;
    auto sample = [&](auto&& fn) {
        return VectorField2{SpectralField2::from_function(g, [&](double x, double y) { return fn(0.0, x, y)[0]; }),
                            SpectralField2::from_function(g, [&](double x, double y) { return fn(0.0, x, y)[1]; })};
    };
    if (c.name == "shear_sine") {
        const double a = c["amplitude"];
        f.at = [a](double, double, double y) { return V{a * std::sin(y), 0.0}; };
    } else if (c.name == "rigid") {
        const double s = c["speed"];
        f.at = [s](double, double, double) { return V{s, 0.0}; };
    } else if (c.name == "taylor_green") {
        f.at = [](double, double x, double y) { return V{std::cos(x) * std::sin(y), -std::sin(x) * std::cos(y)}; };
    } else if (c.name == "couette") {
        f.at = [](double, double, double y) { return V{y, 0.0}; };
        return f;
    } else if (c.name == "couette_perturbed") {
        // psi = a sin x sin y keeps y = 0 and y = pi invariant; |grad-perp psi|_L2 = sqrt(2) pi a.
        const double a = c["epsilon"] / (std::numbers::pi * std::sqrt(2.0));
        f.at = [a](double, double x, double y) {
            return V{y - a * std::sin(x) * std::cos(y), a * std::cos(x) * std::sin(y)};
        };
        return f;
    } else {
        throw ConfigError("unknown flow preset '" + c.name + "'");
    }
    f.grid_velocity = sample(f.at);
    return f;
}

inline SpectralField1 make_line_field(const Grid1& g, const PresetChoice& c) {
    if (c.name == "clm_cosine") {
        const double a = c["amplitude"];
        return SpectralField1::from_function(g, [a](double x) { return a * std::cos(x); });
    }
    if (c.name == "sine") {
        const double a = c["amplitude"];
        return SpectralField1::from_function(g, [a](double x) { return a * std::sin(x); });
    }
    if (c.name == "random_bandlimited") {
        const int kmax = static_cast<int>(c["kmax"]);
        if (kmax < 1 || 3 * kmax > g.n) throw ConfigError("random_bandlimited kmax out of range for the grid");
        std::mt19937_64 rng(c.seed);
        SpectralField1 f(g);
        for (int k = 1; k <= kmax; ++k) {
            const double re = detail::unit_symmetric(rng), im = detail::unit_symmetric(rng);
            f[k] = cplx{re, im};
        }
        if (c["rms"] > 0.0) {
            double s = 0.0;
            for (int k = 1; k <= kmax; ++k) s += 2.0 * std::norm(f[k]);
            const double scale = c["rms"] / std::sqrt(s);
            for (int k = 1; k <= kmax; ++k) f[k] *= scale;
        }
        return f;
    }
    throw ConfigError("unknown line-field preset '" + c.name + "'");
}

inline std::vector<CouetteMode> make_couette_modes(const PresetChoice& c) {
    if (c.name == "couette_mode") return {{c["kx"], c["eta0"], c["amplitude"]}};
    if (c.name == "random_bandlimited") {
        const int kmax = static_cast<int>(c["kmax"]), n = static_cast<int>(c["modes"]);
        if (kmax < 1 || n < 1) throw ConfigError("random_bandlimited needs kmax >= 1 and modes >= 1");
        std::mt19937_64 rng(c.seed);
        std::vector<CouetteMode> m;
        for (int i = 0; i < n; ++i) {
            const int k = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(kmax));
            const double eta = c["eta_max"] * detail::unit_symmetric(rng);
            const double amp = detail::unit_symmetric(rng);
            m.push_back({double(i % 2 ? k : -k), eta, amp});
        }
        return m;
    }
    throw ConfigError("unknown Couette-mode preset '" + c.name + "'");
}

struct ProfileGuess {
    Eigen::VectorXd Omega;
    double lambda = 1.0;
};

inline ProfileGuess make_profile(const Eigen::VectorXd& X, const PresetChoice& c) {
    if (c.name == "perturbed_profile") {
        const double e = c["epsilon"];
        Eigen::VectorXd w = exact_clm_profile(X) + X.unaryExpr([e](double x) { return e * std::exp(-x * x / 4) * std::sin(3 * x); });
        return {w, c["lambda"]};
    }
    if (c.name == "odd_gaussian") {
        const double a = c["amplitude"];
        return {X.unaryExpr([a](double x) { return a * x * std::exp(-x * x); }), c["lambda"]};
    }
    throw ConfigError("unknown profile preset '" + c.name + "'");
}

struct TransportOperator {
    std::function<double(double)> u, g;
};

inline TransportOperator make_lemma_operator(const PresetChoice& c) {
    if (c.name == "lemma_model") {
        const double a = c["u_scale"], b = c["u_offset"], gv = c["g"];
        return {[a, b](double x) { return a * x * (1.0 - x) + b * x; }, [gv](double) { return gv; }};
    }
    throw ConfigError("unknown operator preset '" + c.name + "'");
}

}  // namespace eulerlab
