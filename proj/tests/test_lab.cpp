#include "eulerlab/config.hpp"
#include "eulerlab/io.hpp"
#include "eulerlab/lab.hpp"
#include "eulerlab/presets.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <numbers>
#include <random>

using namespace eulerlab;
namespace fs = std::filesystem;

namespace {

const double pi = std::numbers::pi;

std::string config_error(const std::string& text) {
    try {
        parse_config(text);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

fs::path scratch_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("eulerlab_test_" + name + "_" + std::to_string(::getpid()));
    fs::remove_all(p);
    return p;
}

const char* kMinimalEuler = "system = euler2d\nnx = 32\nic = taylor_green\nt_end = 0.5\n";

}  // namespace

// ---------------------------------------------------------------------------
// io

TEST(Sha256, KnownVectors) {
    EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST(FormatDouble, RoundTripsExactly) {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 2000; ++i) {
        std::uint64_t bits = rng();
        double v;
        std::memcpy(&v, &bits, 8);
        if (!std::isfinite(v)) continue;
        EXPECT_EQ(std::strtod(format_double(v).c_str(), nullptr), v);
    }
    EXPECT_EQ(format_double(0.1), "0.10000000000000001");
    EXPECT_EQ(format_double(2.0), "2");
    EXPECT_EQ(format_double(std::numeric_limits<double>::infinity()), "inf");
    EXPECT_EQ(format_double(std::nan("")), "nan");
}

TEST(Eulb, HeaderLayoutAndRoundTrip) {
    EulbFrame a{3, 2, 0.25, {RealVec{1, 2, 3, 4, 5, 6}, RealVec{-1, 0, 1e300, 1e-300, 7, 8}}};
    EulbFrame b{2, 2, 1.5, {RealVec{9, 8, 7, 6}}};
    std::string bytes;
    append_eulb(bytes, a);
    append_eulb(bytes, b);
    ASSERT_EQ(bytes.size(), 32 + 2 * 6 * 8 + 32 + 4 * 8u);
    EXPECT_EQ(bytes.substr(0, 4), "EULB");
    std::uint32_t u[5];
    std::memcpy(u, bytes.data() + 4, sizeof u);
    EXPECT_EQ(u[0], 1u);
    EXPECT_EQ(u[1], 3u);
    EXPECT_EQ(u[2], 2u);
    EXPECT_EQ(u[3], 2u);
    EXPECT_EQ(u[4], 0u);
    double t;
    std::memcpy(&t, bytes.data() + 24, 8);
    EXPECT_EQ(t, 0.25);
    double first;
    std::memcpy(&first, bytes.data() + 32, 8);
    EXPECT_EQ(first, 1.0);

    const auto frames = decode_eulb(bytes);
    ASSERT_EQ(frames.size(), 2u);
    EXPECT_EQ(frames[0].time, 0.25);
    EXPECT_EQ(frames[0].blocks[1], a.blocks[1]);
    EXPECT_EQ(frames[1].nx, 2u);
    EXPECT_EQ(frames[1].blocks[0], b.blocks[0]);

    EXPECT_THROW(decode_eulb(bytes.substr(0, bytes.size() - 1)), LabError);
    EXPECT_THROW(decode_eulb(std::string("EULC") + bytes.substr(4)), LabError);
    EXPECT_THROW(append_eulb(bytes, EulbFrame{2, 2, 0.0, {RealVec{1, 2, 3}}}), PreconditionError);
}

TEST(CsvTable, HeaderRowsAndColumns) {
    CsvTable t({"t", "value"});
    t.add_row({0.0, 0.1});
    t.add_row({1.0, -2.5});
    EXPECT_EQ(t.str(), "t,value\n0,0.10000000000000001\n1,-2.5\n");
    EXPECT_EQ(t.column("value"), (std::vector<double>{0.1, -2.5}));
    EXPECT_THROW(t.column("missing"), LabError);
    EXPECT_THROW(t.add_row({1.0}), PreconditionError);
}

TEST(KeyValues, OrderAndOverwrite) {
    KeyValues kv;
    kv.set("b", 1);
    kv.set("a", true);
    kv.set("b", 0.5);
    EXPECT_EQ(kv.str(), "b = 0.5\na = true\n");
    EXPECT_EQ(kv.number("b"), 0.5);
    EXPECT_EQ(kv.find("c"), nullptr);
}

TEST(AtomicWrite, ReplacesContentAndLeavesNoTemporaries) {
    const auto dir = scratch_dir("atomic");
    fs::create_directories(dir);
    atomic_write(dir / "f.txt", "first");
    atomic_write(dir / "f.txt", "second");
    EXPECT_EQ(read_file(dir / "f.txt"), "second");
    int n = 0;
    for (const auto& e : fs::directory_iterator(dir)) {
        (void)e;
        ++n;
    }
    EXPECT_EQ(n, 1);
    EXPECT_THROW(atomic_write(dir / "missing_subdir" / "g.txt", "x"), LabError);
    fs::remove_all(dir);
}

// ---------------------------------------------------------------------------
// config

TEST(ParseConfig, MinimalEulerConfigGetsDefaults) {
    const auto cfg = parse_config(kMinimalEuler);
    EXPECT_EQ(cfg.system, "euler2d");
    EXPECT_EQ(cfg.int_value("nx"), 32);
    EXPECT_EQ(cfg.int_value("ny"), 32);
    EXPECT_EQ(cfg.real("cfl"), 0.4);
    EXPECT_EQ(cfg.real("diag_every"), 0.1);
    EXPECT_EQ(cfg.int_list("casimirs"), (std::vector<int>{2, 4}));
    EXPECT_EQ(cfg.output_dir(), "out");
    EXPECT_EQ(cfg.seed(), 0u);
    EXPECT_EQ(cfg.int_value("markers"), 0);
    EXPECT_TRUE(cfg.is_default("cfl"));
    EXPECT_FALSE(cfg.is_default("nx"));
    const auto ic = cfg.ic();
    EXPECT_EQ(ic.name, "taylor_green");
    EXPECT_EQ(ic["amplitude"], 1.0);
}

TEST(ParseConfig, CommentsBlankLinesAndWhitespace) {
    const auto cfg = parse_config("# header\n\n  system=euler2d   # trailing\nnx = 16\r\nic = shear\nic.amplitude = 2\nt_end = 1\n");
    EXPECT_EQ(cfg.int_value("nx"), 16);
    EXPECT_EQ(cfg.ic()["amplitude"], 2.0);
}

TEST(ParseConfig, UnknownKeyNamesKeyAndLine) {
    const auto msg = config_error("system = euler2d\nnx = 32\nviscosity = 0.01\nic = taylor_green\nt_end = 1\n");
    EXPECT_NE(msg.find("line 3"), std::string::npos) << msg;
    EXPECT_NE(msg.find("unknown key 'viscosity'"), std::string::npos) << msg;
}

TEST(ParseConfig, DuplicateKey) {
    const auto msg = config_error("system = euler2d\nnx = 32\nnx = 64\n");
    EXPECT_NE(msg.find("line 3"), std::string::npos) << msg;
    EXPECT_NE(msg.find("duplicate key 'nx'"), std::string::npos) << msg;
    EXPECT_NE(msg.find("first set on line 2"), std::string::npos) << msg;
}

TEST(ParseConfig, TypeMismatchNamesLine) {
    auto msg = config_error("system = euler2d\nnx = thirty\nic = taylor_green\nt_end = 1\n");
    EXPECT_NE(msg.find("line 2"), std::string::npos) << msg;
    EXPECT_NE(msg.find("must be an integer"), std::string::npos) << msg;
    msg = config_error("system = clm\nn = 64\nic = sine\nrefine_sup = yes\n");
    EXPECT_NE(msg.find("line 4"), std::string::npos) << msg;
    msg = config_error("system = euler2d\nnx = 32\nic = taylor_green\nt_end = 1\ncasimirs = 2,x\n");
    EXPECT_NE(msg.find("line 5"), std::string::npos) << msg;
    msg = config_error("system = euler2d\nnx = 32\nic = taylor_green\nt_end = 1\nseed = -3\n");
    EXPECT_NE(msg.find("line 5"), std::string::npos) << msg;
}

TEST(ParseConfig, MissingKeys) {
    auto msg = config_error("system = euler2d\nnx = 32\nic = taylor_green\n");
    EXPECT_NE(msg.find("missing required key 't_end'"), std::string::npos) << msg;
    EXPECT_NE(msg.find("line 1"), std::string::npos) << msg;
    msg = config_error("nx = 32\n");
    EXPECT_NE(msg.find("missing required key 'system'"), std::string::npos) << msg;
}

TEST(ParseConfig, BadLinesSystemsAndRanges) {
    EXPECT_NE(config_error("system = euler2d\njust words\n").find("line 2"), std::string::npos);
    EXPECT_NE(config_error("system = euler2d\nnx =\n").find("line 2"), std::string::npos);
    EXPECT_NE(config_error("system = navier_stokes\n").find("unknown system"), std::string::npos);
    EXPECT_NE(config_error("system = euler2d\nnx = 31\nic = shear\nt_end = 1\n").find("even integer"), std::string::npos);
    EXPECT_NE(config_error("system = euler2d\nnx = 32\nic = shear\nt_end = 1\ncfl = 0.9\n").find("line 5"), std::string::npos);
    EXPECT_NE(config_error("system = euler2d\nnx = 32\nic = shear\nt_end = -1\n").find("non-negative"), std::string::npos);
}

TEST(ParseConfig, PresetNamesAndParameters) {
    auto msg = config_error("system = euler2d\nnx = 32\nic = vortex_sheet\nt_end = 1\n");
    EXPECT_NE(msg.find("unknown vorticity preset 'vortex_sheet'"), std::string::npos) << msg;
    EXPECT_NE(msg.find("line 3"), std::string::npos) << msg;
    msg = config_error("system = euler2d\nnx = 32\nic = taylor_green\nic.epsilon = 2\nt_end = 1\n");
    EXPECT_NE(msg.find("no parameter 'epsilon'"), std::string::npos) << msg;
    EXPECT_NE(msg.find("line 4"), std::string::npos) << msg;
    // flow.* only exists for the passive-scalar system.
    msg = config_error("system = euler2d\nnx = 32\nic = taylor_green\nflow.speed = 2\nt_end = 1\n");
    EXPECT_NE(msg.find("unknown key 'flow.speed'"), std::string::npos) << msg;
    // The same preset name resolves per system.
    EXPECT_EQ(parse_config("system = ipm\nnx = 32\nic = random_bandlimited\nt_end = 1\n").ic().kind, PresetKind::density);
}

TEST(ParseConfig, CrossKeyChecks) {
    EXPECT_NE(config_error("system = passive_scalar\nflow = couette\nt_end = 1\n").find("only moves markers"), std::string::npos);
    EXPECT_NE(config_error("system = passive_scalar\nflow = rigid\nic = none\nt_end = 1\n").find("nothing to compute"),
              std::string::npos);
    EXPECT_NE(config_error("system = clm\nn = 64\nic = sine\nomega_cap = 10\nbkm_levels = 100\n").find("omega_cap"),
              std::string::npos);
}

TEST(ParseConfig, CanonicalEchoIsCompleteAndStable) {
    const auto a = parse_config(kMinimalEuler).canonical();
    const auto b = parse_config(std::string("# same run\n") + kMinimalEuler).canonical();
    EXPECT_EQ(a, b);
    EXPECT_NE(a.find("cfl = 0.4\n"), std::string::npos);
    EXPECT_NE(a.find("ic.amplitude = 1\n"), std::string::npos);
    EXPECT_NE(a.find("ny = 32\n"), std::string::npos);
}

TEST(ParseConfig, EveryCheckedInConfigParses) {
    int n = 0;
    for (const auto& e : fs::directory_iterator(EULERLAB_CONFIG_DIR)) {
        if (e.path().extension() != ".conf") continue;
        ++n;
        EXPECT_NO_THROW(load_config(e.path())) << e.path();
    }
    EXPECT_GE(n, 12);
    EXPECT_THROW(load_config(fs::path(EULERLAB_CONFIG_DIR) / "no_such.conf"), ConfigError);
}

// ---------------------------------------------------------------------------
// presets

TEST(Presets, TaylorGreen) {
    const Grid2 g(32, 32);
    const auto w = make_vorticity(g, make_choice("taylor_green", PresetKind::vorticity));
    const auto want = SpectralField2::from_function(g, [](double x, double y) { return -2 * std::cos(x) * std::cos(y); });
    EXPECT_LT(eulerlab::testing::max_diff(w, want), 1e-15);
}

TEST(Presets, RandomBandlimitedIsDeterministicMeanFreeAndBandLimited) {
    const Grid2 g(64, 64);
    const auto c = make_choice("random_bandlimited", PresetKind::vorticity, {{"kmax", 8}}, 7);
    const auto a = make_vorticity(g, c);
    const auto b = make_vorticity(g, c);
    EXPECT_EQ(a.coeffs(), b.coeffs());
    EXPECT_EQ(a(0, 0), cplx{});
    for (int ix = 0; ix < g.nx; ++ix)
        for (int iy = 0; iy < g.nky(); ++iy)
            if (std::abs(g.mode_x(ix)) > 8 || iy > 8) {
                EXPECT_LT(std::abs(a(ix, iy)), 1e-15);
            }
    const auto other = make_vorticity(g, make_choice("random_bandlimited", PresetKind::vorticity, {{"kmax", 8}}, 8));
    EXPECT_NE(other.coeffs(), a.coeffs());
    // Hermitian symmetry of the iy = 0 column: the field is real.
    for (int ix = 1; ix < g.nx / 2; ++ix) EXPECT_LT(std::abs(a(ix, 0) - std::conj(a(g.nx - ix, 0))), 1e-15);
    const auto scaled = make_vorticity(g, make_choice("random_bandlimited", PresetKind::vorticity, {{"kmax", 8}, {"rms", 0.1}}, 7));
    EXPECT_NEAR(scaled.rms(), 0.1, 1e-15);
    EXPECT_THROW(make_vorticity(g, make_choice("random_bandlimited", PresetKind::vorticity, {{"kmax", 30}}, 7)), ConfigError);
}

TEST(Presets, HeavyOverLightIsOddInYPlusPerturbation) {
    const Grid2 g(32, 32);
    const double eps = 1e-2;
    const auto s = make_density(g, make_choice("heavy_over_light", PresetKind::density, {{"epsilon", eps}}));
    EXPECT_EQ(s.stratification, 0.0);
    for (double x : {0.0, 1.0, 2.5})
        for (double y : {0.3, 1.2, 2.9}) {
            const double a = s.rho.evaluate(x, pi + y) - eps * std::cos(x);
            const double b = s.rho.evaluate(x, pi - y) - eps * std::cos(x);
            EXPECT_NEAR(a, -b, 1e-14);
            EXPECT_LT(b, 0.0);
        }
    const auto stable = make_density(g, make_choice("light_over_heavy", PresetKind::density));
    EXPECT_EQ(stable.stratification, -1.0);
}

TEST(Presets, CouettePerturbationHasRequestedSizeAndInvariantLines) {
    const Grid2 g(64, 64);
    const double eps = 0.1;
    const auto f = make_flow(g, make_choice("couette_perturbed", PresetKind::flow, {{"epsilon", eps}}));
    EXPECT_FALSE(f.grid_velocity.has_value());
    double s = 0.0;
    const int m = 128;
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) {
            const double x = 2 * pi * i / m, y = 2 * pi * j / m;
            const auto u = f.at(0.0, x, y);
            s += (u[0] - y) * (u[0] - y) + u[1] * u[1];
        }
    EXPECT_NEAR(std::sqrt(s * (2 * pi / m) * (2 * pi / m)), eps, 1e-12);
    for (double x : {0.0, 0.7, 4.0}) {
        EXPECT_NEAR(f.at(0.0, x, 0.0)[1], 0.0, 1e-16);
        EXPECT_NEAR(f.at(0.0, x, pi)[1], 0.0, 1e-16);
    }
}

TEST(Presets, CouetteModesAndLineFields) {
    const auto modes = make_couette_modes(make_choice("random_bandlimited", PresetKind::couette_modes, {}, 3));
    EXPECT_EQ(modes.size(), 8u);
    for (const auto& m : modes) {
        EXPECT_NE(m.kx, 0.0);
        EXPECT_LE(std::abs(m.kx), 4.0);
        EXPECT_LE(std::abs(m.eta0), 1.0);
    }
    const Grid1 g(64);
    const auto w = make_line_field(g, make_choice("clm_cosine", PresetKind::line_field, {{"amplitude", 2}}));
    EXPECT_NEAR(w[1].real(), 1.0, 1e-15);
    EXPECT_THROW(make_choice("clm_cosine", PresetKind::vorticity), ConfigError);
    EXPECT_THROW(make_choice("clm_cosine", PresetKind::line_field, {{"width", 1}}), ConfigError);
}

TEST(Presets, LemmaModelOperator) {
    const auto op = make_lemma_operator(make_choice("lemma_model", PresetKind::lemma_operator));
    EXPECT_EQ(op.u(0.5), 0.25);
    EXPECT_EQ(op.u(1.0), 0.0);
    EXPECT_EQ(op.g(0.3), 1.0);
}

// ---------------------------------------------------------------------------
// runners

TEST(Execute, ZeroDurationEmitsInitialDiagnosticsOnly) {
    auto a = execute(parse_config("system = euler2d\nnx = 32\nic = taylor_green\nt_end = 0\n"));
    ASSERT_EQ(a.exit_code, 0) << a.error;
    EXPECT_EQ(a.tables.at("diagnostics.csv").size(), 1u);
    a = execute(parse_config("system = ipm\nnx = 32\nic = heavy_over_light\nt_end = 0\n"));
    ASSERT_EQ(a.exit_code, 0) << a.error;
    EXPECT_EQ(a.tables.at("ipm.csv").size(), 1u);
    a = execute(parse_config("system = clm\nn = 64\nic = clm_cosine\nt_end = 0\n"));
    ASSERT_EQ(a.exit_code, 0) << a.error;
    EXPECT_EQ(a.tables.at("series.csv").size(), 1u);
    a = execute(parse_config("system = passive_scalar\nflow = shear_sine\nt_end = 0\n"));
    ASSERT_EQ(a.exit_code, 0) << a.error;
    EXPECT_EQ(a.tables.at("mixing.csv").size(), 1u);
}

TEST(Execute, EulerDiagnosticsMatchLibrary) {
    const auto a = execute(parse_config(kMinimalEuler));
    ASSERT_EQ(a.exit_code, 0) << a.error;
    const auto& t = a.tables.at("diagnostics.csv");
    EXPECT_EQ(t.columns().front(), "t");
    EXPECT_EQ(t.size(), 6u);
    const auto e = t.column("energy");
    // Taylor-Green: |u|^2 averages 1/2 over the torus, so E = 1/2 * 1/2 * 4 pi^2.
    const Grid2 g(32, 32);
    const auto w = SpectralField2::from_function(g, [](double x, double y) { return -2 * std::cos(x) * std::cos(y); });
    EXPECT_EQ(e.front(), kinetic_energy(w));
    EXPECT_NEAR(e.front(), pi * pi, 1e-12);
    EXPECT_LT(a.summary.number("omega_linf_change"), 1e-12);
    const auto frames = decode_eulb(a.blobs.at("fields.eulb"));
    ASSERT_EQ(frames.size(), 2u);
    EXPECT_EQ(frames[1].time, 0.5);
    EXPECT_EQ(frames[1].blocks.size(), 3u);
}

TEST(Execute, IdenticalConfigGivesIdenticalFiles) {
    const auto cfg = parse_config(
        "system = euler2d\nnx = 32\nic = random_bandlimited\nic.kmax = 4\nseed = 5\nt_end = 0.3\nmarkers = 8\n");
    const auto a = execute(cfg).files();
    const auto b = execute(cfg).files();
    ASSERT_EQ(a.size(), b.size());
    for (const auto& [name, data] : a) EXPECT_EQ(data, b.at(name)) << name;
    EXPECT_TRUE(a.count("particles.eulb"));
}

TEST(Execute, ExitCodesDistinguishOutcomes) {
    // Blow-up detected.
    auto a = execute(parse_config("system = clm\nn = 1024\nic = clm_cosine\nomega_cap = 100\n"));
    EXPECT_EQ(a.exit_code, exit_blowup) << a.error;
    EXPECT_EQ(a.status, "completed: blow-up detected");
    // A global solution completes normally.
    a = execute(parse_config("system = degregorio\nn = 64\nic = sine\nt_end = 1\n"));
    EXPECT_EQ(a.exit_code, exit_ok) << a.error;
    // Preset parameters out of range are config errors even when found at run time.
    a = execute(parse_config("system = euler2d\nnx = 16\nic = random_bandlimited\nic.kmax = 8\nt_end = 1\n"));
    EXPECT_EQ(a.exit_code, exit_config);
    // Operators outside the lemma's hypotheses are rejected as input errors.
    a = execute(parse_config("system = lemma_check\nic = lemma_model\nic.g = -1\n"));
    EXPECT_EQ(a.exit_code, exit_config);
    EXPECT_NE(a.error.find("g(1) <= 0"), std::string::npos) << a.error;
    // Newton outside its basin is a numerical failure with the partial profile kept.
    a = execute(parse_config("system = selfsim\nic = odd_gaussian\nic.amplitude = -1\nL = 20\nn = 200\nmax_iterations = 5\n"));
    EXPECT_EQ(a.exit_code, exit_failure);
    EXPECT_TRUE(a.tables.count("profile.csv"));
}

TEST(RunAndWrite, ManifestChecksumsMatchFiles) {
    const auto dir = scratch_dir("manifest");
    const auto cfg = parse_config("system = couette_linear\nic = couette_mode\nsamples = 20\n");
    const auto r = run_and_write(cfg, dir);
    EXPECT_EQ(r.artifacts.exit_code, 0);
    std::string why;
    EXPECT_TRUE(verify_manifest(dir, &why)) << why;
    const auto m = read_file(dir / "manifest.txt");
    EXPECT_NE(m.find("status = completed\n"), std::string::npos);
    EXPECT_NE(m.find("config.system = couette_linear\n"), std::string::npos);
    EXPECT_NE(m.find("file.couette.csv.sha256 = " + sha256_hex(read_file(dir / "couette.csv"))), std::string::npos);
    EXPECT_NE(m.find("version = "), std::string::npos);
    // Tampering is detected.
    atomic_write(dir / "couette.csv", "t\n");
    EXPECT_FALSE(verify_manifest(dir, &why));
    EXPECT_NE(why.find("couette.csv"), std::string::npos);
    fs::remove_all(dir);
}

TEST(RunAndWrite, FailedRunStillWritesManifest) {
    const auto dir = scratch_dir("failed");
    const auto r = run_and_write(
        parse_config("system = selfsim\nic = odd_gaussian\nic.amplitude = -1\nL = 20\nn = 200\nmax_iterations = 5\n"), dir);
    EXPECT_EQ(r.artifacts.exit_code, exit_failure);
    const auto m = read_file(dir / "manifest.txt");
    EXPECT_NE(m.find("exit_code = 3\n"), std::string::npos);
    EXPECT_TRUE(fs::exists(dir / "profile.csv"));
    EXPECT_TRUE(verify_manifest(dir));
    fs::remove_all(dir);
}
