#include "bpl/error.hpp"
#include "bpl/persistence.hpp"
#include "bpl/stability.hpp"
#include "support.hpp"

#include <doctest.h>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

using namespace bpl;

namespace {

const WaveSolution& default_wave()
{
    static const WaveSolution sol = [] {
        ModelParams p;
        NewtonOptions o;
        o.tol = 1e-13;
        return newton_solve(p, Forcing::standard(p), o);
    }();
    return sol;
}

const ReducedForm& default_reduced()
{
    static const ReducedForm rf = [] {
        ModelParams p;
        return reduce(default_wave().v, p, ReductionSchedule::from(p));
    }();
    return rf;
}

std::vector<double> phases(const ModelParams& p, double t)
{
    std::vector<double> phi(p.omega.size());
    for (std::size_t k = 0; k < phi.size(); ++k)
        phi[k] = p.lambda * p.omega[k] * t;
    return phi;
}

std::filesystem::path scratch_dir(const std::string& name)
{
    auto dir = std::filesystem::temp_directory_path() / ("bpl_test_" + name);
    std::filesystem::remove_all(dir);
    return dir;
}

} // namespace

TEST_CASE("random perturbations are real, odd, band-limited and scaled")
{
    const Field2 w = random_perturbation(8, 0.7, 3.0, 11);
    CHECK(w.is_real(1e-15));
    CHECK(test::max_abs_diff(involution_S(w), -1.0 * w) == 0.0);
    CHECK(w[Mode2{0, 0}] == cplx{});
    for (int i = 0; i < w.box().size(); ++i)
        if (w.box().mode2(i).max_abs() > 3)
            CHECK(w.at(i) == cplx{});
    CHECK(sobolev_norm(w, 3.0) == doctest::Approx(0.7).epsilon(1e-14));
    CHECK(test::max_abs_diff(w, random_perturbation(8, 0.7, 3.0, 11)) == 0.0);
    CHECK(test::max_abs_diff(w, random_perturbation(8, 0.7, 3.0, 12)) > 0.0);
}

TEST_CASE("threshold crossing interpolates linearly and is stable under refinement")
{
    NormTrace tr{{0.0, 1.0, 2.0}, {1.0, 1.5, 2.5}, {0, 0, 0}};
    CHECK(*first_crossing(tr, 2.0) == doctest::Approx(1.5));
    CHECK(*first_crossing(tr, 1.0) == 0.0);
    CHECK(!first_crossing(tr, 3.0));

    // n(t) = 1 + t^2 reaches 2 at t = 1.
    auto sampled = [](double h) {
        NormTrace t;
        for (double s = 0.0; s <= 3.0 + 1e-12; s += h) {
            t.t.push_back(s);
            t.norm.push_back(1.0 + s * s);
            t.tail.push_back(0.0);
        }
        return t;
    };
    const double coarse = *first_crossing(sampled(0.3), 2.0);
    const double fine = *first_crossing(sampled(0.03), 2.0);
    CHECK(std::abs(coarse - fine) < 0.3);
    CHECK(std::abs(fine - 1.0) < 0.03);
}

TEST_CASE("power-law fit recovers the exponent")
{
    const std::vector<double> x{1.0, 0.5, 0.25, 0.125};
    std::vector<double> y;
    for (double v : x)
        y.push_back(3.0 * std::pow(v, -1.3));
    CHECK(fit_exponent(x, y) == doctest::Approx(-1.3).epsilon(1e-12));
    CHECK_THROWS_AS(fit_exponent(std::vector<double>{1.0}, std::vector<double>{1.0}), PreconditionError);
}

TEST_CASE("zero perturbation stays zero around the wave")
{
    ModelParams p;
    const StabilityRun run = integrate_perturbation(Field2(p.N_x), 0.0, 0.5, p, default_wave().v, {});
    for (double n : run.trace.norm)
        CHECK(n <= 1e-12);
    CHECK(run.censored);
    CHECK(run.T_star == 0.5);
}

TEST_CASE("direct perturbation path agrees with the full equation minus the wave")
{
    ModelParams p;
    const Field2 w0 = random_perturbation(p.N_x, 0.5, 3.0, 3);
    StabilityOptions opts;
    opts.dt = 1e-4;
    opts.sample_every = 1000;
    opts.keep_samples = true;
    const StabilityRun direct = integrate_perturbation(w0, 0.5, 0.5, p, default_wave().v, opts);
    const Trajectory full = perturbation_via_full(w0, 0.5, p, Forcing::standard(p), default_wave().v, 1e-4, 1000);
    REQUIRE(direct.samples.size() == full.v.size());
    double worst = 0.0;
    for (std::size_t k = 0; k < full.v.size(); ++k) {
        CHECK(direct.trace.t[k] == doctest::Approx(full.t[k]).epsilon(1e-12));
        worst = std::max(worst, sobolev_norm(direct.samples[k] - full.v[k], 3.0));
    }
    CHECK(worst <= 1e-8);
}

TEST_CASE("short-time estimate below the delta ceiling")
{
    ModelParams p;
    const double delta = std::pow(p.lambda, p.theta()) / 12.0;
    CHECK(delta < delta_ceiling(p));
    const double horizon = p.gamma() / std::pow(p.lambda, p.theta());
    StabilityOptions opts;
    opts.sample_every = 1;
    opts.stop_at_escape = false;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const Field2 w0 = random_perturbation(p.N_x, delta, opts.s, seed);
        const StabilityRun run = integrate_perturbation(w0, delta, horizon, p, default_wave().v, opts);
        CHECK(run.trace.norm.front() <= delta * (1 + 1e-12));
        CHECK(*std::max_element(run.trace.norm.begin(), run.trace.norm.end()) < 2.0 * delta);
        CHECK(run.censored);
    }
}

TEST_CASE("perturbation preconditions")
{
    ModelParams p;
    const Field2 w0 = random_perturbation(p.N_x, 1.0, 3.0, 1);
    CHECK_THROWS_AS(integrate_perturbation(w0, 0.5, 1.0, p, default_wave().v, {}), PreconditionError);
    StabilityOptions low;
    low.s = 2.0;
    CHECK_THROWS_AS(integrate_perturbation(w0, 1.0, 1.0, p, default_wave().v, low), PreconditionError);
    StabilityOptions coarse;
    coarse.dt = 0.1;
    CHECK_THROWS_AS(integrate_perturbation(w0, 1.0, 1.0, p, default_wave().v, coarse), PreconditionError);
}

TEST_CASE("escape time is detected and robust to the sampling rate")
{
    ModelParams p;
    const double delta = std::pow(p.lambda, p.theta()) / 12.0;
    const Field2 w0 = random_perturbation(p.N_x, delta, 3.0, 1);
    StabilityOptions coarse;
    coarse.sample_every = 5;
    StabilityOptions fine = coarse;
    fine.sample_every = 1;
    const StabilityRun a = integrate_perturbation(w0, delta, 40.0, p, default_wave().v, coarse);
    const StabilityRun b = integrate_perturbation(w0, delta, 40.0, p, default_wave().v, fine);
    REQUIRE(!a.censored);
    REQUIRE(!b.censored);
    CHECK(a.T_star > 0.0);
    CHECK(std::abs(a.T_star - b.T_star) < coarse.sample_every * coarse.dt);
    CHECK(a.trace.norm.back() >= 2.0 * delta);
    CHECK(a.trace.tail.size() == a.trace.norm.size());
}

TEST_CASE("censored runs extend to the same trajectory as one longer run")
{
    ModelParams p;
    const Field2 w0 = random_perturbation(p.N_x, 0.4, 3.0, 2);
    const StabilityRun shorter = integrate_perturbation(w0, 0.4, 0.05, p, default_wave().v, {});
    CHECK(shorter.censored);
    CHECK(shorter.T_star == 0.05);
    const StabilityRun extended = extend_perturbation(shorter, 0.1, p, default_wave().v, {});
    const StabilityRun longer = integrate_perturbation(w0, 0.4, 0.1, p, default_wave().v, {});
    CHECK(extended.horizon == 0.1);
    CHECK(sobolev_norm(extended.final_state - longer.final_state, 3.0) <= 1e-12 * sobolev_norm(longer.final_state, 3.0));
    CHECK(extended.trace.t.size() == longer.trace.t.size());
    CHECK_THROWS_AS(extend_perturbation(shorter, 0.01, p, default_wave().v, {}), PreconditionError);
}

TEST_CASE("linear transformed flow preserves the Sobolev norm")
{
    const ReducedForm& rf = default_reduced();
    const Field2 psi0 = random_perturbation(rf.params.N_x, 1.0, 3.0, 4);
    StabilityOptions opts;
    opts.sample_every = 25;
    const StabilityRun run = integrate_transformed(psi0, 1.0, 2.0, rf, opts, false);
    for (double n : run.trace.norm)
        CHECK(std::abs(n - 1.0) <= 1e-12);
}

TEST_CASE("transformed flow is conjugate to the direct perturbation")
{
    const ReducedForm& rf = default_reduced();
    const ModelParams& p = rf.params;
    const double delta = 0.5;
    const Field2 w0 = random_perturbation(p.N_x, delta, 3.0, 5);
    const std::vector<double> zero(p.nu(), 0.0);
    const Field2 psi0 = apply(rf.U_inv, zero, w0);
    StabilityOptions opts;
    opts.sample_every = 100;
    opts.keep_samples = true;
    const StabilityRun w = integrate_perturbation(w0, delta, 1.0, p, default_wave().v, opts);
    const StabilityRun psi = integrate_transformed(psi0, sobolev_norm(psi0, 3.0), 1.0, rf, opts);
    REQUIRE(w.samples.size() == psi.samples.size());
    double worst = 0.0;
    for (std::size_t k = 0; k < w.samples.size(); ++k) {
        const Field2 back = apply(rf.U, phases(p, psi.trace.t[k]), psi.samples[k]);
        worst = std::max(worst, sobolev_norm(back - w.samples[k], 3.0) / sobolev_norm(w.samples[k], 3.0));
    }
    MESSAGE("conjugacy error " << worst);
    CHECK(worst <= 1e-3);
}

TEST_CASE("transformed energy growth is quadratic in the amplitude")
{
    const ReducedForm& rf = default_reduced();
    const Field2 shape = random_perturbation(rf.params.N_x, 1.0, 3.0, 6);
    StabilityOptions opts;
    opts.sample_every = 5;
    auto constant = [&](double delta) {
        const StabilityRun run = integrate_transformed(delta * shape, delta, 0.2, rf, opts);
        const double C = fit_energy_constant(run.trace);
        for (std::size_t k = 1; k + 1 < run.trace.t.size(); ++k) {
            const double dn = (run.trace.norm[k + 1] - run.trace.norm[k - 1]) / (run.trace.t[k + 1] - run.trace.t[k - 1]);
            CHECK(dn <= C * run.trace.norm[k] * run.trace.norm[k] * (1 + 1e-12));
        }
        return C;
    };
    const double big = constant(1.0);
    const double small = constant(0.25);
    MESSAGE("fitted constants " << big << " " << small);
    CHECK(big > 0.0);
    // Linear growth would make the ratio 4.
    CHECK(small / big >= 0.5);
    CHECK(small / big <= 2.0);
}

TEST_CASE("sweep preconditions and censoring")
{
    ModelParams p;
    const auto& wave = default_wave().v;
    SweepOptions opts;
    opts.horizon_factor = 0.01;
    CHECK_THROWS_AS(escape_time_sweep(std::vector<double>{1.0, 0.0}, p, wave, opts), PreconditionError);
    CHECK_THROWS_AS(escape_time_sweep(std::vector<double>{0.5, 1.0}, p, wave, opts), PreconditionError);
    CHECK_THROWS_AS(escape_time_sweep(std::vector<double>{delta_ceiling(p)}, p, wave, opts), PreconditionError);
    CHECK_THROWS_AS(escape_time_sweep(std::vector<double>{}, p, wave, opts), PreconditionError);

    const SweepResult r = escape_time_sweep(std::vector<double>{1.0, 0.5}, p, wave, opts);
    REQUIRE(r.rows.size() == 2);
    CHECK(r.inconclusive);
    CHECK(!r.exponent);
    for (const auto& row : r.rows) {
        CHECK(row.censored);
        CHECK(row.extended);
        CHECK(row.horizon == doctest::Approx(2.0 * 0.01 / row.delta));
        CHECK(row.T_star == row.horizon);
    }
}

TEST_CASE("amplitude check on the wave and on g_lambda")
{
    ModelParams p;
    AmplitudeOptions opts;
    opts.delta_fraction = 0.0;
    opts.horizon = 0.2;
    const AmplitudeResult r = amplitude_bounds_check(std::vector<double>{50.0, 100.0}, p, opts);
    REQUIRE(r.rows.size() == 2);
    for (const auto& row : r.rows) {
        REQUIRE(row.ok);
        CHECK(std::abs(row.sup_v - row.sup_wave) <= 1e-4 * row.sup_wave);
    }
    REQUIRE(r.exponent_g);
    CHECK(std::abs(*r.exponent_g - (p.alpha - 1.0)) <= 0.1 * (p.alpha - 1.0));

    ModelParams bad = p;
    bad.omega = {0.1, 0.1};
    const AmplitudeResult skipped = amplitude_bounds_check(std::vector<double>{100.0}, bad, opts);
    CHECK(!skipped.rows[0].ok);
    CHECK(!skipped.rows[0].reason.empty());
}

TEST_CASE("commutator vanishes for a constant field")
{
    VectorCoefficients a(4);
    const auto box = make_box(2, 4);
    a.c1[box->zero()] = 0.7;
    a.c2[box->zero()] = -1.3;
    std::mt19937_64 rng(1);
    const Field2 u = test::random_field(6, rng, 2.0);
    for (const cplx& c : kato_ponce_commutator(a, u, 3.0))
        CHECK(c == cplx{});
}

TEST_CASE("commutator of single modes matches the two-term convolution")
{
    // a = (cos(q.x), 0), u = cos(m.x)
    const Mode2 q{1, 2}, m{3, 1};
    const double s = 3.0;
    VectorCoefficients a(4);
    const auto box = make_box(2, 4);
    a.c1[box->index2(q)] = 0.5;
    a.c1[box->index2(-q)] = 0.5;
    const Field2 u = Field2::cosine(6, m);
    auto W = [s](Mode2 j) { return std::pow(j.bracket(), s); };
    const double dp = W(m + q) - W(m), dm = W(m - q) - W(m);
    const double comm = std::sqrt(2.0 * m.j1 * m.j1 / 16.0 * (dp * dp + dm * dm));
    const double an = std::sqrt(0.5) * W(q), un = std::sqrt(0.5) * W(m);
    CHECK(kato_ponce_ratio(a, u, s) == doctest::Approx(comm / (an * un)).epsilon(1e-13));
}

TEST_CASE("Kato-Ponce ratio is stable under truncation doubling")
{
    const KatoPonceResult coarse = kato_ponce_probe(20, 3.0, 9, 8);
    const KatoPonceResult fine = kato_ponce_probe(20, 3.0, 9, 16);
    MESSAGE("max ratios " << coarse.max_ratio << " " << fine.max_ratio);
    CHECK(coarse.max_ratio > 0.0);
    CHECK(std::abs(fine.max_ratio / coarse.max_ratio - 1.0) <= 0.2);
    CHECK(kato_ponce_probe(20, 3.0, 9, 8).max_ratio == coarse.max_ratio);
    CHECK_THROWS_AS(kato_ponce_probe(5, 2.0, 1, 8), PreconditionError);
}

TEST_CASE("unforced control conserves energy and enstrophy")
{
    ModelParams p;
    const ConservationResult r = conservation_probe(p, 1);
    MESSAGE("drifts " << r.energy_drift << " " << r.enstrophy_drift);
    CHECK(r.zero_state_norm == 0.0);
    CHECK(r.passed);
}

TEST_CASE("config parsing, hashing and parameter mapping")
{
    std::istringstream in("# comment\nlambda = 200\nomega = 1.1, 1.5 # trailing\n\nN_x=8\ndelta_list = 1,0.5\n");
    const RunConfig cfg = RunConfig::parse(in);
    CHECK(cfg.number("lambda", 0) == 200.0);
    CHECK(cfg.numbers("delta_list", {}) == std::vector<double>{1.0, 0.5});
    CHECK(cfg.integer("N_x", 0) == 8);
    CHECK(cfg.unknown_keys().empty());
    const ModelParams p = model_params(cfg);
    CHECK(p.lambda == 200.0);
    CHECK(p.omega == std::vector<double>{1.1, 1.5});

    std::istringstream reordered("N_x=8\ndelta_list = 1,0.5\nomega = 1.1, 1.5\nlambda = 200\n");
    CHECK(RunConfig::parse(reordered).hash() == cfg.hash());

    std::istringstream dup("a = 1\na = 2\n");
    CHECK_THROWS_AS(RunConfig::parse(dup), PreconditionError);
    std::istringstream bad("lambda = fast\n");
    CHECK_THROWS_AS(RunConfig::parse(bad).number("lambda", 0), PreconditionError);
    std::istringstream typo("lamda = 3\n");
    CHECK(RunConfig::parse(typo).unknown_keys() == std::vector<std::string>{"lamda"});

    RunConfig seeded;
    seeded.set("omega_seed", "7");
    const ModelParams q = model_params(seeded);
    const double r = std::hypot(q.omega[0], q.omega[1]);
    CHECK(r >= 1.0);
    CHECK(r <= 2.0);
    CHECK(diophantine_screen(q.omega, ReductionSchedule::from(q).nonresonance_scale * q.gamma(), q.tau(),
                             operator_phase_truncation(q))
              .min_ratio >= 1.0);
    CHECK(model_params(seeded).omega == q.omega);
}

TEST_CASE("CSV and manifest output")
{
    const auto dir = scratch_dir("csv");
    const double x = 0.1 + 0.2;
    write_csv(dir / "t.csv", {"a", "b"}, {{x, 1.0 / 3.0}});
    std::ifstream in(dir / "t.csv");
    std::string header, row;
    std::getline(in, header);
    std::getline(in, row);
    CHECK(header == "a,b");
    CHECK(std::stod(row.substr(0, row.find(','))) == x);
    CHECK(std::stod(row.substr(row.find(',') + 1)) == 1.0 / 3.0);
    CHECK_THROWS_AS(write_csv(dir / "u.csv", {"a"}, {{1.0, 2.0}}), PreconditionError);

    RunRecord rec{0xabcdef, 42, "sweep", 1.5, {dir / "t.csv"}};
    write_manifest(dir / "manifest.json", rec);
    std::ifstream js(dir / "manifest.json");
    const auto j = nlohmann::json::parse(js);
    CHECK(j["config_hash"] == "0000000000abcdef");
    CHECK(j["seed"] == 42);
    CHECK(j["artifact_paths"].size() == 1);
    CHECK(j["versions"].contains("fftw"));
    CHECK(j["wall_clock"] == 1.5);
}

TEST_CASE("reduced form persistence")
{
    const auto dir = scratch_dir("reduced");
    const ReducedForm& rf = default_reduced();
    const auto paths = persist_reduced_form(dir, rf);
    for (const auto& path : paths)
        CHECK(std::filesystem::exists(path));
    std::ifstream eig(dir / "eigenvalues.csv");
    std::string line;
    int rows = -1;
    while (std::getline(eig, line))
        ++rows;
    CHECK(rows == rf.D.box().size() - 1);
    std::ifstream cert(dir / "certificate.json");
    const auto j = nlohmann::json::parse(cert);
    CHECK(j["omega"].size() == 2);
    CHECK(j["minimal_divisor"].get<double>() == rf.min_divisor);
    CHECK(j["tau"].get<double>() == rf.schedule.tau);

    const auto wave_paths = persist_wave(dir, default_wave());
    for (const auto& path : wave_paths)
        CHECK(std::filesystem::exists(path));
}
