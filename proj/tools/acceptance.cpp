// Acceptance run: one PASS/FAIL line per criterion, tolerances pinned below.
#include "bpl/error.hpp"
#include "bpl/persistence.hpp"
#include "bpl/stability.hpp"

#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fmt/format.h>
#include <fstream>
#include <functional>
#include <sstream>

namespace fs = std::filesystem;
using namespace bpl;

namespace {

// Criterion 1 and 2: property suites and their time budget.
constexpr double kSuiteBudget = 60.0;
// Criterion 3
constexpr int kNewtonMaxIter = 8;
constexpr double kNewtonResidual = 1e-9;
constexpr double kWaveBudgetPerLambda = 60.0;
// Criterion 4
constexpr double kB0Factor = 1e-8; // times lambda
constexpr double kImagTol = 1e-12;
constexpr double kDefectFactor = 1e-8; // times lambda^theta
constexpr double kReduceBudget = 600.0;
// Criterion 5
constexpr double kConjugacyTol = 1e-3;
constexpr int kLinearSteps = 4000;
// Criterion 7
constexpr double kExponentLow = -1.2;
constexpr double kExponentHigh = -0.8;
constexpr double kSweepBudget = 1800.0;
// Criterion 8
constexpr double kAmplitudeSlack = 0.1;
constexpr double kGRelTol = 0.1;
// Criterion 9
constexpr double kMelnikovGamma = 5e-4;
constexpr std::uint64_t kMelnikovSamples = 100000;
constexpr double kDoublingTol = 0.3;
constexpr double kMeasureBudget = 120.0;
// Sobolev index of the stability criteria
constexpr double kS = 3.0;

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

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

Outcome run_suites(const std::vector<std::string>& names)
{
    const auto t0 = std::chrono::steady_clock::now();
    std::string failed;
    for (const auto& n : names) {
        const fs::path exe = fs::path(BPL_TEST_DIR) / n;
        const std::string cmd = fmt::format("\"{}\" > /dev/null 2>&1", exe.string());
        if (std::system(cmd.c_str()) != 0)
            failed += " " + n;
    }
    const double secs = seconds_since(t0);
    const bool ok = failed.empty() && secs < kSuiteBudget;
    return {ok, failed.empty() ? fmt::format("suites passed in {:.1f} s (budget {:.0f} s)", secs, kSuiteBudget)
                               : fmt::format("failing suites:{} ({:.1f} s)", failed, secs)};
}

Outcome criterion_spectral()
{
    return run_suites({"test_kernels", "test_lattice", "test_dynamics"});
}

Outcome criterion_operators()
{
    return run_suites({"test_operators"});
}

Outcome criterion_wave()
{
    const std::vector<double> lambdas{50.0, 100.0, 200.0, 400.0};
    std::vector<double> ratios;
    bool ok = true;
    std::string detail;
    for (double lambda : lambdas) {
        ModelParams p;
        p.lambda = lambda;
        const auto t0 = std::chrono::steady_clock::now();
        const WaveSolution sol = newton_solve(p, Forcing::standard(p));
        const double secs = seconds_since(t0);
        const double ratio = sobolev_norm(sol.z, 2.0) / sobolev_norm(sol.g, 2.0);
        ratios.push_back(ratio);
        ok = ok && secs < kWaveBudgetPerLambda;
        if (lambda == 100.0) {
            ok = ok && sol.iterations <= kNewtonMaxIter && sol.residual_norm <= kNewtonResidual;
            detail += fmt::format("lambda=100: {} iterations, residual {:.2e}; ", sol.iterations, sol.residual_norm);
        }
    }
    for (std::size_t i = 1; i < ratios.size(); ++i)
        ok = ok && ratios[i] < ratios[i - 1];
    ModelParams p;
    const double zeta = 2.0 - p.alpha - 3.0 * p.c;
    const double slope = fit_exponent(lambdas, ratios);
    ok = ok && -slope >= zeta / 2.0;
    detail += fmt::format("|z|/|g| = {:.3e} .. {:.3e}, decay exponent {:.3f} (need >= {:.3f})", ratios.front(),
                          ratios.back(), -slope, zeta / 2.0);
    return {ok, detail};
}

Outcome criterion_reduction()
{
    const auto t0 = std::chrono::steady_clock::now();
    const ReducedForm& rf = default_reduced();
    const double secs = seconds_since(t0);
    const ModelParams& p = rf.params;
    const bool a = rf.b0_norm <= kB0Factor * p.lambda;

    bool b = rf.kam_history.size() >= 2;
    for (std::size_t n = 1; n < rf.kam_history.size(); ++n)
        b = b && rf.kam_history[n] < rf.kam_history[n - 1];
    for (std::size_t n = 2; n < rf.kam_history.size(); ++n)
        b = b && rf.kam_history[n] / rf.kam_history[n - 1] < rf.kam_history[n - 1] / rf.kam_history[n - 2];

    bool c = true;
    double worst_re = 0.0, worst_odd = 0.0;
    for (int i = 0; i < rf.D.box().size(); ++i) {
        const cplx mu = rf.D.at(i);
        if (rf.D.box().mode2(i).is_zero())
            continue;
        const cplx partner = rf.D.at(rf.D.box().neg(i));
        const double scale = std::max(std::abs(mu), 1e-300);
        worst_re = std::max(worst_re, std::abs(mu.real()) / scale);
        worst_odd = std::max(worst_odd, std::abs(partner + mu) / scale);
    }
    c = worst_re <= kImagTol && worst_odd <= kImagTol;
    const bool d = rf.defect <= kDefectFactor * std::pow(p.lambda, p.theta());
    std::string hist;
    for (double h : rf.kam_history)
        hist += fmt::format(" {:.2e}", h);
    return {a && b && c && d && secs < kReduceBudget,
            fmt::format("(a) b0 {:.2e} {} (b) KAM history [{} ] {} (c) max Re/|mu| {:.1e}, odd {:.1e} {} (d) defect "
                        "{:.2e} {}; {:.0f} s",
                        rf.b0_norm, a ? "ok" : "FAIL", hist, b ? "ok" : "FAIL", worst_re, worst_odd, c ? "ok" : "FAIL",
                        rf.defect, d ? "ok" : "FAIL", secs)};
}

Outcome criterion_linear()
{
    const ReducedForm& rf = default_reduced();
    const ModelParams& p = rf.params;
    std::vector<double> lw;
    for (double w : p.omega)
        lw.push_back(p.lambda * w);
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const Field2 w0 = random_perturbation(p.N_x, 1.0, kS, seed);
        for (double t : {0.5, 1.0}) {
            const Field2 direct = integrate_linear(rf.L, lw, w0, t, static_cast<int>(kLinearSteps * t));
            const Field2 reduced = reduced_linear_flow(rf, w0, t);
            worst = std::max(worst, sobolev_norm(reduced - direct, kS) / sobolev_norm(direct, kS));
        }
    }
    return {worst <= kConjugacyTol,
            fmt::format("max relative H^{} error {:.2e} over 5 seeds, t in {{0.5, 1}} (tol {:.0e})", kS, worst,
                        kConjugacyTol)};
}

Outcome criterion_short_time()
{
    ModelParams p;
    const double delta = std::pow(p.lambda, p.theta()) / 12.0;
    const double horizon = p.gamma() / std::pow(p.lambda, p.theta());
    StabilityOptions opts;
    opts.s = kS;
    opts.sample_every = 1;
    opts.stop_at_escape = false;
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const StabilityRun run =
            integrate_perturbation(random_perturbation(p.N_x, delta, kS, seed), delta, horizon, p, default_wave().v, opts);
        worst = std::max(worst, *std::max_element(run.trace.norm.begin(), run.trace.norm.end()) / delta);
    }
    return {worst < 2.0, fmt::format("delta {:.4g}, horizon {:.4g}: max |w|/delta = {:.4f} (< 2)", delta, horizon, worst)};
}

Outcome criterion_long_time()
{
    ModelParams p;
    const auto t0 = std::chrono::steady_clock::now();
    const double d0 = std::pow(p.lambda, p.theta()) / 12.0;
    const std::vector<double> deltas{d0, d0 / 2, d0 / 4, d0 / 8};
    SweepOptions opts;
    opts.run.s = kS;
    const SweepResult r = escape_time_sweep(deltas, p, default_wave().v, opts);
    const double secs = seconds_since(t0);
    std::string rows;
    for (const auto& row : r.rows)
        rows += fmt::format(" ({:.3g}: {:.4g}{})", row.delta, row.T_star, row.censored ? " censored" : "");
    const bool ok = r.exponent && *r.exponent >= kExponentLow && *r.exponent <= kExponentHigh && secs < kSweepBudget;
    return {ok, fmt::format("T_star:{}; exponent {} (window [{}, {}]); {:.0f} s", rows,
                            r.exponent ? fmt::format("{:.3f}", *r.exponent) : "n/a", kExponentLow, kExponentHigh, secs)};
}

Outcome criterion_amplitude()
{
    ModelParams p;
    AmplitudeOptions opts;
    opts.s = kS;
    const AmplitudeResult r = amplitude_bounds_check(std::vector<double>{50.0, 100.0, 200.0, 400.0}, p, opts);
    const double lo = p.alpha - 1.0 - kAmplitudeSlack, hi = p.alpha - 1.0 + p.c + kAmplitudeSlack;
    bool ok = r.exponent_v && r.exponent_g;
    for (const auto& row : r.rows)
        ok = ok && row.ok;
    ok = ok && *r.exponent_v >= lo && *r.exponent_v <= hi &&
         std::abs(*r.exponent_g - (p.alpha - 1.0)) <= kGRelTol * (p.alpha - 1.0);
    return {ok, fmt::format("exponent of sup|v| {:.4f} in [{:.2f}, {:.2f}]; g_lambda exponent {:.4f} vs {:.2f}",
                            r.exponent_v.value_or(NAN), lo, hi, r.exponent_g.value_or(NAN), p.alpha - 1.0)};
}

Outcome criterion_melnikov()
{
    ModelParams p;
    const auto t0 = std::chrono::steady_clock::now();
    const MelnikovMeasure a = melnikov_measure(p, kMelnikovGamma, kMelnikovSamples, 1);
    const MelnikovMeasure b = melnikov_measure(p, 2.0 * kMelnikovGamma, kMelnikovSamples, 1);
    const MelnikovMeasure again = melnikov_measure(p, kMelnikovGamma, kMelnikovSamples, 1);
    const double secs = seconds_since(t0);
    const double ratio = b.fraction / a.fraction;
    const bool ok = std::abs(ratio / 2.0 - 1.0) <= kDoublingTol && again.excised == a.excised && secs < kMeasureBudget;
    return {ok, fmt::format("fractions {:.5f} -> {:.5f} on doubling gamma (ratio {:.3f}), rerun identical: {}; {:.1f} s",
                            a.fraction, b.fraction, ratio, again.excised == a.excised, secs)};
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Outcome criterion_determinism()
{
    const fs::path root = fs::temp_directory_path() / "bpl_acceptance_determinism";
    fs::remove_all(root);
    const std::vector<std::pair<std::string, std::vector<std::string>>> runs{
        {"measure", {"--set samples=100000", "--set gamma=5e-4"}},
        {"sweep", {"--set delta_list=1.3,0.65", "--set horizon_factor=4"}}};
    bool ok = true;
    std::string detail;
    for (const auto& [cmd, args] : runs) {
        std::vector<std::string> outputs;
        for (int rep = 0; rep < 2; ++rep) {
            const fs::path dir = root / fmt::format("{}_{}", cmd, rep);
            std::string line = fmt::format("\"{}\" {} -o \"{}\"", BPL_CLI, cmd, dir.string());
            for (const auto& a : args)
                line += " " + a;
            const int code = std::system((line + " > /dev/null 2>&1").c_str());
            if (code != 0 && !(WIFEXITED(code) && WEXITSTATUS(code) == kExitInconclusive)) {
                ok = false;
                detail += fmt::format("{} exited with {}; ", cmd, code);
            }
            std::string payload;
            for (const auto& entry : fs::directory_iterator(dir))
                if (entry.path().extension() == ".csv")
                    payload += entry.path().filename().string() + "\n" + slurp(entry.path());
            outputs.push_back(payload);
        }
        const bool same = !outputs[0].empty() && outputs[0] == outputs[1];
        ok = ok && same;
        detail += fmt::format("{} CSV payloads {}; ", cmd, same ? "bit-identical" : "DIFFER");
    }
    return {ok, detail};
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"acceptance criteria"};
    std::vector<int> only;
    app.add_option("--only", only, "run only these criteria (1-10)");
    CLI11_PARSE(app, argc, argv);

    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"spectral core", criterion_spectral},
        {"operator calculus oracles", criterion_operators},
        {"traveling wave", criterion_wave},
        {"reduction pipeline", criterion_reduction},
        {"linear conjugacy", criterion_linear},
        {"short-time stability", criterion_short_time},
        {"long-time scaling", criterion_long_time},
        {"amplitude bounds", criterion_amplitude},
        {"Melnikov measure", criterion_melnikov},
        {"determinism", criterion_determinism},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end())
            continue;
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, fmt::format("raised: {}", e.what())};
        }
        failures += o.pass ? 0 : 1;
        fmt::print("[{}] {:2d} {:<26} {}\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first, o.detail);
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
