// Command-line surface: wave, reduce, simulate, sweep, measure, probe.
#include "bpl/error.hpp"
#include "bpl/persistence.hpp"
#include "bpl/stability.hpp"

#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fmt/format.h>
#include <fmt/ranges.h>
#include <iostream>

namespace fs = std::filesystem;
using namespace bpl;

namespace {

struct Common {
    std::string config_path;
    std::vector<std::string> overrides;
    std::string out_dir;
};

RunConfig load_config(const Common& c)
{
    RunConfig cfg = c.config_path.empty() ? RunConfig{} : RunConfig::load(c.config_path);
    for (const auto& kv : c.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw PreconditionError(fmt::format("--set expects key=value, got '{}'", kv));
        cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    for (const auto& k : cfg.unknown_keys())
        fmt::print(stderr, "warning: unknown config key '{}'\n", k);
    return cfg;
}

fs::path out_dir(const Common& c, const RunConfig& cfg, const std::string& command)
{
    if (!c.out_dir.empty())
        return c.out_dir;
    return cfg.text("out_dir", fmt::format("bpl_out/{}", command));
}

std::uint64_t seed_of(const RunConfig& cfg)
{
    return static_cast<std::uint64_t>(cfg.integer("seed", 1));
}

StabilityOptions stability_options(const RunConfig& cfg)
{
    StabilityOptions o;
    o.s = cfg.number("s", o.s);
    o.dt = cfg.number("dt", o.dt);
    o.sample_every = static_cast<int>(cfg.integer("sample_every", o.sample_every));
    return o;
}

// The unforced control has to pass before any experiment on the forced system.
void require_conservation(const ModelParams& p, std::uint64_t seed)
{
    const ConservationResult r = conservation_probe(p, seed);
    if (!r.passed)
        throw DivergenceError(fmt::format("conservation probe failed: energy drift {:.3g}, enstrophy drift {:.3g}",
                                          r.energy_drift, r.enstrophy_drift));
}

WaveSolution build_wave(const RunConfig& cfg, const ModelParams& p)
{
    return newton_solve(p, Forcing::standard(p), newton_options(cfg));
}

std::vector<std::vector<double>> trace_rows(const NormTrace& tr)
{
    std::vector<std::vector<double>> rows;
    for (std::size_t k = 0; k < tr.t.size(); ++k)
        rows.push_back({tr.t[k], tr.norm[k], tr.tail[k]});
    return rows;
}

// Runs one subcommand body, then writes the manifest with the produced artifacts.
int run_command(const std::string& name, const Common& common,
                const std::function<int(const RunConfig&, const fs::path&, std::vector<fs::path>&)>& body)
{
    const auto start = std::chrono::steady_clock::now();
    const RunConfig cfg = load_config(common);
    const fs::path dir = out_dir(common, cfg, name);
    fs::create_directories(dir);
    std::vector<fs::path> artifacts;
    const int code = body(cfg, dir, artifacts);
    RunRecord rec;
    rec.config_hash = cfg.hash();
    rec.seed = seed_of(cfg);
    rec.command = name;
    rec.wall_clock = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    rec.artifacts = artifacts;
    write_manifest(dir / "manifest.json", rec);
    fmt::print("{}: wrote {} artifacts to {}\n", name, artifacts.size(), dir.string());
    return code;
}

int cmd_wave(const RunConfig& cfg, const fs::path& dir, std::vector<fs::path>& out)
{
    const ModelParams p = model_params(cfg);
    const WaveSolution sol = build_wave(cfg, p);
    out = persist_wave(dir, sol);
    fmt::print("wave: {} Newton iterations, relative residual {:.3e}, |z|/|g| = {:.3e}\n", sol.iterations,
               sol.residual_norm, sobolev_norm(sol.z, 2.0) / sobolev_norm(sol.g, 2.0));
    return 0;
}

int cmd_reduce(const RunConfig& cfg, const fs::path& dir, std::vector<fs::path>& out)
{
    const ModelParams p = model_params(cfg);
    const WaveSolution sol = build_wave(cfg, p);
    const ReducedForm rf = reduce(sol.v, p, reduction_schedule(cfg, p));
    out = persist_reduced_form(dir, rf);
    std::vector<std::vector<double>> rows;
    for (std::size_t k = 0; k < rf.kam_history.size(); ++k)
        rows.push_back({static_cast<double>(k), rf.kam_history[k]});
    write_csv(dir / "kam_history.csv", {"step", "remainder_norm"}, rows);
    out.push_back(dir / "kam_history.csv");
    fmt::print("reduce: defect {:.3e}, b0 {:.3e}, KAM history [{:.3e}]\n", rf.defect, rf.b0_norm,
               fmt::join(rf.kam_history, ", "));
    return 0;
}

int cmd_simulate(const RunConfig& cfg, const fs::path& dir, std::vector<fs::path>& out, bool transformed)
{
    const ModelParams p = model_params(cfg);
    const std::uint64_t seed = seed_of(cfg);
    require_conservation(p, seed);
    const StabilityOptions opts = stability_options(cfg);
    const double delta = cfg.number("delta", std::pow(p.lambda, p.theta()) / 12.0);
    const double horizon = cfg.number("horizon", 10.0);
    const WaveSolution sol = build_wave(cfg, p);
    const Field2 w0 = random_perturbation(p.N_x, delta, opts.s, seed);
    StabilityRun run;
    if (transformed) {
        const ReducedForm rf = reduce(sol.v, p, reduction_schedule(cfg, p));
        const Field2 psi0 = apply(rf.U_inv, std::vector<double>(p.nu(), 0.0), w0);
        run = integrate_transformed(psi0, sobolev_norm(psi0, opts.s), horizon, rf, opts);
    } else {
        run = integrate_perturbation(w0, delta, horizon, p, sol.v, opts);
    }
    out.push_back(dir / "trace.csv");
    write_csv(out.back(), {"t", "norm_s", "norm_s_minus_1"}, trace_rows(run.trace));
    out.push_back(dir / "run.csv");
    write_csv(out.back(), {"delta", "s", "horizon", "T_star", "censored", "diverged"},
              {{run.delta, run.s, run.horizon, run.T_star, double(run.censored), double(run.diverged)}});
    fmt::print("simulate: delta {:.6g}, T_star {:.6g}{}\n", run.delta, run.T_star, run.censored ? " (censored)" : "");
    return run.diverged ? DivergenceError("").exit_code() : 0;
}

int cmd_sweep(const RunConfig& cfg, const fs::path& dir, std::vector<fs::path>& out)
{
    const ModelParams p = model_params(cfg);
    const std::uint64_t seed = seed_of(cfg);
    require_conservation(p, seed);
    const double d0 = std::pow(p.lambda, p.theta()) / 12.0;
    const std::vector<double> deltas = cfg.numbers("delta_list", {d0, d0 / 2, d0 / 4, d0 / 8});
    SweepOptions opts;
    opts.seed = seed;
    opts.horizon_factor = cfg.number("horizon_factor", 0.0);
    opts.run = stability_options(cfg);
    const WaveSolution sol = build_wave(cfg, p);
    const SweepResult r = escape_time_sweep(deltas, p, sol.v, opts);
    std::vector<std::vector<double>> rows;
    for (const auto& row : r.rows)
        rows.push_back({row.delta, row.T_star, row.horizon, double(row.censored), double(row.extended), double(row.diverged)});
    out.push_back(dir / "sweep.csv");
    write_csv(out.back(), {"delta", "T_star", "horizon", "censored", "extended", "diverged"}, rows);
    out.push_back(dir / "sweep_fit.csv");
    write_csv(out.back(), {"horizon_factor", "exponent", "c_s", "uncensored"},
              {{r.horizon_factor, r.exponent.value_or(NAN), r.c_s.value_or(NAN),
                double(std::count_if(r.rows.begin(), r.rows.end(), [](const SweepRow& x) { return !x.censored; }))}});
    for (const auto& row : r.rows)
        fmt::print("sweep: delta {:.6g} T_star {:.6g}{}\n", row.delta, row.T_star, row.censored ? " (censored)" : "");
    if (r.exponent)
        fmt::print("sweep: fitted exponent {:.4f}\n", *r.exponent);
    if (r.inconclusive) {
        fmt::print(stderr, "warning: every row censored; raise horizon_factor\n");
        return kExitInconclusive;
    }
    return 0;
}

int cmd_measure(const RunConfig& cfg, const fs::path& dir, std::vector<fs::path>& out)
{
    const ModelParams p = model_params(cfg);
    const auto samples = static_cast<std::uint64_t>(cfg.integer("samples", 100000));
    const std::vector<double> gammas = cfg.numbers("gamma", {p.gamma()});
    std::vector<std::vector<double>> rows;
    for (double g : gammas) {
        const MelnikovMeasure m = melnikov_measure(p, g, samples, seed_of(cfg));
        rows.push_back({g, m.fraction, double(m.samples), double(m.excised), double(m.dc_excised)});
        fmt::print("measure: gamma {:.6g} excised fraction {:.6g}\n", g, m.fraction);
    }
    out.push_back(dir / "measure.csv");
    write_csv(out.back(), {"gamma", "fraction", "samples", "excised", "dc_excised"}, rows);
    return 0;
}

int cmd_probe(const RunConfig& cfg, const fs::path& dir, std::vector<fs::path>& out, const std::string& kind)
{
    const ModelParams p = model_params(cfg);
    const std::uint64_t seed = seed_of(cfg);
    const double s = cfg.number("s", 3.0);
    if (kind == "conservation") {
        const ConservationResult r = conservation_probe(p, seed);
        out.push_back(dir / "conservation.csv");
        write_csv(out.back(), {"zero_state_norm", "energy_drift", "enstrophy_drift", "tol", "passed"},
                  {{r.zero_state_norm, r.energy_drift, r.enstrophy_drift, r.tol, double(r.passed)}});
        fmt::print("probe: energy drift {:.3e}, enstrophy drift {:.3e}\n", r.energy_drift, r.enstrophy_drift);
        return r.passed ? 0 : DivergenceError("").exit_code();
    }
    if (kind == "kato-ponce") {
        const int corpus = static_cast<int>(cfg.integer("corpus_size", 100));
        std::vector<std::vector<double>> rows;
        for (int N : {p.N_x, 2 * p.N_x}) {
            const KatoPonceResult r = kato_ponce_probe(corpus, s, seed, N);
            rows.push_back({double(N), s, double(corpus), r.max_ratio, r.mean_ratio});
            fmt::print("probe: N {} max ratio {:.6g}\n", N, r.max_ratio);
        }
        out.push_back(dir / "kato_ponce.csv");
        write_csv(out.back(), {"N", "s", "corpus_size", "max_ratio", "mean_ratio"}, rows);
        return 0;
    }
    if (kind == "amplitude") {
        require_conservation(p, seed);
        AmplitudeOptions opts;
        opts.s = s;
        opts.seed = seed;
        opts.horizon = cfg.number("horizon", opts.horizon);
        opts.newton = newton_options(cfg);
        const AmplitudeResult r =
            amplitude_bounds_check(cfg.numbers("lambda_list", {50.0, 100.0, 200.0, 400.0}), p, opts);
        std::vector<std::vector<double>> rows;
        for (const auto& row : r.rows) {
            rows.push_back({row.lambda, row.sup_v, row.sup_wave, row.sup_g, double(row.ok)});
            if (!row.ok)
                fmt::print(stderr, "warning: lambda {} skipped: {}\n", row.lambda, row.reason);
        }
        out.push_back(dir / "amplitude.csv");
        write_csv(out.back(), {"lambda", "sup_v", "sup_wave", "sup_g", "ok"}, rows);
        out.push_back(dir / "amplitude_fit.csv");
        write_csv(out.back(), {"exponent_v", "exponent_g", "alpha_minus_1", "c"},
                  {{r.exponent_v.value_or(NAN), r.exponent_g.value_or(NAN), p.alpha - 1.0, p.c}});
        fmt::print("probe: exponent of sup |v| {:.4f}, of sup |g| {:.4f}\n", r.exponent_v.value_or(NAN),
                   r.exponent_g.value_or(NAN));
        return 0;
    }
    throw PreconditionError(fmt::format("unknown probe '{}'", kind));
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Quasi-periodic traveling waves of the forced beta-plane equation: construction, reduction and "
                 "stability experiments"};
    app.require_subcommand(1);
    Common common;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("-c,--config", common.config_path, "flat key = value config file")->check(CLI::ExistingFile);
        sub->add_option("--set", common.overrides, "override a config key (key=value), repeatable");
        sub->add_option("-o,--out", common.out_dir, "output directory");
    };
    auto* wave = app.add_subcommand("wave", "construct and persist the traveling wave");
    auto* red = app.add_subcommand("reduce", "run the reduction pipeline and persist the reduced form");
    auto* sim = app.add_subcommand("simulate", "one perturbation run around the wave");
    bool transformed = false;
    sim->add_flag("--transformed", transformed, "integrate the transformed equation instead");
    auto* sweep = app.add_subcommand("sweep", "escape-time sweep over delta_list");
    auto* measure = app.add_subcommand("measure", "Monte Carlo Melnikov measure");
    auto* probe = app.add_subcommand("probe", "conservation, Kato-Ponce or amplitude probe");
    std::string kind = "conservation";
    probe->add_option("kind", kind, "conservation | kato-ponce | amplitude")
        ->check(CLI::IsMember({"conservation", "kato-ponce", "amplitude"}));
    for (auto* sub : {wave, red, sim, sweep, measure, probe})
        add_common(sub);

    CLI11_PARSE(app, argc, argv);
    try {
        if (wave->parsed())
            return run_command("wave", common, cmd_wave);
        if (red->parsed())
            return run_command("reduce", common, cmd_reduce);
        if (sim->parsed())
            return run_command("simulate", common, [&](const RunConfig& c, const fs::path& d, std::vector<fs::path>& o) {
                return cmd_simulate(c, d, o, transformed);
            });
        if (sweep->parsed())
            return run_command("sweep", common, cmd_sweep);
        if (measure->parsed())
            return run_command("measure", common, cmd_measure);
        return run_command("probe", common, [&](const RunConfig& c, const fs::path& d, std::vector<fs::path>& o) {
            return cmd_probe(c, d, o, kind);
        });
    } catch (const Error& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return e.exit_code();
    } catch (const std::exception& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return 1;
    }
}
