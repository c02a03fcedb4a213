#include "bpl/error.hpp"
#include "bpl/stability.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>

namespace bpl {

namespace {

SweepRow row_of(const StabilityRun& run, bool extended)
{
    return {run.delta, run.T_star, run.horizon, run.censored, extended, run.diverged};
}

} // namespace

SweepResult escape_time_sweep(std::span<const double> deltas, const ModelParams& p, const TravelingField& wave,
                              const SweepOptions& opts)
{
    if (deltas.empty())
        throw PreconditionError("escape_time_sweep: empty delta list");
    const double ceiling = delta_ceiling(p);
    for (std::size_t i = 0; i < deltas.size(); ++i) {
        if (!(deltas[i] > 0.0) || !(deltas[i] < ceiling))
            throw PreconditionError(
                fmt::format("escape_time_sweep: delta = {:.6g} outside (0, lambda^theta/6 = {:.6g})", deltas[i], ceiling));
        if (i > 0 && !(deltas[i] < deltas[i - 1]))
            throw PreconditionError("escape_time_sweep: deltas must be strictly descending");
    }

    const Field2 shape = random_perturbation(p.N_x, 1.0, opts.run.s, opts.seed);
    auto run_row = [&](double delta, double horizon) {
        return integrate_perturbation(delta * shape, delta, horizon, p, wave, opts.run);
    };

    SweepResult out;
    std::optional<StabilityRun> first;
    out.horizon_factor = opts.horizon_factor;
    if (!(out.horizon_factor > 0.0)) {
        // c_s is forcing dependent, so the horizon scale comes from the largest delta.
        first = run_row(deltas[0], opts.calibration_budget / deltas[0]);
        out.horizon_factor = first->censored ? opts.calibration_budget
                                             : opts.calibration_margin * first->T_star * deltas[0];
    }

    for (std::size_t i = 0; i < deltas.size(); ++i) {
        const double delta = deltas[i];
        const double horizon = out.horizon_factor / delta;
        StabilityRun run = (i == 0 && first) ? std::move(*first) : run_row(delta, horizon);
        bool extended = false;
        if (run.censored && !run.diverged) {
            const double target = 2.0 * std::max(horizon, run.horizon);
            run = extend_perturbation(std::move(run), target, p, wave, opts.run);
            extended = true;
        }
        out.rows.push_back(row_of(run, extended));
    }

    std::vector<double> d, T;
    for (const auto& r : out.rows)
        if (!r.censored) {
            d.push_back(r.delta);
            T.push_back(r.T_star);
            out.c_s = std::min(out.c_s.value_or(r.T_star * r.delta), r.T_star * r.delta);
        }
    out.inconclusive = d.empty();
    if (d.size() >= 2)
        out.exponent = fit_exponent(d, T);
    return out;
}

AmplitudeResult amplitude_bounds_check(std::span<const double> lambdas, const ModelParams& tmpl,
                                       const AmplitudeOptions& opts, const ForcingFactory& forcing)
{
    if (!(opts.s > 2.0) || !(opts.horizon > 0.0) || !(opts.max_phase_step > 0.0) || opts.sample_every < 1)
        throw PreconditionError("amplitude_bounds_check: need s > 2, positive horizon and phase step");
    AmplitudeResult out;
    for (double lambda : lambdas) {
        AmplitudeRow row;
        row.lambda = lambda;
        ModelParams p = tmpl;
        p.lambda = lambda;
        try {
            p.validate();
            const Forcing f = forcing(p);
            // Construction screens the first Melnikov condition on the forcing support.
            const WaveSolution sol = newton_solve(p, f, opts.newton);

            const Field2 w0 = random_perturbation(p.N_x, opts.delta_fraction * std::pow(lambda, p.theta()), opts.s,
                                                  opts.seed);
            double omega_max = 0.0;
            for (double w : p.omega)
                omega_max = std::max(omega_max, std::abs(w));
            BetaPlane plane(p.N_x);
            const double speed = plane.max_velocity(wave_slice(sol.v, p, 0.0) + w0);
            // Phase resolution of the fast forcing and half the CFL limit.
            const double dt = std::min(opts.max_phase_step / (lambda * omega_max), 0.5 / (speed * p.N_x));
            const Trajectory traj =
                integrate(wave_slice(sol.v, p, 0.0) + w0, 0.0, opts.horizon, p, f, dt, {.sample_every = opts.sample_every});
            for (std::size_t k = 0; k < traj.t.size(); ++k) {
                row.sup_v = std::max(row.sup_v, sobolev_norm(traj.v[k], opts.s));
                row.sup_wave = std::max(row.sup_wave, sobolev_norm(wave_slice(sol.v, p, traj.t[k]), opts.s));
                row.sup_g = std::max(row.sup_g, sobolev_norm(wave_slice(sol.g, p, traj.t[k]), opts.s));
            }
            row.ok = true;
        } catch (const Error& e) {
            row.reason = e.what();
        }
        out.rows.push_back(std::move(row));
    }
    std::vector<double> l, v, g;
    for (const auto& r : out.rows)
        if (r.ok) {
            l.push_back(r.lambda);
            v.push_back(r.sup_v);
            g.push_back(r.sup_g);
        }
    if (l.size() >= 2) {
        out.exponent_v = fit_exponent(l, v);
        out.exponent_g = fit_exponent(l, g);
    }
    return out;
}

} // namespace bpl
