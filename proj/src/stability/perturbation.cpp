#include "bpl/error.hpp"
#include "bpl/stability.hpp"

#include <cmath>
#include <fmt/format.h>
#include <random>

namespace bpl {

namespace {

std::vector<double> phases(const ModelParams& p, double t)
{
    std::vector<double> phi(p.omega.size());
    for (std::size_t k = 0; k < phi.size(); ++k)
        phi[k] = p.lambda * p.omega[k] * t;
    return phi;
}

std::vector<cplx> dispersion_diagonal(const Field2& like, double beta)
{
    std::vector<cplx> lin(like.size());
    for (int i = 0; i < like.box().size(); ++i) {
        const Mode2 j = like.box().mode2(i);
        if (!j.is_zero())
            lin[i] = cplx(0.0, beta * dispersion_symbol(j));
    }
    return lin;
}

void record(StabilityRun& run, double t, const Field2& u, const StabilityOptions& opts)
{
    run.trace.t.push_back(t);
    run.trace.norm.push_back(sobolev_norm(u, run.s));
    run.trace.tail.push_back(sobolev_norm(u, run.s - 1.0));
    if (opts.keep_samples)
        run.samples.push_back(u);
}

// Advances run.final_state from the last trace time to horizon with a fixed-step scheme.
void advance(StabilityRun& run, double horizon, const Etdrk4::Rhs& rhs, const std::vector<cplx>& linear,
             const StabilityOptions& opts)
{
    const double t0 = run.trace.t.back();
    const long steps = static_cast<long>(std::ceil((horizon - t0) / opts.dt - 1e-12));
    run.horizon = horizon;
    if (steps <= 0)
        return;
    const double h = (horizon - t0) / steps;
    const Etdrk4 scheme(linear, h);
    const double threshold = opts.escape_factor * run.delta;
    Field2& u = run.final_state;
    for (long k = 1; k <= steps; ++k) {
        scheme.step(u, t0 + (k - 1) * h, rhs);
        if (k % opts.sample_every != 0 && k != steps)
            continue;
        record(run, t0 + k * h, u, opts);
        const double n = run.trace.norm.back();
        if (!std::isfinite(n) || n > opts.ceiling) {
            run.diverged = true;
            run.censored = true;
            run.T_star = run.trace.t.back();
            return;
        }
        if (threshold > 0.0 && n >= threshold && run.censored) {
            run.censored = false;
            run.T_star = *first_crossing(run.trace, threshold);
            if (opts.stop_at_escape)
                return;
        }
    }
    if (run.censored)
        run.T_star = horizon;
}

void check_options(const StabilityOptions& opts)
{
    if (!(opts.s > 2.0))
        throw PreconditionError("stability: Sobolev index must exceed 2");
    if (!(opts.dt > 0.0) || opts.sample_every < 1 || !(opts.escape_factor > 1.0))
        throw PreconditionError("stability: need dt > 0, sample_every >= 1 and escape_factor > 1");
}

void check_wave(const TravelingField& wave, const ModelParams& p)
{
    if (!(wave.map() == p.map) || wave.N_x() != p.N_x || static_cast<int>(p.omega.size()) != p.nu())
        throw PreconditionError("stability: wave layout does not match the parameters");
}

Etdrk4::Rhs perturbation_rhs(const TravelingField& wave, const ModelParams& p, std::shared_ptr<BetaPlane> plane)
{
    return [&wave, &p, plane](double t, const Field2& w) {
        return plane->perturbation_transport(wave_slice(wave, p, t), w, true);
    };
}

void check_cfl(const Field2& w, const TravelingField& wave, const ModelParams& p, double dt)
{
    BetaPlane plane(w.N());
    const double cfl = dt * plane.max_velocity(wave_slice(wave, p, 0.0) + w) * w.N();
    if (cfl > 1.0)
        throw PreconditionError(fmt::format("stability: CFL number {:.4g} exceeds 1 at the initial state", cfl));
}

} // namespace

Field2 random_perturbation(int N_x, double delta, double s, std::uint64_t seed)
{
    const int band = N_x / 2 - 1;
    if (band < 1)
        throw PreconditionError("random_perturbation: N_x must be at least 4");
    if (!(delta >= 0.0))
        throw PreconditionError("random_perturbation: delta must be non-negative");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss;
    Field2 w(N_x);
    for (int i = 0; i < w.box().size(); ++i) {
        const Mode2 j = w.box().mode2(i);
        if (j.is_zero() || j.max_abs() > band || j < -j)
            continue;
        const double b = gauss(rng) * std::pow(j.bracket(), -2.0);
        w.set(j, cplx(0.0, b));
        w.set(-j, cplx(0.0, -b));
    }
    const double n = sobolev_norm(w, s);
    return n > 0.0 ? (delta / n) * w : w;
}

Field2 wave_slice(const TravelingField& wave, const ModelParams& p, double t)
{
    return wave.slice(phases(p, t));
}

double delta_ceiling(const ModelParams& p)
{
    return std::pow(p.lambda, p.theta()) / 6.0;
}

std::optional<double> first_crossing(const NormTrace& trace, double threshold)
{
    for (std::size_t k = 0; k < trace.t.size(); ++k) {
        if (trace.norm[k] < threshold)
            continue;
        if (k == 0)
            return trace.t[0];
        const double n0 = trace.norm[k - 1], n1 = trace.norm[k];
        return trace.t[k - 1] + (threshold - n0) / (n1 - n0) * (trace.t[k] - trace.t[k - 1]);
    }
    return std::nullopt;
}

StabilityRun integrate_perturbation(const Field2& w0, double delta, double horizon, const ModelParams& p,
                                    const TravelingField& wave, const StabilityOptions& opts)
{
    p.validate();
    check_options(opts);
    check_wave(wave, p);
    if (w0.N() != p.N_x)
        throw PreconditionError("integrate_perturbation: perturbation truncation differs from N_x");
    if (!(horizon > 0.0))
        throw PreconditionError("integrate_perturbation: horizon must be positive");
    const double n0 = sobolev_norm(w0, opts.s);
    if (!(delta >= 0.0) || n0 > delta * (1.0 + 1e-12))
        throw PreconditionError(fmt::format("integrate_perturbation: |w0|_H^s = {:.6g} exceeds delta = {:.6g}", n0, delta));
    check_cfl(w0, wave, p, opts.dt);

    StabilityRun run;
    run.delta = delta;
    run.s = opts.s;
    run.params_hash = params_hash(p);
    run.final_state = w0;
    record(run, 0.0, w0, opts);
    auto plane = std::make_shared<BetaPlane>(p.N_x);
    advance(run, horizon, perturbation_rhs(wave, p, plane), dispersion_diagonal(w0, p.beta), opts);
    return run;
}

StabilityRun extend_perturbation(StabilityRun run, double horizon, const ModelParams& p, const TravelingField& wave,
                                 const StabilityOptions& opts)
{
    check_options(opts);
    check_wave(wave, p);
    if (!run.censored || run.diverged || run.trace.t.empty() || !(horizon > run.horizon))
        throw PreconditionError("extend_perturbation: only censored runs extend, to a later horizon");
    auto plane = std::make_shared<BetaPlane>(p.N_x);
    advance(run, horizon, perturbation_rhs(wave, p, plane), dispersion_diagonal(run.final_state, p.beta), opts);
    return run;
}

Trajectory perturbation_via_full(const Field2& w0, double horizon, const ModelParams& p, const Forcing& f,
                                 const TravelingField& wave, double dt, int sample_every)
{
    check_wave(wave, p);
    Trajectory traj = integrate(wave_slice(wave, p, 0.0) + w0, 0.0, horizon, p, f, dt, {.sample_every = sample_every});
    for (std::size_t k = 0; k < traj.t.size(); ++k)
        traj.v[k] -= wave_slice(wave, p, traj.t[k]);
    return traj;
}

StabilityRun integrate_transformed(const Field2& psi0, double delta, double horizon, const ReducedForm& rf,
                                   const StabilityOptions& opts, bool nonlinear)
{
    check_options(opts);
    const ModelParams& p = rf.params;
    if (psi0.N() != rf.D.N_x())
        throw PreconditionError("integrate_transformed: field truncation differs from the reduced form");
    if (!(horizon > 0.0))
        throw PreconditionError("integrate_transformed: horizon must be positive");
    const double n0 = sobolev_norm(psi0, opts.s);
    if (!(delta >= 0.0) || n0 > delta * (1.0 + 1e-12))
        throw PreconditionError(fmt::format("integrate_transformed: |psi0|_H^s = {:.6g} exceeds delta = {:.6g}", n0, delta));

    StabilityRun run;
    run.delta = delta;
    run.s = opts.s;
    run.params_hash = params_hash(p);
    run.final_state = psi0;
    record(run, 0.0, psi0, opts);
    const std::vector<cplx> linear(rf.D.data().begin(), rf.D.data().end());
    Etdrk4::Rhs rhs = [&rf, &p, nonlinear](double t, const Field2& psi) {
        return nonlinear ? transformed_quadratic(rf, psi, phases(p, t)) : Field2(psi.N());
    };
    advance(run, horizon, rhs, linear, opts);
    return run;
}

double fit_energy_constant(const NormTrace& trace)
{
    double C = 0.0;
    for (std::size_t k = 1; k + 1 < trace.t.size(); ++k) {
        const double dn = (trace.norm[k + 1] - trace.norm[k - 1]) / (trace.t[k + 1] - trace.t[k - 1]);
        const double n2 = trace.norm[k] * trace.norm[k];
        if (n2 > 0.0)
            C = std::max(C, dn / n2);
    }
    return C;
}

double fit_exponent(std::span<const double> x, std::span<const double> y)
{
    if (x.size() != y.size() || x.size() < 2)
        throw PreconditionError("fit_exponent: need at least two matching points");
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += std::log(x[i]);
        my += std::log(y[i]);
    }
    mx /= x.size();
    my /= y.size();
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = std::log(x[i]) - mx;
        sxy += dx * (std::log(y[i]) - my);
        sxx += dx * dx;
    }
    if (sxx == 0.0)
        throw PreconditionError("fit_exponent: abscissae coincide");
    return sxy / sxx;
}

} // namespace bpl
