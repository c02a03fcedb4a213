#pragma once

#include "bpl/dynamics.hpp"
#include "bpl/reduction.hpp"
#include "bpl/wave.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace bpl {

// All runs whose every row is censored end with this exit code.
inline constexpr int kExitInconclusive = 4;

struct StabilityOptions {
    double s = 3.0;
    double dt = 1e-3;
    // Steps between trace samples; T_star is interpolated between samples. The norm oscillates on the
    // forcing period 2 pi / (lambda |omega|), so samples must resolve that period.
    int sample_every = 5;
    // Escape threshold as a multiple of delta.
    double escape_factor = 2.0;
    bool stop_at_escape = true;
    // H^s norm at which a run is declared divergent.
    double ceiling = 1e8;
    bool keep_samples = false;
};

// Norm trace of a perturbation with a companion trace one derivative lower.
struct NormTrace {
    std::vector<double> t;
    std::vector<double> norm;
    std::vector<double> tail;
};

struct StabilityRun {
    double delta = 0.0;
    double s = 0.0;
    double horizon = 0.0;
    NormTrace trace;
    // First crossing of escape_factor * delta, or the horizon when censored. delta = 0 never escapes.
    double T_star = 0.0;
    bool censored = true;
    bool diverged = false;
    Field2 final_state;
    // Sampled states when keep_samples is set, aligned with trace.t.
    std::vector<Field2> samples;
    std::uint64_t params_hash = 0;
};

// Random real, odd (sine series) field on |j|_inf <= N_x/2 - 1 with <j>^-2 decay, scaled to H^s norm delta.
Field2 random_perturbation(int N_x, double delta, double s, std::uint64_t seed);

// v_lambda(lambda omega t, .)
Field2 wave_slice(const TravelingField& wave, const ModelParams& p, double t);

// delta ceiling lambda^theta / 6 of the short-time estimate
double delta_ceiling(const ModelParams& p);

// d_t w = L(lambda omega t) w + N[w, w] around the traveling wave, with i beta L exact and the rest under ETDRK4.
StabilityRun integrate_perturbation(const Field2& w0, double delta, double horizon, const ModelParams& p,
                                    const TravelingField& wave, const StabilityOptions& opts);
// Continues a censored run from its final state up to a later horizon.
StabilityRun extend_perturbation(StabilityRun run, double horizon, const ModelParams& p, const TravelingField& wave,
                                 const StabilityOptions& opts);

// Second path: integrates the full equation from v_lambda(0) + w0 and subtracts v_lambda(lambda omega t).
Trajectory perturbation_via_full(const Field2& w0, double horizon, const ModelParams& p, const Forcing& f,
                                 const TravelingField& wave, double dt, int sample_every);

// d_t psi = D psi + Q(lambda omega t, psi) with D exact. With nonlinear = false only D acts.
StabilityRun integrate_transformed(const Field2& psi0, double delta, double horizon, const ReducedForm& rf,
                                   const StabilityOptions& opts, bool nonlinear = true);

// First time the trace reaches threshold, linearly interpolated between samples.
std::optional<double> first_crossing(const NormTrace& trace, double threshold);

// Smallest C with centred differences of the norm below C norm^2 at every interior sample.
double fit_energy_constant(const NormTrace& trace);

// Least-squares slope of log y against log x.
double fit_exponent(std::span<const double> x, std::span<const double> y);

struct SweepOptions {
    // Horizon is horizon_factor / delta; a non-positive factor is calibrated from the first row.
    double horizon_factor = 0.0;
    // Calibrated factor = calibration_margin * T_star(delta_0) * delta_0.
    double calibration_margin = 8.0;
    // Horizon of the calibration run, times 1 / delta_0.
    double calibration_budget = 400.0;
    std::uint64_t seed = 1;
    StabilityOptions run{};
};

struct SweepRow {
    double delta = 0.0;
    double T_star = 0.0;
    double horizon = 0.0;
    bool censored = true;
    bool extended = false;
    bool diverged = false;
};

struct SweepResult {
    std::vector<SweepRow> rows;
    double horizon_factor = 0.0;
    // Slope of log T_star against log delta over uncensored rows, when at least two exist.
    std::optional<double> exponent;
    // min over uncensored rows of T_star * delta
    std::optional<double> c_s;
    bool inconclusive = false;
};

// One perturbation shape (fixed seed) scaled to each delta. Deltas must be descending, positive and below
// delta_ceiling. Censored rows are extended once to twice their horizon.
SweepResult escape_time_sweep(std::span<const double> deltas, const ModelParams& p, const TravelingField& wave,
                              const SweepOptions& opts);

using ForcingFactory = std::function<Forcing(const ModelParams&)>;

struct AmplitudeOptions {
    double s = 3.0;
    double horizon = 10.0;
    // Perturbation size as a fraction of lambda^theta; zero starts on the wave.
    double delta_fraction = 1.0 / 12.0;
    // Largest phase advance lambda |omega|_inf dt per step.
    double max_phase_step = 0.15;
    int sample_every = 20;
    std::uint64_t seed = 1;
    NewtonOptions newton = [] {
        NewtonOptions o;
        o.tol = 1e-12;
        return o;
    }();
};

struct AmplitudeRow {
    double lambda = 0.0;
    double sup_v = 0.0;
    double sup_wave = 0.0;
    double sup_g = 0.0;
    bool ok = false;
    std::string reason;
};

struct AmplitudeResult {
    std::vector<AmplitudeRow> rows;
    std::optional<double> exponent_v;
    std::optional<double> exponent_g;
};

AmplitudeResult amplitude_bounds_check(std::span<const double> lambdas, const ModelParams& tmpl,
                                       const AmplitudeOptions& opts, const ForcingFactory& forcing = Forcing::standard);

// Vector field with mean, coefficients over the box |k|_inf <= N in IndexBox order.
struct VectorCoefficients {
    int N = 0;
    std::vector<cplx> c1;
    std::vector<cplx> c2;
    explicit VectorCoefficients(int N = 1);
};

// [Lambda^s, a.grad] u by direct convolution, kept on the box of u (zero mode included).
std::vector<cplx> kato_ponce_commutator(const VectorCoefficients& a, const Field2& u, double s);
// |[Lambda^s, a.grad] u|_L2 / (|a|_H^s |u|_H^s)
double kato_ponce_ratio(const VectorCoefficients& a, const Field2& u, double s);

struct KatoPonceResult {
    double max_ratio = 0.0;
    double mean_ratio = 0.0;
    int N = 0;
    int corpus_size = 0;
};
// Corpus fields are drawn on a fixed generation box and truncated to N, so probes at different N see the
// same fields. Requires s > 2 and N <= kKatoPonceGenerationBox.
inline constexpr int kKatoPonceGenerationBox = 32;
KatoPonceResult kato_ponce_probe(int corpus_size, double s, std::uint64_t seed, int N);

// Unforced control: the zero state stays zero and a seeded field keeps its energy and enstrophy.
struct ConservationResult {
    double zero_state_norm = 0.0;
    double energy_drift = 0.0;
    double enstrophy_drift = 0.0;
    double tol = 0.0;
    bool passed = false;
};
ConservationResult conservation_probe(const ModelParams& p, std::uint64_t seed, double horizon = 1.0, double dt = 1e-3,
                                      double tol = 1e-9);

} // namespace bpl
