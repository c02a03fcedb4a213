#pragma once

#include "bpl/dynamics.hpp"
#include "bpl/operators.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace bpl {

// Constants of the reduction and the thresholds standing in for the unspecified smallness constants.
struct ReductionSchedule {
    double tau = 6.0;
    int M = 13;
    double tau1 = 39.0;
    double a = 79.0;
    double b = 80.0;
    double N0 = 4.0;
    int n_max = 6;
    // Sobolev index of the decay norms used for histories and stopping.
    double norm_s = 2.0;
    double straighten_tol = 1e-10;
    int straighten_max_iter = 200;
    // KAM stops once |E_n|_{-M, norm_s} < kam_rel_tol * lambda^theta.
    double kam_rel_tol = 1e-11;
    // lambda^{theta-1} gamma^{-1} bound for straightening and order reduction.
    double smallness = 0.5;
    // N0^tau1 (eps/gamma)^M bound for the KAM iteration.
    double kam_smallness = 1e18;
    // Factor on gamma in the lower bounds of the Diophantine and second Melnikov conditions.
    // DC(2 gamma, tau) with gamma = lambda^-c cannot hold at l = e_k for |omega_k| < 2 lambda^-c.
    double nonresonance_scale = 0.25;
    // Extra spatial modes carried by the change of variables B so that the truncation boundary stays
    // outside the retained box.
    int pad = 4;
    ExpOptions exp_options{};

    static ReductionSchedule from(const ModelParams& p, double N0 = 4.0);
    // N_{-1} = 1, N_n = N0^{(3/2)^n}
    double N(int n) const;
};

// Operators live on the spatial box N_x + pad; the reduction works on the retained box N_x.
struct LinearizedOperator {
    ModelParams params;
    TravelingField v;
    int N_x = 0; // retained box
    VectorTraveling a0; // -B(v)
    DiagonalOperator dispersion; // i beta L(j)
    QPOperator transport; // h -> a0.grad h
    QPOperator E0; // h -> -B(h).grad v
    // l2 size of the couplings whose output mode falls outside the spatial box
    double assembly_residual = 0.0;

    // dispersion + transport + E0 as one operator on the padded box
    QPOperator full() const;
    // full() restricted to the retained box
    QPOperator retained() const;
};

LinearizedOperator linearize(const TravelingField& v, const ModelParams& p, int pad = 0);
int operator_phase_truncation(const ModelParams& p);

struct Straightening {
    VectorTraveling beta;
    VectorTraveling beta_inv;
    // h -> h(x + beta) and its exact truncated inverse on the box N_x + pad
    QPOperator B;
    QPOperator B_inv;
    // r = omega.d_phi beta + b + b.grad beta inside the truncation
    VectorTraveling residual_field;
    // H^s norm of r and the squared-mass tail dropped by the products
    double residual = 0.0;
    double dropped = 0.0;
    int iterations = 0;
    double contraction = 0.0;
    double beta_norm = 0.0;
    double min_jacobian = 0.0;
    // min |omega.l| <l>^tau / (2 gamma) over the operator phase box
    double dc_ratio = 0.0;
};

// Solves omega.d_phi beta + b + b.grad beta = 0 for a traveling displacement. The linearized vector
// field transports along a0, so the pipeline passes b = -a0 / lambda.
Straightening straighten_transport(const VectorTraveling& b, const ModelParams& p, const ReductionSchedule& sched);

// min over 0 < |l|_inf <= N of |omega.l| <l>^tau / (2 gamma); below 1 violates DC(2 gamma, tau).
ScreeningResult diophantine_screen(std::span<const double> omega, double gamma, double tau, int N);

struct ConjugatedL1 {
    QPOperator E1; // retained box
    // lambda r o (id + beta-breve) with r the straightening residual, in H^s
    double b0_norm = 0.0;
    double E1_norm = 0.0; // |E1|_{-1, norm_s}
};
ConjugatedL1 conjugate_to_L1(const LinearizedOperator& L, const Straightening& st, const ReductionSchedule& sched);

struct OrderReduction {
    DiagonalOperator Z; // accumulated l = 0 diagonal
    QPOperator E; // E_M
    std::vector<QPOperator> generators; // X_1 .. X_{M-1}
    std::vector<double> history; // |E_m|_{-m, norm_s}, m = 1 .. M
};
OrderReduction order_reduce(const QPOperator& E1, const ModelParams& p, const ReductionSchedule& sched);

struct MelnikovViolation {
    std::vector<int> l;
    Mode2 j;
    Mode2 jp;
    double divisor = 0.0;
    double threshold = 0.0;
};

struct KamReduction {
    DiagonalOperator mu; // mu_infinity
    std::vector<DiagonalOperator> mu_history; // mu_0 .. mu_n
    std::vector<QPOperator> generators; // Psi_0 .. Psi_{n-1}
    std::vector<double> history; // |E_n|_{-M, norm_s}
    QPOperator remainder;
    // smallest divisor / threshold met by the second Melnikov conditions over all steps
    double min_melnikov_ratio = 0.0;
    double min_divisor = 0.0;
    std::vector<double> homological_residuals;
};

// D = i beta L + Z_M; remainder E_M.
KamReduction kam_reduce(const DiagonalOperator& D, const QPOperator& E_M, const ModelParams& p,
                        const ReductionSchedule& sched);

// Product of exponentials exp(X_1) ... exp(X_k) and its inverse exp(-X_k) ... exp(-X_1).
std::pair<QPOperator, QPOperator> lie_product(const std::vector<QPOperator>& generators, const QPOperator& identity,
                                              const ExpOptions& opts);

struct ReducedForm {
    ModelParams params;
    ReductionSchedule schedule;
    TravelingField v;
    VectorTraveling beta;
    VectorTraveling beta_inv;
    DiagonalOperator D;
    // Retained-box blocks. B, U and their inverses are blocks of padded operators, so they invert each
    // other only up to the outermost modes.
    QPOperator B;
    QPOperator B_inv;
    QPOperator W;
    QPOperator W_inv;
    QPOperator U;
    QPOperator U_inv;
    QPOperator L; // linearized operator
    // Padded change of variables U = B (W extended by the identity) and the padded L.
    QPOperator U_padded;
    QPOperator U_inv_padded;
    QPOperator L_padded;
    std::vector<std::string> stage_names;
    std::vector<double> stage_norms;
    std::vector<double> order_history;
    std::vector<double> kam_history;
    std::vector<DiagonalOperator> mu_history;
    double b0_norm = 0.0;
    // |U^{-1} L U - U^{-1} lambda omega.d_phi U - D|_{0,0} on the retained block of the padded conjugation
    double defect = 0.0;
    double W_distance = 0.0; // |W - Id|_{1,0} as a map H^{s-1} -> H^s
    double W_inv_distance = 0.0;
    double straighten_residual = 0.0;
    double dc_ratio = 0.0;
    double min_melnikov_ratio = 0.0;
    double min_divisor = 0.0;
    double assembly_residual = 0.0;
};

// W = Phi_M Phi_inf, U = B W, and the diagonalization defect.
ReducedForm assemble_U(const LinearizedOperator& L, const Straightening& st, const OrderReduction& order,
                       const KamReduction& kam, const ReductionSchedule& sched);

// All stages for one omega.
ReducedForm reduce(const TravelingField& v, const ModelParams& p, const ReductionSchedule& sched);

// U(lambda omega t) e^{D t} U(0)^{-1} w0 with the retained blocks of U.
Field2 reduced_linear_flow(const ReducedForm& rf, const Field2& w0, double t);
// Classical RK4 for d_t w = L(lambda omega t) w from w0 over [0, t].
Field2 integrate_linear(const QPOperator& L, std::span<const double> lambda_omega, const Field2& w0, double t,
                        int steps);

// Fraction of omega, uniform in 1 <= |omega| <= 2, violating DC(2 gamma, tau) or the final second
// Melnikov conditions |lambda omega.l + mu(j') - mu(j)| >= lambda gamma <l>^-tau |j'|^-tau over the
// truncated momentum pairs. mu defaults to i beta L when absent.
struct MelnikovMeasure {
    double fraction = 0.0;
    std::uint64_t samples = 0;
    std::uint64_t excised = 0;
    std::uint64_t dc_excised = 0;
};
MelnikovMeasure melnikov_measure(const ModelParams& p, double gamma, std::uint64_t n_samples, std::uint64_t seed,
                                 const std::optional<DiagonalOperator>& mu = std::nullopt, int N_l = 0);

struct TransformedNonlinearity {
    Velocity a; // transformed transport field at phase phi
    Field2 transport; // Pi_0^perp (a.grad psi)
    Field2 remainder; // R_Q
    Field2 total; // U^{-1} N[U psi, U psi] at phi
};
// U^{-1} N[U psi, U psi] at phi, the total field only.
Field2 transformed_quadratic(const ReducedForm& rf, const Field2& psi, std::span<const double> phi);
TransformedNonlinearity transformed_nonlinearity(const ReducedForm& rf, const Field2& psi, std::span<const double> phi);

} // namespace bpl
