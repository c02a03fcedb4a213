#include "bpl/error.hpp"
#include "bpl/reduction.hpp"

#include <cmath>
#include <fmt/format.h>
#include <limits>

namespace bpl {

namespace {

constexpr int kMaxSeriesTerms = 80;
constexpr double kRoundingFloor = 1e-12;

std::vector<double> lambda_omega(const ModelParams& p)
{
    std::vector<double> lw(p.omega.size());
    for (std::size_t k = 0; k < lw.size(); ++k)
        lw[k] = p.lambda * p.omega[k];
    return lw;
}

// sum_{k>=1} ad^k(Y)/(k+1)! + ad^k(E)/k! with ad(A) = [A, X]; terms are compared in the
// weighted norm of order `order` so that small high-frequency columns still count.
QPOperator conjugation_tail(const QPOperator& Y, const QPOperator& E, const QPOperator& X, double order, double s)
{
    QPOperator sum(X.map(), X.N_l(), X.N_x());
    if (X.nnz() == 0)
        return sum;
    QPOperator ty = Y, te = E;
    for (int k = 1; k <= kMaxSeriesTerms; ++k) {
        ty = commutator(ty, X);
        ty *= cplx(1.0 / (k + 1));
        te = commutator(te, X);
        te *= cplx(1.0 / k);
        QPOperator term = ty + te;
        sum += term;
        const double size = decay_norm(term, order, s);
        if (size == 0.0 || size <= 1e-16 * decay_norm(sum, order, s))
            return sum;
    }
    throw DivergenceError(fmt::format("conjugation series did not settle in {} terms", kMaxSeriesTerms));
}

QPOperator diagonal_at_zero(const QPOperator& E, DiagonalOperator* diag, const char* stage)
{
    DiagonalExtraction d = diagonal_part(E);
    if (d.off_diagonal_at_zero > 1e-13 * std::max(1.0, E.max_abs()))
        throw PreconditionError(fmt::format("{}: phase average has off-diagonal entries of size {:.3g}; the momentum map "
                                            "must be injective",
                                            stage, d.off_diagonal_at_zero));
    *diag = d.diagonal;
    return d.diagonal.to_operator(E.map(), E.N_l());
}

double phase_dot(std::span<const double> lw, std::span<const int> l)
{
    double t = 0.0;
    for (std::size_t k = 0; k < lw.size(); ++k)
        t += lw[k] * l[k];
    return t;
}

void antisymmetrize(DiagonalOperator& mu)
{
    const IndexBox& box = mu.box();
    for (int j = 0; j < box.size(); ++j) {
        const int nj = box.neg(j);
        if (j >= nj)
            continue;
        const cplx avg = 0.5 * (mu.at(j) - mu.at(nj));
        mu.at(j) = avg;
        mu.at(nj) = -avg;
    }
}

std::string describe_l(std::span<const int> l) { return fmt::format("({})", fmt::join(l, ", ")); }

} // namespace

OrderReduction order_reduce(const QPOperator& E1, const ModelParams& p, const ReductionSchedule& sched)
{
    p.validate();
    const double small = p.eps() / p.gamma();
    if (small > sched.smallness)
        throw PreconditionError(fmt::format("order_reduce: lambda^(theta-1) gamma^-1 = {:.6g} exceeds the smallness bound {:.6g}",
                                            small, sched.smallness));
    const auto lw = lambda_omega(p);
    const IndexBox& lb = E1.lbox();
    const QPOperator D0 = DiagonalOperator::dispersion(E1.N_x(), p.beta).to_operator(E1.map(), E1.N_l());
    // entries below kRoundingFloor of the operator scale are rounding noise for the symmetry checks
    const double floor = kRoundingFloor * std::max(E1.max_abs(), D0.max_abs());

    OrderReduction out;
    out.Z = DiagonalOperator(E1.N_x());
    out.E = E1;
    out.history.push_back(decay_norm(E1, -1.0, sched.norm_s));
    for (int m = 1; m < sched.M; ++m) {
        const QPOperator& E = out.E;
        // X = sum_{l != 0} E(l) / (i lambda omega.l)
        QPOperator X = E.filtered([&](int l, int, int) { return l != lb.zero(); });
        for (int j = 0; j < X.jbox().size(); ++j)
            for (auto& e : X.row_mut(j)) {
                const double t = phase_dot(lw, lb.at(e.l));
                if (t == 0.0)
                    throw ResonanceError(fmt::format("order_reduce: omega.l = 0 at l = {}", describe_l(lb.at(e.l))), 0.0,
                                         0.0);
                e.v /= cplx(0.0, t);
            }
        verify_flags(X, 1e-12, floor);
        DiagonalOperator avg;
        const QPOperator E0hat = diagonal_at_zero(E, &avg, "order_reduce");

        const QPOperator C = commutator(D0 + out.Z.to_operator(E.map(), E.N_l()), X);
        const QPOperator Y = C + E0hat - E;
        QPOperator next = C + conjugation_tail(Y, E, X, -(m + 1), sched.norm_s);
        verify_flags(next, 1e-12, floor);
        out.Z += avg;
        out.generators.push_back(std::move(X));
        out.E = std::move(next);
        out.history.push_back(decay_norm(out.E, -(m + 1), sched.norm_s));
    }
    return out;
}

KamReduction kam_reduce(const DiagonalOperator& D, const QPOperator& E_M, const ModelParams& p,
                        const ReductionSchedule& sched)
{
    p.validate();
    const double kam_small = std::pow(sched.N0, sched.tau1) * std::pow(p.eps() / p.gamma(), sched.M);
    if (kam_small > sched.kam_smallness)
        throw PreconditionError(fmt::format("kam_reduce: N0^tau1 (eps/gamma)^M = {:.6g} exceeds the smallness bound {:.6g}",
                                            kam_small, sched.kam_smallness));
    const auto lw = lambda_omega(p);
    const IndexBox& lb = E_M.lbox();
    const IndexBox& jb = E_M.jbox();
    const double stop = sched.kam_rel_tol * std::pow(p.lambda, p.theta());
    const double lg = p.lambda * sched.nonresonance_scale * p.gamma();
    double mu_max = 0.0;
    for (cplx z : D.data())
        mu_max = std::max(mu_max, std::abs(z));
    const double floor = kRoundingFloor * std::max(E_M.max_abs(), mu_max);

    KamReduction out;
    out.mu = D;
    antisymmetrize(out.mu);
    out.mu_history.push_back(out.mu);
    out.remainder = E_M;
    out.history.push_back(decay_norm(E_M, -sched.M, sched.norm_s));
    out.min_melnikov_ratio = std::numeric_limits<double>::infinity();
    out.min_divisor = std::numeric_limits<double>::infinity();

    for (int n = 0; n < sched.n_max; ++n) {
        if (out.history.back() < stop)
            break;
        const double N = sched.N(n);
        const QPOperator& E = out.remainder;
        auto inside = [&](int l, int j, int jp) {
            return lb.norm(l) <= N && (jb.mode2(j) - jb.mode2(jp)).norm() <= N;
        };

        // second Melnikov conditions against the current eigenvalues over every momentum pair
        for (int l = 0; l < lb.size(); ++l) {
            if (l == lb.zero() || lb.norm(l) > N)
                continue;
            const Mode2 shift = E.map().transpose(lb.at(l));
            const double t = phase_dot(lw, lb.at(l));
            const double bracket_tau = std::pow(std::max(1.0, lb.norm(l)), sched.tau);
            for (int jp = 0; jp < jb.size(); ++jp) {
                const Mode2 mjp = jb.mode2(jp);
                const Mode2 mj = mjp - shift;
                if (mjp.is_zero() || mj.is_zero() || !jb.contains2(mj) || shift.norm() > N)
                    continue;
                const double div = std::abs(cplx(0.0, t) + out.mu[mjp] - out.mu[mj]);
                const double thr = lg / (bracket_tau * std::pow(mjp.norm(), sched.tau));
                out.min_divisor = std::min(out.min_divisor, div);
                out.min_melnikov_ratio = std::min(out.min_melnikov_ratio, div / thr);
                if (div < thr)
                    throw ResonanceError(fmt::format("kam_reduce: second Melnikov condition fails at step {}, l = {}, "
                                                     "j = ({}, {}), j' = ({}, {}): divisor {:.6g} < {:.6g}",
                                                     n, describe_l(lb.at(l)), mj.j1, mj.j2, mjp.j1, mjp.j2, div, thr),
                                         div, thr);
            }
        }

        DiagonalOperator avg;
        const QPOperator E0hat = diagonal_at_zero(E, &avg, "kam_reduce");
        QPOperator projected = E.filtered([&](int l, int j, int jp) { return l != lb.zero() && inside(l, j, jp); });
        const QPOperator rest = E.filtered([&](int l, int j, int jp) { return !inside(l, j, jp); });
        QPOperator Psi = projected;
        for (int j = 0; j < jb.size(); ++j)
            for (auto& e : Psi.row_mut(j))
                e.v /= cplx(0.0, phase_dot(lw, lb.at(e.l))) + out.mu.at(e.jp) - out.mu.at(j);
        verify_flags(Psi, 1e-12, floor);

        // lambda omega.d Psi - [D, Psi] reproduces the projected off-average part
        const QPOperator Dop = out.mu.to_operator(E.map(), E.N_l());
        const QPOperator check = phi_derivative(Psi, lw) - commutator(Dop, Psi) - projected;
        out.homological_residuals.push_back(projected.max_abs() > 0.0 ? check.max_abs() / projected.max_abs() : 0.0);

        const QPOperator Y = -1.0 * projected;
        QPOperator next = rest + conjugation_tail(Y, E, Psi, -sched.M, sched.norm_s);
        verify_flags(next, 1e-12, floor);
        out.mu += avg;
        antisymmetrize(out.mu);
        for (int j = 0; j < jb.size(); ++j) {
            const cplx z = out.mu.at(j);
            if (std::abs(z.real()) > 1e-12 * std::abs(z))
                throw DivergenceError(fmt::format("kam_reduce: eigenvalue at j = ({}, {}) has real part {:.3g}",
                                                  jb.mode2(j).j1, jb.mode2(j).j2, z.real()));
            out.mu.at(j) = cplx(0.0, z.imag());
        }
        out.mu_history.push_back(out.mu);
        out.generators.push_back(std::move(Psi));
        out.remainder = std::move(next);
        out.history.push_back(decay_norm(out.remainder, -sched.M, sched.norm_s));
    }
    return out;
}

std::pair<QPOperator, QPOperator> lie_product(const std::vector<QPOperator>& generators, const QPOperator& identity,
                                              const ExpOptions& opts)
{
    QPOperator forward = identity, inverse = identity;
    for (const QPOperator& X : generators) {
        forward = compose(forward, exp_operator(X, opts));
        inverse = compose(exp_operator(-1.0 * X, opts), inverse);
    }
    return {forward, inverse};
}

ReducedForm assemble_U(const LinearizedOperator& L, const Straightening& st, const OrderReduction& order,
                       const KamReduction& kam, const ReductionSchedule& sched)
{
    const ModelParams& p = L.params;
    const QPOperator Lpad = L.full();
    const QPOperator Lret = L.retained();
    if (!st.B.same_layout(Lpad) || !order.E.same_layout(Lret) || !kam.remainder.same_layout(Lret))
        throw PreconditionError("assemble_U: stages use different operator layouts");
    const int N_l = Lret.N_l(), N_x = Lret.N_x();
    const QPOperator I = QPOperator::identity(Lret.map(), N_l, N_x);
    const QPOperator Ipad = QPOperator::identity(Lpad.map(), Lpad.N_l(), Lpad.N_x());

    std::vector<QPOperator> generators = order.generators;
    generators.insert(generators.end(), kam.generators.begin(), kam.generators.end());
    auto [W, W_inv] = lie_product(generators, I, sched.exp_options);
    // W acts on the retained modes and as the identity beyond them
    const QPOperator W_pad = resized(W - I, Lpad.N_l(), Lpad.N_x()) + Ipad;
    const QPOperator W_inv_pad = resized(W_inv - I, Lpad.N_l(), Lpad.N_x()) + Ipad;

    ReducedForm rf;
    rf.params = p;
    rf.schedule = sched;
    rf.v = L.v;
    rf.beta = st.beta;
    rf.beta_inv = st.beta_inv;
    rf.D = kam.mu;
    rf.U_padded = compose(st.B, W_pad);
    rf.U_inv_padded = compose(W_inv_pad, st.B_inv);
    rf.L_padded = Lpad;
    rf.B = resized(st.B, N_l, N_x);
    rf.B_inv = resized(st.B_inv, N_l, N_x);
    rf.U = resized(rf.U_padded, N_l, N_x);
    rf.U_inv = resized(rf.U_inv_padded, N_l, N_x);
    rf.W_distance = decay_norm(W - I, -1.0, sched.norm_s);
    rf.W_inv_distance = decay_norm(W_inv - I, -1.0, sched.norm_s);
    rf.W = std::move(W);
    rf.W_inv = std::move(W_inv);
    rf.L = Lret;
    rf.order_history = order.history;
    rf.kam_history = kam.history;
    rf.mu_history = kam.mu_history;
    rf.straighten_residual = st.residual;
    rf.dc_ratio = st.dc_ratio;
    rf.min_melnikov_ratio = kam.min_melnikov_ratio;
    rf.min_divisor = kam.min_divisor;
    rf.assembly_residual = L.assembly_residual;

    const QPOperator conjugated = pushforward(rf.U_padded, rf.U_inv_padded, Lpad, lambda_omega(p));
    rf.defect = decay_norm(resized(conjugated, N_l, N_x) - kam.mu.to_operator(Lret.map(), N_l), 0.0, 0.0);
    return rf;
}

ReducedForm reduce(const TravelingField& v, const ModelParams& p, const ReductionSchedule& sched)
{
    LinearizedOperator L = linearize(v, p, sched.pad);
    // The vector field carries a0.grad with a0 = -B(v), so the transport cancels when
    // omega.d beta = lambda^-1 (a0 + a0.grad beta), i.e. the straightening equation with b = -a0 / lambda.
    VectorTraveling b{(-1.0 / p.lambda) * L.a0.c1, (-1.0 / p.lambda) * L.a0.c2};
    Straightening st = straighten_transport(b, p, sched);
    ConjugatedL1 l1 = conjugate_to_L1(L, st, sched);
    OrderReduction order = order_reduce(l1.E1, p, sched);
    DiagonalOperator D = DiagonalOperator::dispersion(v.N_x(), p.beta);
    D += order.Z;
    KamReduction kam = kam_reduce(D, order.E, p, sched);
    ReducedForm rf = assemble_U(L, st, order, kam, sched);
    rf.b0_norm = l1.b0_norm;
    const QPOperator D0 = DiagonalOperator::dispersion(v.N_x(), p.beta).to_operator(p.map, rf.L.N_l());
    rf.stage_names = {"E0", "E1", "EM", "Einf"};
    rf.stage_norms = {decay_norm(rf.L - D0, 0.0, 0.0), decay_norm(l1.E1, 0.0, 0.0), decay_norm(order.E, 0.0, 0.0),
                      decay_norm(kam.remainder, 0.0, 0.0)};
    return rf;
}

} // namespace bpl
