#include "bpl/error.hpp"
#include "bpl/reduction.hpp"

#include <cmath>
#include <fmt/format.h>
#include <limits>

namespace bpl {

ReductionSchedule ReductionSchedule::from(const ModelParams& p, double N0)
{
    ReductionSchedule s;
    s.tau = p.tau();
    const double gap = 2.0 * (1.0 - p.c) - p.alpha;
    if (!(gap > 0.0))
        throw PreconditionError(fmt::format("schedule: 2(1 - c) - alpha = {:.6g} must be positive", gap));
    s.M = static_cast<int>(std::floor(std::max(2.0 * s.tau, (1.0 - p.c) / gap))) + 1;
    s.tau1 = 4.0 * s.tau + 2.0 + s.M;
    s.a = 3.0 * (2.0 * s.tau + s.M + 1.0) + 1.0;
    s.b = s.a + 1.0;
    if (!(N0 > 1.0))
        throw PreconditionError(fmt::format("schedule: N0 must exceed 1 (got {})", N0));
    s.N0 = N0;
    return s;
}

double ReductionSchedule::N(int n) const { return n < 0 ? 1.0 : std::pow(N0, std::pow(1.5, n)); }

int operator_phase_truncation(const ModelParams& p) { return operator_phase_truncation(p.map, p.N_phi, p.N_x); }

namespace {

// Same profile coefficients in a layout with other truncations.
TravelingField respaced(const TravelingField& f, int N_phi, int N_x)
{
    TravelingField out(f.map(), N_phi, N_x);
    for (int l = 0; l < f.lbox().size(); ++l)
        if (f.at(l) != cplx{})
            out.set(f.lbox().at(l), f.at(l));
    return out;
}

} // namespace

QPOperator LinearizedOperator::full() const
{
    QPOperator out = dispersion.to_operator(transport.map(), transport.N_l()) + transport + E0;
    verify_flags(out);
    return out;
}

QPOperator LinearizedOperator::retained() const
{
    return resized(full(), operator_phase_truncation(params.map, v.N_phi(), N_x), N_x);
}

LinearizedOperator linearize(const TravelingField& v, const ModelParams& p, int pad)
{
    p.validate();
    if (!(v.map() == p.map))
        throw PreconditionError("linearize: wave and parameters use different momentum maps");
    if (pad < 0)
        throw PreconditionError("linearize: negative padding");
    const int N_x = v.N_x() + pad;
    const int N_l = operator_phase_truncation(p.map, v.N_phi(), N_x);
    auto lbox = make_box(p.map.nu(), N_l);
    auto jbox = make_box(2, N_x);

    LinearizedOperator L;
    L.params = p;
    L.v = v;
    L.N_x = v.N_x();
    L.a0 = biot_savart(v);
    L.a0.c1 *= cplx(-1.0);
    L.a0.c2 *= cplx(-1.0);
    L.dispersion = DiagonalOperator::dispersion(N_x, p.beta);

    std::vector<std::vector<QPOperator::Entry>> advect(jbox->size()), stretch(jbox->size());
    double outside = 0.0;
    for (int lv = 0; lv < v.lbox().size(); ++lv) {
        const cplx c = v.at(lv);
        if (c == cplx{} || !v.admissible(lv))
            continue;
        const int l = lbox->index(v.lbox().at(lv));
        const Mode2 k = v.spatial_mode(lv);
        for (int jp = 0; jp < jbox->size(); ++jp) {
            const Mode2 mjp = jbox->mode2(jp);
            if (mjp.is_zero())
                continue;
            const Mode2 mj = mjp + k;
            const LinearizationWeights w = linearization_weights(mj, mjp);
            if (mj.is_zero())
                continue;
            if (!jbox->contains2(mj) || l < 0) {
                outside += std::norm(w.advect * c) + std::norm(w.stretch * c);
                continue;
            }
            const int j = jbox->index2(mj);
            if (w.advect != 0.0)
                advect[j].push_back({jp, l, w.advect * c});
            if (w.stretch != 0.0)
                stretch[j].push_back({jp, l, w.stretch * c});
        }
    }
    L.transport = OperatorAssembly::from_rows(p.map, N_l, N_x, std::move(advect));
    L.E0 = OperatorAssembly::from_rows(p.map, N_l, N_x, std::move(stretch));
    verify_flags(L.transport);
    verify_flags(L.E0);
    L.assembly_residual = std::sqrt(outside);
    return L;
}

ScreeningResult diophantine_screen(std::span<const double> omega, double gamma, double tau, int N)
{
    ScreeningResult r;
    r.min_ratio = std::numeric_limits<double>::infinity();
    auto box = make_box(static_cast<int>(omega.size()), N);
    for (int l = 0; l < box->size(); ++l) {
        if (l == box->zero())
            continue;
        auto m = box->at(l);
        double t = 0.0;
        for (std::size_t k = 0; k < omega.size(); ++k)
            t += omega[k] * m[k];
        const double thr = 2.0 * gamma * std::pow(std::max(1.0, box->norm(l)), -tau);
        const double ratio = std::abs(t) / thr;
        if (ratio < r.min_ratio) {
            r.min_ratio = ratio;
            r.worst_l.assign(m.begin(), m.end());
            r.worst_divisor = std::abs(t);
        }
    }
    return r;
}

namespace {

TravelingField phase_derivative(const TravelingField& f, int k)
{
    TravelingField d = f;
    for (int l = 0; l < f.lbox().size(); ++l)
        d.at(l) *= cplx(0.0, f.lbox().at(l)[k]);
    return d;
}

double pair_norm(const VectorTraveling& v, double s)
{
    return std::hypot(sobolev_norm(v.c1, s), sobolev_norm(v.c2, s));
}

} // namespace

Straightening straighten_transport(const VectorTraveling& b, const ModelParams& p, const ReductionSchedule& sched)
{
    p.validate();
    const double small = p.eps() / p.gamma();
    if (small > sched.smallness)
        throw PreconditionError(fmt::format("straighten: lambda^(theta-1) gamma^-1 = {:.6g} exceeds the smallness bound {:.6g}",
                                            small, sched.smallness));
    const MomentumMap& map = b.c1.map();
    const int N_phi = b.c1.N_phi(), N_x = b.c1.N_x(), nu = map.nu();

    Straightening st;
    ScreeningResult dc = diophantine_screen(p.omega, sched.nonresonance_scale * p.gamma(), sched.tau,
                                        operator_phase_truncation(map, N_phi, N_x));
    st.dc_ratio = dc.min_ratio;
    if (dc.min_ratio < 1.0)
        throw ResonanceError(fmt::format("straighten: omega violates DC(2 gamma, tau) at l = ({}), |omega.l| = {:.6g}",
                                         fmt::join(dc.worst_l, ", "), dc.worst_divisor),
                             dc.worst_divisor, dc.worst_divisor / dc.min_ratio);

    TorusEngine engine(map, N_phi, N_x);
    // (pi b)_k = jbar_k . b
    std::vector<TravelingField> pib;
    for (const Mode2& w : map.wave_vectors())
        pib.push_back(cplx(w.j1) * b.c1 + cplx(w.j2) * b.c2);

    // sum_k (pi b)_k d_k P
    auto drift = [&](const TravelingField& P, double* dropped) {
        TravelingField acc(map, N_phi, N_x);
        for (int k = 0; k < nu; ++k)
            acc += engine.product(pib[k], phase_derivative(P, k), dropped);
        return acc;
    };
    auto omega_derivative = [&](const TravelingField& P) {
        TravelingField d = P;
        for (int l = 0; l < P.lbox().size(); ++l) {
            auto m = P.lbox().at(l);
            double t = 0.0;
            for (int k = 0; k < nu; ++k)
                t += p.omega[k] * m[k];
            d.at(l) *= cplx(0.0, t);
        }
        return d;
    };
    auto residual_of = [&](const VectorTraveling& P, double* dropped) {
        VectorTraveling r{omega_derivative(P.c1) - drift(P.c1, dropped) + b.c1,
                          omega_derivative(P.c2) - drift(P.c2, dropped) + b.c2};
        return r;
    };

    // Fixed point P <- (omega.d)^{-1} Pi ((pi b).d P - b) on the l != 0 modes; the contraction ratio is the
    // geometric mean of the last few update ratios.
    auto invert_omega = [&](const TravelingField& f) {
        TravelingField d(map, N_phi, N_x);
        for (int l = 0; l < f.lbox().size(); ++l) {
            if (l == f.lbox().zero() || !f.admissible(l))
                continue;
            auto m = f.lbox().at(l);
            double t = 0.0;
            for (int k = 0; k < nu; ++k)
                t += p.omega[k] * m[k];
            d.at(l) = f.at(l) / cplx(0.0, t);
        }
        return d;
    };
    constexpr int kWindow = 5;
    const double s = sched.norm_s;
    VectorTraveling P{TravelingField(map, N_phi, N_x), TravelingField(map, N_phi, N_x)};
    std::vector<double> steps;
    for (int it = 1; it <= sched.straighten_max_iter; ++it) {
        VectorTraveling next{invert_omega(drift(P.c1, nullptr) - b.c1), invert_omega(drift(P.c2, nullptr) - b.c2)};
        steps.push_back(std::hypot(sobolev_norm(next.c1 - P.c1, s), sobolev_norm(next.c2 - P.c2, s)));
        P = std::move(next);
        st.iterations = it;
        double dropped = 0.0;
        st.residual_field = residual_of(P, &dropped);
        st.residual = pair_norm(st.residual_field, s);
        st.dropped = std::sqrt(dropped);
        const int k = static_cast<int>(steps.size());
        if (k > kWindow && steps[k - 1 - kWindow] > 0.0)
            st.contraction = std::pow(steps[k - 1] / steps[k - 1 - kWindow], 1.0 / kWindow);
        if (st.residual <= sched.straighten_tol || steps.back() == 0.0)
            break;
        if (k > kWindow && st.contraction >= 1.0)
            throw PreconditionError(fmt::format("straighten: fixed-point iteration diverges, contraction ratio {:.4g}",
                                                st.contraction));
    }
    if (st.residual > sched.straighten_tol)
        throw PreconditionError(fmt::format("straighten: residual {:.3g} above {:.3g} after {} iterations (contraction {:.4g})",
                                            st.residual, sched.straighten_tol, st.iterations, st.contraction));
    P.c1.enforce_real();
    P.c2.enforce_real();
    st.beta = P;
    st.beta_norm = pair_norm(P, s);

    const int N_pad = N_x + sched.pad;
    TravelingComposition comp = composition_operator({respaced(P.c1, N_phi, N_pad), respaced(P.c2, N_phi, N_pad)},
                                                     operator_phase_truncation(map, N_phi, N_pad));
    st.B = std::move(comp.ops.B);
    st.B_inv = std::move(comp.ops.B_inv);
    st.beta_inv = std::move(comp.inverse_profile);
    st.min_jacobian = comp.min_jacobian;
    return st;
}

ConjugatedL1 conjugate_to_L1(const LinearizedOperator& L, const Straightening& st, const ReductionSchedule& sched)
{
    const ModelParams& p = L.params;
    if (!st.B.same_layout(L.transport))
        throw PreconditionError("conjugate_to_L1: straightening and linearized operator use different layouts");
    std::vector<double> lw(p.omega.size());
    for (std::size_t k = 0; k < lw.size(); ++k)
        lw[k] = p.lambda * p.omega[k];

    ConjugatedL1 out;
    const QPOperator E1_padded =
        pushforward(st.B, st.B_inv, L.full(), lw) - L.dispersion.to_operator(p.map, L.transport.N_l());
    out.E1 = resized(E1_padded, operator_phase_truncation(p.map, L.v.N_phi(), L.N_x), L.N_x);
    verify_flags(out.E1);
    out.E1_norm = decay_norm(out.E1, -1.0, sched.norm_s);

    const int N_phi = st.residual_field.c1.N_phi() + st.B_inv.N_l();
    const TravelingField r1 = apply(st.B_inv, respaced(st.residual_field.c1, N_phi, st.B_inv.N_x()));
    const TravelingField r2 = apply(st.B_inv, respaced(st.residual_field.c2, N_phi, st.B_inv.N_x()));
    out.b0_norm = p.lambda * std::hypot(sobolev_norm(r1, sched.norm_s), sobolev_norm(r2, sched.norm_s));
    return out;
}

} // namespace bpl
