#include "bpl/error.hpp"
#include "bpl/stability.hpp"

#include <cmath>
#include <random>

namespace bpl {

VectorCoefficients::VectorCoefficients(int N) : N(N)
{
    const auto box = make_box(2, N);
    c1.assign(box->size(), cplx{});
    c2.assign(box->size(), cplx{});
}

std::vector<cplx> kato_ponce_commutator(const VectorCoefficients& a, const Field2& u, double s)
{
    const auto abox = make_box(2, a.N);
    const IndexBox& ubox = u.box();
    std::vector<double> weight(ubox.size());
    for (int i = 0; i < ubox.size(); ++i)
        weight[i] = std::pow(std::max(1.0, ubox.norm(i)), s);
    std::vector<cplx> out(ubox.size());
    for (int k = 0; k < ubox.size(); ++k) {
        const Mode2 kk = ubox.mode2(k);
        cplx acc{};
        for (int m = 0; m < ubox.size(); ++m) {
            const cplx um = u.at(m);
            if (um == cplx{})
                continue;
            const Mode2 mm = ubox.mode2(m);
            const Mode2 q = kk - mm;
            if (!abox->contains2(q))
                continue;
            const int qi = abox->index2(q);
            // a(k - m) . (i m) u(m), weighted by the symbol difference of Lambda^s
            const cplx grad = a.c1[qi] * cplx(0.0, mm.j1) + a.c2[qi] * cplx(0.0, mm.j2);
            acc += (weight[k] - weight[m]) * grad * um;
        }
        out[k] = acc;
    }
    return out;
}

double kato_ponce_ratio(const VectorCoefficients& a, const Field2& u, double s)
{
    double comm = 0.0;
    for (const cplx& c : kato_ponce_commutator(a, u, s))
        comm += std::norm(c);
    const auto abox = make_box(2, a.N);
    double an = 0.0;
    for (int i = 0; i < abox->size(); ++i)
        an += std::pow(std::max(1.0, abox->norm(i)), 2.0 * s) * (std::norm(a.c1[i]) + std::norm(a.c2[i]));
    const double denom = std::sqrt(an) * sobolev_norm(u, s);
    return denom > 0.0 ? std::sqrt(comm) / denom : 0.0;
}

namespace {

// Real coefficients with <j>^-decay over the box, the mean included when requested.
std::vector<cplx> real_random_coefficients(const IndexBox& box, double decay, bool with_mean, std::mt19937_64& rng)
{
    std::normal_distribution<double> gauss;
    std::vector<cplx> c(box.size());
    for (int i = 0; i < box.size(); ++i) {
        const Mode2 j = box.mode2(i);
        if (j < -j)
            continue;
        const double w = std::pow(std::max(1.0, box.norm(i)), -decay);
        if (j.is_zero()) {
            const double re = gauss(rng);
            c[i] = with_mean ? w * re : 0.0;
            continue;
        }
        const double re = gauss(rng), im = gauss(rng);
        c[i] = w * cplx(re, im);
        c[box.neg(i)] = std::conj(c[i]);
    }
    return c;
}

} // namespace

KatoPonceResult kato_ponce_probe(int corpus_size, double s, std::uint64_t seed, int N)
{
    if (!(s > 2.0))
        throw PreconditionError("kato_ponce_probe: Sobolev index must exceed 2");
    if (N < 1 || N > kKatoPonceGenerationBox || corpus_size < 1)
        throw PreconditionError("kato_ponce_probe: truncation outside the generation box or empty corpus");
    const auto gen = make_box(2, kKatoPonceGenerationBox);
    const auto box = make_box(2, N);
    const double decay = s + 2.0;
    std::mt19937_64 rng(seed);
    KatoPonceResult out;
    out.N = N;
    out.corpus_size = corpus_size;
    for (int n = 0; n < corpus_size; ++n) {
        const auto a1 = real_random_coefficients(*gen, decay, true, rng);
        const auto a2 = real_random_coefficients(*gen, decay, true, rng);
        const auto uc = real_random_coefficients(*gen, decay, false, rng);
        VectorCoefficients a(N);
        Field2 u(N);
        for (int i = 0; i < box->size(); ++i) {
            const int g = gen->index2(box->mode2(i));
            a.c1[i] = a1[g];
            a.c2[i] = a2[g];
            u.at(i) = uc[g];
        }
        const double r = kato_ponce_ratio(a, u, s);
        out.max_ratio = std::max(out.max_ratio, r);
        out.mean_ratio += r / corpus_size;
    }
    return out;
}

ConservationResult conservation_probe(const ModelParams& p, std::uint64_t seed, double horizon, double dt, double tol)
{
    const Forcing none = Forcing::zero(p);
    ConservationResult out;
    out.tol = tol;

    const Trajectory still = integrate(Field2(p.N_x), 0.0, horizon, p, none, dt);
    out.zero_state_norm = sobolev_norm(still.v.back(), 0.0);

    std::mt19937_64 rng(seed);
    Field2 v0(p.N_x);
    const auto c = real_random_coefficients(v0.box(), 2.0, false, rng);
    for (int i = 0; i < v0.box().size(); ++i)
        v0.at(i) = c[i];
    v0 = (1.0 / sobolev_norm(v0, 0.0)) * v0;
    auto energy = [](const Field2& v) {
        double e = 0.0;
        for (int i = 0; i < v.box().size(); ++i) {
            const int n2 = v.box().mode2(i).norm2();
            if (n2 > 0)
                e += std::norm(v.at(i)) / n2;
        }
        return e;
    };
    const Trajectory run = integrate(v0, 0.0, horizon, p, none, dt);
    const Field2& v1 = run.v.back();
    out.energy_drift = std::abs(energy(v1) - energy(v0)) / energy(v0);
    const double z0 = std::pow(sobolev_norm(v0, 0.0), 2), z1 = std::pow(sobolev_norm(v1, 0.0), 2);
    out.enstrophy_drift = std::abs(z1 - z0) / z0;
    out.passed = out.zero_state_norm == 0.0 && out.energy_drift <= tol && out.enstrophy_drift <= tol;
    return out;
}

} // namespace bpl
