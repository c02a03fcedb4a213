#include "bpl/error.hpp"
#include "bpl/reduction.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace bpl {

namespace {

constexpr std::uint64_t kChunk = 4096;

struct Interval {
    double lo;
    double hi;
};

// Excluded values of t = omega.l for one phase index, merged.
struct ExcludedSet {
    std::vector<int> l;
    std::vector<Interval> dc;
    std::vector<Interval> all;

    static bool hit(const std::vector<Interval>& set, double t)
    {
        auto it = std::upper_bound(set.begin(), set.end(), t, [](double x, const Interval& iv) { return x < iv.lo; });
        return it != set.begin() && t < std::prev(it)->hi;
    }
};

std::vector<Interval> merged(std::vector<Interval> v)
{
    std::sort(v.begin(), v.end(), [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
    std::vector<Interval> out;
    for (const Interval& iv : v) {
        if (!(iv.hi > iv.lo))
            continue;
        if (!out.empty() && iv.lo <= out.back().hi)
            out.back().hi = std::max(out.back().hi, iv.hi);
        else
            out.push_back(iv);
    }
    return out;
}

} // namespace

MelnikovMeasure melnikov_measure(const ModelParams& p, double gamma, std::uint64_t n_samples, std::uint64_t seed,
                                 const std::optional<DiagonalOperator>& mu, int N_l)
{
    p.validate();
    if (n_samples < 1)
        throw PreconditionError("melnikov_measure: need at least one sample");
    if (!(gamma >= 0.0))
        throw PreconditionError("melnikov_measure: gamma must be nonnegative");
    if (N_l <= 0)
        N_l = operator_phase_truncation(p);
    const DiagonalOperator eig = mu ? *mu : DiagonalOperator::dispersion(p.N_x, p.beta);
    const IndexBox& jb = eig.box();
    auto lb = make_box(p.nu(), N_l);
    const double tau = p.tau();

    // t -> -t with l -> -l maps the conditions onto themselves for antisymmetric eigenvalues, so half
    // the box is enough.
    std::vector<ExcludedSet> sets;
    for (int l = lb->zero() + 1; l < lb->size(); ++l) {
        ExcludedSet s;
        s.l.assign(lb->at(l).begin(), lb->at(l).end());
        const double bracket = std::pow(std::max(1.0, lb->norm(l)), -tau);
        s.dc.push_back({-2.0 * gamma * bracket, 2.0 * gamma * bracket});
        std::vector<Interval> all = s.dc;
        const Mode2 shift = p.map.transpose(lb->at(l));
        for (int jp = 0; jp < jb.size(); ++jp) {
            const Mode2 mjp = jb.mode2(jp);
            const Mode2 mj = mjp - shift;
            if (mjp.is_zero() || mj.is_zero() || !jb.contains2(mj))
                continue;
            const double center = -(eig[mjp].imag() - eig[mj].imag()) / p.lambda;
            const double radius = gamma * bracket * std::pow(mjp.norm(), -tau);
            all.push_back({center - radius, center + radius});
        }
        s.dc = merged(std::move(s.dc));
        s.all = merged(std::move(all));
        sets.push_back(std::move(s));
    }

    const int nu = p.nu();
    const double shell = std::pow(2.0, nu) - 1.0;
    MelnikovMeasure out;
    out.samples = n_samples;
    std::vector<double> omega(nu);
    for (std::uint64_t start = 0, chunk = 0; start < n_samples; start += kChunk, ++chunk) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(chunk), static_cast<std::uint32_t>(chunk >> 32)};
        std::mt19937_64 rng(seq);
        std::normal_distribution<double> normal;
        std::uniform_real_distribution<double> unit;
        const std::uint64_t count = std::min(kChunk, n_samples - start);
        for (std::uint64_t i = 0; i < count; ++i) {
            double n2 = 0.0;
            do {
                n2 = 0.0;
                for (double& w : omega) {
                    w = normal(rng);
                    n2 += w * w;
                }
            } while (n2 == 0.0);
            const double r = std::pow(1.0 + shell * unit(rng), 1.0 / nu) / std::sqrt(n2);
            for (double& w : omega)
                w *= r;
            bool dc_fail = false, fail = false;
            for (const ExcludedSet& s : sets) {
                double t = 0.0;
                for (int k = 0; k < nu; ++k)
                    t += omega[k] * s.l[k];
                if (ExcludedSet::hit(s.all, t)) {
                    fail = true;
                    dc_fail = dc_fail || ExcludedSet::hit(s.dc, t);
                    if (dc_fail)
                        break;
                }
            }
            out.excised += fail ? 1 : 0;
            out.dc_excised += dc_fail ? 1 : 0;
        }
    }
    out.fraction = static_cast<double>(out.excised) / static_cast<double>(n_samples);
    return out;
}

} // namespace bpl
