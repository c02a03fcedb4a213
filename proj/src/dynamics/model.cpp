#include "bpl/dynamics.hpp"
#include "bpl/error.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <map>

namespace bpl {

double ModelParams::gamma() const { return std::pow(lambda, -c); }
double ModelParams::eps() const { return std::pow(lambda, theta() - 1.0); }
double ModelParams::eps_M(int M) const { return std::pow(lambda, M * (theta() - 1.0) + 1.0); }

double ModelParams::frequency(std::span<const int> l) const
{
    double acc = 0.0;
    for (int k = 0; k < nu(); ++k)
        acc += omega[k] * l[k];
    return lambda * acc;
}

void ModelParams::validate() const
{
    if (!(lambda > 1.0))
        throw PreconditionError(fmt::format("lambda must exceed 1 (got {})", lambda));
    if (!(alpha > 1.0 && alpha < 2.0))
        throw PreconditionError(fmt::format("alpha must lie in (1, 2) (got {})", alpha));
    if (beta == 0.0 || !std::isfinite(beta))
        throw PreconditionError("beta must be finite and nonzero");
    if (!(c > 0.0 && c < (2.0 - alpha) / 3.0))
        throw PreconditionError(fmt::format("c must lie in (0, (2 - alpha)/3) = (0, {}) (got {})", (2.0 - alpha) / 3.0, c));
    if (static_cast<int>(omega.size()) != nu())
        throw PreconditionError(fmt::format("omega has {} components, expected nu = {}", omega.size(), nu()));
    double n2 = 0.0;
    for (double w : omega)
        n2 += w * w;
    double n = std::sqrt(n2);
    if (!(n >= 1.0 && n <= 2.0))
        throw PreconditionError(fmt::format("|omega| = {} outside the annulus [1, 2]", n));
    if (!(theta() - 1.0 + c < 0.0))
        throw PreconditionError("theta - 1 + c must be negative");
    if (N_phi < 1 || N_x < 1)
        throw PreconditionError("truncations must be >= 1");
}

// ---------------------------------------------------------------- symbols

double dispersion_symbol(Mode2 j)
{
    if (j.is_zero())
        throw PreconditionError("dispersion_symbol: j = 0 has no symbol");
    return static_cast<double>(j.j1) / j.norm2();
}

Field2 apply_L(const Field2& v, double beta)
{
    Field2 out(v.N());
    for (int i = 0; i < v.box().size(); ++i) {
        Mode2 j = v.box().mode2(i);
        if (!j.is_zero())
            out.at(i) = cplx(0.0, beta * dispersion_symbol(j)) * v.at(i);
    }
    return out;
}

Velocity biot_savart(const Field2& v)
{
    Velocity u{Field2(v.N()), Field2(v.N())};
    for (int i = 0; i < v.box().size(); ++i) {
        Mode2 j = v.box().mode2(i);
        if (j.is_zero())
            continue;
        double inv = 1.0 / j.norm2();
        u.u1.at(i) = cplx(0.0, j.j2 * inv) * v.at(i);
        u.u2.at(i) = cplx(0.0, -j.j1 * inv) * v.at(i);
    }
    return u;
}

VectorTraveling biot_savart(const TravelingField& v)
{
    VectorTraveling u{TravelingField(v.map(), v.N_phi(), v.N_x()), TravelingField(v.map(), v.N_phi(), v.N_x())};
    for (int l = 0; l < v.lbox().size(); ++l) {
        Mode2 j = v.spatial_mode(l);
        if (j.is_zero() || v.at(l) == cplx{})
            continue;
        double inv = 1.0 / j.norm2();
        u.c1.at(l) = cplx(0.0, j.j2 * inv) * v.at(l);
        u.c2.at(l) = cplx(0.0, -j.j1 * inv) * v.at(l);
    }
    return u;
}

VectorTraveling gradient(const TravelingField& v)
{
    VectorTraveling g{TravelingField(v.map(), v.N_phi(), v.N_x()), TravelingField(v.map(), v.N_phi(), v.N_x())};
    for (int l = 0; l < v.lbox().size(); ++l) {
        Mode2 j = v.spatial_mode(l);
        g.c1.at(l) = cplx(0.0, j.j1) * v.at(l);
        g.c2.at(l) = cplx(0.0, j.j2) * v.at(l);
    }
    return g;
}

LinearizationWeights linearization_weights(Mode2 j, Mode2 jp)
{
    LinearizationWeights w;
    Mode2 k = j - jp;
    if (k.is_zero() || jp.is_zero())
        return w;
    const double cross = static_cast<double>(j.j1) * jp.j2 - static_cast<double>(j.j2) * jp.j1;
    w.advect = -cross / k.norm2();
    w.stretch = cross / jp.norm2();
    return w;
}

// ---------------------------------------------------------------- forcing

Forcing::Forcing(int nu, int N_phi, int N_x, const std::vector<ForcingTerm>& terms, const MomentumMap& map)
    : f_(nu, N_phi, N_x, true)
{
    std::map<std::pair<std::vector<int>, Mode2>, double> seen;
    for (const auto& t : terms) {
        if (static_cast<int>(t.l.size()) != nu)
            throw PreconditionError("forcing term has wrong number of phase components");
        if (t.j.is_zero())
            throw PreconditionError("forcing must have zero x-average (term with j = 0)");
        if (f_.lbox().index(t.l) < 0 || !f_.jbox().contains2(t.j))
            throw TruncationOverflow("forcing term outside truncation");
        if (!std::isfinite(t.amplitude))
            throw PreconditionError("forcing amplitude must be finite");
        seen[{t.l, t.j}] += t.amplitude;
    }
    for (const auto& [key, amp] : seen) {
        std::vector<int> nl(key.first.size());
        for (std::size_t k = 0; k < nl.size(); ++k)
            nl[k] = -key.first[k];
        auto it = seen.find({nl, -key.second});
        if (it == seen.end() || it->second != amp)
            throw PreconditionError("forcing must be real and even: f(l, j) = f(-l, -j)");
    }
    for (const auto& [key, amp] : seen) {
        if (amp == 0.0)
            continue;
        f_.set(key.first, key.second, amp);
        terms_.push_back({key.first, key.second, amp});
    }
    if (map.nu() == nu && on_momentum_lattice(f_, map))
        traveling_ = restrict_traveling(f_, map);
}

Forcing Forcing::standard(const ModelParams& p)
{
    std::vector<std::vector<int>> ls;
    std::vector<int> e1(p.nu(), 0);
    e1[0] = 1;
    ls.push_back(e1);
    if (p.nu() >= 2) {
        std::vector<int> e2(p.nu(), 0), e12(p.nu(), 0);
        e2[1] = 1;
        e12[0] = e12[1] = 1;
        ls.push_back(e2);
        ls.push_back(e12);
    }
    std::vector<ForcingTerm> terms;
    for (auto l : ls) {
        Mode2 j = -p.map.transpose(l);
        terms.push_back({l, j, 1.0});
        for (auto& x : l)
            x = -x;
        terms.push_back({l, -j, 1.0});
    }
    return Forcing(p.nu(), p.N_phi, p.N_x, terms, p.map);
}

Forcing Forcing::zero(const ModelParams& p) { return Forcing(p.nu(), p.N_phi, p.N_x, {}, p.map); }

Field2 Forcing::slice(double t, const ModelParams& p) const
{
    Field2 out(f_.N_x());
    for (const auto& term : terms_)
        out.at(out.box().index2(term.j)) += term.amplitude * std::polar(1.0, p.frequency(term.l) * t);
    return out;
}

// -------------------------------------------------------------- screening

namespace {

ScreeningResult screen_over(const ModelParams& p, const TravelingField& support, bool all_admissible)
{
    ScreeningResult r;
    r.min_ratio = std::numeric_limits<double>::infinity();
    const double scale = p.lambda * p.gamma();
    for (int l = 0; l < support.lbox().size(); ++l) {
        if (!support.admissible(l))
            continue;
        if (!all_admissible && support.at(l) == cplx{})
            continue;
        Mode2 j = support.spatial_mode(l);
        auto m = support.lbox().at(l);
        double d = p.frequency(m) - p.beta * dispersion_symbol(j);
        double thr = scale * std::pow(std::max(1.0, support.lbox().norm(l)), -p.tau());
        double ratio = std::abs(d) / thr;
        if (ratio < r.min_ratio) {
            r.min_ratio = ratio;
            r.worst_l.assign(m.begin(), m.end());
            r.worst_j = j;
            r.worst_divisor = d;
        }
    }
    return r;
}

std::string describe(const ScreeningResult& r)
{
    return fmt::format("l = ({}), j = ({}, {}), divisor = {:.6g}", fmt::join(r.worst_l, ", "), r.worst_j.j1, r.worst_j.j2,
                       r.worst_divisor);
}

} // namespace

ScreeningResult first_melnikov_screen(const ModelParams& p, const TravelingField& support)
{
    return screen_over(p, support, false);
}

ScreeningResult first_melnikov_screen(const ModelParams& p)
{
    return screen_over(p, TravelingField(p.map, p.N_phi, p.N_x), true);
}

TravelingField g_lambda(const Forcing& f, const ModelParams& p)
{
    p.validate();
    if (!f.traveling())
        throw PreconditionError("g_lambda: forcing is not supported on the momentum lattice");
    const TravelingField& ft = *f.traveling();
    TravelingField g(p.map, ft.N_phi(), ft.N_x());
    ScreeningResult r = first_melnikov_screen(p, ft);
    if (r.min_ratio < 1.0)
        throw ResonanceError("g_lambda: first Melnikov condition violated at " + describe(r), r.worst_divisor,
                             r.worst_divisor / r.min_ratio);
    const double amp = std::pow(p.lambda, p.alpha);
    for (int l = 0; l < ft.lbox().size(); ++l) {
        if (ft.at(l) == cplx{})
            continue;
        double d = p.frequency(ft.lbox().at(l)) - p.beta * dispersion_symbol(ft.spatial_mode(l));
        g.at(l) = amp * ft.at(l) / cplx(0.0, d);
    }
    return g;
}

TravelingField linear_wave_operator(const TravelingField& v, const ModelParams& p)
{
    TravelingField out(v.map(), v.N_phi(), v.N_x());
    for (int l = 0; l < v.lbox().size(); ++l) {
        if (!v.admissible(l))
            continue;
        double d = p.frequency(v.lbox().at(l)) - p.beta * dispersion_symbol(v.spatial_mode(l));
        out.at(l) = cplx(0.0, d) * v.at(l);
    }
    return out;
}

} // namespace bpl
