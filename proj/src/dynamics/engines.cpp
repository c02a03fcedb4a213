#include "bpl/dynamics.hpp"
#include "bpl/error.hpp"
#include "bpl/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace bpl {

// ----------------------------------------------------------------- T^2

struct BetaPlane::Impl {
    SpectralGrid grid;
    std::shared_ptr<const IndexBox> box;
    std::vector<cplx> bs1, bs2, d1, d2; // Biot-Savart and gradient symbols
    std::vector<cplx> tmp;
    std::vector<double> a1, a2, b1, b2, g1, g2, out;

    Impl(int N) : grid(2, dealiased_grid_size(N)), box(make_box(2, N))
    {
        const int n = box->size();
        bs1.resize(n);
        bs2.resize(n);
        d1.resize(n);
        d2.resize(n);
        for (int i = 0; i < n; ++i) {
            Mode2 j = box->mode2(i);
            if (j.is_zero())
                continue;
            double inv = 1.0 / j.norm2();
            bs1[i] = {0.0, j.j2 * inv};
            bs2[i] = {0.0, -j.j1 * inv};
            d1[i] = {0.0, static_cast<double>(j.j1)};
            d2[i] = {0.0, static_cast<double>(j.j2)};
        }
        tmp.resize(n);
        for (auto* v : {&a1, &a2, &b1, &b2, &g1, &g2, &out})
            v->resize(grid.points());
    }

    void symbol_to_grid(const std::vector<cplx>& sym, const Field2& f, std::vector<double>& dst)
    {
        auto src = f.data();
        for (std::size_t i = 0; i < tmp.size(); ++i)
            tmp[i] = sym[i] * src[i];
        grid.to_grid(*box, tmp, dst);
    }

    Field2 finish(std::vector<double>& values)
    {
        Field2 r(box->N());
        grid.from_grid(values, *box, r.data());
        r.at(box->zero()) = 0.0;
        return r;
    }
};

BetaPlane::BetaPlane(int N_x) : N_x_(N_x), impl_(std::make_unique<Impl>(N_x)) {}
BetaPlane::BetaPlane(BetaPlane&&) noexcept = default;
BetaPlane& BetaPlane::operator=(BetaPlane&&) noexcept = default;
BetaPlane::~BetaPlane() = default;

int BetaPlane::grid_size() const { return impl_->grid.G(); }

Field2 BetaPlane::transport(const Field2& w1, const Field2& w2)
{
    auto& m = *impl_;
    m.symbol_to_grid(m.bs1, w1, m.a1);
    m.symbol_to_grid(m.bs2, w1, m.a2);
    m.symbol_to_grid(m.d1, w2, m.g1);
    m.symbol_to_grid(m.d2, w2, m.g2);
    kernels::advect(m.a1, m.a2, m.g1, m.g2, m.out);
    return m.finish(m.out);
}

Field2 BetaPlane::perturbation_transport(const Field2& V, const Field2& w, bool quadratic)
{
    auto& m = *impl_;
    m.symbol_to_grid(m.bs1, w, m.a1);
    m.symbol_to_grid(m.bs2, w, m.a2);
    Field2 gsrc = quadratic ? V + w : V;
    m.symbol_to_grid(m.d1, gsrc, m.g1);
    m.symbol_to_grid(m.d2, gsrc, m.g2);
    kernels::advect(m.a1, m.a2, m.g1, m.g2, m.out);
    std::vector<double> first = m.out;
    m.symbol_to_grid(m.bs1, V, m.b1);
    m.symbol_to_grid(m.bs2, V, m.b2);
    m.symbol_to_grid(m.d1, w, m.g1);
    m.symbol_to_grid(m.d2, w, m.g2);
    kernels::advect(m.b1, m.b2, m.g1, m.g2, m.out);
    for (std::size_t i = 0; i < m.out.size(); ++i)
        m.out[i] += first[i];
    return m.finish(m.out);
}

double BetaPlane::max_velocity(const Field2& v)
{
    auto& m = *impl_;
    m.symbol_to_grid(m.bs1, v, m.a1);
    m.symbol_to_grid(m.bs2, v, m.a2);
    double mx = 0.0;
    for (std::size_t i = 0; i < m.a1.size(); ++i)
        mx = std::max(mx, std::hypot(m.a1[i], m.a2[i]));
    return mx;
}

Field2 BetaPlane::advect_by(const Velocity& a, const Field2& u)
{
    auto& m = *impl_;
    m.grid.to_grid(*m.box, a.u1.data(), m.a1);
    m.grid.to_grid(*m.box, a.u2.data(), m.a2);
    m.symbol_to_grid(m.d1, u, m.g1);
    m.symbol_to_grid(m.d2, u, m.g2);
    kernels::advect(m.a1, m.a2, m.g1, m.g2, m.out);
    for (auto& x : m.out)
        x = -x;
    return m.finish(m.out);
}

Field2 BetaPlane::product(const Field2& a, const Field2& b)
{
    auto& m = *impl_;
    m.grid.to_grid(*m.box, a.data(), m.a1);
    m.grid.to_grid(*m.box, b.data(), m.g1);
    for (std::size_t i = 0; i < m.out.size(); ++i)
        m.out[i] = m.a1[i] * m.g1[i];
    return m.finish(m.out);
}

namespace {

BetaPlane& engine_for(int N)
{
    thread_local std::map<int, BetaPlane> cache;
    auto it = cache.find(N);
    if (it == cache.end())
        it = cache.emplace(N, BetaPlane(N)).first;
    return it->second;
}

} // namespace

Field2 transport_nonlinearity(const Field2& w1, const Field2& w2)
{
    if (w1.N() != w2.N())
        throw PreconditionError("transport_nonlinearity: truncation mismatch");
    return engine_for(w1.N()).transport(w1, w2);
}

Field2 full_vector_field(double t, const Field2& v, const ModelParams& p, const Forcing& f)
{
    Field2 out = apply_L(v, p.beta);
    out += transport_nonlinearity(v, v);
    if (!f.is_zero())
        out += std::pow(p.lambda, p.alpha) * f.slice(t, p);
    return out;
}

// ----------------------------------------------------------------- T^nu

struct TorusEngine::Impl {
    MomentumMap map;
    int N_phi;
    int N_x;
    SpectralGrid grid;
    std::shared_ptr<const IndexBox> lbox;
    std::vector<char> admissible;
    std::vector<double> a1, a2, g1, g2, out;

    Impl(const MomentumMap& m, int Np, int Nx)
        : map(m), N_phi(Np), N_x(Nx), grid(m.nu(), dealiased_grid_size(Np)), lbox(make_box(m.nu(), Np))
    {
        TravelingField probe(map, N_phi, N_x);
        admissible.resize(lbox->size());
        for (int l = 0; l < lbox->size(); ++l)
            admissible[l] = probe.admissible(l);
        for (auto* v : {&a1, &a2, &g1, &g2, &out})
            v->resize(grid.points());
    }

    void check(const TravelingField& v) const
    {
        if (v.N_phi() != N_phi || v.N_x() != N_x || !(v.map() == map))
            throw PreconditionError("TorusEngine: layout mismatch");
    }

    TravelingField finish(std::span<const double> values, double* dropped)
    {
        TravelingField r(map, N_phi, N_x);
        double d = grid.from_grid(values, *lbox, r.data());
        for (int l = 0; l < lbox->size(); ++l)
            if (!admissible[l]) {
                d += std::norm(r.at(l));
                r.at(l) = 0.0;
            }
        if (dropped)
            *dropped += d;
        return r;
    }
};

TorusEngine::TorusEngine(const MomentumMap& map, int N_phi, int N_x) : impl_(std::make_unique<Impl>(map, N_phi, N_x)) {}
TorusEngine::TorusEngine(TorusEngine&&) noexcept = default;
TorusEngine& TorusEngine::operator=(TorusEngine&&) noexcept = default;
TorusEngine::~TorusEngine() = default;

int TorusEngine::grid_size() const { return impl_->grid.G(); }

TravelingField TorusEngine::transport(const TravelingField& v1, const TravelingField& v2, double* dropped_sq)
{
    auto& m = *impl_;
    m.check(v1);
    m.check(v2);
    VectorTraveling b = biot_savart(v1);
    VectorTraveling g = gradient(v2);
    m.grid.to_grid(*m.lbox, b.c1.data(), m.a1);
    m.grid.to_grid(*m.lbox, b.c2.data(), m.a2);
    m.grid.to_grid(*m.lbox, g.c1.data(), m.g1);
    m.grid.to_grid(*m.lbox, g.c2.data(), m.g2);
    kernels::advect(m.a1, m.a2, m.g1, m.g2, m.out);
    return m.finish(m.out, dropped_sq);
}

TravelingField TorusEngine::product(const TravelingField& a, const TravelingField& b, double* dropped_sq)
{
    auto& m = *impl_;
    m.check(a);
    m.check(b);
    m.grid.to_grid(*m.lbox, a.data(), m.a1);
    m.grid.to_grid(*m.lbox, b.data(), m.g1);
    for (std::size_t i = 0; i < m.out.size(); ++i)
        m.out[i] = m.a1[i] * m.g1[i];
    return m.finish(m.out, dropped_sq);
}

std::vector<double> TorusEngine::to_grid(const TravelingField& v)
{
    auto& m = *impl_;
    m.check(v);
    std::vector<double> out(m.grid.points());
    m.grid.to_grid(*m.lbox, v.data(), out);
    return out;
}

TravelingField TorusEngine::from_grid(std::span<const double> values, double* dropped_sq)
{
    return impl_->finish(values, dropped_sq);
}

} // namespace bpl
