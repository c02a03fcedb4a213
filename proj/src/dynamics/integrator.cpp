#include "bpl/dynamics.hpp"
#include "bpl/error.hpp"
#include "bpl/kernels.hpp"

#include <cmath>
#include <fmt/format.h>
#include <numbers>

namespace bpl {

namespace {
constexpr int kContourPoints = 64;
}

Etdrk4::Etdrk4(std::vector<cplx> linear, double h) : h_(h)
{
    if (!(h > 0.0))
        throw PreconditionError("Etdrk4: step must be positive");
    const std::size_t n = linear.size();
    for (auto* v : {&E_, &E2_, &Q_, &f1_, &f2_, &f3_})
        v->resize(n);
    std::vector<cplx> roots(kContourPoints);
    for (int k = 0; k < kContourPoints; ++k)
        roots[k] = std::polar(1.0, std::numbers::pi * (k + 0.5) / (kContourPoints / 2));
    for (std::size_t i = 0; i < n; ++i) {
        const cplx z = h * linear[i];
        E_[i] = std::exp(z);
        E2_[i] = std::exp(z / 2.0);
        cplx q{}, a{}, b{}, c{};
        for (const cplx& r : roots) {
            const cplx w = z + r;
            const cplx ew = std::exp(w);
            q += (std::exp(w / 2.0) - 1.0) / w;
            a += (-4.0 - w + ew * (4.0 - 3.0 * w + w * w)) / (w * w * w);
            b += (2.0 + w + ew * (-2.0 + w)) / (w * w * w);
            c += (-4.0 - 3.0 * w - w * w + ew * (4.0 - w)) / (w * w * w);
        }
        const double m = h / kContourPoints;
        Q_[i] = m * q;
        f1_[i] = m * a;
        f2_[i] = m * b;
        f3_[i] = m * c;
    }
}

void Etdrk4::step(Field2& u, double t, const Rhs& nonlinear) const
{
    if (u.size() != E_.size())
        throw PreconditionError("Etdrk4: field size does not match the linear part");
    auto mul = [](const std::vector<cplx>& coef, const Field2& f) {
        Field2 out = f;
        kernels::cmul_inplace(coef, out.data());
        return out;
    };
    const Field2 Nu = nonlinear(t, u);
    Field2 a = mul(E2_, u);
    kernels::caxpy(1.0, mul(Q_, Nu).data(), a.data());
    const Field2 Na = nonlinear(t + h_ / 2, a);
    Field2 b = mul(E2_, u);
    kernels::caxpy(1.0, mul(Q_, Na).data(), b.data());
    const Field2 Nb = nonlinear(t + h_ / 2, b);
    Field2 c = mul(E2_, a);
    Field2 tmp = 2.0 * Nb - Nu;
    kernels::caxpy(1.0, mul(Q_, tmp).data(), c.data());
    const Field2 Nc = nonlinear(t + h_, c);

    Field2 next = mul(E_, u);
    kernels::caxpy(1.0, mul(f1_, Nu).data(), next.data());
    kernels::caxpy(1.0, mul(f2_, 2.0 * (Na + Nb)).data(), next.data());
    kernels::caxpy(1.0, mul(f3_, Nc).data(), next.data());
    u = std::move(next);
}

Trajectory integrate(const Field2& v0, double t0, double t1, const ModelParams& p, const Forcing& f, double dt,
                     const IntegrateOptions& opts)
{
    p.validate();
    if (!(dt > 0.0) || !(t1 >= t0))
        throw PreconditionError("integrate: need dt > 0 and t1 >= t0");
    if (opts.sample_every < 1)
        throw PreconditionError("integrate: sample_every must be >= 1");
    const int N = v0.N();
    BetaPlane plane(N);
    const double cfl = dt * plane.max_velocity(v0) * N;
    if (cfl > 1.0)
        throw PreconditionError(fmt::format("integrate: CFL number {:.4g} exceeds 1 at the initial state", cfl));

    const long steps = static_cast<long>(std::ceil((t1 - t0) / dt - 1e-12));
    const double h = steps > 0 ? (t1 - t0) / steps : dt;
    std::vector<cplx> linear(v0.size());
    for (int i = 0; i < v0.box().size(); ++i) {
        Mode2 j = v0.box().mode2(i);
        if (!j.is_zero())
            linear[i] = cplx(0.0, p.beta * dispersion_symbol(j));
    }
    Etdrk4 scheme(std::move(linear), h);
    const double amp = std::pow(p.lambda, p.alpha);
    Etdrk4::Rhs rhs = [&](double t, const Field2& v) {
        Field2 out = plane.transport(v, v);
        if (!f.is_zero())
            kernels::caxpy(amp, f.slice(t, p).data(), out.data());
        return out;
    };

    Trajectory traj;
    Field2 v = v0;
    traj.t.push_back(t0);
    traj.v.push_back(v);
    double last_ok = t0;
    for (long k = 1; k <= steps; ++k) {
        const double t = t0 + (k - 1) * h;
        scheme.step(v, t, rhs);
        const double tn = t0 + k * h;
        const double n0 = sobolev_norm(v, opts.s_ceiling);
        if (!std::isfinite(n0) || n0 > opts.ceiling)
            throw DivergenceError(fmt::format("integrate: H^{} norm {:.4g} exceeded ceiling {:.4g}", opts.s_ceiling, n0,
                                              opts.ceiling),
                                  last_ok);
        last_ok = tn;
        if (k % opts.sample_every == 0 || k == steps) {
            traj.t.push_back(tn);
            traj.v.push_back(v);
        }
    }
    return traj;
}

} // namespace bpl
