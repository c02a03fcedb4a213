#include "bpl/error.hpp"
#include "bpl/reduction.hpp"

#include <cmath>
#include <numbers>

namespace bpl {

namespace {

Field2 partial(const Field2& f, int axis)
{
    Field2 d = f;
    for (int i = 0; i < f.box().size(); ++i) {
        const Mode2 j = f.box().mode2(i);
        d.at(i) *= cplx(0.0, axis == 0 ? j.j1 : j.j2);
    }
    return d;
}

// Pi_0^perp (a.grad g) from grid values of a; the zero mode is dropped.
Field2 grid_transport(SpectralGrid& grid, std::span<const double> a1, std::span<const double> a2, const Field2& g)
{
    const std::size_t n = grid.points();
    std::vector<double> g1(n), g2(n), out(n);
    grid.to_grid(g.box(), partial(g, 0).data(), g1);
    grid.to_grid(g.box(), partial(g, 1).data(), g2);
    for (std::size_t i = 0; i < n; ++i)
        out[i] = a1[i] * g1[i] + a2[i] * g2[i];
    Field2 r(g.N());
    grid.from_grid(out, r.box(), r.data());
    r.at(r.box().zero()) = 0.0;
    return r;
}

} // namespace

namespace {

void check_transformed_args(const ReducedForm& rf, const Field2& psi, std::span<const double> phi)
{
    if (psi.N() != rf.U.N_x())
        throw PreconditionError("transformed_nonlinearity: field truncation differs from the reduced form");
    if (static_cast<int>(phi.size()) != rf.U.map().nu())
        throw PreconditionError("transformed_nonlinearity: phase has the wrong dimension");
}

} // namespace

Field2 transformed_quadratic(const ReducedForm& rf, const Field2& psi, std::span<const double> phi)
{
    check_transformed_args(rf, psi, phi);
    const Field2 Upsi = apply(rf.U_padded, phi, psi.resized(rf.U_padded.N_x()));
    return apply(rf.U_inv_padded, phi, transport_nonlinearity(Upsi, Upsi)).resized(psi.N());
}

TransformedNonlinearity transformed_nonlinearity(const ReducedForm& rf, const Field2& psi, std::span<const double> phi)
{
    check_transformed_args(rf, psi, phi);
    const int N = rf.U.N_x();

    TransformedNonlinearity out;
    // U psi on the padded box keeps the spreading by the change of variables inside the truncation
    const Field2 g = apply(rf.W, phi, psi);
    const Field2 Upsi = apply(rf.U_padded, phi, psi.resized(rf.U_padded.N_x()));
    Velocity u = biot_savart(Upsi);
    u.u1 *= cplx(-1.0);
    u.u2 *= cplx(-1.0);
    out.total = apply(rf.U_inv_padded, phi, transport_nonlinearity(Upsi, Upsi)).resized(N);

    // a_b(y) = (u_b + u.grad beta_b)(x) at x = y + beta-breve(phi, y)
    const VectorTraveling d1 = gradient(rf.beta.c1);
    const VectorTraveling d2 = gradient(rf.beta.c2);
    const int G = fft_friendly_size(std::max(8 * N, 32));
    SpectralGrid grid(2, G);
    const std::size_t n = grid.points();
    std::vector<double> a1(n), a2(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double y1 = 2.0 * std::numbers::pi * static_cast<double>(i / G) / G;
        const double y2 = 2.0 * std::numbers::pi * static_cast<double>(i % G) / G;
        const double x1 = y1 + evaluate(rf.beta_inv.c1, phi, y1, y2);
        const double x2 = y2 + evaluate(rf.beta_inv.c2, phi, y1, y2);
        const double v1 = evaluate(u.u1, x1, x2), v2 = evaluate(u.u2, x1, x2);
        a1[i] = v1 + v1 * evaluate(d1.c1, phi, x1, x2) + v2 * evaluate(d1.c2, phi, x1, x2);
        a2[i] = v2 + v1 * evaluate(d2.c1, phi, x1, x2) + v2 * evaluate(d2.c2, phi, x1, x2);
    }
    out.a = {Field2(N), Field2(N)};
    grid.from_grid(a1, out.a.u1.box(), out.a.u1.data());
    grid.from_grid(a2, out.a.u2.box(), out.a.u2.data());
    out.a.u1.at(out.a.u1.box().zero()) = 0.0;
    out.a.u2.at(out.a.u2.box().zero()) = 0.0;

    out.transport = grid_transport(grid, a1, a2, psi);
    out.remainder = apply(rf.W_inv, phi, grid_transport(grid, a1, a2, g)) - out.transport;
    return out;
}

} // namespace bpl
