#include "bpl/error.hpp"
#include "bpl/reduction.hpp"

#include <cmath>

namespace bpl {

Field2 reduced_linear_flow(const ReducedForm& rf, const Field2& w0, double t)
{
    if (w0.N() != rf.U.N_x())
        throw PreconditionError("reduced_linear_flow: field truncation differs from the reduced form");
    const int nu = rf.params.nu();
    const std::vector<double> phi0(nu, 0.0);
    std::vector<double> phi(nu);
    for (int k = 0; k < nu; ++k)
        phi[k] = rf.params.lambda * rf.params.omega[k] * t;
    Field2 h = apply(rf.U_inv, phi0, w0);
    for (int j = 0; j < h.box().size(); ++j)
        h.at(j) *= std::exp(rf.D.at(j) * t);
    return apply(rf.U, phi, h);
}

Field2 integrate_linear(const QPOperator& L, std::span<const double> lambda_omega, const Field2& w0, double t,
                        int steps)
{
    if (steps < 1)
        throw PreconditionError("integrate_linear: need at least one step");
    if (w0.N() != L.N_x())
        throw PreconditionError("integrate_linear: field truncation differs from the operator");
    const std::size_t nu = lambda_omega.size();
    const double dt = t / steps;
    std::vector<double> phi(nu);
    auto rhs = [&](double s, const Field2& w) {
        for (std::size_t k = 0; k < nu; ++k)
            phi[k] = lambda_omega[k] * s;
        return apply(L, phi, w);
    };
    Field2 w = w0;
    for (int n = 0; n < steps; ++n) {
        const double s = n * dt;
        const Field2 k1 = rhs(s, w);
        const Field2 k2 = rhs(s + 0.5 * dt, w + (0.5 * dt) * k1);
        const Field2 k3 = rhs(s + 0.5 * dt, w + (0.5 * dt) * k2);
        const Field2 k4 = rhs(s + dt, w + dt * k3);
        w += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    return w;
}

} // namespace bpl
