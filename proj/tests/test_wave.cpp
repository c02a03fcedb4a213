#include "doctest.h"

#include "bpl/error.hpp"
#include "bpl/wave.hpp"

#include <cmath>

using namespace bpl;

namespace {

ModelParams params_at(double lambda)
{
    ModelParams p;
    p.lambda = lambda;
    return p;
}

double max_abs_diff(const TravelingField& a, const TravelingField& b)
{
    double m = 0.0;
    for (int l = 0; l < a.lbox().size(); ++l)
        m = std::max(m, std::abs(a.at(l) - b.at(l)));
    return m;
}

} // namespace

TEST_CASE("residual of the first approximation is the transport term")
{
    ModelParams p = params_at(100.0);
    Forcing f = Forcing::standard(p);
    TravelingField g = g_lambda(f, p);
    TravelingField r = wave_residual(g, p, f);
    TorusEngine engine(p.map, p.N_phi, p.N_x);
    TravelingField expect = -1.0 * engine.transport(g, g);
    CHECK(max_abs_diff(r, expect) <= 1e-10 * sobolev_norm(expect, 0.0));
    CHECK(sobolev_norm(expect, 0.0) > 1.0);
}

TEST_CASE("degenerate wave vectors make the transport vanish")
{
    ModelParams one;
    one.map = MomentumMap({{1, 0}});
    one.omega = {1.2};
    Forcing f1 = Forcing::standard(one);
    CHECK(sobolev_norm(wave_residual(g_lambda(f1, one), one, f1), 0.0) <= 1e-10);

    ModelParams two;
    two.map = MomentumMap({{1, 0}, {2, 0}});
    CHECK(two.map.span_dim() == 1);
    Forcing f2 = Forcing::standard(two);
    CHECK(sobolev_norm(wave_residual(g_lambda(f2, two), two, f2), 0.0) <= 1e-10);
}

TEST_CASE("zero forcing gives the zero wave")
{
    ModelParams p = params_at(100.0);
    WaveSolution s = newton_solve(p, Forcing::zero(p));
    CHECK(s.iterations <= 1);
    CHECK(sobolev_norm(s.v, 0.0) == 0.0);
}

TEST_CASE("Jacobian matches the central difference of the residual")
{
    ModelParams p = params_at(50.0);
    p.N_phi = 5;
    p.N_x = 5;
    Forcing f = Forcing::standard(p);
    TravelingField v = g_lambda(f, p);
    TravelingField h = v;
    for (int l = 0; l < h.lbox().size(); ++l)
        if (h.admissible(l))
            h.at(l) = cplx(std::sin(1.0 + l), std::cos(0.3 * l)) / (1.0 + h.lbox().norm(l));
    h.enforce_real();
    WaveJacobian jac(v, p);
    const double eps = 1e-3;
    TravelingField fd = wave_residual(v + eps * h, p, f) - wave_residual(v - eps * h, p, f);
    fd *= 1.0 / (2 * eps);
    TravelingField jh = jac.apply(h);
    CHECK(max_abs_diff(jh, fd) <= 1e-9 * sobolev_norm(jh, 0.0));
    TravelingField back = jac.solve(jh);
    CHECK(max_abs_diff(back, h) <= 1e-10);
}

TEST_CASE("Newton solve at the default scale")
{
    ModelParams p = params_at(100.0);
    Forcing f = Forcing::standard(p);
    WaveSolution s = newton_solve(p, f);
    CHECK(s.residual_norm <= 1e-9);
    CHECK(parity_check(s.v, Parity::odd, 1e-12));
    CHECK(s.v.is_real(1e-12));

    const double zeta = 2.0 - p.alpha - 3.0 * p.c;
    const double ratio = sobolev_norm(s.z, 2.0) / sobolev_norm(s.g, 2.0);
    MESSAGE("|z|/|g| = " << ratio << ", lambda^-zeta = " << std::pow(p.lambda, -zeta));
    CHECK(ratio <= std::pow(p.lambda, -zeta));

    // quadratic convergence once the residual is small
    for (std::size_t k = 0; k + 1 < s.history.size(); ++k)
        if (s.history[k] < 1e-1)
            CHECK(s.history[k + 1] <= 10.0 * s.history[k] * s.history[k] + 1e-13);

    NewtonOptions perturbed;
    perturbed.initial = 1.01 * s.g;
    WaveSolution t = newton_solve(p, f, perturbed);
    CHECK(max_abs_diff(t.v, s.v) <= 1e-8);
}

TEST_CASE("wave amplitude exponent across a lambda sweep")
{
    const std::vector<double> lambdas{50.0, 100.0, 200.0, 400.0};
    const std::vector<std::vector<double>> omegas{{1.1, 1.3}, {0.9, 1.2}, {1.4, 0.7}};
    std::vector<double> x, y;
    for (double lam : lambdas) {
        double best = 0.0;
        for (const auto& w : omegas) {
            ModelParams p = params_at(lam);
            p.omega = w;
            best = std::max(best, sobolev_norm(newton_solve(p, Forcing::standard(p)).v, 2.0));
        }
        x.push_back(std::log(lam));
        y.push_back(std::log(best));
    }
    double mx = 0, my = 0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        mx += x[k] / x.size();
        my += y[k] / y.size();
    }
    double sxy = 0, sxx = 0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        sxy += (x[k] - mx) * (y[k] - my);
        sxx += (x[k] - mx) * (x[k] - mx);
    }
    const double slope = sxy / sxx;
    MESSAGE("fitted exponent " << slope);
    ModelParams p;
    CHECK(slope >= p.alpha - 1.0);
    CHECK(slope <= p.alpha - 1.0 + p.c);
}

TEST_CASE("parameter hash is stable and sensitive")
{
    ModelParams p;
    CHECK(params_hash(p) == params_hash(p));
    ModelParams q = p;
    q.lambda = 100.0000001;
    CHECK(params_hash(p) != params_hash(q));
}
