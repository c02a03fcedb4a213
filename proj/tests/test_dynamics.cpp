#include "doctest.h"
#include "support.hpp"

#include "bpl/dynamics.hpp"
#include "bpl/error.hpp"

#include <cmath>
#include <numbers>

using namespace bpl;
using bpl::test::max_abs_diff;
using bpl::test::random_field;

namespace {

constexpr double kPi = std::numbers::pi;

// Direct convolution: N^(k) = -sum_{j + j' = k} b(j).(i j') w1^(j) w2^(j'), b(j) = i(j2, -j1)/|j|^2.
Field2 transport_by_convolution(const Field2& w1, const Field2& w2)
{
    const int N = w1.N();
    Field2 out(N);
    for (int a = 0; a < w1.box().size(); ++a) {
        Mode2 j = w1.box().mode2(a);
        if (j.is_zero() || w1.at(a) == cplx{})
            continue;
        cplx b1(0.0, static_cast<double>(j.j2) / j.norm2()), b2(0.0, -static_cast<double>(j.j1) / j.norm2());
        for (int c = 0; c < w2.box().size(); ++c) {
            Mode2 jp = w2.box().mode2(c);
            Mode2 k = j + jp;
            if (k.is_zero() || !out.box().contains2(k))
                continue;
            cplx dot = b1 * cplx(0.0, jp.j1) + b2 * cplx(0.0, jp.j2);
            out.at(out.box().index2(k)) -= dot * w1.at(a) * w2.at(c);
        }
    }
    return out;
}

double grid_pairing(const Field2& a, const Field2& b) { return l2_inner(a, b); }

ModelParams small_params(double lambda)
{
    ModelParams p;
    p.lambda = lambda;
    return p;
}

} // namespace

TEST_CASE("dispersion symbol")
{
    CHECK(dispersion_symbol({1, 0}) == 1.0);
    CHECK(dispersion_symbol({0, 3}) == 0.0);
    CHECK(dispersion_symbol({2, 1}) == doctest::Approx(0.4).epsilon(1e-15));
    CHECK_THROWS_AS(dispersion_symbol({0, 0}), PreconditionError);
    Field2 m = Field2::mode(3, {2, 1}, 1.0);
    CHECK(std::abs(apply_L(m, 2.0)[{2, 1}] - cplx(0.0, 0.8)) < 1e-15);
}

TEST_CASE("Biot-Savart law")
{
    Velocity u = biot_savart(Field2::mode(2, {1, 0}, 1.0));
    CHECK(std::abs(u.u1[{1, 0}]) == 0.0);
    CHECK(std::abs(u.u2[{1, 0}] - cplx(0.0, -1.0)) < 1e-15);
    Velocity z = biot_savart(Field2(3));
    CHECK(sobolev_norm(z.u1, 0.0) == 0.0);

    std::mt19937_64 rng(11);
    Field2 v = random_field(6, rng);
    Velocity b = biot_savart(v);
    for (int i = 0; i < v.box().size(); ++i) {
        Mode2 j = v.box().mode2(i);
        CHECK(std::abs(cplx(j.j1) * b.u1.at(i) + cplx(j.j2) * b.u2.at(i)) <= 1e-15);
    }
    for (double s : {1.0, 2.0, 3.5}) {
        double lhs = std::hypot(sobolev_norm(b.u1, s), sobolev_norm(b.u2, s));
        CHECK(lhs <= sobolev_norm(v, s - 1.0) * (1 + 1e-14));
    }
}

TEST_CASE("transport nonlinearity matches direct convolution")
{
    Field2 c = Field2::cosine(4, {1, 0});
    CHECK(sobolev_norm(transport_nonlinearity(c, c), 0.0) <= 1e-15);
    CHECK(sobolev_norm(transport_nonlinearity(c, Field2(4)), 0.0) == 0.0);

    std::mt19937_64 rng(12);
    for (int t = 0; t < 4; ++t) {
        Field2 a = random_field(6, rng), b = random_field(6, rng);
        Field2 fast = transport_nonlinearity(a, b);
        Field2 slow = transport_by_convolution(a, b);
        CHECK(max_abs_diff(fast, slow) <= 1e-13);
        CHECK(fast.is_real(1e-13));
        CHECK(fast[{0, 0}] == cplx{});
    }
}

TEST_CASE("transport estimate constant is stable across a random corpus")
{
    std::mt19937_64 rng(13);
    const double s = 2.0;
    double first = 0.0, second = 0.0;
    for (int t = 0; t < 40; ++t) {
        Field2 w = random_field(6, rng, 3.0);
        double c = sobolev_norm(transport_nonlinearity(w, w), s) / std::pow(sobolev_norm(w, s + 1.0), 2);
        (t < 20 ? first : second) = std::max(t < 20 ? first : second, c);
    }
    MESSAGE("transport constant halves: " << first << " " << second);
    CHECK(second < 2.0 * first);
    CHECK(first < 2.0 * second);
}

TEST_CASE("linear dispersion and divergence-free advection are skew-adjoint")
{
    std::mt19937_64 rng(14);
    BetaPlane plane(7);
    for (int t = 0; t < 5; ++t) {
        Field2 v = random_field(7, rng), a = random_field(7, rng);
        CHECK(std::abs(grid_pairing(apply_L(v, 1.3), v)) <= 1e-10);
        CHECK(std::abs(grid_pairing(plane.advect_by(biot_savart(a), v), v)) <= 1e-10);
        CHECK(std::abs(grid_pairing(transport_nonlinearity(v, v), v)) <= 1e-10);
    }
}

TEST_CASE("full vector field")
{
    ModelParams p = small_params(10.0);
    p.N_x = 4;
    Forcing f = Forcing::standard(p);
    Field2 zero(4);
    Field2 rhs = full_vector_field(0.7, zero, p, f);
    Field2 expect = std::pow(p.lambda, p.alpha) * f.slice(0.7, p);
    CHECK(max_abs_diff(rhs, expect) <= 1e-12);

    Field2 m = Field2::mode(4, {2, 1}, 1.0);
    Field2 lin = full_vector_field(0.0, m, p, Forcing::zero(p));
    CHECK(std::abs(lin[{2, 1}] - cplx(0.0, 0.4)) <= 1e-15);

    // slice by phase rotation equals the QP field slice at phi = lambda omega t
    std::vector<double> phi{p.lambda * p.omega[0] * 0.7, p.lambda * p.omega[1] * 0.7};
    CHECK(max_abs_diff(f.slice(0.7, p), f.field().slice(phi)) <= 1e-12);
    // traveling structure: f(phi - pi(sigma), x) = f(phi, x + sigma)
    std::array<double, 2> sigma{0.4, -1.1};
    auto ps = p.map.forward(sigma[0], sigma[1]);
    std::vector<double> shifted{phi[0] - ps[0], phi[1] - ps[1]};
    CHECK(std::abs(evaluate(f.field(), shifted, 0.3, 0.2) - evaluate(f.field(), phi, 0.3 + sigma[0], 0.2 + sigma[1])) <=
          1e-12);
}

TEST_CASE("model parameters and forcing validation")
{
    ModelParams p;
    CHECK_NOTHROW(p.validate());
    CHECK(p.theta() == doctest::Approx(0.6));
    CHECK(p.eps() == doctest::Approx(std::pow(100.0, -0.4)));
    CHECK(p.gamma() == doctest::Approx(std::pow(100.0, -0.1)));
    CHECK(p.tau() == 6.0);
    ModelParams bad = p;
    bad.c = 0.2;
    CHECK_THROWS_AS(bad.validate(), PreconditionError);
    bad = p;
    bad.omega = {3.0, 0.0};
    CHECK_THROWS_AS(bad.validate(), PreconditionError);
    bad = p;
    bad.alpha = 2.0;
    CHECK_THROWS_AS(bad.validate(), PreconditionError);

    std::vector<int> l{1, 0}, nl{-1, 0};
    CHECK_THROWS_AS(Forcing(2, 2, 2, {{l, {-1, 0}, 1.0}}, p.map), PreconditionError);
    CHECK_THROWS_AS(Forcing(2, 2, 2, {{l, {0, 0}, 1.0}, {nl, {0, 0}, 1.0}}, p.map), PreconditionError);
    Forcing ok(2, 2, 2, {{l, {-1, 0}, 1.0}, {nl, {1, 0}, 1.0}}, p.map);
    CHECK(ok.traveling().has_value());
    CHECK(parity_check(ok.field(), Parity::even));
    Forcing off(2, 2, 2, {{l, {1, 1}, 1.0}, {nl, {-1, -1}, 1.0}}, p.map);
    CHECK_FALSE(off.traveling().has_value());
    CHECK_THROWS_AS(g_lambda(off, p), PreconditionError);

    Forcing s = Forcing::standard(p);
    CHECK(s.terms().size() == 6);
    CHECK(s.traveling().has_value());
}

TEST_CASE("g_lambda example, residual and growth")
{
    ModelParams p = small_params(10.0);
    std::vector<int> l{1, 0}, nl{-1, 0};
    Forcing f(2, p.N_phi, p.N_x, {{l, {-1, 0}, 1.0}, {nl, {1, 0}, 1.0}}, p.map);
    TravelingField g = g_lambda(f, p);
    const cplx expect = std::pow(10.0, 1.5) / cplx(0.0, 12.0);
    CHECK(std::abs(g.get(l) - expect) <= 1e-14);
    CHECK(std::abs(g.get(l) - cplx(0.0, -2.635)) <= 1e-3);

    CHECK(sobolev_norm(g_lambda(Forcing::zero(p), p), 0.0) == 0.0);

    for (double lam : {10.0, 100.0}) {
        ModelParams q = small_params(lam);
        Forcing fs = Forcing::standard(q);
        TravelingField gs = g_lambda(fs, q);
        TravelingField res = linear_wave_operator(gs, q);
        res -= std::pow(lam, q.alpha) * *fs.traveling();
        CHECK(sobolev_norm(res, 0.0) <= 1e-10 * std::pow(lam, q.alpha));
    }

    std::vector<double> norms;
    for (double lam : {50.0, 100.0, 200.0, 400.0}) {
        ModelParams q = small_params(lam);
        norms.push_back(sobolev_norm(g_lambda(Forcing::standard(q), q), 3.0));
    }
    for (std::size_t k = 1; k < norms.size(); ++k) {
        double slope = std::log2(norms[k] / norms[k - 1]);
        CHECK(std::abs(slope - 0.5) <= 0.02);
    }
}

TEST_CASE("resonant frequency is rejected")
{
    ModelParams p = small_params(10.0);
    // lambda omega_1 = -1 + 1e-8 nearly cancels beta L(-1, 0) = -1
    p.omega = {-1.0 / p.lambda + 1e-9, 1.0};
    std::vector<int> l{1, 0}, nl{-1, 0};
    Forcing f(2, p.N_phi, p.N_x, {{l, {-1, 0}, 1.0}, {nl, {1, 0}, 1.0}}, p.map);
    CHECK_THROWS_AS(g_lambda(f, p), ResonanceError);
    CHECK(first_melnikov_screen(p).min_ratio < 1.0);
    CHECK(first_melnikov_screen(small_params(100.0)).min_ratio > 0.0);
}

TEST_CASE("integrator: exact rotation of a single mode")
{
    ModelParams p = small_params(10.0);
    Field2 v0 = Field2::cosine(6, {2, 1}, 0.8);
    Trajectory tr = integrate(v0, 0.0, 3.0, p, Forcing::zero(p), 0.01, {.sample_every = 100});
    const double n0 = sobolev_norm(v0, 0.0);
    for (std::size_t k = 0; k < tr.t.size(); ++k) {
        const double t = tr.t[k];
        const Field2& v = tr.v[k];
        CHECK(std::abs(sobolev_norm(v, 0.0) - n0) <= 1e-12 * (1.0 + t));
        cplx exact = 0.4 * std::exp(cplx(0.0, 0.4 * t));
        CHECK(std::abs(v[{2, 1}] - exact) <= 1e-12);
        CHECK(v.is_real(1e-14));
    }
}

TEST_CASE("integrator: fourth-order self convergence")
{
    ModelParams p = small_params(10.0);
    std::mt19937_64 rng(15);
    Field2 v0 = 0.5 * random_field(8, rng, 3.0);
    Forcing f = Forcing::zero(p);
    auto run = [&](double dt) { return integrate(v0, 0.0, 1.0, p, f, dt, {.sample_every = 1000000}).v.back(); };
    Field2 ref = run(0.0025);
    double e1 = sobolev_norm(run(0.04) - ref, 0.0);
    double e2 = sobolev_norm(run(0.02) - ref, 0.0);
    double e3 = sobolev_norm(run(0.01) - ref, 0.0);
    MESSAGE("errors " << e1 << " " << e2 << " " << e3);
    CHECK(e1 / e2 == doctest::Approx(16.0).epsilon(0.25));
    CHECK(e2 / e3 == doctest::Approx(16.0).epsilon(0.25));
}

TEST_CASE("integrator: energy balance under forcing")
{
    ModelParams p = small_params(10.0);
    p.N_x = 6;
    std::mt19937_64 rng(16);
    Field2 v0 = random_field(6, rng, 3.0);
    Forcing f = Forcing::standard(p);
    const double dt = 2e-4;
    Trajectory tr = integrate(v0, 0.0, 0.2, p, f, dt);
    const double amp = std::pow(p.lambda, p.alpha);
    double worst = 0.0, scale = 0.0;
    for (std::size_t k = 1; k + 1 < tr.t.size(); k += 50) {
        double dn = (std::pow(sobolev_norm(tr.v[k + 1], 0.0), 2) - std::pow(sobolev_norm(tr.v[k - 1], 0.0), 2)) / (2 * dt);
        double pairing = 2.0 * amp * l2_inner(f.slice(tr.t[k], p), tr.v[k]);
        worst = std::max(worst, std::abs(dn - pairing));
        scale = std::max(scale, std::abs(pairing));
    }
    MESSAGE("energy balance mismatch " << worst << " against scale " << scale);
    CHECK(worst <= 1e-5 * scale);
}

TEST_CASE("integrator guards")
{
    ModelParams p = small_params(10.0);
    Field2 big = Field2::cosine(8, {1, 0}, 1e3);
    CHECK_THROWS_AS(integrate(big, 0.0, 1.0, p, Forcing::zero(p), 0.1), PreconditionError);
    Field2 v0 = Field2::cosine(4, {1, 0}, 1.0);
    p.N_x = 4;
    try {
        integrate(v0, 0.0, 1.0, p, Forcing::standard(p), 0.01, {.ceiling = 5.0});
        FAIL("expected divergence");
    } catch (const DivergenceError& e) {
        CHECK(e.last_time() >= 0.0);
        CHECK(e.last_time() < 1.0);
        CHECK(e.exit_code() == 3);
    }
    CHECK_THROWS_AS(integrate(v0, 0.0, 1.0, p, Forcing::zero(p), -0.1), PreconditionError);
}
