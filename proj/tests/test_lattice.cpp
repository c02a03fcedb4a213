#include "doctest.h"
#include "support.hpp"

#include "bpl/error.hpp"
#include "bpl/lattice.hpp"

#include <array>
#include <cmath>
#include <numbers>

using namespace bpl;
using bpl::test::random_field;
using bpl::test::random_traveling;

namespace {
constexpr double kPi = std::numbers::pi;

// Grid mean of f*g by direct point evaluation (no FFT).
double grid_mean_product(const Field2& f, const Field2& g, int G)
{
    double acc = 0.0;
    for (int a = 0; a < G; ++a)
        for (int b = 0; b < G; ++b) {
            double x1 = 2 * kPi * a / G, x2 = 2 * kPi * b / G;
            acc += evaluate(f, x1, x2) * evaluate(g, x1, x2);
        }
    return acc / (G * G);
}

// Pseudo-spectral product on a dealiased grid, truncated back to the box.
Field2 product(const Field2& u, const Field2& v)
{
    SpectralGrid grid(2, dealiased_grid_size(u.N()));
    std::vector<double> gu(grid.points()), gv(grid.points());
    grid.to_grid(u.box(), u.data(), gu);
    grid.to_grid(v.box(), v.data(), gv);
    for (std::size_t i = 0; i < gu.size(); ++i)
        gu[i] *= gv[i];
    Field2 out(u.N());
    grid.from_grid(gu, out.box(), out.data());
    out.at(out.box().zero()) = 0.0;
    return out;
}
} // namespace

TEST_CASE("index boxes: negation and sums")
{
    IndexBox b(3, 2);
    CHECK(b.size() == 125);
    for (int i = 0; i < b.size(); ++i) {
        auto m = b.at(i);
        std::array<int, 3> n{-m[0], -m[1], -m[2]};
        CHECK(b.index(n) == b.neg(i));
        CHECK(b.index(m) == i);
    }
    std::array<int, 3> p{1, -2, 0}, q{1, 1, 1}, r{2, -1, 1}, s{2, 2, 0};
    CHECK(b.sum(b.index(p), b.index(q)) == b.index(r));
    CHECK(b.sum(b.index(s), b.index(q)) == -1);
}

TEST_CASE("sobolev_norm examples")
{
    CHECK(sobolev_norm(Field2(4), 3.0) == 0.0);
    Field2 c = Field2::cosine(4, {1, 1});
    CHECK(sobolev_norm(c, 2.0) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-14));
    CHECK_THROWS_AS(sobolev_norm(c, -0.5), PreconditionError);

    std::mt19937_64 rng(1);
    for (int t = 0; t < 5; ++t) {
        Field2 f = random_field(5, rng);
        double l2 = sobolev_norm(f, 0.0);
        double quad = grid_mean_product(f, f, 12);
        CHECK(std::abs(l2 * l2 - quad) <= 1e-12 * quad);
    }
}

TEST_CASE("sobolev_norm monotone in s and bracket convention on QPField")
{
    std::mt19937_64 rng(2);
    for (int t = 0; t < 10; ++t) {
        Field2 f = random_field(6, rng);
        double prev = 0.0;
        for (double s : {0.0, 0.5, 1.0, 2.5, 4.0}) {
            double n = sobolev_norm(f, s);
            CHECK(n >= prev);
            prev = n;
        }
    }
    QPField q(2, 2, 2);
    std::array<int, 2> l{2, 1};
    q.set(l, {1, 0}, 1.0);
    // <l, j> = max{1, |l|, |j|} = sqrt(5)
    CHECK(sobolev_norm(q, 1.0) == doctest::Approx(std::sqrt(5.0)));
}

TEST_CASE("project_mean")
{
    QPField c(1, 1, 2, false);
    std::array<int, 1> l0{0};
    c.set(l0, {0, 0}, 3.0);
    auto [m, r] = project_mean(c);
    CHECK(m.get(l0, {0, 0}) == cplx(3.0));
    CHECK(sobolev_norm(r, 0.0) == 0.0);

    QPField e(1, 1, 2, false);
    std::array<int, 1> l1{1};
    e.set(l1, {1, -1}, 1.0);
    auto [m2, r2] = project_mean(e);
    CHECK(sobolev_norm(m2, 0.0) == 0.0);
    CHECK(r2.get(l1, {1, -1}) == cplx(1.0));

    // additivity, reconstruction and idempotence
    QPField s = c;
    s += e;
    auto [ms, rs] = project_mean(s);
    QPField back = ms;
    back += rs;
    for (std::size_t i = 0; i < s.data().size(); ++i)
        CHECK(back.data()[i] == s.data()[i]);
    auto [mm, rr] = project_mean(rs);
    CHECK(sobolev_norm(mm, 0.0) == 0.0);
    for (std::size_t i = 0; i < rs.data().size(); ++i)
        CHECK(rr.data()[i] == rs.data()[i]);
}

TEST_CASE("momentum_lift examples")
{
    MomentumMap map({{1, 0}});
    TravelingField v(map, 2, 2);
    std::array<int, 1> p{1}, n{-1};
    v.set(p, 0.5);
    v.set(n, 0.5);
    QPField q = momentum_lift(v);
    CHECK(q.get(p, {-1, 0}) == cplx(0.5));
    CHECK(q.get(n, {1, 0}) == cplx(0.5));
    CHECK(on_momentum_lattice(q, map));

    QPField z = momentum_lift(TravelingField(map, 2, 2));
    CHECK(sobolev_norm(z, 0.0) == 0.0);

    TravelingField big(MomentumMap({{2, 0}}), 2, 2);
    big.at(big.lbox().index(std::array<int, 1>{2})) = 1.0; // bypasses set(): pi^T(l) = (4, 0)
    CHECK_THROWS_AS(momentum_lift(big), TruncationOverflow);
}

TEST_CASE("traveling waves satisfy the translation identity")
{
    std::mt19937_64 rng(3);
    MomentumMap map = MomentumMap::standard2();
    TravelingField v = random_traveling(map, 3, 3, rng);
    QPField q = momentum_lift(v);
    std::uniform_real_distribution<double> u(0.0, 2 * kPi);
    for (int t = 0; t < 10; ++t) {
        std::array<double, 2> phi{u(rng), u(rng)}, x{u(rng), u(rng)}, sig{u(rng), u(rng)};
        auto ps = map.forward(sig[0], sig[1]);
        std::array<double, 2> shifted{phi[0] - ps[0], phi[1] - ps[1]};
        double lhs = evaluate(q, shifted, x[0], x[1]);
        double rhs = evaluate(q, phi, x[0] + sig[0], x[1] + sig[1]);
        CHECK(std::abs(lhs - rhs) <= 1e-10);
        CHECK(std::abs(evaluate(v, phi, x[0], x[1]) - evaluate(q, phi, x[0], x[1])) <= 1e-10);
    }
}

TEST_CASE("lift and restriction are inverse on traveling fields")
{
    std::mt19937_64 rng(4);
    MomentumMap map({{1, 2}, {-1, 1}});
    TravelingField v = random_traveling(map, 2, 6, rng);
    TravelingField w = restrict_traveling(momentum_lift(v), map);
    for (int l = 0; l < v.lbox().size(); ++l)
        CHECK(w.at(l) == v.at(l));
    CHECK(map.span_dim() == 2);
    CHECK(MomentumMap({{1, 1}, {2, 2}}).span_dim() == 1);
}

TEST_CASE("involution and parity")
{
    Field2 c = Field2::cosine(3, {1, 2});
    Field2 s = Field2::sine(3, {1, 2});
    CHECK(bpl::test::max_abs_diff(involution_S(c), c) == 0.0);
    CHECK(bpl::test::max_abs_diff(involution_S(s), -1.0 * s) == 0.0);
    std::mt19937_64 rng(5);
    Field2 f = random_field(4, rng);
    CHECK(bpl::test::max_abs_diff(involution_S(involution_S(f)), f) == 0.0);

    TravelingField v = random_traveling(MomentumMap::standard2(), 3, 3, rng);
    v.project_odd();
    CHECK(parity_check(v, Parity::odd));
    CHECK(parity_check(momentum_lift(v), Parity::odd));
    CHECK(v.is_real());
}

TEST_CASE("lambda_power")
{
    std::mt19937_64 rng(6);
    Field2 f = random_field(5, rng);
    CHECK(bpl::test::max_abs_diff(lambda_power(f, 0.0), f) == 0.0);
    Field2 m = Field2::mode(3, {2, 1}, 1.0);
    CHECK(std::abs(lambda_power(m, 1.0)[{2, 1}] - std::sqrt(5.0)) < 1e-15);
    for (double s : {0.5, 1.7, 3.0})
        CHECK(sobolev_norm(lambda_power(f, s), 0.0) == doctest::Approx(sobolev_norm(f, s)).epsilon(1e-13));
}

TEST_CASE("evaluate and grid transforms")
{
    CHECK(evaluate(Field2(3), 0.3, 0.1) == 0.0);
    TravelingField v(MomentumMap::standard2(), 1, 1);
    std::array<int, 2> p{1, 0}, n{-1, 0};
    std::array<double, 2> zero{0.0, 0.0};
    v.set(p, 0.5);
    v.set(n, 0.5);
    CHECK(evaluate(v, zero, 0.0, 0.0) == doctest::Approx(1.0));

    std::mt19937_64 rng(7);
    Field2 f = random_field(5, rng);
    SpectralGrid grid(2, 16);
    std::vector<double> vals(grid.points());
    grid.to_grid(f.box(), f.data(), vals);
    double m2 = 0.0;
    for (int a = 0; a < 16; ++a)
        for (int b = 0; b < 16; ++b) {
            double direct = evaluate(f, 2 * kPi * a / 16, 2 * kPi * b / 16);
            CHECK(std::abs(vals[a * 16 + b] - direct) <= 1e-12);
            m2 += direct * direct;
        }
    CHECK(std::abs(m2 / 256 - std::pow(sobolev_norm(f, 0.0), 2)) <= 1e-12 * m2 / 256);
    Field2 back(5);
    double dropped = grid.from_grid(vals, back.box(), back.data());
    CHECK(bpl::test::max_abs_diff(back, f) <= 1e-14);
    CHECK(dropped <= 1e-20);
}

TEST_CASE("algebra property constant is stable across a random corpus")
{
    std::mt19937_64 rng(8);
    const double s = 2.0;
    double cmax_small = 0.0, cmax = 0.0;
    for (int t = 0; t < 40; ++t) {
        Field2 u = random_field(6, rng, 3.0), v = random_field(6, rng, 3.0);
        Field2 uv = product(u, v);
        CHECK(uv.is_real(1e-12));
        double c = sobolev_norm(uv, s) / (sobolev_norm(u, s) * sobolev_norm(v, s));
        (t < 20 ? cmax_small : cmax) = std::max(t < 20 ? cmax_small : cmax, c);
    }
    MESSAGE("algebra constant C(2) halves: " << cmax_small << " " << cmax);
    CHECK(cmax < 2.0 * cmax_small);
    CHECK(cmax_small < 2.0 * cmax);
}
