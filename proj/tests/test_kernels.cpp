#include "doctest.h"

#include "bpl/kernels.hpp"

#include <random>
#include <vector>

using namespace bpl::kernels;

namespace {

struct Data {
    std::vector<double> w, u1, u2, g1, g2;
    std::vector<cplx> a, z;
};

Data make(std::size_t n, unsigned seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    Data d;
    for (std::size_t i = 0; i < n; ++i) {
        d.w.push_back(std::abs(g(rng)));
        d.u1.push_back(g(rng));
        d.u2.push_back(g(rng));
        d.g1.push_back(g(rng));
        d.g2.push_back(g(rng));
        d.a.emplace_back(g(rng), g(rng));
        d.z.emplace_back(g(rng), g(rng));
    }
    return d;
}

} // namespace

TEST_CASE("simd kernels match scalar reference on odd and even lengths")
{
    if (!isa_available(Isa::avx2)) {
        MESSAGE("AVX2 not available, equivalence test skipped");
        return;
    }
    for (std::size_t n : {0u, 1u, 2u, 3u, 7u, 64u, 1001u}) {
        Data d = make(n, 17 + static_cast<unsigned>(n));

        double s0 = scalar::weighted_sumsq(d.w, d.z);
        double s1 = avx2::weighted_sumsq(d.w, d.z);
        CHECK(std::abs(s0 - s1) <= 1e-13 * (1.0 + std::abs(s0)));

        std::vector<double> o0(n), o1(n);
        scalar::advect(d.u1, d.u2, d.g1, d.g2, o0);
        avx2::advect(d.u1, d.u2, d.g1, d.g2, o1);
        for (std::size_t i = 0; i < n; ++i)
            CHECK(std::abs(o0[i] - o1[i]) <= 1e-14 * (1.0 + std::abs(o0[i])));

        auto y0 = d.z, y1 = d.z;
        scalar::cmul_inplace(d.a, y0);
        avx2::cmul_inplace(d.a, y1);
        for (std::size_t i = 0; i < n; ++i)
            CHECK(std::abs(y0[i] - y1[i]) <= 1e-14 * (1.0 + std::abs(y0[i])));

        auto x0 = d.z, x1 = d.z;
        scalar::caxpy({0.3, -1.7}, d.a, x0);
        avx2::caxpy({0.3, -1.7}, d.a, x1);
        for (std::size_t i = 0; i < n; ++i)
            CHECK(std::abs(x0[i] - x1[i]) <= 1e-14 * (1.0 + std::abs(x0[i])));
    }
}

TEST_CASE("isa override routes dispatch")
{
    force_isa(Isa::scalar);
    CHECK(active_isa() == Isa::scalar);
    clear_isa_override();
    CHECK((active_isa() == Isa::avx2) == isa_available(Isa::avx2));
}
