#include "bpl/kernels.hpp"

#include <atomic>

namespace bpl::kernels {

namespace {

Isa detect()
{
#if defined(__x86_64__) || defined(__i386__)
    __builtin_cpu_init();
    if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma"))
        return Isa::avx2;
#endif
    return Isa::scalar;
}

std::atomic<int> g_override{-1};

} // namespace

bool isa_available(Isa isa)
{
    static const Isa best = detect();
    return isa == Isa::scalar || best == Isa::avx2;
}

Isa active_isa()
{
    static const Isa best = detect();
    int o = g_override.load(std::memory_order_relaxed);
    return o < 0 ? best : static_cast<Isa>(o);
}

void force_isa(Isa isa)
{
    if (isa_available(isa))
        g_override.store(static_cast<int>(isa));
}

void clear_isa_override() { g_override.store(-1); }

std::string_view isa_name(Isa isa) { return isa == Isa::avx2 ? "avx2" : "scalar"; }

double weighted_sumsq(std::span<const double> w, std::span<const cplx> z)
{
    return active_isa() == Isa::avx2 ? avx2::weighted_sumsq(w, z) : scalar::weighted_sumsq(w, z);
}

void advect(std::span<const double> u1, std::span<const double> u2, std::span<const double> g1,
            std::span<const double> g2, std::span<double> out)
{
    if (active_isa() == Isa::avx2)
        avx2::advect(u1, u2, g1, g2, out);
    else
        scalar::advect(u1, u2, g1, g2, out);
}

void cmul_inplace(std::span<const cplx> a, std::span<cplx> y)
{
    if (active_isa() == Isa::avx2)
        avx2::cmul_inplace(a, y);
    else
        scalar::cmul_inplace(a, y);
}

void caxpy(cplx a, std::span<const cplx> x, std::span<cplx> y)
{
    if (active_isa() == Isa::avx2)
        avx2::caxpy(a, x, y);
    else
        scalar::caxpy(a, x, y);
}

} // namespace bpl::kernels
