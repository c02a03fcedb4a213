#include "bpl/kernels.hpp"

#include <cstddef>

namespace bpl::kernels::scalar {

double weighted_sumsq(std::span<const double> w, std::span<const cplx> z)
{
    double acc = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i)
        acc += w[i] * std::norm(z[i]);
    return acc;
}

void advect(std::span<const double> u1, std::span<const double> u2, std::span<const double> g1,
            std::span<const double> g2, std::span<double> out)
{
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = -(u1[i] * g1[i] + u2[i] * g2[i]);
}

void cmul_inplace(std::span<const cplx> a, std::span<cplx> y)
{
    for (std::size_t i = 0; i < y.size(); ++i)
        y[i] *= a[i];
}

void caxpy(cplx a, std::span<const cplx> x, std::span<cplx> y)
{
    for (std::size_t i = 0; i < y.size(); ++i)
        y[i] += a * x[i];
}

} // namespace bpl::kernels::scalar
