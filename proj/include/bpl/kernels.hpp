#pragma once

#include <complex>
#include <span>
#include <string_view>

namespace bpl::kernels {

using cplx = std::complex<double>;

enum class Isa { scalar, avx2 };

// Best instruction set supported by the running CPU, unless overridden.
Isa active_isa();
void force_isa(Isa isa);
void clear_isa_override();
std::string_view isa_name(Isa isa);
bool isa_available(Isa isa);

// sum_i w[i] * |z[i]|^2
double weighted_sumsq(std::span<const double> w, std::span<const cplx> z);
// out[i] = -(u1[i] * g1[i] + u2[i] * g2[i])
void advect(std::span<const double> u1, std::span<const double> u2, std::span<const double> g1,
            std::span<const double> g2, std::span<double> out);
// y[i] *= a[i]
void cmul_inplace(std::span<const cplx> a, std::span<cplx> y);
// y[i] += a * x[i]
void caxpy(cplx a, std::span<const cplx> x, std::span<cplx> y);

namespace scalar {
double weighted_sumsq(std::span<const double> w, std::span<const cplx> z);
void advect(std::span<const double> u1, std::span<const double> u2, std::span<const double> g1,
            std::span<const double> g2, std::span<double> out);
void cmul_inplace(std::span<const cplx> a, std::span<cplx> y);
void caxpy(cplx a, std::span<const cplx> x, std::span<cplx> y);
} // namespace scalar

namespace avx2 {
double weighted_sumsq(std::span<const double> w, std::span<const cplx> z);
void advect(std::span<const double> u1, std::span<const double> u2, std::span<const double> g1,
            std::span<const double> g2, std::span<double> out);
void cmul_inplace(std::span<const cplx> a, std::span<cplx> y);
void caxpy(cplx a, std::span<const cplx> x, std::span<cplx> y);
} // namespace avx2

} // namespace bpl::kernels
