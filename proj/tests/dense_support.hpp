#pragma once

#include "bpl/operators.hpp"

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <functional>
#include <numbers>
#include <span>
#include <vector>

namespace bpl::test {

using Dense = Eigen::MatrixXcd;

inline Dense dense_at(const QPOperator& R, std::span<const double> phi)
{
    const IndexBox& jb = R.jbox();
    Dense M = Dense::Zero(jb.size(), jb.size());
    for (int j = 0; j < jb.size(); ++j)
        for (const auto& e : R.row(j)) {
            double arg = 0.0;
            auto l = R.lbox().at(e.l);
            for (int k = 0; k < R.lbox().rank(); ++k)
                arg += l[k] * phi[k];
            M(j, e.jp) += e.v * std::polar(1.0, arg);
        }
    return M;
}

// Largest entrywise gap between R and the Fourier coefficients of a sampled family phi -> M(phi),
// taken over a K^nu phase grid. Exact when the family holds no modes beyond |l|_inf < K/2.
inline double gap_to_family(const QPOperator& R, const std::function<Dense(std::span<const double>)>& family, int K = 8)
{
    const int nu = R.lbox().rank();
    const int n = R.jbox().size();
    int total = 1;
    for (int k = 0; k < nu; ++k)
        total *= K;
    std::vector<Dense> samples;
    std::vector<std::vector<double>> phis;
    for (int i = 0; i < total; ++i) {
        std::vector<double> phi(nu);
        int rest = i;
        for (int k = nu - 1; k >= 0; --k) {
            phi[k] = 2.0 * std::numbers::pi * (rest % K) / K;
            rest /= K;
        }
        samples.push_back(family(phi));
        phis.push_back(phi);
    }
    double gap = 0.0;
    for (int l = 0; l < R.lbox().size(); ++l) {
        auto m = R.lbox().at(l);
        Dense C = Dense::Zero(n, n);
        for (int i = 0; i < total; ++i) {
            double arg = 0.0;
            for (int k = 0; k < nu; ++k)
                arg += m[k] * phis[i][k];
            C += samples[i] * std::polar(1.0 / total, -arg);
        }
        for (int j = 0; j < n; ++j)
            for (int jp = 0; jp < n; ++jp)
                if (j != R.jbox().zero() && jp != R.jbox().zero())
                    gap = std::max(gap, std::abs(C(j, jp) - R.get(l, j, jp)));
    }
    return gap;
}

inline Dense zero_mean_identity(const IndexBox& jb)
{
    Dense I = Dense::Identity(jb.size(), jb.size());
    I(jb.zero(), jb.zero()) = 0.0;
    return I;
}

// Phi^{-1} G Phi - Phi^{-1} (lambda omega.d Phi) at phi for Phi = exp(X), with the derivative of the
// exponential taken from the block exponential of [[X, dX], [0, X]].
inline Dense dense_pushforward(const QPOperator& X, const QPOperator& G, std::span<const double> lw,
                               std::span<const double> phi)
{
    const Eigen::Index n = X.jbox().size();
    Dense x = dense_at(X, phi);
    Dense block = Dense::Zero(2 * n, 2 * n);
    block.topLeftCorner(n, n) = x;
    block.bottomRightCorner(n, n) = x;
    block.topRightCorner(n, n) = dense_at(phi_derivative(X, lw), phi);
    Dense eb = block.exp();
    Dense Phi_inv = (-x).exp();
    return Dense(Phi_inv * dense_at(G, phi) * eb.topLeftCorner(n, n) - Phi_inv * eb.topRightCorner(n, n));
}

} // namespace bpl::test
