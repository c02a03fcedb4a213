#pragma once

#include "bpl/lattice.hpp"

#include <cmath>
#include <random>

namespace bpl::test {

inline Field2 random_field(int N, std::mt19937_64& rng, double decay = 0.0)
{
    std::normal_distribution<double> g;
    Field2 f(N);
    for (int i = 0; i < f.box().size(); ++i) {
        double w = std::pow(std::max(1.0, f.box().norm(i)), -decay);
        f.at(i) = w * cplx(g(rng), g(rng));
    }
    f.at(f.box().zero()) = 0.0;
    f.enforce_real();
    return f;
}

inline TravelingField random_traveling(const MomentumMap& map, int N_phi, int N_x, std::mt19937_64& rng,
                                       double decay = 0.0)
{
    std::normal_distribution<double> g;
    TravelingField v(map, N_phi, N_x);
    for (int l = 0; l < v.lbox().size(); ++l)
        if (v.admissible(l))
            v.at(l) = std::pow(std::max(1.0, v.lbox().norm(l)), -decay) * cplx(g(rng), g(rng));
    v.enforce_real();
    return v;
}

inline double max_abs_diff(const Field2& a, const Field2& b)
{
    double m = 0.0;
    for (int i = 0; i < a.box().size(); ++i)
        m = std::max(m, std::abs(a.at(i) - b.at(i)));
    return m;
}

} // namespace bpl::test
