#pragma once

#include "bpl/dynamics.hpp"

#include <optional>
#include <vector>

namespace bpl {

struct WaveSolution {
    TravelingField v;
    TravelingField g;
    TravelingField z;
    // H^s residual relative to |lambda^alpha f|_s
    double residual_norm = 0.0;
    std::vector<double> omega;
    ModelParams params;
    int iterations = 0;
    std::vector<double> history;
};

struct NewtonOptions {
    double tol = 1e-9;
    int max_iter = 30;
    double s = 2.0;
    std::optional<TravelingField> initial;
};

// lambda omega.d_phi v + B(v).grad v - beta L v - lambda^alpha f on the momentum lattice
TravelingField wave_residual(const TravelingField& v, const ModelParams& p, const Forcing& f);

// (lambda omega.d_phi - beta L) + d[B(v).grad v] over the admissible profile modes.
class WaveJacobian {
public:
    WaveJacobian(const TravelingField& v, const ModelParams& p);
    const std::vector<int>& unknowns() const { return unknowns_; }
    // Solves J h = rhs; throws ResonanceError when the factorization is singular.
    TravelingField solve(const TravelingField& rhs) const;
    TravelingField apply(const TravelingField& h) const;

private:
    struct Impl;
    std::shared_ptr<const Impl> impl_;
    std::vector<int> unknowns_;
};

WaveSolution newton_solve(const ModelParams& p, const Forcing& f, const NewtonOptions& opts = {});

// FNV-1a digest of the canonical parameter text.
std::uint64_t params_hash(const ModelParams& p);

} // namespace bpl
