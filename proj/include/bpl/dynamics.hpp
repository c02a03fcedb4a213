#pragma once

#include "bpl/lattice.hpp"

#include <functional>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

namespace bpl {

struct ModelParams {
    double lambda = 100.0;
    double alpha = 1.5;
    double beta = 1.0;
    double c = 0.1;
    MomentumMap map = MomentumMap::standard2();
    // omega_2 / omega_1 = sqrt 2 is badly approximable, so the default frequency is Diophantine.
    std::vector<double> omega{1.1, 1.1 * std::numbers::sqrt2};
    int N_phi = 8;
    int N_x = 8;

    int nu() const { return map.nu(); }
    double theta() const { return alpha - 1.0 + c; }
    double gamma() const;
    double tau() const { return nu() + 4.0; }
    double s0() const { return nu() + 6.0; }
    double eps() const;
    double eps_M(int M) const;
    // lambda * omega . l
    double frequency(std::span<const int> l) const;
    // Throws PreconditionError naming the first violated invariant.
    void validate() const;
};

struct Velocity {
    Field2 u1;
    Field2 u2;
};

// xi_1 / |xi|^2
double dispersion_symbol(Mode2 j);
Field2 apply_L(const Field2& v, double beta);
Velocity biot_savart(const Field2& v);
VectorTraveling biot_savart(const TravelingField& v);
VectorTraveling gradient(const TravelingField& v);

// Coefficients of h -> -B(v).grad h (advect, over |j - j'|^2) and h -> -B(h).grad v
// (stretch, over |j'|^2) coupling input mode j' to output mode j; both multiply v^(j - j').
struct LinearizationWeights {
    double advect = 0.0;
    double stretch = 0.0;
};
LinearizationWeights linearization_weights(Mode2 j, Mode2 jp);

struct ForcingTerm {
    std::vector<int> l;
    Mode2 j;
    double amplitude;
};

// Real, even forcing with zero x-average. The lambda^alpha scale is applied at use sites.
class Forcing {
public:
    Forcing(int nu, int N_phi, int N_x, const std::vector<ForcingTerm>& terms, const MomentumMap& map);
    // 2cos(phi_1 - jbar_1.x) + 2cos(phi_2 - jbar_2.x) + 2cos(phi_1 + phi_2 - (jbar_1 + jbar_2).x)
    static Forcing standard(const ModelParams& p);
    static Forcing zero(const ModelParams& p);

    const QPField& field() const { return f_; }
    const std::vector<ForcingTerm>& terms() const { return terms_; }
    // Present when every coefficient sits on the momentum lattice.
    const std::optional<TravelingField>& traveling() const { return traveling_; }
    bool is_zero() const { return terms_.empty(); }
    // f(lambda omega t, .) by phase rotation of the (l, j) coefficients.
    Field2 slice(double t, const ModelParams& p) const;

private:
    QPField f_;
    std::vector<ForcingTerm> terms_;
    std::optional<TravelingField> traveling_;
};

// Pseudo-spectral products on T^2 with 2/3-rule dealiasing.
class BetaPlane {
public:
    explicit BetaPlane(int N_x);
    BetaPlane(BetaPlane&&) noexcept;
    BetaPlane& operator=(BetaPlane&&) noexcept;
    ~BetaPlane();

    int N_x() const { return N_x_; }
    int grid_size() const;

    // N[w1, w2] = -B(w1).grad w2, zero mean enforced
    Field2 transport(const Field2& w1, const Field2& w2);
    // -(B(V + w).grad(V + w) - B(V).grad V); quadratic term optional
    Field2 perturbation_transport(const Field2& V, const Field2& w, bool quadratic);
    // sup over grid points of |B(v)|
    double max_velocity(const Field2& v);
    // (a.grad) u for a given vector field a
    Field2 advect_by(const Velocity& a, const Field2& u);
    Field2 product(const Field2& a, const Field2& b);

private:
    struct Impl;
    int N_x_;
    std::unique_ptr<Impl> impl_;
};

Field2 transport_nonlinearity(const Field2& w1, const Field2& w2);
Field2 full_vector_field(double t, const Field2& v, const ModelParams& p, const Forcing& f);

// Products of traveling waves live on the profile torus T^nu.
class TorusEngine {
public:
    TorusEngine(const MomentumMap& map, int N_phi, int N_x);
    TorusEngine(TorusEngine&&) noexcept;
    TorusEngine& operator=(TorusEngine&&) noexcept;
    ~TorusEngine();

    // -B(v1).grad v2; dropped_sq accumulates the squared mass outside the truncation
    TravelingField transport(const TravelingField& v1, const TravelingField& v2, double* dropped_sq = nullptr);
    TravelingField product(const TravelingField& a, const TravelingField& b, double* dropped_sq = nullptr);
    // Profile values on the torus grid and back.
    std::vector<double> to_grid(const TravelingField& v);
    TravelingField from_grid(std::span<const double> values, double* dropped_sq = nullptr);
    int grid_size() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// Smallest |lambda omega.l - beta L(j)| / (lambda gamma <l>^-tau) over the given (l, j) pairs.
struct ScreeningResult {
    double min_ratio = 0.0;
    std::vector<int> worst_l;
    Mode2 worst_j;
    double worst_divisor = 0.0;
};
ScreeningResult first_melnikov_screen(const ModelParams& p, const TravelingField& support);
ScreeningResult first_melnikov_screen(const ModelParams& p);

TravelingField g_lambda(const Forcing& f, const ModelParams& p);
// (lambda omega.d_phi - beta L) v coefficientwise on the momentum lattice
TravelingField linear_wave_operator(const TravelingField& v, const ModelParams& p);

// 4th-order exponential time differencing with an exactly propagated diagonal linear part.
class Etdrk4 {
public:
    using Rhs = std::function<Field2(double, const Field2&)>;
    Etdrk4(std::vector<cplx> linear, double h);
    double h() const { return h_; }
    void step(Field2& u, double t, const Rhs& nonlinear) const;

private:
    double h_;
    std::vector<cplx> E_, E2_, Q_, f1_, f2_, f3_;
};

struct Trajectory {
    std::vector<double> t;
    std::vector<Field2> v;
};

struct IntegrateOptions {
    int sample_every = 1;
    double ceiling = 1e12;
    double s_ceiling = 0.0;
};

Trajectory integrate(const Field2& v0, double t0, double t1, const ModelParams& p, const Forcing& f, double dt,
                     const IntegrateOptions& opts = {});

} // namespace bpl
