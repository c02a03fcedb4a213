#include "bpl/wave.hpp"
#include "bpl/error.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <cmath>
#include <fmt/format.h>

namespace bpl {

namespace {

using SparseC = Eigen::SparseMatrix<cplx, Eigen::ColMajor>;
using VectorC = Eigen::Matrix<cplx, Eigen::Dynamic, 1>;

TravelingField residual_with(TorusEngine& engine, const TravelingField& v, const ModelParams& p, const Forcing& f)
{
    TravelingField r = linear_wave_operator(v, p);
    r -= engine.transport(v, v);
    if (f.traveling())
        r -= std::pow(p.lambda, p.alpha) * f.traveling()->resized(v.N_phi());
    else if (!f.is_zero())
        throw PreconditionError("wave_residual: forcing is not supported on the momentum lattice");
    return r;
}

} // namespace

TravelingField wave_residual(const TravelingField& v, const ModelParams& p, const Forcing& f)
{
    TorusEngine engine(v.map(), v.N_phi(), v.N_x());
    return residual_with(engine, v, p, f);
}

struct WaveJacobian::Impl {
    SparseC matrix;
    Eigen::SparseLU<SparseC> lu;
    TravelingField layout;
};

WaveJacobian::WaveJacobian(const TravelingField& v, const ModelParams& p)
{
    const IndexBox& box = v.lbox();
    std::vector<int> position(box.size(), -1);
    for (int l = 0; l < box.size(); ++l)
        if (v.admissible(l)) {
            position[l] = static_cast<int>(unknowns_.size());
            unknowns_.push_back(l);
        }
    std::vector<int> support;
    for (int l = 0; l < box.size(); ++l)
        if (v.at(l) != cplx{})
            support.push_back(l);

    std::vector<Eigen::Triplet<cplx>> entries;
    for (int row : unknowns_) {
        const Mode2 j = v.spatial_mode(row);
        const double d = p.frequency(box.at(row)) - p.beta * dispersion_symbol(j);
        entries.emplace_back(position[row], position[row], cplx(0.0, d));
        for (int dl : support) {
            const int col = box.diff(row, dl);
            if (col < 0 || position[col] < 0)
                continue;
            LinearizationWeights w = linearization_weights(j, v.spatial_mode(col));
            const double weight = w.advect + w.stretch;
            if (weight != 0.0)
                entries.emplace_back(position[row], position[col], -weight * v.at(dl));
        }
    }
    auto impl = std::make_shared<Impl>();
    const auto n = static_cast<Eigen::Index>(unknowns_.size());
    impl->matrix.resize(n, n);
    impl->matrix.setFromTriplets(entries.begin(), entries.end());
    impl->matrix.makeCompressed();
    impl->lu.analyzePattern(impl->matrix);
    impl->lu.factorize(impl->matrix);
    if (impl->lu.info() != Eigen::Success)
        throw ResonanceError("newton: singular Jacobian (near-resonance)", 0.0, 0.0);
    impl->layout = TravelingField(v.map(), v.N_phi(), v.N_x());
    impl_ = std::move(impl);
}

TravelingField WaveJacobian::solve(const TravelingField& rhs) const
{
    VectorC b(static_cast<Eigen::Index>(unknowns_.size()));
    for (std::size_t k = 0; k < unknowns_.size(); ++k)
        b[static_cast<Eigen::Index>(k)] = rhs.at(unknowns_[k]);
    VectorC x = impl_->lu.solve(b);
    if (impl_->lu.info() != Eigen::Success || !x.allFinite())
        throw ResonanceError("newton: Jacobian solve failed (near-resonance)", 0.0, 0.0);
    TravelingField out = impl_->layout;
    for (std::size_t k = 0; k < unknowns_.size(); ++k)
        out.at(unknowns_[k]) = x[static_cast<Eigen::Index>(k)];
    return out;
}

TravelingField WaveJacobian::apply(const TravelingField& h) const
{
    VectorC x(static_cast<Eigen::Index>(unknowns_.size()));
    for (std::size_t k = 0; k < unknowns_.size(); ++k)
        x[static_cast<Eigen::Index>(k)] = h.at(unknowns_[k]);
    VectorC y = impl_->matrix * x;
    TravelingField out = impl_->layout;
    for (std::size_t k = 0; k < unknowns_.size(); ++k)
        out.at(unknowns_[k]) = y[static_cast<Eigen::Index>(k)];
    return out;
}

WaveSolution newton_solve(const ModelParams& p, const Forcing& f, const NewtonOptions& opts)
{
    p.validate();
    WaveSolution sol;
    sol.params = p;
    sol.omega = p.omega;
    sol.g = g_lambda(f, p).resized(p.N_phi);
    TravelingField v = opts.initial ? *opts.initial : sol.g;
    if (v.N_phi() != p.N_phi || v.N_x() != p.N_x || !(v.map() == p.map))
        throw PreconditionError("newton: initial guess layout does not match the parameters");
    v.project_odd();

    TorusEngine engine(p.map, p.N_phi, p.N_x);
    double scale = f.is_zero() ? 1.0 : std::pow(p.lambda, p.alpha) * sobolev_norm(*f.traveling(), opts.s);
    for (int it = 0;; ++it) {
        if (!parity_check(v, Parity::odd, 1e-12 * (1.0 + sobolev_norm(v, 0.0))))
            throw Error("newton: iterate left the odd subspace");
        TravelingField r = residual_with(engine, v, p, f);
        double rn = sobolev_norm(r, opts.s) / scale;
        sol.history.push_back(rn);
        if (!std::isfinite(rn))
            throw DivergenceError(fmt::format("newton: residual became non-finite after {} iterations", it));
        if (rn <= opts.tol) {
            sol.iterations = it;
            sol.residual_norm = rn;
            break;
        }
        if (it >= opts.max_iter)
            throw DivergenceError(fmt::format("newton: no convergence in {} iterations; residual history [{:.3e}]",
                                              opts.max_iter, fmt::join(sol.history, ", ")));
        WaveJacobian jac(v, p);
        TravelingField step = jac.solve(r);
        v -= step;
        v.project_odd();
    }
    sol.v = v;
    sol.z = v - sol.g;
    return sol;
}

std::uint64_t params_hash(const ModelParams& p)
{
    std::string text = fmt::format("lambda={:.17g};alpha={:.17g};beta={:.17g};c={:.17g};N_phi={};N_x={};omega=[{:.17g}];map=[",
                                   p.lambda, p.alpha, p.beta, p.c, p.N_phi, p.N_x, fmt::join(p.omega, ","));
    for (Mode2 w : p.map.wave_vectors())
        text += fmt::format("({},{})", w.j1, w.j2);
    text += "]";
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    return h;
}

} // namespace bpl
