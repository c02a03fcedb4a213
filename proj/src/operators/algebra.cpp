#include "bpl/error.hpp"
#include "bpl/operators.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <fmt/format.h>
#include <map>
#include <mutex>

namespace bpl {

namespace {

constexpr double kPruneRelative = 1e-16;

// l-index for each displacement j' - j in the doubled spatial box, or -1.
struct DisplacementTable {
    int N_x;
    int side;
    std::vector<int> l_of;

    int lookup(Mode2 d) const
    {
        if (d.max_abs() > 2 * N_x)
            return -1;
        return l_of[(d.j1 + 2 * N_x) * side + (d.j2 + 2 * N_x)];
    }
};

std::shared_ptr<const DisplacementTable> displacement_table(const MomentumMap& map, int N_l, int N_x)
{
    static std::mutex mu;
    static std::map<std::tuple<std::vector<std::pair<int, int>>, int, int>, std::shared_ptr<const DisplacementTable>> cache;
    std::vector<std::pair<int, int>> key;
    for (Mode2 w : map.wave_vectors())
        key.emplace_back(w.j1, w.j2);
    std::lock_guard lock(mu);
    auto& slot = cache[{key, N_l, N_x}];
    if (!slot) {
        auto t = std::make_shared<DisplacementTable>();
        t->N_x = N_x;
        t->side = 4 * N_x + 1;
        t->l_of.assign(static_cast<std::size_t>(t->side) * t->side, -1);
        auto lbox = make_box(map.nu(), N_l);
        for (int l = 0; l < lbox->size(); ++l) {
            Mode2 d = map.transpose(lbox->at(l));
            if (d.max_abs() <= 2 * N_x)
                t->l_of[(d.j1 + 2 * N_x) * t->side + (d.j2 + 2 * N_x)] = l;
        }
        slot = std::move(t);
    }
    return slot;
}

bool dense_path(const QPOperator& R, const QPOperator& Q)
{
    return holds(R.flags().momentum) && holds(Q.flags().momentum) && R.map().injective();
}

Eigen::MatrixXcd to_dense(const QPOperator& R)
{
    const int n = R.jbox().size();
    Eigen::MatrixXcd M = Eigen::MatrixXcd::Zero(n, n);
    for (int j = 0; j < n; ++j)
        for (const auto& e : R.row(j))
            M(j, e.jp) = e.v;
    return M;
}

QPOperator from_dense(const Eigen::MatrixXcd& M, const QPOperator& layout, double threshold)
{
    const IndexBox& jb = layout.jbox();
    auto table = displacement_table(layout.map(), layout.N_l(), layout.N_x());
    std::vector<std::vector<QPOperator::Entry>> rows(jb.size());
    for (int j = 0; j < jb.size(); ++j) {
        if (j == jb.zero())
            continue;
        const Mode2 mj = jb.mode2(j);
        for (int jp = 0; jp < jb.size(); ++jp) {
            const cplx v = M(j, jp);
            if (jp == jb.zero() || std::abs(v) <= threshold)
                continue;
            const int l = table->lookup(jb.mode2(jp) - mj);
            if (l >= 0)
                rows[j].push_back({jp, l, v});
        }
    }
    return OperatorAssembly::from_rows(layout.map(), layout.N_l(), layout.N_x(), std::move(rows));
}

OperatorFlags product_flags(const OperatorFlags& a, const OperatorFlags& b)
{
    auto as = [](bool x) { return x ? FlagState::asserted : FlagState::unknown; };
    OperatorFlags f;
    f.momentum = as(holds(a.momentum) && holds(b.momentum));
    f.real = as(holds(a.real) && holds(b.real));
    f.reversible = as((holds(a.reversible) && holds(b.reversibility_preserving)) ||
                      (holds(a.reversibility_preserving) && holds(b.reversible)));
    f.reversibility_preserving = as((holds(a.reversibility_preserving) && holds(b.reversibility_preserving)) ||
                                    (holds(a.reversible) && holds(b.reversible)));
    return f;
}

QPOperator compose_sparse(const QPOperator& R, const QPOperator& Q)
{
    const IndexBox& jb = R.jbox();
    const IndexBox& lb = R.lbox();
    const std::size_t width = static_cast<std::size_t>(jb.size());
    std::vector<cplx> acc(static_cast<std::size_t>(lb.size()) * width);
    std::vector<char> touched(acc.size(), 0);
    std::vector<std::size_t> list;
    std::vector<std::vector<QPOperator::Entry>> rows(jb.size());
    for (int j = 0; j < jb.size(); ++j) {
        list.clear();
        for (const auto& a : R.row(j))
            for (const auto& b : Q.row(a.jp)) {
                const int l = lb.sum(a.l, b.l);
                if (l < 0)
                    continue;
                const std::size_t slot = static_cast<std::size_t>(l) * width + b.jp;
                if (!touched[slot]) {
                    touched[slot] = 1;
                    list.push_back(slot);
                }
                acc[slot] += a.v * b.v;
            }
        for (std::size_t slot : list) {
            rows[j].push_back({static_cast<int>(slot % width), static_cast<int>(slot / width), acc[slot]});
            acc[slot] = 0.0;
            touched[slot] = 0;
        }
    }
    return OperatorAssembly::from_rows(R.map(), R.N_l(), R.N_x(), std::move(rows));
}

} // namespace

QPOperator compose(const QPOperator& R, const QPOperator& Q)
{
    if (!R.same_layout(Q))
        throw PreconditionError("compose: operator layouts differ");
    QPOperator out = R;
    if (dense_path(R, Q)) {
        // Dense products keep every nonzero: columns of very different size must not be pruned
        // against a global maximum.
        out = from_dense(to_dense(R) * to_dense(Q), R, 0.0);
    } else {
        out = compose_sparse(R, Q);
        out.prune(kPruneRelative * out.max_abs());
    }
    out.flags() = product_flags(R.flags(), Q.flags());
    return out;
}

QPOperator commutator(const QPOperator& A, const QPOperator& X)
{
    if (!A.same_layout(X))
        throw PreconditionError("commutator: operator layouts differ");
    if (dense_path(A, X)) {
        Eigen::MatrixXcd a = to_dense(A), x = to_dense(X);
        QPOperator out = from_dense(a * x - x * a, A, 0.0);
        OperatorFlags f = product_flags(A.flags(), X.flags());
        OperatorFlags g = product_flags(X.flags(), A.flags());
        out.flags() = {f.momentum, f.real, holds(f.reversible) && holds(g.reversible) ? FlagState::asserted : FlagState::unknown,
                       holds(f.reversibility_preserving) && holds(g.reversibility_preserving) ? FlagState::asserted
                                                                                             : FlagState::unknown};
        return out;
    }
    return compose(A, X) - compose(X, A);
}

QPOperator exp_operator(const QPOperator& X, const ExpOptions& opts)
{
    const double size = decay_norm(X, opts.m, opts.s);
    if (size > opts.delta)
        throw PreconditionError(fmt::format("exp: |X|_({}, {}) = {:.6g} exceeds the smallness threshold {:.6g}", opts.m,
                                            opts.s, size, opts.delta));
    QPOperator sum = QPOperator::identity(X.map(), X.N_l(), X.N_x());
    if (X.nnz() == 0)
        return sum;
    // Powers of a reversibility-preserving generator stay reversibility-preserving; a reversible
    // generator alternates, so its series carries neither flag.
    const auto as = [](bool x) { return x ? FlagState::asserted : FlagState::unknown; };
    const OperatorFlags& g = X.flags();
    const OperatorFlags flags{as(holds(g.momentum)), as(holds(g.real)), FlagState::unknown,
                              as(holds(g.reversibility_preserving))};
    QPOperator term = sum;
    for (int k = 1; k <= opts.max_terms; ++k) {
        term = compose(term, X);
        term *= cplx(1.0 / k);
        sum += term;
        if (term.max_abs() <= opts.rel_tol * sum.max_abs()) {
            sum.flags() = flags;
            return sum;
        }
    }
    throw DivergenceError(fmt::format("exp: series did not settle in {} terms", opts.max_terms));
}

QPOperator pushforward(const QPOperator& Phi, const QPOperator& Phi_inv, const QPOperator& G,
                       std::span<const double> lambda_omega)
{
    QPOperator conj = compose(Phi_inv, compose(G, Phi));
    QPOperator drift = compose(Phi_inv, phi_derivative(Phi, lambda_omega));
    return conj - drift;
}

QPOperator dense_inverse(const QPOperator& R)
{
    if (!dense_path(R, R))
        throw PreconditionError("dense_inverse: needs a momentum-preserving operator over an injective map");
    const Eigen::MatrixXcd M = to_dense(R);
    const int n = R.jbox().size(), zero = R.jbox().zero();
    // The j = 0 row and column are empty; invert on the zero-mean block.
    Eigen::MatrixXcd block(n - 1, n - 1);
    auto pick = [zero](int i) { return i < zero ? i : i + 1; };
    for (int a = 0; a < n - 1; ++a)
        for (int b = 0; b < n - 1; ++b)
            block(a, b) = M(pick(a), pick(b));
    Eigen::PartialPivLU<Eigen::MatrixXcd> lu(block);
    const Eigen::MatrixXcd inv = lu.inverse();
    const double residual = (block * inv - Eigen::MatrixXcd::Identity(n - 1, n - 1)).cwiseAbs().maxCoeff();
    if (!std::isfinite(residual) || residual > 1e-8)
        throw PreconditionError(fmt::format("dense_inverse: operator is numerically singular (residual {:.3g})", residual));
    Eigen::MatrixXcd full = Eigen::MatrixXcd::Zero(n, n);
    for (int a = 0; a < n - 1; ++a)
        for (int b = 0; b < n - 1; ++b)
            full(pick(a), pick(b)) = inv(a, b);
    QPOperator out = from_dense(full, R, 0.0);
    out.flags().momentum = FlagState::asserted;
    return out;
}

QPOperator neumann_inverse(const QPOperator& Phi, const QPOperator& A, const NeumannOptions& opts)
{
    QPOperator residual = QPOperator::identity(Phi.map(), Phi.N_l(), Phi.N_x()) - compose(A, Phi);
    QPOperator sum = A;
    QPOperator term = A;
    double previous = term.max_abs();
    for (int k = 1; k <= opts.max_terms; ++k) {
        term = compose(residual, term);
        const double size = term.max_abs();
        if (size == 0.0)
            break;
        if (previous > 0.0 && size > opts.ratio_guard * previous)
            throw PreconditionError(fmt::format("neumann_inverse: term ratio {:.4g} exceeds the guard {:.4g} at term {}",
                                                size / previous, opts.ratio_guard, k));
        sum += term;
        previous = size;
        if (size <= opts.rel_tol * sum.max_abs())
            break;
        if (k == opts.max_terms)
            throw DivergenceError("neumann_inverse: series did not settle");
    }
    return sum;
}

} // namespace bpl
