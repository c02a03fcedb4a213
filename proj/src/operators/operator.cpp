#include "bpl/operators.hpp"
#include "bpl/error.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <fmt/ostream.h>
#include <ostream>

namespace bpl {

int operator_phase_truncation(const MomentumMap& map, int N_phi, int N_x)
{
    const auto& w = map.wave_vectors();
    if (!map.injective())
        return 2 * N_phi;
    if (map.nu() == 1) {
        int scale = std::max(std::abs(w[0].j1), std::abs(w[0].j2));
        return std::max(1, 2 * N_x / scale);
    }
    // nu = 2: solve pi^T l = k for every k in the doubled spatial box
    const long det = static_cast<long>(w[0].j1) * w[1].j2 - static_cast<long>(w[1].j1) * w[0].j2;
    int best = 1;
    for (int k1 = -2 * N_x; k1 <= 2 * N_x; ++k1)
        for (int k2 = -2 * N_x; k2 <= 2 * N_x; ++k2) {
            // l1 w0 + l2 w1 = k
            long n1 = static_cast<long>(k1) * w[1].j2 - static_cast<long>(k2) * w[1].j1;
            long n2 = static_cast<long>(w[0].j1) * k2 - static_cast<long>(w[0].j2) * k1;
            if (n1 % det != 0 || n2 % det != 0)
                continue;
            best = std::max<int>(best, static_cast<int>(std::max(std::labs(n1 / det), std::labs(n2 / det))));
        }
    return best;
}

// ------------------------------------------------------------- storage

QPOperator::QPOperator(MomentumMap map, int N_l, int N_x)
    : map_(std::move(map)), lbox_(make_box(map_.nu(), N_l)), jbox_(make_box(2, N_x)), row_ptr_(jbox_->size() + 1, 0)
{
}

bool QPOperator::same_layout(const QPOperator& o) const
{
    return map_ == o.map_ && N_l() == o.N_l() && N_x() == o.N_x();
}

QPOperator OperatorAssembly::from_rows(MomentumMap map, int N_l, int N_x, std::vector<std::vector<QPOperator::Entry>> rows)
{
    QPOperator R(std::move(map), N_l, N_x);
    const int zero = R.jbox().zero();
    if (static_cast<int>(rows.size()) != R.jbox().size())
        throw PreconditionError("QPOperator: row count does not match the spatial box");
    std::size_t total = 0;
    for (auto& r : rows)
        total += r.size();
    R.entries_.reserve(total);
    for (int j = 0; j < R.jbox().size(); ++j) {
        auto& r = rows[j];
        if (!r.empty() && j == zero)
            throw PreconditionError("QPOperator: entries with j = 0 are not allowed");
        std::sort(r.begin(), r.end(), [](const auto& a, const auto& b) { return a.jp != b.jp ? a.jp < b.jp : a.l < b.l; });
        for (std::size_t k = 0; k < r.size();) {
            QPOperator::Entry e = r[k];
            if (e.jp == zero)
                throw PreconditionError("QPOperator: entries with j' = 0 are not allowed");
            std::size_t n = k + 1;
            while (n < r.size() && r[n].jp == e.jp && r[n].l == e.l)
                e.v += r[n++].v;
            if (e.v != cplx{})
                R.entries_.push_back(e);
            k = n;
        }
        R.row_ptr_[j + 1] = static_cast<int>(R.entries_.size());
    }
    return R;
}

QPOperator QPOperator::from_triplets(MomentumMap map, int N_l, int N_x, std::vector<Triplet> triplets)
{
    auto jbox = make_box(2, N_x);
    std::vector<std::vector<Entry>> rows(jbox->size());
    for (const auto& t : triplets) {
        if (t.j < 0 || t.j >= jbox->size())
            throw PreconditionError("QPOperator: row index outside the spatial box");
        rows[t.j].push_back({t.jp, t.l, t.v});
    }
    return OperatorAssembly::from_rows(std::move(map), N_l, N_x, std::move(rows));
}

QPOperator QPOperator::identity(MomentumMap map, int N_l, int N_x)
{
    auto jbox = make_box(2, N_x);
    auto lbox = make_box(map.nu(), N_l);
    std::vector<std::vector<Entry>> rows(jbox->size());
    for (int j = 0; j < jbox->size(); ++j)
        if (j != jbox->zero())
            rows[j].push_back({j, lbox->zero(), 1.0});
    QPOperator I = OperatorAssembly::from_rows(std::move(map), N_l, N_x, std::move(rows));
    I.flags_ = {FlagState::asserted, FlagState::asserted, FlagState::unknown, FlagState::asserted};
    return I;
}

QPOperator resized(const QPOperator& R, int N_l, int N_x)
{
    auto jbox = make_box(2, N_x);
    auto lbox = make_box(R.map().nu(), N_l);
    std::vector<std::vector<QPOperator::Entry>> rows(jbox->size());
    for (int j = 0; j < R.jbox().size(); ++j) {
        const Mode2 mj = R.jbox().mode2(j);
        if (!jbox->contains2(mj))
            continue;
        const int jn = jbox->index2(mj);
        for (const auto& e : R.row(j)) {
            const Mode2 mjp = R.jbox().mode2(e.jp);
            const int l = lbox->index(R.lbox().at(e.l));
            if (l >= 0 && jbox->contains2(mjp))
                rows[jn].push_back({jbox->index2(mjp), l, e.v});
        }
    }
    QPOperator out = OperatorAssembly::from_rows(R.map(), N_l, N_x, std::move(rows));
    out.flags() = R.flags();
    return out;
}

cplx QPOperator::get(int l, int j, int jp) const
{
    auto r = row(j);
    auto it = std::lower_bound(r.begin(), r.end(), std::pair{jp, l},
                               [](const Entry& e, std::pair<int, int> key) { return e.jp != key.first ? e.jp < key.first : e.l < key.second; });
    if (it != r.end() && it->jp == jp && it->l == l)
        return it->v;
    return {};
}

double QPOperator::max_abs() const
{
    double m = 0.0;
    for (const auto& e : entries_)
        m = std::max(m, std::abs(e.v));
    return m;
}

namespace {

FlagState both(FlagState a, FlagState b) { return holds(a) && holds(b) ? FlagState::asserted : FlagState::unknown; }

OperatorFlags meet(const OperatorFlags& a, const OperatorFlags& b)
{
    return {both(a.momentum, b.momentum), both(a.real, b.real), both(a.reversible, b.reversible),
            both(a.reversibility_preserving, b.reversibility_preserving)};
}

} // namespace

QPOperator& QPOperator::operator+=(const QPOperator& o)
{
    if (!same_layout(o))
        throw PreconditionError("QPOperator: layout mismatch in sum");
    std::vector<Entry> merged;
    merged.reserve(entries_.size() + o.entries_.size());
    std::vector<int> ptr(row_ptr_.size(), 0);
    auto less = [](const Entry& a, const Entry& b) { return a.jp != b.jp ? a.jp < b.jp : a.l < b.l; };
    for (int j = 0; j < jbox_->size(); ++j) {
        auto a = row(j);
        auto b = o.row(j);
        std::size_t p = 0, q = 0;
        while (p < a.size() || q < b.size()) {
            if (q == b.size() || (p < a.size() && less(a[p], b[q])))
                merged.push_back(a[p++]);
            else if (p == a.size() || less(b[q], a[p]))
                merged.push_back(b[q++]);
            else {
                Entry e = a[p++];
                e.v += b[q++].v;
                if (e.v != cplx{})
                    merged.push_back(e);
            }
        }
        ptr[j + 1] = static_cast<int>(merged.size());
    }
    entries_ = std::move(merged);
    row_ptr_ = std::move(ptr);
    flags_ = meet(flags_, o.flags_);
    return *this;
}

QPOperator& QPOperator::operator-=(const QPOperator& o) { return *this += cplx(-1.0) * o; }

QPOperator& QPOperator::operator*=(cplx a)
{
    if (a == cplx{}) {
        entries_.clear();
        std::fill(row_ptr_.begin(), row_ptr_.end(), 0);
        return *this;
    }
    for (auto& e : entries_)
        e.v *= a;
    if (a.imag() != 0.0)
        flags_.real = FlagState::unknown;
    return *this;
}

void QPOperator::prune(double threshold)
{
    std::vector<Entry> kept;
    kept.reserve(entries_.size());
    std::vector<int> ptr(row_ptr_.size(), 0);
    for (int j = 0; j < jbox_->size(); ++j) {
        for (const Entry& e : row(j))
            if (std::abs(e.v) > threshold)
                kept.push_back(e);
        ptr[j + 1] = static_cast<int>(kept.size());
    }
    entries_ = std::move(kept);
    row_ptr_ = std::move(ptr);
}

// ------------------------------------------------------------- diagonal

DiagonalOperator::DiagonalOperator(int N_x) : box_(make_box(2, N_x)), mu_(box_->size()) {}

DiagonalOperator& DiagonalOperator::operator+=(const DiagonalOperator& o)
{
    if (o.N_x() != N_x())
        throw PreconditionError("DiagonalOperator: truncation mismatch");
    for (std::size_t i = 0; i < mu_.size(); ++i)
        mu_[i] += o.mu_[i];
    return *this;
}

QPOperator DiagonalOperator::to_operator(const MomentumMap& map, int N_l) const
{
    auto lbox = make_box(map.nu(), N_l);
    std::vector<std::vector<QPOperator::Entry>> rows(box_->size());
    for (int j = 0; j < box_->size(); ++j)
        if (j != box_->zero() && mu_[j] != cplx{})
            rows[j].push_back({j, lbox->zero(), mu_[j]});
    QPOperator R = OperatorAssembly::from_rows(map, N_l, N_x(), std::move(rows));
    verify_flags(R, 0.0);
    R.flags().momentum = FlagState::asserted;
    return R;
}

DiagonalOperator DiagonalOperator::dispersion(int N_x, double beta)
{
    DiagonalOperator d(N_x);
    for (int j = 0; j < d.box().size(); ++j) {
        Mode2 m = d.box().mode2(j);
        if (!m.is_zero())
            d.at(j) = cplx(0.0, beta * static_cast<double>(m.j1) / m.norm2());
    }
    return d;
}

DiagonalExtraction diagonal_part(const QPOperator& R)
{
    DiagonalExtraction out{DiagonalOperator(R.N_x()), 0.0};
    const int l0 = R.lbox().zero();
    for (int j = 0; j < R.jbox().size(); ++j)
        for (const auto& e : R.row(j)) {
            if (e.l != l0)
                continue;
            if (e.jp == j)
                out.diagonal.at(j) = e.v;
            else
                out.off_diagonal_at_zero = std::max(out.off_diagonal_at_zero, std::abs(e.v));
        }
    return out;
}

// --------------------------------------------------------------- norms

double decay_norm(const QPOperator& R, double m, double s)
{
    const IndexBox& jb = R.jbox();
    const IndexBox& lb = R.lbox();
    std::vector<double> col(jb.size(), 0.0);
    for (int j = 0; j < jb.size(); ++j) {
        const Mode2 mj = jb.mode2(j);
        for (const auto& e : R.row(j)) {
            const double d = (mj - jb.mode2(e.jp)).norm();
            const double w = std::max({1.0, lb.norm(e.l), d});
            const double a2 = std::norm(e.v);
            col[e.jp] += s == 0.0 ? a2 : std::pow(w, 2.0 * s) * a2;
        }
    }
    double best = 0.0;
    for (int jp = 0; jp < jb.size(); ++jp) {
        if (col[jp] == 0.0)
            continue;
        const double bracket = jb.mode2(jp).bracket();
        best = std::max(best, std::sqrt(col[jp]) * std::pow(bracket, -m));
    }
    return best;
}

// ------------------------------------------------------------ symmetry

namespace {

template <class Rel> bool check_pairs(const QPOperator& R, double tol, Rel rel)
{
    const IndexBox& jb = R.jbox();
    const IndexBox& lb = R.lbox();
    for (int j = 0; j < jb.size(); ++j)
        for (const auto& e : R.row(j)) {
            cplx partner = R.get(lb.neg(e.l), jb.neg(j), jb.neg(e.jp));
            if (std::abs(rel(e.v, partner)) > tol)
                return false;
        }
    return true;
}

void set_flag(FlagState& f, bool ok) { f = ok ? FlagState::checked : FlagState::unknown; }

} // namespace

bool check_momentum(const QPOperator& R, double tol)
{
    const IndexBox& jb = R.jbox();
    for (int j = 0; j < jb.size(); ++j)
        for (const auto& e : R.row(j)) {
            Mode2 p = R.map().transpose(R.lbox().at(e.l));
            if (!(p + jb.mode2(j) - jb.mode2(e.jp)).is_zero() && std::abs(e.v) > tol)
                return false;
        }
    return true;
}

bool check_real(const QPOperator& R, double tol)
{
    return check_pairs(R, tol, [](cplx a, cplx b) { return a - std::conj(b); });
}

bool check_reversible(const QPOperator& R, double tol)
{
    return check_pairs(R, tol, [](cplx a, cplx b) { return a + b; });
}

bool check_reversibility_preserving(const QPOperator& R, double tol)
{
    return check_pairs(R, tol, [](cplx a, cplx b) { return a - b; });
}

OperatorFlags verify_flags(QPOperator& R, double rel_tol, double floor)
{
    const double tol = rel_tol * std::max(R.max_abs(), floor);
    auto& f = R.flags();
    set_flag(f.momentum, check_momentum(R, tol));
    set_flag(f.real, check_real(R, tol));
    set_flag(f.reversible, check_reversible(R, tol));
    set_flag(f.reversibility_preserving, check_reversibility_preserving(R, tol));
    return f;
}

// --------------------------------------------------------- phase action

Field2 apply(const QPOperator& R, std::span<const double> phi, const Field2& v)
{
    if (v.N() != R.N_x())
        throw PreconditionError("apply: field truncation does not match the operator");
    const IndexBox& lb = R.lbox();
    std::vector<cplx> phase(lb.size());
    for (int l = 0; l < lb.size(); ++l) {
        auto m = lb.at(l);
        double arg = 0.0;
        for (int k = 0; k < lb.rank(); ++k)
            arg += m[k] * phi[k];
        phase[l] = std::polar(1.0, arg);
    }
    Field2 out(v.N());
    for (int j = 0; j < R.jbox().size(); ++j) {
        cplx acc{};
        for (const auto& e : R.row(j))
            acc += e.v * phase[e.l] * v.at(e.jp);
        out.at(j) = acc;
    }
    return out;
}

TravelingField apply(const QPOperator& R, const TravelingField& h, double* dropped_sq)
{
    if (!(h.map() == R.map()) || h.N_x() != R.N_x())
        throw PreconditionError("apply: traveling field layout does not match the operator");
    const IndexBox& lb = R.lbox();
    const IndexBox& jb = R.jbox();
    const IndexBox& hb = h.lbox();
    const int nu = lb.rank();
    std::vector<std::vector<int>> by_mode(jb.size());
    for (int l = 0; l < hb.size(); ++l)
        if (h.at(l) != cplx{} && h.admissible(l))
            by_mode[jb.index2(h.spatial_mode(l))].push_back(l);
    TravelingField out(h.map(), h.N_phi(), h.N_x());
    std::vector<int> digits(nu);
    double dropped = 0.0;
    for (int j = 0; j < jb.size(); ++j)
        for (const auto& e : R.row(j))
            for (int lh : by_mode[e.jp]) {
                auto a = lb.at(e.l);
                auto b = hb.at(lh);
                for (int k = 0; k < nu; ++k)
                    digits[k] = a[k] + b[k];
                if (!(R.map().transpose(digits) + jb.mode2(j)).is_zero())
                    throw PreconditionError("apply: operator is not momentum preserving");
                const cplx v = e.v * h.at(lh);
                const int idx = hb.index(digits);
                if (idx >= 0)
                    out.at(idx) += v;
                else
                    dropped += std::norm(v);
            }
    if (dropped_sq)
        *dropped_sq += dropped;
    return out;
}

QPOperator phi_derivative(const QPOperator& R, std::span<const double> lambda_omega)
{
    const IndexBox& lb = R.lbox();
    if (static_cast<int>(lambda_omega.size()) != lb.rank())
        throw PreconditionError("phi_derivative: frequency vector has the wrong length");
    std::vector<double> freq(lb.size());
    for (int l = 0; l < lb.size(); ++l) {
        auto m = lb.at(l);
        for (int k = 0; k < lb.rank(); ++k)
            freq[l] += lambda_omega[k] * m[k];
    }
    QPOperator D = R;
    for (int j = 0; j < D.jbox().size(); ++j)
        for (auto& e : D.row_mut(j))
            e.v *= cplx(0.0, freq[e.l]);
    D.prune(0.0);
    auto& f = D.flags();
    std::swap(f.reversible, f.reversibility_preserving);
    if (holds(f.reversible))
        f.reversible = FlagState::asserted;
    if (holds(f.reversibility_preserving))
        f.reversibility_preserving = FlagState::asserted;
    return D;
}

std::pair<QPOperator, QPOperator> project_N(const QPOperator& R, double N)
{
    if (!(N > 0.0))
        throw PreconditionError("project_N: N must be positive");
    const IndexBox& jb = R.jbox();
    const IndexBox& lb = R.lbox();
    auto inside = [&](int l, int j, int jp) { return lb.norm(l) <= N && (jb.mode2(j) - jb.mode2(jp)).norm() <= N; };
    return {R.filtered(inside), R.filtered([&](int l, int j, int jp) { return !inside(l, j, jp); })};
}

// ------------------------------------------------------------------ dump

void dump(const QPOperator& R, std::ostream& os)
{
    struct Rec {
        std::vector<int> key;
        cplx v;
    };
    std::vector<Rec> recs;
    recs.reserve(R.nnz());
    for (int j = 0; j < R.jbox().size(); ++j)
        for (const auto& e : R.row(j)) {
            auto l = R.lbox().at(e.l);
            Rec r{{l.begin(), l.end()}, e.v};
            Mode2 a = R.jbox().mode2(j), b = R.jbox().mode2(e.jp);
            r.key.insert(r.key.end(), {a.j1, a.j2, b.j1, b.j2});
            recs.push_back(std::move(r));
        }
    std::sort(recs.begin(), recs.end(), [](const Rec& a, const Rec& b) { return a.key < b.key; });
    for (int k = 0; k < R.map().nu(); ++k)
        os << "l" << k + 1 << ",";
    os << "j1,j2,jp1,jp2,re,im\n";
    for (const auto& r : recs)
        fmt::print(os, "{},{:.17g},{:.17g}\n", fmt::join(r.key, ","), r.v.real(), r.v.imag());
}

} // namespace bpl
