#pragma once

#include "bpl/lattice.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace bpl {

enum class FlagState { unknown, asserted, checked };

struct OperatorFlags {
    FlagState momentum = FlagState::unknown;
    FlagState real = FlagState::unknown;
    FlagState reversible = FlagState::unknown;
    FlagState reversibility_preserving = FlagState::unknown;
};

inline bool holds(FlagState s) { return s != FlagState::unknown; }

// Smallest phase truncation holding every l with |pi^T l|_inf <= 2 N_x when pi is injective,
// so that momentum-preserving products never leave the box; 2 N_phi otherwise.
int operator_phase_truncation(const MomentumMap& map, int N_phi, int N_x);

// phi-dependent operator on zero-mean fields: R(phi) = sum_l R(l) e^{i l.phi}, entries R(l)_j^{j'}.
// Rows j are stored compressed; entries within a row are sorted by (j', l).
class QPOperator {
public:
    struct Entry {
        int jp;
        int l;
        cplx v;
    };
    struct Triplet {
        int l;
        int j;
        int jp;
        cplx v;
    };

    QPOperator() : QPOperator(MomentumMap::standard2(), 1, 1) {}
    QPOperator(MomentumMap map, int N_l, int N_x);
    // Duplicates are summed; j = 0 or j' = 0 entries are rejected.
    static QPOperator from_triplets(MomentumMap map, int N_l, int N_x, std::vector<Triplet> triplets);
    static QPOperator identity(MomentumMap map, int N_l, int N_x);

    const MomentumMap& map() const { return map_; }
    int N_l() const { return lbox_->N(); }
    int N_x() const { return jbox_->N(); }
    const IndexBox& lbox() const { return *lbox_; }
    const IndexBox& jbox() const { return *jbox_; }
    bool same_layout(const QPOperator& o) const;

    std::span<const Entry> row(int j) const
    {
        return {entries_.data() + row_ptr_[j], static_cast<std::size_t>(row_ptr_[j + 1] - row_ptr_[j])};
    }
    std::span<Entry> row_mut(int j)
    {
        return {entries_.data() + row_ptr_[j], static_cast<std::size_t>(row_ptr_[j + 1] - row_ptr_[j])};
    }
    std::size_t nnz() const { return entries_.size(); }
    cplx get(int l, int j, int jp) const;
    double max_abs() const;

    OperatorFlags& flags() { return flags_; }
    const OperatorFlags& flags() const { return flags_; }

    QPOperator& operator+=(const QPOperator& o);
    QPOperator& operator-=(const QPOperator& o);
    QPOperator& operator*=(cplx a);
    friend QPOperator operator+(QPOperator a, const QPOperator& b) { return a += b; }
    friend QPOperator operator-(QPOperator a, const QPOperator& b) { return a -= b; }
    friend QPOperator operator*(cplx a, QPOperator b) { return b *= a; }
    friend QPOperator operator*(double a, QPOperator b) { return b *= cplx(a); }

    // Drops entries with |v| <= threshold.
    void prune(double threshold);
    // Keeps entries for which keep(l, j, j') is true.
    template <class Pred> QPOperator filtered(Pred keep) const;

private:
    friend class OperatorAssembly;
    MomentumMap map_;
    std::shared_ptr<const IndexBox> lbox_;
    std::shared_ptr<const IndexBox> jbox_;
    std::vector<int> row_ptr_;
    std::vector<Entry> entries_;
    OperatorFlags flags_;
};

// Builds row-compressed storage from unsorted rows.
class OperatorAssembly {
public:
    static QPOperator from_rows(MomentumMap map, int N_l, int N_x, std::vector<std::vector<QPOperator::Entry>> rows);
};

template <class Pred> QPOperator QPOperator::filtered(Pred keep) const
{
    std::vector<std::vector<Entry>> rows(jbox_->size());
    for (int j = 0; j < jbox_->size(); ++j)
        for (const Entry& e : row(j))
            if (keep(e.l, j, e.jp))
                rows[j].push_back(e);
    QPOperator out = OperatorAssembly::from_rows(map_, N_l(), N_x(), std::move(rows));
    out.flags_ = flags_;
    return out;
}

// Same entries in another layout; entries outside the new boxes are dropped. The flags carry over,
// which holds because the boxes are symmetric.
QPOperator resized(const QPOperator& R, int N_l, int N_x);

// mu(j) on the spatial box; the j = 0 slot is unused.
class DiagonalOperator {
public:
    DiagonalOperator() : DiagonalOperator(1) {}
    explicit DiagonalOperator(int N_x);
    int N_x() const { return box_->N(); }
    const IndexBox& box() const { return *box_; }
    cplx& at(int j) { return mu_[j]; }
    cplx at(int j) const { return mu_[j]; }
    cplx operator[](Mode2 j) const { return mu_[box_->index2(j)]; }
    std::span<const cplx> data() const { return mu_; }
    DiagonalOperator& operator+=(const DiagonalOperator& o);
    // Entries at l = 0 of an operator with the given layout.
    QPOperator to_operator(const MomentumMap& map, int N_l) const;
    // i beta L(j)
    static DiagonalOperator dispersion(int N_x, double beta);

private:
    std::shared_ptr<const IndexBox> box_;
    std::vector<cplx> mu_;
};

struct DiagonalExtraction {
    DiagonalOperator diagonal;
    // Largest |R(0)_j^{j'}| with j != j'; nonzero means R(0) is not diagonal.
    double off_diagonal_at_zero = 0.0;
};
DiagonalExtraction diagonal_part(const QPOperator& R);

// sup_{j'} (sum_{l,j} <l, j - j'>^{2s} |R(l)_j^{j'}|^2)^{1/2} <j'>^{-m}
double decay_norm(const QPOperator& R, double m, double s);

// Entrywise symmetry checks; a satisfied flag is set to checked, a failed one to unknown.
bool check_momentum(const QPOperator& R, double tol = 0.0);
bool check_real(const QPOperator& R, double tol = 0.0);
bool check_reversible(const QPOperator& R, double tol = 0.0);
bool check_reversibility_preserving(const QPOperator& R, double tol = 0.0);
// Tolerance rel_tol * max(|R|_max, floor); floor sets the rounding scale when R is itself rounding-sized.
OperatorFlags verify_flags(QPOperator& R, double rel_tol = 1e-12, double floor = 0.0);

QPOperator compose(const QPOperator& R, const QPOperator& Q);
// [A, X] = A X - X A
QPOperator commutator(const QPOperator& A, const QPOperator& X);

struct ExpOptions {
    double m = 0.0;
    double s = 0.0;
    double delta = 1.0;
    double rel_tol = 1e-15;
    int max_terms = 200;
};
QPOperator exp_operator(const QPOperator& X, const ExpOptions& opts = {});

// (Pi_N R, Pi_N^perp R): keep |l| <= N and |j - j'| <= N
std::pair<QPOperator, QPOperator> project_N(const QPOperator& R, double N);

// (R(phi) v)(j) = sum_{l, j'} R(l)_j^{j'} e^{i l.phi} v(j')
Field2 apply(const QPOperator& R, std::span<const double> phi, const Field2& v);

// (R h)(phi) for a traveling h and momentum-preserving R; the result keeps the layout of h and
// dropped_sq collects the squared mass landing outside its phase box.
TravelingField apply(const QPOperator& R, const TravelingField& h, double* dropped_sq = nullptr);

// lambda omega . d_phi R, entries multiplied by i lambda omega.l
QPOperator phi_derivative(const QPOperator& R, std::span<const double> lambda_omega);

// Phi^{-1} G Phi - Phi^{-1} (lambda omega . d_phi Phi)
QPOperator pushforward(const QPOperator& Phi, const QPOperator& Phi_inv, const QPOperator& G,
                       std::span<const double> lambda_omega);

struct NeumannOptions {
    double ratio_guard = 0.5;
    double rel_tol = 1e-15;
    int max_terms = 200;
};
// Inverse of Phi given an approximate inverse A: sum_k (I - A Phi)^k A.
QPOperator neumann_inverse(const QPOperator& Phi, const QPOperator& A, const NeumannOptions& opts = {});

// Exact inverse on zero-mean fields of a momentum-preserving operator over an injective map, by
// dense LU of its momentum matrix.
QPOperator dense_inverse(const QPOperator& R);

struct CompositionPair {
    QPOperator B;
    QPOperator B_inv;
};

struct CompositionOptions {
    int grid = 0; // 0 picks a size from the truncation
    double distortion_guard = 0.0;
};

// h(x) -> h(x + beta(phi, x)) and its inverse for a traveling displacement with profile
// components (beta_1, beta_2), restricted to zero-mean fields. B_inv is the exact inverse of the
// truncated B: dense LU for an injective map, otherwise a quadrature seed from the change of
// variables y = x + beta refined by a Neumann series.
struct TravelingComposition {
    CompositionPair ops;
    VectorTraveling inverse_profile; // beta-breve: x = y + beta-breve(phi, y) inverts y = x + beta(phi, x)
    double min_jacobian = 0.0;
};
TravelingComposition composition_operator(const VectorTraveling& beta, int N_l, const CompositionOptions& opts = {});

// Generic displacement given as two QPFields, on a joint (phi, x) grid.
CompositionPair composition_operator(const QPField& beta1, const QPField& beta2, const MomentumMap& map, int N_l,
                                     const CompositionOptions& opts = {});

// Record stream (l_1..l_nu, j1, j2, j1', j2', re, im), lexicographic, 17 significant digits.
void dump(const QPOperator& R, std::ostream& os);

} // namespace bpl
