#pragma once

#include <array>
#include <complex>
#include <memory>
#include <span>
#include <utility>
#include <vector>

namespace bpl {

using cplx = std::complex<double>;

struct Mode2 {
    int j1 = 0;
    int j2 = 0;

    constexpr int norm2() const { return j1 * j1 + j2 * j2; }
    double norm() const;
    // <j> = max{1, |j|}
    double bracket() const;
    constexpr bool is_zero() const { return j1 == 0 && j2 == 0; }
    int max_abs() const;

    friend constexpr Mode2 operator+(Mode2 a, Mode2 b) { return {a.j1 + b.j1, a.j2 + b.j2}; }
    friend constexpr Mode2 operator-(Mode2 a, Mode2 b) { return {a.j1 - b.j1, a.j2 - b.j2}; }
    friend constexpr Mode2 operator-(Mode2 a) { return {-a.j1, -a.j2}; }
    friend constexpr bool operator==(Mode2, Mode2) = default;
    friend constexpr auto operator<=>(Mode2, Mode2) = default;
};

// Symmetric integer box {m in Z^rank : |m|_inf <= N}, indexed in mixed radix so that
// index(-m) = size - 1 - index(m).
class IndexBox {
public:
    IndexBox(int rank, int N);

    int rank() const { return rank_; }
    int N() const { return N_; }
    int side() const { return side_; }
    int size() const { return size_; }
    int zero() const { return size_ / 2; }
    int neg(int idx) const { return size_ - 1 - idx; }

    std::span<const int> at(int idx) const { return {digits_.data() + static_cast<std::size_t>(idx) * rank_, static_cast<std::size_t>(rank_)}; }
    // Euclidean norm of the multi-index.
    double norm(int idx) const { return norm_[idx]; }
    // -1 when outside the box.
    int index(std::span<const int> m) const;
    int sum(int a, int b) const;
    int diff(int a, int b) const { return sum(a, neg(b)); }

    // rank-2 helpers
    Mode2 mode2(int idx) const { return {digits_[2 * idx], digits_[2 * idx + 1]}; }
    int index2(Mode2 j) const;
    bool contains2(Mode2 j) const { return j.max_abs() <= N_; }

    friend bool operator==(const IndexBox& a, const IndexBox& b) { return a.rank_ == b.rank_ && a.N_ == b.N_; }

private:
    int rank_;
    int N_;
    int side_;
    int size_;
    std::vector<int> digits_;
    std::vector<double> norm_;
};

// Shared, immutable boxes (boxes carry lookup tables, so they are cached).
std::shared_ptr<const IndexBox> make_box(int rank, int N);

// pi : R^2 -> R^nu, x -> (jbar_k . x)_k and its transpose on Z^nu.
class MomentumMap {
public:
    explicit MomentumMap(std::vector<Mode2> wave_vectors);
    static MomentumMap standard2();

    int nu() const { return static_cast<int>(wave_vectors_.size()); }
    const std::vector<Mode2>& wave_vectors() const { return wave_vectors_; }
    int span_dim() const { return span_dim_; }
    bool injective() const { return span_dim_ == nu(); }

    Mode2 transpose(std::span<const int> l) const;
    std::vector<double> forward(double x1, double x2) const;

    friend bool operator==(const MomentumMap& a, const MomentumMap& b) { return a.wave_vectors_ == b.wave_vectors_; }

private:
    std::vector<Mode2> wave_vectors_;
    int span_dim_;
};

// Zero-mean field on T^2 with coefficients over |j|_inf <= N, j != 0 (the j = 0 slot is held at 0).
class Field2 {
public:
    Field2() : Field2(1) {}
    explicit Field2(int N);

    int N() const { return box_->N(); }
    const IndexBox& box() const { return *box_; }
    std::size_t size() const { return c_.size(); }

    cplx operator[](Mode2 j) const { return box_->contains2(j) ? c_[box_->index2(j)] : cplx{}; }
    cplx& at(int idx) { return c_[idx]; }
    cplx at(int idx) const { return c_[idx]; }
    void set(Mode2 j, cplx v);
    std::span<cplx> data() { return c_; }
    std::span<const cplx> data() const { return c_; }

    static Field2 mode(int N, Mode2 j, cplx amplitude);
    static Field2 cosine(int N, Mode2 j, double amplitude = 1.0);
    static Field2 sine(int N, Mode2 j, double amplitude = 1.0);

    Field2& operator+=(const Field2& o);
    Field2& operator-=(const Field2& o);
    Field2& operator*=(cplx a);
    friend Field2 operator+(Field2 a, const Field2& b) { return a += b; }
    friend Field2 operator-(Field2 a, const Field2& b) { return a -= b; }
    friend Field2 operator*(cplx a, Field2 b) { return b *= a; }
    friend Field2 operator*(double a, Field2 b) { return b *= cplx(a); }

    bool is_real(double tol = 1e-12) const;
    void enforce_real();
    // Coefficients outside |j|_inf <= N are dropped.
    Field2 resized(int N) const;

private:
    std::shared_ptr<const IndexBox> box_;
    std::vector<cplx> c_;
};

enum class Parity { even, odd };

// Field on T^nu x T^2 with coefficients over (l, j), |l|_inf <= N_phi, |j|_inf <= N_x.
class QPField {
public:
    QPField() : QPField(1, 1, 1) {}
    QPField(int nu, int N_phi, int N_x, bool zero_x_average = true);

    int nu() const { return lbox_->rank(); }
    int N_phi() const { return lbox_->N(); }
    int N_x() const { return jbox_->N(); }
    const IndexBox& lbox() const { return *lbox_; }
    const IndexBox& jbox() const { return *jbox_; }
    bool zero_x_average() const { return zero_x_average_; }

    cplx get(int l, int j) const { return c_[static_cast<std::size_t>(l) * jbox_->size() + j]; }
    cplx& at(int l, int j) { return c_[static_cast<std::size_t>(l) * jbox_->size() + j]; }
    void set(std::span<const int> l, Mode2 j, cplx v);
    cplx get(std::span<const int> l, Mode2 j) const;
    std::span<const cplx> data() const { return c_; }
    std::span<cplx> data() { return c_; }

    QPField& operator+=(const QPField& o);
    QPField& operator*=(cplx a);

    bool is_real(double tol = 1e-12) const;
    // Slice at phase phi: sum_l u(l, j) e^{i l.phi}.
    Field2 slice(std::span<const double> phi) const;

private:
    std::shared_ptr<const IndexBox> lbox_;
    std::shared_ptr<const IndexBox> jbox_;
    std::vector<cplx> c_;
    bool zero_x_average_;
};

// Field u(phi, x) = profile(phi - pi(x)); coefficients live on l, with the lifted
// coefficient at (l, -pi^T l).
class TravelingField {
public:
    TravelingField() : TravelingField(MomentumMap::standard2(), 1, 1) {}
    TravelingField(MomentumMap map, int N_phi, int N_x);

    const MomentumMap& map() const { return map_; }
    int nu() const { return map_.nu(); }
    int N_phi() const { return lbox_->N(); }
    int N_x() const { return N_x_; }
    const IndexBox& lbox() const { return *lbox_; }

    cplx& at(int l) { return profile_[l]; }
    cplx at(int l) const { return profile_[l]; }
    cplx get(std::span<const int> l) const;
    void set(std::span<const int> l, cplx v);
    std::span<const cplx> data() const { return profile_; }
    std::span<cplx> data() { return profile_; }
    // Spatial mode carried by profile index l.
    Mode2 spatial_mode(int l) const { return -map_.transpose(lbox_->at(l)); }
    // True when the lifted mode of l lies in the spatial truncation and is nonzero.
    bool admissible(int l) const;

    TravelingField& operator+=(const TravelingField& o);
    TravelingField& operator-=(const TravelingField& o);
    TravelingField& operator*=(cplx a);
    friend TravelingField operator+(TravelingField a, const TravelingField& b) { return a += b; }
    friend TravelingField operator-(TravelingField a, const TravelingField& b) { return a -= b; }
    friend TravelingField operator*(double a, TravelingField b) { return b *= cplx(a); }
    friend TravelingField operator*(cplx a, TravelingField b) { return b *= a; }

    bool is_real(double tol = 1e-12) const;
    void enforce_real();
    void project_odd();
    TravelingField resized(int N_phi) const;
    // Slice at phase phi as a field on T^2: coefficient sum over l with -pi^T l = j.
    Field2 slice(std::span<const double> phi) const;

private:
    MomentumMap map_;
    std::shared_ptr<const IndexBox> lbox_;
    int N_x_;
    std::vector<cplx> profile_;
};

struct VectorTraveling {
    TravelingField c1;
    TravelingField c2;
};

// Norms. <l, j> = max{1, |l|, |j|} with Euclidean |.|.
double sobolev_norm(const Field2& f, double s);
double sobolev_norm(const QPField& f, double s);
double sobolev_norm(const TravelingField& f, double s);

std::pair<QPField, QPField> project_mean(const QPField& f);

Field2 involution_S(const Field2& f);
bool parity_check(const QPField& f, Parity kind, double tol = 0.0);
bool parity_check(const TravelingField& f, Parity kind, double tol = 0.0);
Field2 lambda_power(const Field2& f, double s);
double l2_inner(const Field2& a, const Field2& b);

TravelingField restrict_traveling(const QPField& f, const MomentumMap& map);
QPField momentum_lift(const TravelingField& v);
bool on_momentum_lattice(const QPField& f, const MomentumMap& map, double tol = 0.0);

double evaluate(const Field2& f, double x1, double x2);
double evaluate(const QPField& f, std::span<const double> phi, double x1, double x2);
double evaluate(const TravelingField& f, std::span<const double> phi, double x1, double x2);

// Real FFT on a uniform grid of G^rank points over [0, 2pi)^rank. Coefficients are
// exchanged over a symmetric IndexBox; values u(x) = sum_m c_m e^{i m.x}.
class SpectralGrid {
public:
    SpectralGrid(int rank, int G);
    ~SpectralGrid();
    SpectralGrid(SpectralGrid&&) noexcept;
    SpectralGrid& operator=(SpectralGrid&&) noexcept;
    SpectralGrid(const SpectralGrid&) = delete;
    SpectralGrid& operator=(const SpectralGrid&) = delete;

    int rank() const;
    int G() const;
    std::size_t points() const;

    void to_grid(const IndexBox& box, std::span<const cplx> coeffs, std::span<double> out);
    // Returns the squared l2 mass of grid modes that fall outside the box.
    double from_grid(std::span<const double> values, const IndexBox& box, std::span<cplx> coeffs);

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// Smallest even 5-smooth grid size >= 3N + 1 (2/3-rule dealiasing for quadratic products).
int dealiased_grid_size(int N);
int fft_friendly_size(int at_least);

} // namespace bpl
