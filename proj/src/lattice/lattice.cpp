#include "bpl/lattice.hpp"

#include "bpl/error.hpp"
#include "bpl/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <string>

namespace bpl {

double Mode2::norm() const { return std::sqrt(static_cast<double>(norm2())); }
double Mode2::bracket() const { return std::max(1.0, norm()); }
int Mode2::max_abs() const { return std::max(std::abs(j1), std::abs(j2)); }

// ---------------------------------------------------------------- IndexBox

IndexBox::IndexBox(int rank, int N) : rank_(rank), N_(N), side_(2 * N + 1), size_(1)
{
    if (rank < 1 || N < 0)
        throw PreconditionError("IndexBox: rank must be >= 1 and N >= 0");
    for (int k = 0; k < rank; ++k)
        size_ *= side_;
    digits_.resize(static_cast<std::size_t>(size_) * rank_);
    norm_.resize(size_);
    for (int idx = 0; idx < size_; ++idx) {
        int rem = idx;
        double n2 = 0.0;
        for (int k = rank_ - 1; k >= 0; --k) {
            int d = rem % side_ - N_;
            rem /= side_;
            digits_[static_cast<std::size_t>(idx) * rank_ + k] = d;
            n2 += static_cast<double>(d) * d;
        }
        norm_[idx] = std::sqrt(n2);
    }
}

int IndexBox::index(std::span<const int> m) const
{
    int idx = 0;
    for (int k = 0; k < rank_; ++k) {
        if (m[k] < -N_ || m[k] > N_)
            return -1;
        idx = idx * side_ + (m[k] + N_);
    }
    return idx;
}

int IndexBox::sum(int a, int b) const
{
    const int* da = digits_.data() + static_cast<std::size_t>(a) * rank_;
    const int* db = digits_.data() + static_cast<std::size_t>(b) * rank_;
    for (int k = 0; k < rank_; ++k) {
        int s = da[k] + db[k];
        if (s < -N_ || s > N_)
            return -1;
    }
    return a + b - zero();
}

int IndexBox::index2(Mode2 j) const { return (j.j1 + N_) * side_ + (j.j2 + N_); }

std::shared_ptr<const IndexBox> make_box(int rank, int N)
{
    static std::mutex mu;
    static std::map<std::pair<int, int>, std::shared_ptr<const IndexBox>> cache;
    std::lock_guard lock(mu);
    auto& slot = cache[{rank, N}];
    if (!slot)
        slot = std::make_shared<const IndexBox>(rank, N);
    return slot;
}

// ------------------------------------------------------------ MomentumMap

MomentumMap::MomentumMap(std::vector<Mode2> wave_vectors) : wave_vectors_(std::move(wave_vectors))
{
    if (wave_vectors_.empty())
        throw PreconditionError("MomentumMap: nu must be >= 1");
    span_dim_ = 0;
    for (auto w : wave_vectors_)
        if (!w.is_zero())
            span_dim_ = 1;
    for (std::size_t a = 0; a < wave_vectors_.size() && span_dim_ < 2; ++a)
        for (std::size_t b = a + 1; b < wave_vectors_.size(); ++b)
            if (wave_vectors_[a].j1 * wave_vectors_[b].j2 - wave_vectors_[a].j2 * wave_vectors_[b].j1 != 0) {
                span_dim_ = 2;
                break;
            }
}

MomentumMap MomentumMap::standard2() { return MomentumMap({{1, 0}, {0, 1}}); }

Mode2 MomentumMap::transpose(std::span<const int> l) const
{
    Mode2 r{};
    for (std::size_t k = 0; k < wave_vectors_.size(); ++k) {
        r.j1 += l[k] * wave_vectors_[k].j1;
        r.j2 += l[k] * wave_vectors_[k].j2;
    }
    return r;
}

std::vector<double> MomentumMap::forward(double x1, double x2) const
{
    std::vector<double> out(wave_vectors_.size());
    for (std::size_t k = 0; k < wave_vectors_.size(); ++k)
        out[k] = wave_vectors_[k].j1 * x1 + wave_vectors_[k].j2 * x2;
    return out;
}

// ------------------------------------------------------------------ Field2

Field2::Field2(int N) : box_(make_box(2, N)), c_(static_cast<std::size_t>(box_->size())) {}

void Field2::set(Mode2 j, cplx v)
{
    if (j.is_zero())
        throw PreconditionError("Field2: the j = 0 coefficient is excluded");
    if (!box_->contains2(j))
        throw TruncationOverflow("Field2: mode outside truncation");
    c_[box_->index2(j)] = v;
}

Field2 Field2::mode(int N, Mode2 j, cplx amplitude)
{
    Field2 f(N);
    f.set(j, amplitude);
    return f;
}

Field2 Field2::cosine(int N, Mode2 j, double amplitude)
{
    Field2 f(N);
    f.set(j, amplitude / 2);
    f.set(-j, amplitude / 2);
    return f;
}

Field2 Field2::sine(int N, Mode2 j, double amplitude)
{
    Field2 f(N);
    f.set(j, cplx(0, -amplitude / 2));
    f.set(-j, cplx(0, amplitude / 2));
    return f;
}

Field2& Field2::operator+=(const Field2& o)
{
    if (o.N() != N())
        throw PreconditionError("Field2: truncation mismatch");
    for (std::size_t i = 0; i < c_.size(); ++i)
        c_[i] += o.c_[i];
    return *this;
}

Field2& Field2::operator-=(const Field2& o)
{
    if (o.N() != N())
        throw PreconditionError("Field2: truncation mismatch");
    for (std::size_t i = 0; i < c_.size(); ++i)
        c_[i] -= o.c_[i];
    return *this;
}

Field2& Field2::operator*=(cplx a)
{
    for (auto& v : c_)
        v *= a;
    return *this;
}

bool Field2::is_real(double tol) const
{
    const int n = box_->size();
    for (int i = 0; i < n; ++i)
        if (std::abs(c_[i] - std::conj(c_[box_->neg(i)])) > tol)
            return false;
    return true;
}

void Field2::enforce_real()
{
    const int n = box_->size();
    for (int i = 0; i < n / 2; ++i) {
        cplx a = 0.5 * (c_[i] + std::conj(c_[box_->neg(i)]));
        c_[i] = a;
        c_[box_->neg(i)] = std::conj(a);
    }
    c_[box_->zero()] = 0.0;
}

Field2 Field2::resized(int N) const
{
    Field2 out(N);
    const int n = box_->size();
    for (int i = 0; i < n; ++i) {
        Mode2 j = box_->mode2(i);
        if (out.box().contains2(j))
            out.at(out.box().index2(j)) = c_[i];
    }
    return out;
}

// ----------------------------------------------------------------- QPField

QPField::QPField(int nu, int N_phi, int N_x, bool zero_x_average)
    : lbox_(make_box(nu, N_phi)), jbox_(make_box(2, N_x)),
      c_(static_cast<std::size_t>(lbox_->size()) * jbox_->size()), zero_x_average_(zero_x_average)
{
}

void QPField::set(std::span<const int> l, Mode2 j, cplx v)
{
    int li = lbox_->index(l);
    if (li < 0 || !jbox_->contains2(j))
        throw TruncationOverflow("QPField: index outside truncation");
    if (zero_x_average_ && j.is_zero())
        throw PreconditionError("QPField: j = 0 coefficient on a zero-x-average field");
    at(li, jbox_->index2(j)) = v;
}

cplx QPField::get(std::span<const int> l, Mode2 j) const
{
    int li = lbox_->index(l);
    if (li < 0 || !jbox_->contains2(j))
        return {};
    return get(li, jbox_->index2(j));
}

QPField& QPField::operator+=(const QPField& o)
{
    if (o.lbox() != lbox() || o.jbox() != jbox())
        throw PreconditionError("QPField: truncation mismatch");
    for (std::size_t i = 0; i < c_.size(); ++i)
        c_[i] += o.c_[i];
    zero_x_average_ = zero_x_average_ && o.zero_x_average_;
    return *this;
}

QPField& QPField::operator*=(cplx a)
{
    for (auto& v : c_)
        v *= a;
    return *this;
}

bool QPField::is_real(double tol) const
{
    for (int l = 0; l < lbox_->size(); ++l)
        for (int j = 0; j < jbox_->size(); ++j)
            if (std::abs(get(l, j) - std::conj(get(lbox_->neg(l), jbox_->neg(j)))) > tol)
                return false;
    return true;
}

Field2 QPField::slice(std::span<const double> phi) const
{
    Field2 out(N_x());
    for (int l = 0; l < lbox_->size(); ++l) {
        auto m = lbox_->at(l);
        double arg = 0.0;
        for (int k = 0; k < nu(); ++k)
            arg += m[k] * phi[k];
        cplx e = std::polar(1.0, arg);
        for (int j = 0; j < jbox_->size(); ++j)
            if (j != jbox_->zero())
                out.at(j) += get(l, j) * e;
    }
    return out;
}

// ---------------------------------------------------------- TravelingField

TravelingField::TravelingField(MomentumMap map, int N_phi, int N_x)
    : map_(std::move(map)), lbox_(make_box(map_.nu(), N_phi)), N_x_(N_x), profile_(static_cast<std::size_t>(lbox_->size()))
{
}

cplx TravelingField::get(std::span<const int> l) const
{
    int li = lbox_->index(l);
    return li < 0 ? cplx{} : profile_[li];
}

void TravelingField::set(std::span<const int> l, cplx v)
{
    int li = lbox_->index(l);
    if (li < 0)
        throw TruncationOverflow("TravelingField: l outside truncation");
    if (v != cplx{} && !admissible(li))
        throw TruncationOverflow("TravelingField: lifted spatial mode outside truncation or zero");
    profile_[li] = v;
}

bool TravelingField::admissible(int l) const
{
    Mode2 j = spatial_mode(l);
    return !j.is_zero() && j.max_abs() <= N_x_;
}

TravelingField& TravelingField::operator+=(const TravelingField& o)
{
    if (o.lbox() != lbox() || o.N_x_ != N_x_ || !(o.map_ == map_))
        throw PreconditionError("TravelingField: layout mismatch");
    for (std::size_t i = 0; i < profile_.size(); ++i)
        profile_[i] += o.profile_[i];
    return *this;
}

TravelingField& TravelingField::operator-=(const TravelingField& o)
{
    if (o.lbox() != lbox() || o.N_x_ != N_x_ || !(o.map_ == map_))
        throw PreconditionError("TravelingField: layout mismatch");
    for (std::size_t i = 0; i < profile_.size(); ++i)
        profile_[i] -= o.profile_[i];
    return *this;
}

TravelingField& TravelingField::operator*=(cplx a)
{
    for (auto& v : profile_)
        v *= a;
    return *this;
}

bool TravelingField::is_real(double tol) const
{
    for (int l = 0; l < lbox_->size(); ++l)
        if (std::abs(profile_[l] - std::conj(profile_[lbox_->neg(l)])) > tol)
            return false;
    return true;
}

void TravelingField::enforce_real()
{
    const int n = lbox_->size();
    for (int l = 0; l <= n / 2; ++l) {
        int m = lbox_->neg(l);
        cplx a = 0.5 * (profile_[l] + std::conj(profile_[m]));
        profile_[l] = a;
        profile_[m] = std::conj(a);
    }
}

void TravelingField::project_odd()
{
    const int n = lbox_->size();
    for (int l = 0; l <= n / 2; ++l) {
        int m = lbox_->neg(l);
        // odd and real together force purely imaginary, antisymmetric coefficients
        double a = 0.5 * (profile_[l].imag() - profile_[m].imag());
        profile_[l] = cplx(0.0, a);
        profile_[m] = cplx(0.0, -a);
    }
}

TravelingField TravelingField::resized(int N_phi) const
{
    TravelingField out(map_, N_phi, N_x_);
    for (int l = 0; l < lbox_->size(); ++l) {
        int li = out.lbox().index(lbox_->at(l));
        if (li >= 0)
            out.at(li) = profile_[l];
    }
    return out;
}

Field2 TravelingField::slice(std::span<const double> phi) const
{
    Field2 out(N_x_);
    for (int l = 0; l < lbox_->size(); ++l) {
        if (profile_[l] == cplx{} || !admissible(l))
            continue;
        auto m = lbox_->at(l);
        double arg = 0.0;
        for (int k = 0; k < nu(); ++k)
            arg += m[k] * phi[k];
        out.at(out.box().index2(spatial_mode(l))) += profile_[l] * std::polar(1.0, arg);
    }
    return out;
}

// ------------------------------------------------------------------- norms

namespace {

const std::vector<double>& bracket_weights(const IndexBox& box, double s)
{
    thread_local std::map<std::tuple<int, int, double>, std::vector<double>> cache;
    auto key = std::make_tuple(box.rank(), box.N(), s);
    auto it = cache.find(key);
    if (it != cache.end())
        return it->second;
    std::vector<double> w(box.size());
    for (int i = 0; i < box.size(); ++i)
        w[i] = std::pow(std::max(1.0, box.norm(i)), 2.0 * s);
    return cache.emplace(key, std::move(w)).first->second;
}

void check_s(double s)
{
    if (!(s >= 0.0))
        throw PreconditionError("sobolev_norm: s must be >= 0, got " + std::to_string(s));
}

} // namespace

double sobolev_norm(const Field2& f, double s)
{
    check_s(s);
    return std::sqrt(kernels::weighted_sumsq(bracket_weights(f.box(), s), f.data()));
}

double sobolev_norm(const QPField& f, double s)
{
    check_s(s);
    const auto& jb = f.jbox();
    std::vector<double> w(jb.size());
    double acc = 0.0;
    for (int l = 0; l < f.lbox().size(); ++l) {
        double nl = f.lbox().norm(l);
        for (int j = 0; j < jb.size(); ++j)
            w[j] = std::pow(std::max({1.0, nl, jb.norm(j)}), 2.0 * s);
        acc += kernels::weighted_sumsq(w, f.data().subspan(static_cast<std::size_t>(l) * jb.size(), jb.size()));
    }
    return std::sqrt(acc);
}

double sobolev_norm(const TravelingField& f, double s)
{
    check_s(s);
    double acc = 0.0;
    for (int l = 0; l < f.lbox().size(); ++l) {
        double nj = f.spatial_mode(l).norm();
        acc += std::pow(std::max({1.0, f.lbox().norm(l), nj}), 2.0 * s) * std::norm(f.at(l));
    }
    return std::sqrt(acc);
}

std::pair<QPField, QPField> project_mean(const QPField& f)
{
    QPField mean(f.nu(), f.N_phi(), f.N_x(), false);
    QPField rest(f.nu(), f.N_phi(), f.N_x(), true);
    const int j0 = f.jbox().zero();
    for (int l = 0; l < f.lbox().size(); ++l)
        for (int j = 0; j < f.jbox().size(); ++j)
            (j == j0 ? mean : rest).at(l, j) = f.get(l, j);
    return {std::move(mean), std::move(rest)};
}

Field2 involution_S(const Field2& f)
{
    Field2 out(f.N());
    for (int i = 0; i < f.box().size(); ++i)
        out.at(i) = f.at(f.box().neg(i));
    return out;
}

bool parity_check(const QPField& f, Parity kind, double tol)
{
    const double sign = kind == Parity::even ? 1.0 : -1.0;
    for (int l = 0; l < f.lbox().size(); ++l)
        for (int j = 0; j < f.jbox().size(); ++j)
            if (std::abs(f.get(l, j) - sign * f.get(f.lbox().neg(l), f.jbox().neg(j))) > tol)
                return false;
    return true;
}

bool parity_check(const TravelingField& f, Parity kind, double tol)
{
    const double sign = kind == Parity::even ? 1.0 : -1.0;
    for (int l = 0; l < f.lbox().size(); ++l)
        if (std::abs(f.at(l) - sign * f.at(f.lbox().neg(l))) > tol)
            return false;
    return true;
}

Field2 lambda_power(const Field2& f, double s)
{
    Field2 out = f;
    for (int i = 0; i < f.box().size(); ++i)
        out.at(i) *= std::pow(std::max(1.0, f.box().norm(i)), s);
    return out;
}

double l2_inner(const Field2& a, const Field2& b)
{
    double acc = 0.0;
    for (int i = 0; i < a.box().size(); ++i)
        acc += (a.at(i) * std::conj(b[a.box().mode2(i)])).real();
    return acc;
}

// --------------------------------------------------------- momentum lattice

TravelingField restrict_traveling(const QPField& f, const MomentumMap& map)
{
    if (map.nu() != f.nu())
        throw PreconditionError("restrict_traveling: nu mismatch");
    TravelingField out(map, f.N_phi(), f.N_x());
    for (int l = 0; l < f.lbox().size(); ++l) {
        Mode2 j = out.spatial_mode(l);
        if (f.jbox().contains2(j))
            out.at(l) = f.get(l, f.jbox().index2(j));
    }
    return out;
}

QPField momentum_lift(const TravelingField& v)
{
    bool has_mean = false;
    for (int l = 0; l < v.lbox().size(); ++l) {
        if (v.at(l) == cplx{})
            continue;
        Mode2 j = v.spatial_mode(l);
        if (j.max_abs() > v.N_x())
            throw TruncationOverflow("momentum_lift: |pi^T(l)|_inf exceeds N_x");
        has_mean = has_mean || j.is_zero();
    }
    QPField out(v.nu(), v.N_phi(), v.N_x(), !has_mean);
    for (int l = 0; l < v.lbox().size(); ++l)
        if (v.at(l) != cplx{})
            out.at(l, out.jbox().index2(v.spatial_mode(l))) = v.at(l);
    return out;
}

bool on_momentum_lattice(const QPField& f, const MomentumMap& map, double tol)
{
    for (int l = 0; l < f.lbox().size(); ++l) {
        Mode2 jl = -map.transpose(f.lbox().at(l));
        for (int j = 0; j < f.jbox().size(); ++j)
            if (std::abs(f.get(l, j)) > tol && f.jbox().mode2(j) != jl)
                return false;
    }
    return true;
}

// -------------------------------------------------------------- evaluation

double evaluate(const Field2& f, double x1, double x2)
{
    double acc = 0.0;
    for (int i = 0; i < f.box().size(); ++i) {
        if (f.at(i) == cplx{})
            continue;
        Mode2 j = f.box().mode2(i);
        acc += (f.at(i) * std::polar(1.0, j.j1 * x1 + j.j2 * x2)).real();
    }
    return acc;
}

double evaluate(const QPField& f, std::span<const double> phi, double x1, double x2)
{
    double acc = 0.0;
    for (int l = 0; l < f.lbox().size(); ++l) {
        auto m = f.lbox().at(l);
        double al = 0.0;
        for (int k = 0; k < f.nu(); ++k)
            al += m[k] * phi[k];
        for (int j = 0; j < f.jbox().size(); ++j) {
            cplx c = f.get(l, j);
            if (c == cplx{})
                continue;
            Mode2 jj = f.jbox().mode2(j);
            acc += (c * std::polar(1.0, al + jj.j1 * x1 + jj.j2 * x2)).real();
        }
    }
    return acc;
}

double evaluate(const TravelingField& f, std::span<const double> phi, double x1, double x2)
{
    auto px = f.map().forward(x1, x2);
    double acc = 0.0;
    for (int l = 0; l < f.lbox().size(); ++l) {
        if (f.at(l) == cplx{})
            continue;
        auto m = f.lbox().at(l);
        double arg = 0.0;
        for (int k = 0; k < f.nu(); ++k)
            arg += m[k] * (phi[k] - px[k]);
        acc += (f.at(l) * std::polar(1.0, arg)).real();
    }
    return acc;
}

int fft_friendly_size(int at_least)
{
    for (int n = std::max(2, at_least);; ++n) {
        if (n % 2)
            continue;
        int r = n;
        for (int p : {2, 3, 5})
            while (r % p == 0)
                r /= p;
        if (r == 1)
            return n;
    }
}

int dealiased_grid_size(int N) { return fft_friendly_size(3 * N + 1); }

} // namespace bpl
