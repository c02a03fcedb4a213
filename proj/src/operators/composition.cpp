#include "bpl/error.hpp"
#include "bpl/operators.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fmt/format.h>
#include <limits>
#include <numbers>

namespace bpl {

namespace {

constexpr double kFixedPointTol = 1e-14;
constexpr int kFixedPointIterations = 200;

void check_distortion(double min_jacobian, double guard)
{
    if (!(min_jacobian > guard))
        throw DistortionError(fmt::format("composition_operator: det(I + grad beta) = {:.6g} at a grid point; the change "
                                          "of variables is not a diffeomorphism",
                                          min_jacobian));
}

// Values of exp(i k.beta) split into cosine and sine parts.
void phase_values(std::span<const double> b1, std::span<const double> b2, Mode2 k, std::span<const double> weight,
                  std::vector<double>& re, std::vector<double>& im)
{
    for (std::size_t i = 0; i < b1.size(); ++i) {
        const double arg = k.j1 * b1[i] + k.j2 * b2[i];
        const double w = weight.empty() ? 1.0 : weight[i];
        re[i] = w * std::cos(arg);
        im[i] = w * std::sin(arg);
    }
}

std::vector<cplx> complex_transform(SpectralGrid& grid, const std::vector<double>& re, const std::vector<double>& im,
                                    const IndexBox& box)
{
    std::vector<cplx> a(box.size()), b(box.size());
    grid.from_grid(re, box, a);
    grid.from_grid(im, box, b);
    for (int i = 0; i < box.size(); ++i)
        a[i] += cplx(0.0, 1.0) * b[i];
    return a;
}

// Evaluates a real trigonometric profile at arbitrary phases.
class ProfileEvaluator {
public:
    explicit ProfileEvaluator(const VectorTraveling& p) : nu_(p.c1.nu()), N_(p.c1.N_phi()), phases_(nu_ * (2 * N_ + 1))
    {
        const IndexBox& box = p.c1.lbox();
        for (int l = 0; l < box.size(); ++l)
            if (p.c1.at(l) != cplx{} || p.c2.at(l) != cplx{}) {
                auto m = box.at(l);
                digits_.insert(digits_.end(), m.begin(), m.end());
                c1_.push_back(p.c1.at(l));
                c2_.push_back(p.c2.at(l));
            }
    }

    std::pair<double, double> operator()(std::span<const double> theta)
    {
        const int width = 2 * N_ + 1;
        for (int k = 0; k < nu_; ++k) {
            const cplx step = std::polar(1.0, theta[k]);
            cplx* row = phases_.data() + static_cast<std::size_t>(k) * width;
            row[N_] = 1.0;
            for (int m = 1; m <= N_; ++m) {
                row[N_ + m] = row[N_ + m - 1] * step;
                row[N_ - m] = std::conj(row[N_ + m]);
            }
        }
        double v1 = 0.0, v2 = 0.0;
        for (std::size_t t = 0; t < c1_.size(); ++t) {
            cplx e = 1.0;
            for (int k = 0; k < nu_; ++k)
                e *= phases_[static_cast<std::size_t>(k) * width + N_ + digits_[t * nu_ + k]];
            v1 += (c1_[t] * e).real();
            v2 += (c2_[t] * e).real();
        }
        return {v1, v2};
    }

private:
    int nu_;
    int N_;
    std::vector<cplx> phases_;
    std::vector<int> digits_;
    std::vector<cplx> c1_, c2_;
};

// C(theta) = -P(theta - pi C(theta)) on the grid, so that y -> y + C(phi - pi y) inverts x -> x + P(phi - pi x).
VectorTraveling inverse_profile(const VectorTraveling& beta, SpectralGrid& grid, int N_l)
{
    const MomentumMap& map = beta.c1.map();
    const int nu = map.nu();
    const int G = grid.G();
    const std::size_t n = grid.points();
    ProfileEvaluator P(beta);
    std::vector<double> theta0(n * nu);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t rest = i;
        for (int k = nu - 1; k >= 0; --k) {
            theta0[i * nu + k] = 2.0 * std::numbers::pi * static_cast<double>(rest % G) / G;
            rest /= G;
        }
    }
    std::vector<double> C1(n, 0.0), C2(n, 0.0), theta(nu);
    const auto& w = map.wave_vectors();
    for (int it = 0;; ++it) {
        double change = 0.0, size = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            for (int k = 0; k < nu; ++k)
                theta[k] = theta0[i * nu + k] - (w[k].j1 * C1[i] + w[k].j2 * C2[i]);
            auto [p1, p2] = P(theta);
            change = std::max({change, std::abs(p1 + C1[i]), std::abs(p2 + C2[i])});
            C1[i] = -p1;
            C2[i] = -p2;
            size = std::max({size, std::abs(p1), std::abs(p2)});
        }
        if (change <= kFixedPointTol * (1.0 + size))
            break;
        if (it == kFixedPointIterations)
            throw DivergenceError(fmt::format("composition_operator: inverse displacement did not settle in {} iterations",
                                              kFixedPointIterations));
    }
    VectorTraveling out{TravelingField(map, N_l, beta.c1.N_x()), TravelingField(map, N_l, beta.c1.N_x())};
    grid.from_grid(C1, out.c1.lbox(), out.c1.data());
    grid.from_grid(C2, out.c2.lbox(), out.c2.data());
    return out;
}

QPOperator finish(const MomentumMap& map, int N_l, int N_x, std::vector<std::vector<QPOperator::Entry>> rows)
{
    QPOperator R = OperatorAssembly::from_rows(map, N_l, N_x, std::move(rows));
    R.prune(1e-16 * R.max_abs());
    return R;
}

} // namespace

TravelingComposition composition_operator(const VectorTraveling& beta, int N_l, const CompositionOptions& opts)
{
    const TravelingField& p1 = beta.c1;
    const TravelingField& p2 = beta.c2;
    if (!(p1.map() == p2.map()) || p1.N_phi() != p2.N_phi() || p1.N_x() != p2.N_x())
        throw PreconditionError("composition_operator: displacement components have different layouts");
    const MomentumMap& map = p1.map();
    const int nu = map.nu();
    const int N_x = p1.N_x();
    const int needed = std::max(N_l, p1.N_phi());
    const int G = opts.grid > 0 ? opts.grid : fft_friendly_size(std::max(4 * needed, 32));
    if (2 * needed >= G)
        throw PreconditionError("composition_operator: grid too coarse for the truncation");
    SpectralGrid grid(nu, G);
    const std::size_t n = grid.points();
    const auto& w = map.wave_vectors();

    std::vector<double> b1(n), b2(n);
    grid.to_grid(p1.lbox(), p1.data(), b1);
    grid.to_grid(p2.lbox(), p2.data(), b2);

    // d_{x_m} beta_a = -sum_k (d_{theta_k} P_a) jbar_k,m
    std::array<std::array<std::vector<double>, 2>, 2> grad;
    for (auto& row : grad)
        for (auto& g : row)
            g.assign(n, 0.0);
    std::vector<cplx> coeffs(p1.lbox().size());
    std::vector<double> values(n);
    for (int a = 0; a < 2; ++a) {
        const TravelingField& pa = a == 0 ? p1 : p2;
        for (int k = 0; k < nu; ++k) {
            for (int l = 0; l < pa.lbox().size(); ++l)
                coeffs[l] = pa.at(l) * cplx(0.0, pa.lbox().at(l)[k]);
            grid.to_grid(pa.lbox(), coeffs, values);
            for (std::size_t i = 0; i < n; ++i) {
                grad[a][0][i] -= values[i] * w[k].j1;
                grad[a][1][i] -= values[i] * w[k].j2;
            }
        }
    }
    std::vector<double> jac(n);
    double min_jac = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
        jac[i] = (1.0 + grad[0][0][i]) * (1.0 + grad[1][1][i]) - grad[0][1][i] * grad[1][0][i];
        min_jac = std::min(min_jac, jac[i]);
    }
    check_distortion(min_jac, opts.distortion_guard);

    auto lbox = make_box(nu, N_l);
    auto jbox = make_box(2, N_x);
    std::vector<Mode2> shift(lbox->size());
    for (int l = 0; l < lbox->size(); ++l)
        shift[l] = map.transpose(lbox->at(l));

    std::vector<double> re(n), im(n);
    std::vector<std::vector<QPOperator::Entry>> forward(jbox->size());
    for (int jp = 0; jp < jbox->size(); ++jp) {
        if (jp == jbox->zero())
            continue;
        // e^{i j'.P(theta)}: the l coefficient lands on row j = j' - pi^T l
        phase_values(b1, b2, jbox->mode2(jp), {}, re, im);
        auto F = complex_transform(grid, re, im, *lbox);
        for (int l = 0; l < lbox->size(); ++l) {
            const Mode2 j = jbox->mode2(jp) - shift[l];
            if (F[l] != cplx{} && !j.is_zero() && jbox->contains2(j))
                forward[jbox->index2(j)].push_back({jp, l, F[l]});
        }
    }
    TravelingComposition out;
    out.min_jacobian = min_jac;
    out.ops.B = finish(map, N_l, N_x, std::move(forward));
    out.ops.B.flags().momentum = FlagState::asserted;
    verify_flags(out.ops.B);
    if (map.injective()) {
        out.ops.B_inv = dense_inverse(out.ops.B);
    } else {
        std::vector<std::vector<QPOperator::Entry>> seed(jbox->size());
        for (int j = 0; j < jbox->size(); ++j) {
            if (j == jbox->zero())
                continue;
            // Change of variables y = x + beta: the inverse entry is the mean of e^{i(j' - j).x - i j.beta} det(I + grad beta)
            phase_values(b1, b2, -jbox->mode2(j), jac, re, im);
            auto F = complex_transform(grid, re, im, *lbox);
            for (int l = 0; l < lbox->size(); ++l) {
                const Mode2 jp = jbox->mode2(j) + shift[l];
                if (F[l] != cplx{} && !jp.is_zero() && jbox->contains2(jp))
                    seed[j].push_back({jbox->index2(jp), l, F[l]});
            }
        }
        QPOperator A = finish(map, N_l, N_x, std::move(seed));
        A.flags().momentum = FlagState::asserted;
        verify_flags(A);
        out.ops.B_inv = neumann_inverse(out.ops.B, A);
    }
    verify_flags(out.ops.B_inv);
    out.inverse_profile = inverse_profile(beta, grid, N_l);
    return out;
}

CompositionPair composition_operator(const QPField& beta1, const QPField& beta2, const MomentumMap& map, int N_l,
                                     const CompositionOptions& opts)
{
    if (beta1.nu() != beta2.nu() || beta1.N_phi() != beta2.N_phi() || beta1.N_x() != beta2.N_x())
        throw PreconditionError("composition_operator: displacement components have different layouts");
    const int nu = beta1.nu();
    if (map.nu() != nu)
        throw PreconditionError("composition_operator: momentum map rank differs from the phase dimension");
    const int N_x = beta1.N_x();
    const int rank = nu + 2;
    const int N_in = std::max(beta1.N_phi(), N_x);
    const int N_out = std::max(N_l, 2 * N_x);
    const int G = opts.grid > 0 ? opts.grid : fft_friendly_size(std::max(3 * N_out, 2 * N_in) + 1);
    if (2 * std::max(N_in, N_out) >= G)
        throw PreconditionError("composition_operator: grid too coarse for the truncation");
    SpectralGrid grid(rank, G);
    const std::size_t n = grid.points();
    auto in_box = make_box(rank, N_in);
    auto out_box = make_box(rank, N_out);
    auto lbox = make_box(nu, N_l);
    auto jbox = make_box(2, N_x);

    // Embeds (l, k) coefficients into the joint box, optionally multiplied by i k_m.
    std::vector<int> digits(rank);
    auto embed = [&](const QPField& f, int derivative) {
        std::vector<cplx> c(in_box->size());
        for (int l = 0; l < f.lbox().size(); ++l) {
            auto m = f.lbox().at(l);
            std::copy(m.begin(), m.end(), digits.begin());
            for (int k = 0; k < f.jbox().size(); ++k) {
                const cplx v = f.get(l, k);
                if (v == cplx{})
                    continue;
                const Mode2 mk = f.jbox().mode2(k);
                digits[nu] = mk.j1;
                digits[nu + 1] = mk.j2;
                const double factor = derivative < 0 ? 1.0 : (derivative == 0 ? mk.j1 : mk.j2);
                c[in_box->index(digits)] = derivative < 0 ? v : v * cplx(0.0, factor);
            }
        }
        return c;
    };
    std::vector<double> b1(n), b2(n);
    grid.to_grid(*in_box, embed(beta1, -1), b1);
    grid.to_grid(*in_box, embed(beta2, -1), b2);
    std::array<std::array<std::vector<double>, 2>, 2> grad;
    for (int a = 0; a < 2; ++a)
        for (int m = 0; m < 2; ++m) {
            grad[a][m].resize(n);
            grid.to_grid(*in_box, embed(a == 0 ? beta1 : beta2, m), grad[a][m]);
        }
    std::vector<double> jac(n);
    double min_jac = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
        jac[i] = (1.0 + grad[0][0][i]) * (1.0 + grad[1][1][i]) - grad[0][1][i] * grad[1][0][i];
        min_jac = std::min(min_jac, jac[i]);
    }
    check_distortion(min_jac, opts.distortion_guard);

    // Coefficient of e^{i l.phi + i k.x} in the joint box.
    auto lookup = [&](const std::vector<cplx>& F, int l, Mode2 k) {
        auto m = lbox->at(l);
        std::copy(m.begin(), m.end(), digits.begin());
        digits[nu] = k.j1;
        digits[nu + 1] = k.j2;
        return F[out_box->index(digits)];
    };
    std::vector<double> re(n), im(n);
    std::vector<std::vector<QPOperator::Entry>> forward(jbox->size()), seed(jbox->size());
    for (int jp = 0; jp < jbox->size(); ++jp) {
        if (jp == jbox->zero())
            continue;
        phase_values(b1, b2, jbox->mode2(jp), {}, re, im);
        auto F = complex_transform(grid, re, im, *out_box);
        for (int j = 0; j < jbox->size(); ++j) {
            if (j == jbox->zero())
                continue;
            for (int l = 0; l < lbox->size(); ++l) {
                const cplx v = lookup(F, l, jbox->mode2(j) - jbox->mode2(jp));
                if (v != cplx{})
                    forward[j].push_back({jp, l, v});
            }
        }
    }
    for (int j = 0; j < jbox->size(); ++j) {
        if (j == jbox->zero())
            continue;
        phase_values(b1, b2, -jbox->mode2(j), jac, re, im);
        auto F = complex_transform(grid, re, im, *out_box);
        for (int jp = 0; jp < jbox->size(); ++jp) {
            if (jp == jbox->zero())
                continue;
            for (int l = 0; l < lbox->size(); ++l) {
                const cplx v = lookup(F, l, jbox->mode2(j) - jbox->mode2(jp));
                if (v != cplx{})
                    seed[j].push_back({jp, l, v});
            }
        }
    }

    CompositionPair out;
    out.B = finish(map, N_l, N_x, std::move(forward));
    QPOperator A = finish(map, N_l, N_x, std::move(seed));
    verify_flags(out.B);
    verify_flags(A);
    out.B_inv = neumann_inverse(out.B, A);
    verify_flags(out.B_inv);
    return out;
}

} // namespace bpl
