#include "bpl/error.hpp"
#include "bpl/lattice.hpp"

#include <fftw3.h>

#include <algorithm>
#include <map>
#include <mutex>

namespace bpl {

namespace {

std::mutex& planner_mutex()
{
    static std::mutex mu;
    return mu;
}

struct FftwDoubleDeleter {
    void operator()(double* p) const { fftw_free(p); }
};
struct FftwComplexDeleter {
    void operator()(fftw_complex* p) const { fftw_free(p); }
};

} // namespace

struct SpectralGrid::Impl {
    struct Slot {
        std::size_t pos;
        bool conj;
    };

    int rank;
    int G;
    std::size_t npts;
    std::size_t nhalf;
    std::unique_ptr<double, FftwDoubleDeleter> real;
    std::unique_ptr<fftw_complex, FftwComplexDeleter> half;
    fftw_plan fwd = nullptr;
    fftw_plan bwd = nullptr;
    std::map<int, std::vector<Slot>> maps;

    Impl(int r, int g) : rank(r), G(g)
    {
        npts = 1;
        for (int k = 0; k < r; ++k)
            npts *= static_cast<std::size_t>(G);
        nhalf = npts / G * (G / 2 + 1);
        real.reset(fftw_alloc_real(npts));
        half.reset(fftw_alloc_complex(nhalf));
        std::vector<int> dims(r, G);
        std::lock_guard lock(planner_mutex());
        // FFTW_ESTIMATE keeps plans, and therefore rounding, identical across runs.
        fwd = fftw_plan_dft_r2c(r, dims.data(), real.get(), half.get(), FFTW_ESTIMATE);
        bwd = fftw_plan_dft_c2r(r, dims.data(), half.get(), real.get(), FFTW_ESTIMATE);
    }

    ~Impl()
    {
        std::lock_guard lock(planner_mutex());
        if (fwd)
            fftw_destroy_plan(fwd);
        if (bwd)
            fftw_destroy_plan(bwd);
    }

    std::size_t position(std::span<const int> m) const
    {
        std::size_t pos = 0;
        for (int k = 0; k < rank - 1; ++k)
            pos = pos * G + static_cast<std::size_t>(((m[k] % G) + G) % G);
        return pos * (G / 2 + 1) + static_cast<std::size_t>(m[rank - 1]);
    }

    const std::vector<Slot>& slots(const IndexBox& box)
    {
        if (box.rank() != rank)
            throw PreconditionError("SpectralGrid: rank mismatch");
        if (2 * box.N() >= G)
            throw PreconditionError("SpectralGrid: grid too coarse for box");
        auto it = maps.find(box.N());
        if (it != maps.end())
            return it->second;
        std::vector<Slot> s(box.size());
        std::vector<int> neg(rank);
        for (int i = 0; i < box.size(); ++i) {
            auto m = box.at(i);
            if (m[rank - 1] >= 0) {
                s[i] = {position(m), false};
            } else {
                for (int k = 0; k < rank; ++k)
                    neg[k] = -m[k];
                s[i] = {position(neg), true};
            }
        }
        return maps.emplace(box.N(), std::move(s)).first->second;
    }
};

SpectralGrid::SpectralGrid(int rank, int G) : impl_(std::make_unique<Impl>(rank, G)) {}
SpectralGrid::~SpectralGrid() = default;
SpectralGrid::SpectralGrid(SpectralGrid&&) noexcept = default;
SpectralGrid& SpectralGrid::operator=(SpectralGrid&&) noexcept = default;

int SpectralGrid::rank() const { return impl_->rank; }
int SpectralGrid::G() const { return impl_->G; }
std::size_t SpectralGrid::points() const { return impl_->npts; }

void SpectralGrid::to_grid(const IndexBox& box, std::span<const cplx> coeffs, std::span<double> out)
{
    auto& im = *impl_;
    const auto& s = im.slots(box);
    auto* h = reinterpret_cast<cplx*>(im.half.get());
    std::fill(h, h + im.nhalf, cplx{});
    for (int i = 0; i < box.size(); ++i)
        if (!s[i].conj)
            h[s[i].pos] = coeffs[i];
    fftw_execute(im.bwd);
    std::copy(im.real.get(), im.real.get() + im.npts, out.begin());
}

double SpectralGrid::from_grid(std::span<const double> values, const IndexBox& box, std::span<cplx> coeffs)
{
    auto& im = *impl_;
    const auto& s = im.slots(box);
    std::copy(values.begin(), values.end(), im.real.get());
    fftw_execute(im.fwd);
    const auto* h = reinterpret_cast<const cplx*>(im.half.get());
    const double scale = 1.0 / static_cast<double>(im.npts);
    double total = 0.0;
    for (std::size_t i = 0; i < im.npts; ++i)
        total += values[i] * values[i];
    total *= scale;
    double kept = 0.0;
    for (int i = 0; i < box.size(); ++i) {
        cplx c = h[s[i].pos] * scale;
        coeffs[i] = s[i].conj ? std::conj(c) : c;
        kept += std::norm(coeffs[i]);
    }
    return std::max(0.0, total - kept);
}

} // namespace bpl
