#pragma once

// Thin FFTW wrapper. Plans are created once per shape with FFTW_ESTIMATE on
// fftw_malloc'd buffers, so the chosen codelets (and the summation order) do
// not change between runs.

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <new>
#include <utility>
#include <vector>

namespace eulerlab {

using cplx = std::complex<double>;

template <class T>
struct FftwAllocator {
    using value_type = T;
    FftwAllocator() = default;
    template <class U>
    FftwAllocator(const FftwAllocator<U>&) noexcept {}
    T* allocate(std::size_t n) {
        void* p = fftw_malloc(n * sizeof(T));
        if (!p) throw std::bad_alloc();
        return static_cast<T*>(p);
    }
    void deallocate(T* p, std::size_t) noexcept { fftw_free(p); }
    template <class U>
    bool operator==(const FftwAllocator<U>&) const noexcept { return true; }
};

using RealVec = std::vector<double, FftwAllocator<double>>;
using CplxVec = std::vector<cplx, FftwAllocator<cplx>>;

namespace detail {

struct PlanPair {
    fftw_plan forward = nullptr;
    fftw_plan backward = nullptr;
    PlanPair() = default;
    PlanPair(const PlanPair&) = delete;
    PlanPair& operator=(const PlanPair&) = delete;
    ~PlanPair() {
        if (forward) fftw_destroy_plan(forward);
        if (backward) fftw_destroy_plan(backward);
    }
};

inline std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

// Key (n0, n1); 1D transforms use n0 = 0.
inline const PlanPair& plans_for(int n0, int n1) {
    static std::map<std::pair<int, int>, std::unique_ptr<PlanPair>> cache;
    std::lock_guard<std::mutex> lock(planner_mutex());
    auto& slot = cache[{n0, n1}];
    if (!slot) {
        slot = std::make_unique<PlanPair>();
        const std::size_t nreal = static_cast<std::size_t>(n0 > 0 ? n0 : 1) * n1;
        const std::size_t ncplx = static_cast<std::size_t>(n0 > 0 ? n0 : 1) * (n1 / 2 + 1);
        RealVec r(nreal);
        CplxVec c(ncplx);
        auto* cp = reinterpret_cast<fftw_complex*>(c.data());
        if (n0 > 0) {
            slot->forward = fftw_plan_dft_r2c_2d(n0, n1, r.data(), cp, FFTW_ESTIMATE);
            slot->backward = fftw_plan_dft_c2r_2d(n0, n1, cp, r.data(), FFTW_ESTIMATE);
        } else {
            slot->forward = fftw_plan_dft_r2c_1d(n1, r.data(), cp, FFTW_ESTIMATE);
            slot->backward = fftw_plan_dft_c2r_1d(n1, cp, r.data(), FFTW_ESTIMATE);
        }
    }
    return *slot;
}

}  // namespace detail

/// Unnormalized real-to-complex transform; `in` is n0*n1 reals, `out` n0*(n1/2+1).
inline void fft_r2c(int n0, int n1, const RealVec& in, CplxVec& out) {
    const auto& p = detail::plans_for(n0, n1);
    RealVec scratch(in);  // FFTW may not preserve inputs for multi-dimensional r2c
    out.resize(static_cast<std::size_t>(n0 > 0 ? n0 : 1) * (n1 / 2 + 1));
    fftw_execute_dft_r2c(p.forward, scratch.data(), reinterpret_cast<fftw_complex*>(out.data()));
}

/// Unnormalized complex-to-real transform (input copied; c2r destroys it).
inline void fft_c2r(int n0, int n1, const CplxVec& in, RealVec& out) {
    const auto& p = detail::plans_for(n0, n1);
    CplxVec scratch(in);
    out.resize(static_cast<std::size_t>(n0 > 0 ? n0 : 1) * n1);
    fftw_execute_dft_c2r(p.backward, reinterpret_cast<fftw_complex*>(scratch.data()), out.data());
}

}  // namespace eulerlab
