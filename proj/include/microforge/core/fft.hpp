#pragma once

#include <complex>
#include <cstddef>
#include <mutex>
#include <stdexcept>

#include <fftw3.h>

#include "microforge/core/volume.hpp"

namespace microforge {

namespace detail {

inline std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

template <class T>
struct FftwBuffer {
    T* ptr = nullptr;
    explicit FftwBuffer(std::size_t n) : ptr(static_cast<T*>(fftw_malloc(sizeof(T) * n))) {
        if (!ptr) throw std::bad_alloc();
    }
    ~FftwBuffer() { fftw_free(ptr); }
    FftwBuffer(const FftwBuffer&) = delete;
    FftwBuffer& operator=(const FftwBuffer&) = delete;
};

}  // namespace detail

/// Real-to-complex 3D DFT over an x-fastest grid, backed by FFTW.
///
/// The half spectrum has (nx/2 + 1) * ny * nz bins, x-fastest, bin (kx, ky, kz)
/// at kx + hx * (ky + ny * kz). inverse() is unnormalised, as in FFTW.
/// Planning is serialised; execution on distinct objects is thread-safe.
class RealFft3 {
public:
    explicit RealFft3(Dims d)
        : dims_(d), half_(d.nx / 2 + 1), real_(static_cast<std::size_t>(d.size())),
          spec_(static_cast<std::size_t>(half_ * d.ny * d.nz)) {
        std::lock_guard lock(detail::fftw_planner_mutex());
        fwd_ = fftw_plan_dft_r2c_3d(static_cast<int>(d.nz), static_cast<int>(d.ny), static_cast<int>(d.nx), real_.ptr,
                                    spec_.ptr, FFTW_ESTIMATE);
        inv_ = fftw_plan_dft_c2r_3d(static_cast<int>(d.nz), static_cast<int>(d.ny), static_cast<int>(d.nx), spec_.ptr,
                                    real_.ptr, FFTW_ESTIMATE);
        if (!fwd_ || !inv_) throw std::runtime_error("FFTW planning failed for " + d.str());
    }
    ~RealFft3() {
        std::lock_guard lock(detail::fftw_planner_mutex());
        fftw_destroy_plan(fwd_);
        fftw_destroy_plan(inv_);
    }
    RealFft3(const RealFft3&) = delete;
    RealFft3& operator=(const RealFft3&) = delete;

    const Dims& dims() const { return dims_; }
    std::int64_t half_nx() const { return half_; }
    std::size_t spectrum_size() const { return static_cast<std::size_t>(half_ * dims_.ny * dims_.nz); }

    double* real() { return real_.ptr; }
    std::complex<double>* spectrum() { return reinterpret_cast<std::complex<double>*>(spec_.ptr); }

    void forward() { fftw_execute(fwd_); }
    /// Overwrites the spectrum buffer.
    void inverse() { fftw_execute(inv_); }

    /// Signed integer frequency of bin k along an axis of length n.
    static std::int64_t frequency(std::int64_t k, std::int64_t n) { return k <= n / 2 ? k : k - n; }

private:
    Dims dims_;
    std::int64_t half_;
    detail::FftwBuffer<double> real_;
    detail::FftwBuffer<fftw_complex> spec_;
    fftw_plan fwd_ = nullptr;
    fftw_plan inv_ = nullptr;
};

}  // namespace microforge
