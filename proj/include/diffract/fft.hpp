#pragma once
// Thin RAII layer over FFTW for forward complex transforms of any size.
// Forward sign convention: X[m] = sum_n x[n] exp(-2 pi i m n / M).

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <mutex>
#include <span>
#include <vector>

#include "diffract/core.hpp"

namespace diffract::fft {

namespace detail {
// FFTW's planner is not thread-safe; execution of distinct plans is.
inline std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

class Plan {
public:
    Plan(int rank, const int* n, fftw_complex* data) {
        std::lock_guard lock(planner_mutex());
        plan_ = fftw_plan_dft(rank, n, data, data, FFTW_FORWARD, FFTW_ESTIMATE);
    }
    Plan(const Plan&) = delete;
    Plan& operator=(const Plan&) = delete;
    ~Plan() {
        std::lock_guard lock(planner_mutex());
        fftw_destroy_plan(plan_);
    }
    void execute() const { fftw_execute(plan_); }

private:
    fftw_plan plan_;
};

inline fftw_complex* as_fftw(std::vector<cplx>& v) { return reinterpret_cast<fftw_complex*>(v.data()); }
}  // namespace detail

/// In-place forward 1D transform.
inline void forward(std::vector<cplx>& data) {
    if (data.empty()) return;
    const int n = static_cast<int>(data.size());
    detail::Plan plan(1, &n, detail::as_fftw(data));
    plan.execute();
}

/// In-place forward 2D transform of a row-major n0 x n1 array.
inline void forward_2d(std::vector<cplx>& data, std::size_t n0, std::size_t n1) {
    if (data.size() != n0 * n1) throw DomainError("fft: 2D shape mismatch");
    if (data.empty()) return;
    const int n[2] = {static_cast<int>(n0), static_cast<int>(n1)};
    detail::Plan plan(2, n, detail::as_fftw(data));
    plan.execute();
}

}  // namespace diffract::fft
