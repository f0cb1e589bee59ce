#include "fft.hpp"

#include <mutex>
#include <stdexcept>
#include <vector>

#include <fftw3.h>

namespace ttpmf::detail {

namespace {

// Plan creation and destruction are not thread-safe in FFTW.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

// FFTW_ESTIMATE keeps plans, and therefore results, reproducible run to run.
void execute(fftw_plan plan) {
    if (plan == nullptr) throw std::runtime_error("FFTW plan creation failed");
    fftw_execute(plan);
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan);
}

}  // namespace

void dft_middle(Complex* data, std::size_t left, std::size_t n, std::size_t right, int sign) {
    auto* buf = reinterpret_cast<fftw_complex*>(data);
    fftw_iodim dim{static_cast<int>(n), static_cast<int>(left), static_cast<int>(left)};
    fftw_iodim loops[2] = {{static_cast<int>(left), 1, 1},
                           {static_cast<int>(right), static_cast<int>(left * n), static_cast<int>(left * n)}};
    fftw_plan plan = nullptr;
    {
        std::lock_guard lock(planner_mutex());
        plan = fftw_plan_guru_dft(1, &dim, 2, loops, buf, buf, sign < 0 ? FFTW_FORWARD : FFTW_BACKWARD,
                                  FFTW_ESTIMATE);
    }
    execute(plan);
}

void dft_dense(Complex* data, std::span<const std::size_t> shape, int sign) {
    auto* buf = reinterpret_cast<fftw_complex*>(data);
    // FFTW expects the slowest dimension first
    std::vector<int> n(shape.rbegin(), shape.rend());
    fftw_plan plan = nullptr;
    {
        std::lock_guard lock(planner_mutex());
        plan = fftw_plan_dft(static_cast<int>(n.size()), n.data(), buf, buf,
                             sign < 0 ? FFTW_FORWARD : FFTW_BACKWARD, FFTW_ESTIMATE);
    }
    execute(plan);
}

}  // namespace ttpmf::detail
