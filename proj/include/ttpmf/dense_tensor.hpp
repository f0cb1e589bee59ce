#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace ttpmf {

using Shape = std::vector<std::size_t>;
using MultiIndex = std::vector<std::size_t>;

/// Product of the mode sizes. Throws GuardError on size_t overflow.
std::size_t element_count(std::span<const std::size_t> shape);

/// Product of the mode sizes as a double; never overflows, used for estimates.
double element_count_estimate(std::span<const std::size_t> shape);

/// Full d-mode array of doubles.
///
/// Values are linearised with the first index running fastest:
/// linear = i_1 + N_1 * (i_2 + N_2 * (i_3 + ...)). Every dense oracle, the
/// FFT routines and all reshapes in the library use this convention.
class DenseTensor {
public:
    DenseTensor() = default;
    explicit DenseTensor(Shape shape, double fill = 0.0);
    DenseTensor(Shape shape, std::vector<double> values);

    [[nodiscard]] const Shape& shape() const noexcept { return shape_; }
    [[nodiscard]] std::size_t dims() const noexcept { return shape_.size(); }
    [[nodiscard]] std::size_t size() const noexcept { return values_.size(); }

    [[nodiscard]] std::span<const double> values() const noexcept { return values_; }
    [[nodiscard]] std::span<double> values() noexcept { return values_; }

    /// Unchecked element access.
    [[nodiscard]] double operator()(std::span<const std::size_t> idx) const {
        return values_[linear_index(idx)];
    }
    [[nodiscard]] double& operator()(std::span<const std::size_t> idx) {
        return values_[linear_index(idx)];
    }

    /// Bounds-checked access; throws IndexError.
    [[nodiscard]] double at(std::span<const std::size_t> idx) const;

    [[nodiscard]] std::size_t linear_index(std::span<const std::size_t> idx) const noexcept {
        std::size_t lin = 0;
        for (std::size_t k = shape_.size(); k-- > 0;) lin = lin * shape_[k] + idx[k];
        return lin;
    }
    void unravel(std::size_t linear, std::span<std::size_t> idx) const noexcept {
        for (std::size_t k = 0; k < shape_.size(); ++k) {
            idx[k] = linear % shape_[k];
            linear /= shape_[k];
        }
    }

    [[nodiscard]] double frobenius_norm() const noexcept;
    [[nodiscard]] double sum() const noexcept;

private:
    Shape shape_;
    std::vector<double> values_;
};

/// Advances idx to the next multi-index in first-index-fastest order.
/// Returns false after the last index (idx is then reset to zeros).
inline bool next_index(std::span<std::size_t> idx, std::span<const std::size_t> shape) noexcept {
    for (std::size_t k = 0; k < shape.size(); ++k) {
        if (++idx[k] < shape[k]) return true;
        idx[k] = 0;
    }
    return false;
}

}  // namespace ttpmf
