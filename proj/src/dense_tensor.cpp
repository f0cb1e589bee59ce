#include "ttpmf/dense_tensor.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "ttpmf/errors.hpp"

namespace ttpmf {

std::size_t element_count(std::span<const std::size_t> shape) {
    std::size_t n = 1;
    for (auto s : shape) {
        if (s != 0 && n > std::numeric_limits<std::size_t>::max() / s)
            throw GuardError("element count overflows size_t");
        n *= s;
    }
    return n;
}

double element_count_estimate(std::span<const std::size_t> shape) {
    double n = 1.0;
    for (auto s : shape) n *= static_cast<double>(s);
    return n;
}

DenseTensor::DenseTensor(Shape shape, double fill) : shape_(std::move(shape)) {
    for (auto s : shape_)
        if (s == 0) throw ShapeError("DenseTensor: zero mode size");
    values_.assign(element_count(shape_), fill);
}

DenseTensor::DenseTensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
    for (auto s : shape_)
        if (s == 0) throw ShapeError("DenseTensor: zero mode size");
    if (values_.size() != element_count(shape_))
        throw ShapeError("DenseTensor: value count " + std::to_string(values_.size()) +
                         " does not match shape");
}

double DenseTensor::at(std::span<const std::size_t> idx) const {
    if (idx.size() != shape_.size()) throw IndexError("DenseTensor::at: wrong index arity");
    for (std::size_t k = 0; k < idx.size(); ++k)
        if (idx[k] >= shape_[k]) throw IndexError("DenseTensor::at: index out of bounds");
    return (*this)(idx);
}

double DenseTensor::frobenius_norm() const noexcept {
    double s = 0.0;
    for (double v : values_) s += v * v;
    return std::sqrt(s);
}

double DenseTensor::sum() const noexcept {
    return std::accumulate(values_.begin(), values_.end(), 0.0);
}

}  // namespace ttpmf
