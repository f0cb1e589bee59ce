#pragma once

#include <complex>
#include <cstddef>
#include <span>

namespace ttpmf::detail {

using Complex = std::complex<double>;

/// In-place unnormalised DFT along the middle mode of a (left, n, right)
/// array stored first-index fastest. sign is -1 (forward) or +1 (inverse).
void dft_middle(Complex* data, std::size_t left, std::size_t n, std::size_t right, int sign);

/// In-place unnormalised d-dimensional DFT of a first-index-fastest array.
void dft_dense(Complex* data, std::span<const std::size_t> shape, int sign);

}  // namespace ttpmf::detail
