#pragma once

#include <cstddef>
#include <span>

#include <Eigen/Core>

#include "ttpmf/cross.hpp"
#include "ttpmf/grid.hpp"
#include "ttpmf/tensor_train.hpp"

namespace ttpmf {

/// P'(i_1..i_d) = sum over i_{d+1}..i_{2d} of T(i_1..i_{2d}) P(i_{d+1}..i_{2d}).
///
/// Backward recursion: Z starts as the 1x1 identity, each pair (T_{j+d}, P_j)
/// for j = d..1 is contracted over its shared mode into Z, and the result
/// keeps T_1..T_{d-1} with T_d absorbing Z.
TensorTrain tt_einsum_tpm(const TensorTrain& T, const TensorTrain& P);

/// Circular convolution out(x) = sum_y kernel(x - y mod N) P(y), computed
/// core-wise through FFTs along every mode, then rounded. The kernel's zero
/// displacement sits at index 0 of each mode. All mode sizes must be odd.
TensorTrain tt_fft_convolve(const TensorTrain& kernel, const TensorTrain& P, double round_tol,
                            std::size_t max_rank = kUnboundedRank);

/// Dense counterpart of tt_fft_convolve (same indexing convention).
DenseTensor fft_convolve_dense(const DenseTensor& kernel, const DenseTensor& P);

/// Row k holds the linear interpolation weights of new_axis[k] on old_axis;
/// points outside the old axis get a zero row.
Eigen::MatrixXd linear_interpolation_matrix(std::span<const double> old_axis, std::span<const double> new_axis);

/// Per-axis linear interpolation of the cores. Ranks are unchanged.
TensorTrain tt_interpolate(const TensorTrain& P, const Grid& old_grid, const Grid& new_grid);

/// Multilinear interpolation of P, whose values sit at the points map * x for
/// x on source_grid, onto new_grid. For a diagonal map with positive entries
/// this is tt_interpolate on the scaled grid; otherwise the target is rebuilt
/// by greedy_cross.
CrossResult tt_interpolate_mapped(const TensorTrain& P, const Grid& source_grid, const Eigen::MatrixXd& map,
                                  const Grid& new_grid, const CrossConfig& cfg);

/// Multilinear interpolation of a TT at a fractional index position u
/// (u_k in [0, N_k - 1]); 0 outside the index box.
double tt_eval_multilinear(const TensorTrain& tt, std::span<const double> u);

}  // namespace ttpmf
