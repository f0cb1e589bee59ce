#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <variant>

#include <Eigen/Core>

#include "ttpmf/dense_tensor.hpp"
#include "ttpmf/grid.hpp"
#include "ttpmf/state_space.hpp"
#include "ttpmf/tensor_train.hpp"

namespace ttpmf {

enum class PmdKind { filtering, predictive };

/// Point-mass density: weights on the points of an axis-aligned grid, with
/// density weight * cell_volume per cell.
struct PmdEstimate {
    Grid grid;
    std::variant<DenseTensor, TensorTrain> weights;
    PmdKind kind = PmdKind::predictive;

    [[nodiscard]] bool is_tt() const noexcept { return std::holds_alternative<TensorTrain>(weights); }
    [[nodiscard]] const DenseTensor& dense() const { return std::get<DenseTensor>(weights); }
    [[nodiscard]] const TensorTrain& tt() const { return std::get<TensorTrain>(weights); }
    [[nodiscard]] std::size_t storage_bytes() const;
};

/// Sum of weights times the cell volume.
double pmd_mass(const PmdEstimate& p);

/// Rescales to unit mass. Throws DegenerateDensityError when the mass is not
/// a positive finite number.
PmdEstimate normalize(const PmdEstimate& p);

struct NegativeMass {
    double mass = 0.0;       ///< sum of |w| * cell_volume over negative weights
    bool estimated = false;  ///< true when sampled instead of summed exactly
};

/// Element counts above this are sampled rather than expanded.
inline constexpr std::size_t kExactNegativeMassLimit = std::size_t{1} << 22;

/// Negative mass of a PMD. Dense weights are summed exactly; TT weights are
/// expanded when small enough and estimated from seeded uniform samples
/// otherwise.
NegativeMass negative_mass(const PmdEstimate& p, std::uint64_t seed = 0);

struct MomentResult {
    MomentEstimate moments;
    /// The covariance needed a diagonal jitter to become positive definite.
    bool jitter_applied = false;
};

/// Mean and covariance of a normalised PMD. TT weights use rank-1 coordinate
/// trains centred on the grid centre.
MomentResult moments_from_pmd(const PmdEstimate& p);

/// The 2d-mode tensor of TransitionKernel entries (new indices first).
/// Throws GuardError above max_elements.
DenseTensor build_tpm_dense(const StateSpaceModel& model, const Grid& new_grid, const Grid& old_grid,
                            std::size_t max_elements = kDefaultDenseGuard);

/// P'(j) = sum_i tpm(j, i) P(i) on new_grid, normalised. raw_mass, when
/// given, receives the mass before normalisation.
PmdEstimate time_update_dense(const PmdEstimate& p, const DenseTensor& tpm, const Grid& new_grid,
                              double* raw_mass = nullptr);

/// Kernel over displacements between points of grid, with zero displacement
/// at index 0 of each mode: entry m is the transition density from x to
/// x + m * step, both pushed through the linear dynamics.
DenseTensor middle_row_kernel_dense(const StateSpaceModel& model, const Grid& grid);

/// Evaluator for the same kernel, for cross approximation.
std::function<double(std::span<const std::size_t>)> middle_row_kernel(const StateSpaceModel& model,
                                                                      const Grid& grid);

/// Circular FFT convolution of the kernel with the weights. The result lives
/// on the points F x for x on p.grid and is normalised with p.grid's cell
/// volume.
PmdEstimate time_update_fft_dense(const DenseTensor& kernel_mid, const PmdEstimate& p);

/// Dense measurement update: weights times N(z; h(x), R), normalised.
/// Throws DegenerateDensityError when the normalising constant vanishes.
PmdEstimate measurement_update_dense(const PmdEstimate& p, const StateSpaceModel& model, const Eigen::VectorXd& z);

/// Dense likelihood tensor on a grid.
DenseTensor likelihood_dense(const Grid& grid, const StateSpaceModel& model, const Eigen::VectorXd& z);

/// Separable linear interpolation of dense weights between axis-aligned grids.
DenseTensor interpolate_dense(const DenseTensor& w, const Grid& old_grid, const Grid& new_grid);

/// Multilinear interpolation of dense weights living on map * x (x on
/// source_grid) onto new_grid; zero outside.
DenseTensor interpolate_mapped_dense(const DenseTensor& w, const Grid& source_grid, const Eigen::MatrixXd& map,
                                     const Grid& new_grid);

}  // namespace ttpmf
