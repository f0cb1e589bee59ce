#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "ttpmf/cross.hpp"
#include "ttpmf/pmd.hpp"
#include "ttpmf/state_space.hpp"

namespace ttpmf {

struct GridConfig {
    std::size_t points_per_axis = 33;  ///< odd
    double sigma_mult = 4.0;
    std::size_t dense_guard_elements = kDefaultDenseGuard;
};

struct TtFilterConfig {
    /// Used for the likelihood, the transition tensor, the FFT kernel and
    /// the non-separable interpolation. rng_seed is replaced per use.
    CrossConfig cross{
        .max_rank = 512, .max_sweeps = 1000, .initial_rank = 8, .full_search_elements = std::size_t{1} << 16, .restarts = 1};
    double round_tol = 1e-8;
    std::size_t round_max_rank = kUnboundedRank;
    /// Normalise before rounding instead of after.
    bool normalize_before_round = false;
};

struct StepDiagnostics {
    /// The measurement left no mass; the predictive density was kept.
    bool outlier = false;
    bool jitter_applied = false;
    double clipped_mass = 0.0;
    bool clipped_mass_estimated = false;
    double filtering_mass = 0.0;   ///< sum w * cell volume after normalisation
    double predictive_mass = 0.0;  ///< same, predictive density
    /// Predictive mass before the final normalisation (standard filters and
    /// TT-FFT); far from one when the transition tensor or kernel missed part
    /// of the density. Zero for the dense FFT filter.
    double raw_predictive_mass = 0.0;
    /// Largest probe error reported by the step's cross approximations.
    double cross_error = 0.0;
    std::size_t tpm_bytes = 0;
    std::size_t pmd_bytes = 0;
    double interpolation_seconds = 0.0;
    std::vector<CrossReport> cross_reports;
    bool cross_capped = false;
};

struct StepResult {
    PmdEstimate filtering;
    MomentEstimate filtering_moments;
    PmdEstimate predictive;
    StepDiagnostics diag;
};

/// The initial density N(mean, cov) on design_grid(prior).
PmdEstimate initial_pmd_dense(const MomentEstimate& prior, std::size_t dims, const GridConfig& grid_cfg);
PmdEstimate initial_pmd_tt(const MomentEstimate& prior, std::size_t dims, const GridConfig& grid_cfg,
                           const TtFilterConfig& cfg, std::uint64_t seed, CrossReport* report = nullptr);

/// Measurement update (when z is given) followed by prediction through the
/// dense transition matrix onto a moment-designed grid.
StepResult pmf_step(const PmdEstimate& predictive, const StateSpaceModel& model,
                    const std::optional<Eigen::VectorXd>& z, const GridConfig& grid_cfg);

/// Dense FFT filter: the filtering density is moved to the grid whose image
/// under F covers the predictive grid, convolved with the middle-row kernel,
/// and interpolated from the image lattice onto the moment-designed
/// predictive grid. Linear dynamics only.
StepResult fft_pmf_step(const PmdEstimate& predictive, const StateSpaceModel& model,
                        const std::optional<Eigen::VectorXd>& z, const GridConfig& grid_cfg);

/// TT measurement update: cross-built likelihood, Hadamard product, rounding
/// and normalisation. Falls back to the prior (outlier) on a vanishing
/// normalising constant.
PmdEstimate measurement_update_tt(const PmdEstimate& predictive, const StateSpaceModel& model,
                                  const Eigen::VectorXd& z, const TtFilterConfig& cfg, std::uint64_t seed,
                                  StepDiagnostics& diag);

/// Standard filter in TT format: transition tensor by cross over
/// (new indices, old indices), prediction by tt_einsum_tpm.
StepResult tt_pmf_step(const PmdEstimate& predictive, const StateSpaceModel& model,
                       const std::optional<Eigen::VectorXd>& z, const GridConfig& grid_cfg,
                       const TtFilterConfig& cfg, std::uint64_t seed);

struct GridRedesign {
    PmdEstimate filtering;  ///< weights moved to the new filtering grid, normalised
    Grid predictive_grid;   ///< moment-designed predictive grid
};

/// Predictive grid from the Kalman-predicted moments, its corners mapped back
/// through F^-1, and the filtering weights interpolated onto the smallest
/// axis-aligned grid circumscribing them. Works for dense and TT weights.
GridRedesign grid_redesign(const PmdEstimate& filtering, const MomentEstimate& filtering_moments,
                           const StateSpaceModel& model, const GridConfig& grid_cfg);

/// FFT filter in TT format: grid re-design, cross-built kernel,
/// tt_fft_convolve, and interpolation from the image lattice onto the
/// axis-aligned grid circumscribing it. Linear dynamics only.
StepResult tt_fft_pmf_step(const PmdEstimate& predictive, const StateSpaceModel& model,
                           const std::optional<Eigen::VectorXd>& z, const GridConfig& grid_cfg,
                           const TtFilterConfig& cfg, std::uint64_t seed);

}  // namespace ttpmf
