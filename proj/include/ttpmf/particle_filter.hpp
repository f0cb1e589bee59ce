#pragma once

#include <cstddef>
#include <optional>
#include <random>

#include <Eigen/Core>

#include "ttpmf/grid.hpp"
#include "ttpmf/state_space.hpp"

namespace ttpmf {

/// Particles are the columns of a d x n matrix.
struct ParticleSet {
    Eigen::MatrixXd particles;
    Eigen::VectorXd weights;  ///< sums to one

    [[nodiscard]] std::size_t size() const noexcept { return static_cast<std::size_t>(particles.cols()); }
};

/// n equally weighted draws from N(prior.mean, prior.cov).
ParticleSet initial_particles(const MomentEstimate& prior, std::size_t n, std::mt19937_64& rng);

/// Indices of systematic resampling with a single uniform offset.
std::vector<std::size_t> systematic_resample(const Eigen::VectorXd& weights, std::mt19937_64& rng);

struct PfStepResult {
    /// Weighted by the likelihood, before resampling.
    ParticleSet filtering;
    Eigen::VectorXd filtering_mean;
    /// Resampled and propagated through the dynamics; equal weights.
    ParticleSet predictive;
};

/// Bootstrap step: likelihood weighting (skipped without z), systematic
/// resampling and propagation with sampled process noise. Throws
/// DegenerateDensityError when every weight vanishes.
PfStepResult bootstrap_pf_step(const ParticleSet& predictive, const StateSpaceModel& model,
                               const std::optional<Eigen::VectorXd>& z, std::mt19937_64& rng);

}  // namespace ttpmf
