#pragma once

#include <cstddef>
#include <cstdint>

#include <Eigen/Core>

#include "ttpmf/grid.hpp"
#include "ttpmf/state_space.hpp"

namespace ttpmf {

/// Range/bearing tracking model: F = [[1.1, 0.1], [-0.2, 1.1]], Q = I,
/// h(x) = [|x|, atan2(x2, x1) in degrees], R = diag(1, 0.1).
StateSpaceModel radar_model();

/// Linear dynamics with a direct, full-state measurement (H = I).
StateSpaceModel linear_gaussian_model(const Eigen::MatrixXd& F, const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R);

/// Synthetic family for dimension sweeps: block-diagonal copies of
/// block_scale times the radar F, a trailing 0.95 for odd d, Q = I_d, and a
/// range/bearing measurement of the first two axes (range over all axes).
StateSpaceModel scaling_model(std::size_t d, double block_scale = 0.85);

/// Default radar initial condition: N([20, 20], diag(9, 9)).
MomentEstimate radar_prior();

/// Rows are time steps.
struct Trajectory {
    Eigen::MatrixXd states;        ///< k_f x d
    Eigen::MatrixXd measurements;  ///< k_f x b
    std::uint64_t seed = 0;
};

/// x_0 ~ N(x0_mean, x0_cov), z_k = h(x_k) + v_k, x_{k+1} = f(x_k) + w_k.
/// Covariances only need to be positive semi-definite; zero gives a
/// noiseless run.
Trajectory simulate(const StateSpaceModel& model, const Eigen::VectorXd& x0_mean, const Eigen::MatrixXd& x0_cov,
                    std::size_t k_f, std::uint64_t seed);

/// A with A A^T = cov, for positive semi-definite cov.
Eigen::MatrixXd gaussian_factor(const Eigen::MatrixXd& cov);

}  // namespace ttpmf
