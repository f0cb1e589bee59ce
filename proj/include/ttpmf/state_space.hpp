#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "ttpmf/grid.hpp"

namespace ttpmf {

using VectorFunction = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
using MatrixFunction = std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>;

/// x_{k+1} = f(x_k) + w_k,  z_k = h(x_k) + v_k  with w ~ N(0, Q), v ~ N(0, R).
struct StateSpaceModel {
    std::size_t dim_x = 0;
    std::size_t dim_z = 0;
    /// Linear dynamics. When set, f is ignored.
    std::optional<Eigen::MatrixXd> F;
    VectorFunction f;
    /// Optional analytic Jacobian of f; a central difference is used otherwise.
    MatrixFunction f_jacobian;
    VectorFunction h;
    Eigen::MatrixXd Q;
    Eigen::MatrixXd R;
    /// Measurement components in degrees; their residuals wrap into (-180, 180].
    std::vector<std::size_t> angle_components;

    [[nodiscard]] bool linear() const noexcept { return F.has_value(); }
    [[nodiscard]] Eigen::VectorXd propagate(const Eigen::VectorXd& x) const;
    [[nodiscard]] Eigen::MatrixXd dynamics_jacobian(const Eigen::VectorXd& x) const;
    [[nodiscard]] Eigen::VectorXd measure(const Eigen::VectorXd& x) const { return h(x); }

    /// Throws ConfigError on inconsistent sizes or non-SPD covariances.
    void validate() const;
};

/// Wraps x into (-180, 180].
double wrap_degrees(double x);

/// pred - meas, with the listed components wrapped into (-180, 180].
Eigen::VectorXd angle_wrap_residual(const Eigen::VectorXd& z_pred, const Eigen::VectorXd& z_meas,
                                    std::span<const std::size_t> angle_components);

/// Kalman (EKF for nonlinear f) time update: mean' = f(mean),
/// cov' = F cov F^T + Q with F the dynamics Jacobian at the mean.
MomentEstimate kalman_predict(const MomentEstimate& m, const StateSpaceModel& model);

/// Exact Kalman measurement update for z = H x + v, v ~ N(0, R).
MomentEstimate kalman_update(const MomentEstimate& m, const Eigen::MatrixXd& H, const Eigen::MatrixXd& R,
                             const Eigen::VectorXd& z);

/// Gaussian transition kernel between two grids:
/// entry(new, old) = N(x_new; f(x_old), Q) * cell volume of the old grid.
/// Shared by the dense TPM, the TT cross evaluator and the FFT kernel.
class TransitionKernel {
public:
    TransitionKernel(const StateSpaceModel& model, const Grid& new_grid, const Grid& old_grid);

    [[nodiscard]] std::size_t dims() const noexcept { return d_; }
    /// idx holds the d new-grid indices followed by the d old-grid indices.
    [[nodiscard]] double operator()(std::span<const std::size_t> idx) const;
    /// N(x_new; f(x_old), Q) * old cell volume at arbitrary points.
    [[nodiscard]] double at_points(std::span<const double> x_new, std::span<const double> x_old) const;

private:
    [[nodiscard]] double from_residual(const double* r) const;

    std::size_t d_;
    const StateSpaceModel* model_;
    std::vector<std::vector<double>> new_axes_;
    std::vector<std::vector<double>> old_axes_;
    // linear dynamics: mean = sum over axes k of table_[k][i_k * d + row]
    std::vector<std::vector<double>> table_;
    std::vector<double> chol_inv_;  // row-major lower-triangular inverse Cholesky factor of Q
    double scale_ = 0.0;            // Gaussian normalisation times old cell volume
};

/// Measurement likelihood N(z; h(x), R) with wrapped angle residuals.
class Likelihood {
public:
    Likelihood(const StateSpaceModel& model, Eigen::VectorXd z);
    [[nodiscard]] double operator()(const Eigen::VectorXd& x) const;
    [[nodiscard]] double log(const Eigen::VectorXd& x) const;

private:
    [[nodiscard]] double mahalanobis2(const Eigen::VectorXd& x) const;

    const StateSpaceModel* model_;
    Eigen::VectorXd z_;
    Eigen::MatrixXd chol_inv_;
    double norm_ = 0.0;
};

}  // namespace ttpmf
