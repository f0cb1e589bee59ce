#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "ttpmf/dense_tensor.hpp"

namespace ttpmf {

/// Mean and covariance of a density.
struct MomentEstimate {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
};

/// Axis-aligned equidistant grid, stored axis by axis.
class Grid {
public:
    Grid() = default;
    /// Each axis needs at least two strictly increasing, equidistant points.
    /// Throws ShapeError otherwise.
    explicit Grid(std::vector<std::vector<double>> axes);

    /// Axis k has counts[k] points centred on centre[k] with spacing steps[k].
    static Grid centred(std::span<const double> centre, std::span<const double> steps,
                        std::span<const std::size_t> counts);

    [[nodiscard]] std::size_t dims() const noexcept { return axes_.size(); }
    [[nodiscard]] Shape shape() const;
    [[nodiscard]] const std::vector<double>& axis(std::size_t k) const { return axes_[k]; }
    [[nodiscard]] const std::vector<std::vector<double>>& axes() const noexcept { return axes_; }
    [[nodiscard]] double step(std::size_t k) const { return steps_[k]; }
    [[nodiscard]] const std::vector<double>& steps() const noexcept { return steps_; }
    [[nodiscard]] double cell_volume() const noexcept { return cell_volume_; }
    [[nodiscard]] double lower(std::size_t k) const { return axes_[k].front(); }
    [[nodiscard]] double upper(std::size_t k) const { return axes_[k].back(); }

    [[nodiscard]] Eigen::VectorXd point(std::span<const std::size_t> idx) const;
    /// The 2^d corner points of the grid's bounding box.
    [[nodiscard]] std::vector<Eigen::VectorXd> corners() const;

private:
    std::vector<std::vector<double>> axes_;
    std::vector<double> steps_;
    double cell_volume_ = 0.0;
};

/// Grid centred exactly on m.mean, spanning mean_l +- sigma_mult * sqrt(cov_ll)
/// on axis l. Counts must be odd and >= 3.
Grid design_grid(const MomentEstimate& m, std::span<const std::size_t> counts, double sigma_mult);

/// Smallest axis-aligned grid whose bounding box contains every point.
Grid circumscribing_grid(const std::vector<Eigen::VectorXd>& points, std::span<const std::size_t> counts);

}  // namespace ttpmf
