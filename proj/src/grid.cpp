#include "ttpmf/grid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ttpmf/errors.hpp"

namespace ttpmf {

Grid::Grid(std::vector<std::vector<double>> axes) : axes_(std::move(axes)) {
    if (axes_.empty()) throw ShapeError("Grid: no axes");
    cell_volume_ = 1.0;
    for (std::size_t k = 0; k < axes_.size(); ++k) {
        const auto& ax = axes_[k];
        if (ax.size() < 2) throw ShapeError("Grid: axis " + std::to_string(k + 1) + " needs at least 2 points");
        const double step = (ax.back() - ax.front()) / static_cast<double>(ax.size() - 1);
        if (!(step > 0.0) || !std::isfinite(step))
            throw ShapeError("Grid: axis " + std::to_string(k + 1) + " is not strictly increasing");
        const double scale = std::max(std::abs(ax.front()), std::abs(ax.back()));
        for (std::size_t i = 1; i < ax.size(); ++i) {
            const double gap = ax[i] - ax[i - 1];
            if (std::abs(gap - step) > 1e-9 * step + 1e-12 * scale)
                throw ShapeError("Grid: axis " + std::to_string(k + 1) + " is not equidistant");
        }
        steps_.push_back(step);
        cell_volume_ *= step;
    }
}

Grid Grid::centred(std::span<const double> centre, std::span<const double> steps,
                   std::span<const std::size_t> counts) {
    if (centre.size() != steps.size() || centre.size() != counts.size())
        throw ShapeError("Grid::centred: argument lengths differ");
    std::vector<std::vector<double>> axes(centre.size());
    for (std::size_t k = 0; k < centre.size(); ++k) {
        const double mid = static_cast<double>(counts[k] - 1) / 2.0;
        axes[k].resize(counts[k]);
        for (std::size_t i = 0; i < counts[k]; ++i)
            axes[k][i] = centre[k] + (static_cast<double>(i) - mid) * steps[k];
    }
    return Grid(std::move(axes));
}

Shape Grid::shape() const {
    Shape s;
    s.reserve(axes_.size());
    for (const auto& ax : axes_) s.push_back(ax.size());
    return s;
}

Eigen::VectorXd Grid::point(std::span<const std::size_t> idx) const {
    Eigen::VectorXd x(static_cast<Eigen::Index>(axes_.size()));
    for (std::size_t k = 0; k < axes_.size(); ++k) x(static_cast<Eigen::Index>(k)) = axes_[k][idx[k]];
    return x;
}

std::vector<Eigen::VectorXd> Grid::corners() const {
    const std::size_t d = axes_.size();
    std::vector<Eigen::VectorXd> out;
    out.reserve(std::size_t{1} << d);
    for (std::size_t mask = 0; mask < (std::size_t{1} << d); ++mask) {
        Eigen::VectorXd c(static_cast<Eigen::Index>(d));
        for (std::size_t k = 0; k < d; ++k)
            c(static_cast<Eigen::Index>(k)) = (mask >> k) & 1U ? axes_[k].back() : axes_[k].front();
        out.push_back(std::move(c));
    }
    return out;
}

namespace {

void check_counts(std::span<const std::size_t> counts) {
    for (auto n : counts)
        if (n < 3 || n % 2 == 0)
            throw ShapeError("grid point count per axis must be odd and >= 3, got " + std::to_string(n));
}

}  // namespace

Grid design_grid(const MomentEstimate& m, std::span<const std::size_t> counts, double sigma_mult) {
    const auto d = static_cast<std::size_t>(m.mean.size());
    if (counts.size() != d || static_cast<std::size_t>(m.cov.rows()) != d)
        throw ShapeError("design_grid: dimension mismatch");
    if (!(sigma_mult > 0.0)) throw ConfigError("design_grid: sigma_mult must be positive");
    check_counts(counts);
    std::vector<double> centre(d), steps(d);
    for (std::size_t k = 0; k < d; ++k) {
        const auto kk = static_cast<Eigen::Index>(k);
        const double sd = std::sqrt(std::max(m.cov(kk, kk), 0.0));
        if (!(sd > 0.0)) throw ShapeError("design_grid: zero variance on axis " + std::to_string(k + 1));
        centre[k] = m.mean(kk);
        steps[k] = 2.0 * sigma_mult * sd / static_cast<double>(counts[k] - 1);
    }
    return Grid::centred(centre, steps, counts);
}

Grid circumscribing_grid(const std::vector<Eigen::VectorXd>& points, std::span<const std::size_t> counts) {
    if (points.empty()) throw ShapeError("circumscribing_grid: no points");
    const auto d = static_cast<std::size_t>(points.front().size());
    if (counts.size() != d) throw ShapeError("circumscribing_grid: dimension mismatch");
    check_counts(counts);
    std::vector<double> centre(d), steps(d);
    for (std::size_t k = 0; k < d; ++k) {
        const auto kk = static_cast<Eigen::Index>(k);
        double lo = points.front()(kk), hi = lo;
        for (const auto& p : points) {
            lo = std::min(lo, p(kk));
            hi = std::max(hi, p(kk));
        }
        if (!(hi > lo)) throw ShapeError("circumscribing_grid: degenerate extent on axis " + std::to_string(k + 1));
        centre[k] = 0.5 * (lo + hi);
        steps[k] = (hi - lo) / static_cast<double>(counts[k] - 1);
    }
    return Grid::centred(centre, steps, counts);
}

}  // namespace ttpmf
