#include "ttpmf/particle_filter.hpp"

#include <cmath>
#include <limits>

#include "ttpmf/errors.hpp"
#include "ttpmf/models.hpp"

namespace ttpmf {

namespace {

Eigen::MatrixXd standard_normal(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
    std::normal_distribution<double> normal;
    Eigen::MatrixXd out(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c)
        for (Eigen::Index r = 0; r < rows; ++r) out(r, c) = normal(rng);
    return out;
}

}  // namespace

ParticleSet initial_particles(const MomentEstimate& prior, std::size_t n, std::mt19937_64& rng) {
    if (n == 0) throw ConfigError("initial_particles: need at least one particle");
    const auto cols = static_cast<Eigen::Index>(n);
    ParticleSet ps;
    ps.particles = (gaussian_factor(prior.cov) * standard_normal(prior.mean.size(), cols, rng)).colwise() + prior.mean;
    ps.weights = Eigen::VectorXd::Constant(cols, 1.0 / static_cast<double>(n));
    return ps;
}

std::vector<std::size_t> systematic_resample(const Eigen::VectorXd& weights, std::mt19937_64& rng) {
    const auto n = static_cast<std::size_t>(weights.size());
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    const double u0 = uniform(rng);
    std::vector<std::size_t> out(n);
    double cumulative = weights(0);
    std::size_t j = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double u = (static_cast<double>(i) + u0) / static_cast<double>(n);
        while (u > cumulative && j + 1 < n) cumulative += weights(static_cast<Eigen::Index>(++j));
        out[i] = j;
    }
    return out;
}

PfStepResult bootstrap_pf_step(const ParticleSet& predictive, const StateSpaceModel& model,
                               const std::optional<Eigen::VectorXd>& z, std::mt19937_64& rng) {
    const auto n = predictive.particles.cols();
    if (n == 0 || predictive.weights.size() != n) throw ShapeError("bootstrap_pf_step: malformed particle set");
    PfStepResult out;
    out.filtering = predictive;
    if (z) {
        const Likelihood lik(model, *z);
        Eigen::VectorXd logw(n);
        double top = -std::numeric_limits<double>::infinity();
        for (Eigen::Index i = 0; i < n; ++i) {
            logw(i) = std::log(predictive.weights(i)) + lik.log(predictive.particles.col(i));
            if (logw(i) > top) top = logw(i);
        }
        if (!std::isfinite(top)) throw DegenerateDensityError("bootstrap_pf_step: all particle weights vanished");
        Eigen::VectorXd w = (logw.array() - top).exp().matrix();
        out.filtering.weights = w / w.sum();
    }
    out.filtering_mean = out.filtering.particles * out.filtering.weights;

    const std::vector<std::size_t> idx = systematic_resample(out.filtering.weights, rng);
    Eigen::MatrixXd next(out.filtering.particles.rows(), n);
    for (Eigen::Index i = 0; i < n; ++i)
        next.col(i) = model.propagate(out.filtering.particles.col(static_cast<Eigen::Index>(idx[static_cast<std::size_t>(i)])));
    next += gaussian_factor(model.Q) * standard_normal(next.rows(), n, rng);
    out.predictive.particles = std::move(next);
    out.predictive.weights = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
    return out;
}

}  // namespace ttpmf
