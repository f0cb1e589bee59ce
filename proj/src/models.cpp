#include "ttpmf/models.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Eigenvalues>

#include "ttpmf/errors.hpp"

namespace ttpmf {

namespace {

Eigen::Matrix2d radar_dynamics() {
    Eigen::Matrix2d F;
    F << 1.1, 0.1, -0.2, 1.1;
    return F;
}

Eigen::VectorXd range_bearing(const Eigen::VectorXd& x) {
    Eigen::VectorXd z(2);
    z(0) = x.norm();
    z(1) = std::atan2(x(1), x(0)) * 180.0 / std::numbers::pi;
    return z;
}

}  // namespace

StateSpaceModel radar_model() {
    StateSpaceModel m;
    m.dim_x = 2;
    m.dim_z = 2;
    m.F = Eigen::MatrixXd(radar_dynamics());
    m.h = range_bearing;
    m.Q = Eigen::MatrixXd::Identity(2, 2);
    m.R = Eigen::Vector2d(1.0, 0.1).asDiagonal();
    m.angle_components = {1};
    return m;
}

StateSpaceModel linear_gaussian_model(const Eigen::MatrixXd& F, const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R) {
    StateSpaceModel m;
    m.dim_x = static_cast<std::size_t>(F.rows());
    m.dim_z = m.dim_x;
    m.F = F;
    m.h = [](const Eigen::VectorXd& x) { return x; };
    m.Q = Q;
    m.R = R;
    m.validate();
    return m;
}

StateSpaceModel scaling_model(std::size_t d, double block_scale) {
    if (d < 2) throw ConfigError("scaling_model: d must be at least 2");
    const auto n = static_cast<Eigen::Index>(d);
    Eigen::MatrixXd F = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index k = 0; k + 1 < n; k += 2) F.block<2, 2>(k, k) = block_scale * radar_dynamics();
    if (d % 2 == 1) F(n - 1, n - 1) = 0.95;

    StateSpaceModel m;
    m.dim_x = d;
    m.dim_z = 2;
    m.F = F;
    m.h = range_bearing;
    m.Q = Eigen::MatrixXd::Identity(n, n);
    m.R = Eigen::Vector2d(1.0, 0.1).asDiagonal();
    m.angle_components = {1};
    return m;
}

MomentEstimate radar_prior() {
    return {Eigen::Vector2d(20.0, 20.0), Eigen::Vector2d(9.0, 9.0).asDiagonal()};
}

Eigen::MatrixXd gaussian_factor(const Eigen::MatrixXd& cov) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    if (es.info() != Eigen::Success) throw ConfigError("gaussian_factor: eigendecomposition failed");
    const double tol = 1e-12 * std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
    if (es.eigenvalues().minCoeff() < -tol) throw ConfigError("gaussian_factor: covariance is not PSD");
    return es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

Trajectory simulate(const StateSpaceModel& model, const Eigen::VectorXd& x0_mean, const Eigen::MatrixXd& x0_cov,
                    std::size_t k_f, std::uint64_t seed) {
    if (k_f < 1) throw ConfigError("simulate: k_f must be at least 1");
    const auto d = static_cast<Eigen::Index>(model.dim_x);
    const auto b = static_cast<Eigen::Index>(model.dim_z);
    const Eigen::MatrixXd A0 = gaussian_factor(x0_cov);
    const Eigen::MatrixXd AQ = gaussian_factor(model.Q);
    const Eigen::MatrixXd AR = gaussian_factor(model.R);

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    auto draw = [&](Eigen::Index n) {
        Eigen::VectorXd v(n);
        for (Eigen::Index i = 0; i < n; ++i) v(i) = normal(rng);
        return v;
    };

    Trajectory t;
    t.seed = seed;
    t.states.resize(static_cast<Eigen::Index>(k_f), d);
    t.measurements.resize(static_cast<Eigen::Index>(k_f), b);
    Eigen::VectorXd x = x0_mean + A0 * draw(d);
    for (std::size_t k = 0; k < k_f; ++k) {
        const auto row = static_cast<Eigen::Index>(k);
        t.states.row(row) = x.transpose();
        t.measurements.row(row) = (model.measure(x) + AR * draw(b)).transpose();
        x = model.propagate(x) + AQ * draw(d);
    }
    return t;
}

}  // namespace ttpmf
