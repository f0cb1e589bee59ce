#include "ttpmf/state_space.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include "ttpmf/errors.hpp"

namespace ttpmf {

namespace {

constexpr std::size_t kMaxDim = 16;

Eigen::MatrixXd inverse_cholesky(const Eigen::MatrixXd& cov, const char* what) {
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success) throw ConfigError(std::string(what) + " is not positive definite");
    const auto n = cov.rows();
    Eigen::MatrixXd L = llt.matrixL();
    return L.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(n, n));
}

double log_det_from_inverse_cholesky(const Eigen::MatrixXd& li) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < li.rows(); ++i) s -= 2.0 * std::log(li(i, i));
    return s;
}

void check_square(const Eigen::MatrixXd& m, std::size_t n, const char* what) {
    if (static_cast<std::size_t>(m.rows()) != n || static_cast<std::size_t>(m.cols()) != n)
        throw ConfigError(std::string(what) + " must be " + std::to_string(n) + "x" + std::to_string(n));
    if (!m.isApprox(m.transpose(), 1e-12)) throw ConfigError(std::string(what) + " must be symmetric");
}

}  // namespace

Eigen::VectorXd StateSpaceModel::propagate(const Eigen::VectorXd& x) const {
    if (F) return *F * x;
    return f(x);
}

Eigen::MatrixXd StateSpaceModel::dynamics_jacobian(const Eigen::VectorXd& x) const {
    if (F) return *F;
    if (f_jacobian) return f_jacobian(x);
    const auto n = x.size();
    Eigen::MatrixXd J(n, n);
    for (Eigen::Index k = 0; k < n; ++k) {
        const double h = 1e-6 * std::max(1.0, std::abs(x(k)));
        Eigen::VectorXd xp = x, xm = x;
        xp(k) += h;
        xm(k) -= h;
        J.col(k) = (f(xp) - f(xm)) / (2.0 * h);
    }
    return J;
}

void StateSpaceModel::validate() const {
    if (dim_x == 0 || dim_z == 0) throw ConfigError("model dimensions must be positive");
    if (dim_x > kMaxDim) throw ConfigError("state dimension above " + std::to_string(kMaxDim) + " is not supported");
    if (F) {
        if (static_cast<std::size_t>(F->rows()) != dim_x || static_cast<std::size_t>(F->cols()) != dim_x)
            throw ConfigError("F must be dim_x x dim_x");
    } else if (!f) {
        throw ConfigError("model needs either F or f");
    }
    if (!h) throw ConfigError("model needs a measurement function h");
    check_square(Q, dim_x, "Q");
    check_square(R, dim_z, "R");
    inverse_cholesky(Q, "Q");
    inverse_cholesky(R, "R");
    for (auto c : angle_components)
        if (c >= dim_z) throw ConfigError("angle component index out of range");
}

double wrap_degrees(double x) {
    double r = x - 360.0 * std::floor((x + 180.0) / 360.0);  // [-180, 180)
    if (r <= -180.0) r += 360.0;
    return r;
}

Eigen::VectorXd angle_wrap_residual(const Eigen::VectorXd& z_pred, const Eigen::VectorXd& z_meas,
                                    std::span<const std::size_t> angle_components) {
    if (z_pred.size() != z_meas.size()) throw ShapeError("angle_wrap_residual: size mismatch");
    Eigen::VectorXd r = z_pred - z_meas;
    for (auto c : angle_components) {
        const auto cc = static_cast<Eigen::Index>(c);
        if (cc >= r.size()) throw ShapeError("angle_wrap_residual: component out of range");
        r(cc) = wrap_degrees(r(cc));
    }
    return r;
}

MomentEstimate kalman_predict(const MomentEstimate& m, const StateSpaceModel& model) {
    const Eigen::MatrixXd J = model.dynamics_jacobian(m.mean);
    MomentEstimate out;
    out.mean = model.propagate(m.mean);
    out.cov = J * m.cov * J.transpose() + model.Q;
    out.cov = 0.5 * (out.cov + out.cov.transpose());
    return out;
}

MomentEstimate kalman_update(const MomentEstimate& m, const Eigen::MatrixXd& H, const Eigen::MatrixXd& R,
                             const Eigen::VectorXd& z) {
    const Eigen::MatrixXd S = H * m.cov * H.transpose() + R;
    const Eigen::MatrixXd K = m.cov * H.transpose() * S.inverse();
    MomentEstimate out;
    out.mean = m.mean + K * (z - H * m.mean);
    const auto n = m.cov.rows();
    const Eigen::MatrixXd IKH = Eigen::MatrixXd::Identity(n, n) - K * H;
    // Joseph form keeps the covariance symmetric positive definite
    out.cov = IKH * m.cov * IKH.transpose() + K * R * K.transpose();
    out.cov = 0.5 * (out.cov + out.cov.transpose());
    return out;
}

TransitionKernel::TransitionKernel(const StateSpaceModel& model, const Grid& new_grid, const Grid& old_grid)
    : d_(model.dim_x), model_(&model), new_axes_(new_grid.axes()), old_axes_(old_grid.axes()) {
    if (new_grid.dims() != d_ || old_grid.dims() != d_) throw ShapeError("TransitionKernel: grid dimension mismatch");
    if (d_ > kMaxDim) throw ConfigError("TransitionKernel: dimension too large");
    const Eigen::MatrixXd li = inverse_cholesky(model.Q, "Q");
    chol_inv_.resize(d_ * d_);
    for (std::size_t r = 0; r < d_; ++r)
        for (std::size_t c = 0; c < d_; ++c)
            chol_inv_[r * d_ + c] = li(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    const double log_norm = -0.5 * (static_cast<double>(d_) * std::log(2.0 * std::numbers::pi) +
                                    log_det_from_inverse_cholesky(li));
    scale_ = std::exp(log_norm) * old_grid.cell_volume();
    if (model.F) {
        const Eigen::MatrixXd& F = *model.F;
        table_.resize(d_);
        for (std::size_t k = 0; k < d_; ++k) {
            const auto& ax = old_axes_[k];
            table_[k].resize(ax.size() * d_);
            for (std::size_t i = 0; i < ax.size(); ++i)
                for (std::size_t r = 0; r < d_; ++r)
                    table_[k][i * d_ + r] = F(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) * ax[i];
        }
    }
}

double TransitionKernel::from_residual(const double* r) const {
    double q = 0.0;
    for (std::size_t row = 0; row < d_; ++row) {
        double z = 0.0;
        const double* li = &chol_inv_[row * d_];
        for (std::size_t c = 0; c <= row; ++c) z += li[c] * r[c];
        q += z * z;
    }
    return scale_ * std::exp(-0.5 * q);
}

double TransitionKernel::operator()(std::span<const std::size_t> idx) const {
    std::array<double, kMaxDim> r{};
    if (!table_.empty()) {
        for (std::size_t row = 0; row < d_; ++row) r[row] = new_axes_[row][idx[row]];
        for (std::size_t k = 0; k < d_; ++k) {
            const double* t = &table_[k][idx[d_ + k] * d_];
            for (std::size_t row = 0; row < d_; ++row) r[row] -= t[row];
        }
        return from_residual(r.data());
    }
    Eigen::VectorXd x_old(static_cast<Eigen::Index>(d_));
    for (std::size_t k = 0; k < d_; ++k) x_old(static_cast<Eigen::Index>(k)) = old_axes_[k][idx[d_ + k]];
    const Eigen::VectorXd mean = model_->f(x_old);
    for (std::size_t row = 0; row < d_; ++row) r[row] = new_axes_[row][idx[row]] - mean(static_cast<Eigen::Index>(row));
    return from_residual(r.data());
}

double TransitionKernel::at_points(std::span<const double> x_new, std::span<const double> x_old) const {
    Eigen::VectorXd xo(static_cast<Eigen::Index>(d_));
    for (std::size_t k = 0; k < d_; ++k) xo(static_cast<Eigen::Index>(k)) = x_old[k];
    const Eigen::VectorXd mean = model_->propagate(xo);
    std::array<double, kMaxDim> r{};
    for (std::size_t row = 0; row < d_; ++row) r[row] = x_new[row] - mean(static_cast<Eigen::Index>(row));
    return from_residual(r.data());
}

Likelihood::Likelihood(const StateSpaceModel& model, Eigen::VectorXd z)
    : model_(&model), z_(std::move(z)), chol_inv_(inverse_cholesky(model.R, "R")) {
    if (static_cast<std::size_t>(z_.size()) != model.dim_z) throw ShapeError("Likelihood: measurement size mismatch");
    const double log_norm = -0.5 * (static_cast<double>(model.dim_z) * std::log(2.0 * std::numbers::pi) +
                                    log_det_from_inverse_cholesky(chol_inv_));
    norm_ = std::exp(log_norm);
}

double Likelihood::operator()(const Eigen::VectorXd& x) const {
    return norm_ * std::exp(-0.5 * mahalanobis2(x));
}

double Likelihood::log(const Eigen::VectorXd& x) const {
    return std::log(norm_) - 0.5 * mahalanobis2(x);
}

double Likelihood::mahalanobis2(const Eigen::VectorXd& x) const {
    const Eigen::VectorXd r = angle_wrap_residual(model_->h(x), z_, model_->angle_components);
    return (chol_inv_.triangularView<Eigen::Lower>() * r).squaredNorm();
}

}  // namespace ttpmf
