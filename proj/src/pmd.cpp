#include "ttpmf/pmd.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <random>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include "ttpmf/errors.hpp"
#include "ttpmf/tt_algorithms.hpp"

namespace ttpmf {

namespace {

using Index = Eigen::Index;

Index ix(std::size_t i) { return static_cast<Index>(i); }

std::vector<double> grid_centre(const Grid& g) {
    std::vector<double> c(g.dims());
    for (std::size_t k = 0; k < g.dims(); ++k) c[k] = 0.5 * (g.lower(k) + g.upper(k));
    return c;
}

// Symmetrises and, if needed, adds growing diagonal jitter until the Cholesky
// factorisation succeeds.
bool make_spd(Eigen::MatrixXd& cov) {
    cov = 0.5 * (cov + cov.transpose());
    if (Eigen::LLT<Eigen::MatrixXd>(cov).info() == Eigen::Success) return false;
    const auto d = static_cast<double>(cov.rows());
    double jitter = 1e-9 * std::max(std::abs(cov.trace()) / d, 1e-300);
    for (int attempt = 0; attempt < 40; ++attempt) {
        Eigen::MatrixXd trial = cov + jitter * Eigen::MatrixXd::Identity(cov.rows(), cov.cols());
        if (Eigen::LLT<Eigen::MatrixXd>(trial).info() == Eigen::Success) {
            cov = trial;
            return true;
        }
        jitter *= 10.0;
    }
    throw DegenerateDensityError("covariance could not be made positive definite");
}

// (pre, n, post) mode product: out(a, m, b) = sum_i w(m, i) in(a, i, b).
DenseTensor mode_product(const DenseTensor& in, std::size_t k, const Eigen::MatrixXd& w) {
    Shape shape = in.shape();
    std::size_t pre = 1, post = 1;
    for (std::size_t j = 0; j < k; ++j) pre *= shape[j];
    for (std::size_t j = k + 1; j < shape.size(); ++j) post *= shape[j];
    const std::size_t n = shape[k];
    const auto m = static_cast<std::size_t>(w.rows());
    shape[k] = m;
    DenseTensor out(shape, 0.0);
    auto src = in.values();
    auto dst = out.values();
    for (std::size_t b = 0; b < post; ++b)
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t r = 0; r < m; ++r) {
                const double wr = w(ix(r), ix(i));
                if (wr == 0.0) continue;
                const double* s = &src[pre * (i + n * b)];
                double* t = &dst[pre * (r + m * b)];
                for (std::size_t a = 0; a < pre; ++a) t[a] += wr * s[a];
            }
    return out;
}

double dense_multilinear(const DenseTensor& w, std::span<const double> u) {
    const auto& shape = w.shape();
    const std::size_t d = shape.size();
    std::vector<std::size_t> lo(d);
    std::vector<double> t(d);
    for (std::size_t k = 0; k < d; ++k) {
        const double top = static_cast<double>(shape[k] - 1);
        if (u[k] < -1e-9 || u[k] > top + 1e-9) return 0.0;
        const double uc = std::clamp(u[k], 0.0, top);
        lo[k] = std::min(static_cast<std::size_t>(std::floor(uc)), shape[k] - 2);
        t[k] = std::clamp(uc - static_cast<double>(lo[k]), 0.0, 1.0);
    }
    std::vector<std::size_t> idx(d);
    double s = 0.0;
    for (std::size_t mask = 0; mask < (std::size_t{1} << d); ++mask) {
        double wt = 1.0;
        for (std::size_t k = 0; k < d; ++k) {
            const bool up = (mask >> k) & 1U;
            wt *= up ? t[k] : 1.0 - t[k];
            idx[k] = lo[k] + (up ? 1 : 0);
        }
        if (wt != 0.0) s += wt * w(idx);
    }
    return s;
}

}  // namespace

std::size_t PmdEstimate::storage_bytes() const {
    if (is_tt()) return tt_storage_bytes(tt());
    return dense().size() * sizeof(double);
}

double pmd_mass(const PmdEstimate& p) {
    const double s = p.is_tt() ? tt_sum(p.tt()) : p.dense().sum();
    return s * p.grid.cell_volume();
}

PmdEstimate normalize(const PmdEstimate& p) {
    const double mass = pmd_mass(p);
    if (!(mass > 0.0) || !std::isfinite(mass))
        throw DegenerateDensityError("density has non-positive or non-finite mass " + std::to_string(mass));
    PmdEstimate out = p;
    if (p.is_tt()) {
        out.weights = tt_scale(p.tt(), 1.0 / mass);
    } else {
        DenseTensor w = p.dense();
        for (double& v : w.values()) v /= mass;
        out.weights = std::move(w);
    }
    return out;
}

NegativeMass negative_mass(const PmdEstimate& p, std::uint64_t seed) {
    NegativeMass out;
    const double dv = p.grid.cell_volume();
    auto sum_negative = [&](std::span<const double> values) {
        double s = 0.0;
        for (double v : values)
            if (v < 0.0) s -= v;
        return s * dv;
    };
    if (!p.is_tt()) {
        out.mass = sum_negative(p.dense().values());
        return out;
    }
    const Shape shape = p.grid.shape();
    const double total = element_count_estimate(shape);
    if (total <= static_cast<double>(kExactNegativeMassLimit)) {
        out.mass = sum_negative(tt_to_dense(p.tt(), kExactNegativeMassLimit).values());
        return out;
    }
    constexpr std::size_t kSamples = 100000;
    std::mt19937_64 rng(seed);
    MultiIndex idx(shape.size());
    double s = 0.0;
    for (std::size_t n = 0; n < kSamples; ++n) {
        for (std::size_t k = 0; k < shape.size(); ++k)
            idx[k] = std::uniform_int_distribution<std::size_t>(0, shape[k] - 1)(rng);
        const double v = tt_eval(p.tt(), idx);
        if (v < 0.0) s -= v;
    }
    out.mass = s / static_cast<double>(kSamples) * total * dv;
    out.estimated = true;
    return out;
}

MomentResult moments_from_pmd(const PmdEstimate& p) {
    const std::size_t d = p.grid.dims();
    const std::vector<double> c = grid_centre(p.grid);
    Eigen::VectorXd first = Eigen::VectorXd::Zero(ix(d));
    Eigen::MatrixXd second = Eigen::MatrixXd::Zero(ix(d), ix(d));
    double mass = 0.0;

    if (p.is_tt()) {
        const TensorTrain& w = p.tt();
        std::vector<std::vector<double>> ones(d);
        std::vector<std::vector<double>> centred(d);
        for (std::size_t k = 0; k < d; ++k) {
            ones[k].assign(p.grid.axis(k).size(), 1.0);
            for (double x : p.grid.axis(k)) centred[k].push_back(x - c[k]);
        }
        mass = tt_sum(w);
        for (std::size_t k = 0; k < d; ++k) {
            auto vecs = ones;
            vecs[k] = centred[k];
            first(ix(k)) = tt_dot(w, tt_rank_one(vecs));
            for (std::size_t l = 0; l <= k; ++l) {
                auto v2 = ones;
                if (l == k) {
                    v2[k] = centred[k];
                    for (double& x : v2[k]) x *= x;
                } else {
                    v2[k] = centred[k];
                    v2[l] = centred[l];
                }
                second(ix(k), ix(l)) = second(ix(l), ix(k)) = tt_dot(w, tt_rank_one(v2));
            }
        }
    } else {
        const DenseTensor& w = p.dense();
        MultiIndex idx(d, 0);
        std::vector<double> x(d);
        const Shape& shape = w.shape();
        auto vals = w.values();
        std::size_t lin = 0;
        do {
            const double v = vals[lin++];
            if (v == 0.0) continue;
            for (std::size_t k = 0; k < d; ++k) x[k] = p.grid.axis(k)[idx[k]] - c[k];
            mass += v;
            for (std::size_t k = 0; k < d; ++k) {
                first(ix(k)) += v * x[k];
                for (std::size_t l = 0; l <= k; ++l) second(ix(k), ix(l)) += v * x[k] * x[l];
            }
        } while (next_index(idx, shape));
        for (std::size_t k = 0; k < d; ++k)
            for (std::size_t l = 0; l < k; ++l) second(ix(l), ix(k)) = second(ix(k), ix(l));
    }
    if (!(mass > 0.0) || !std::isfinite(mass)) throw DegenerateDensityError("moments of a density without mass");

    MomentResult out;
    const Eigen::VectorXd mc = first / mass;
    out.moments.mean = mc;
    for (std::size_t k = 0; k < d; ++k) out.moments.mean(ix(k)) += c[k];
    out.moments.cov = second / mass - mc * mc.transpose();
    out.jitter_applied = make_spd(out.moments.cov);
    return out;
}

DenseTensor build_tpm_dense(const StateSpaceModel& model, const Grid& new_grid, const Grid& old_grid,
                            std::size_t max_elements) {
    Shape shape = new_grid.shape();
    const Shape old_shape = old_grid.shape();
    shape.insert(shape.end(), old_shape.begin(), old_shape.end());
    if (element_count_estimate(shape) > static_cast<double>(max_elements))
        throw GuardError("build_tpm_dense: " + std::to_string(element_count_estimate(shape)) +
                         " elements exceed the guard of " + std::to_string(max_elements));
    const TransitionKernel kernel(model, new_grid, old_grid);
    DenseTensor tpm(shape, 0.0);
    MultiIndex idx(shape.size(), 0);
    auto vals = tpm.values();
    std::size_t lin = 0;
    do {
        vals[lin++] = kernel(idx);
    } while (next_index(idx, shape));
    return tpm;
}

PmdEstimate time_update_dense(const PmdEstimate& p, const DenseTensor& tpm, const Grid& new_grid,
                              double* raw_mass) {
    const std::size_t n_new = element_count(new_grid.shape());
    const std::size_t n_old = p.dense().size();
    if (tpm.size() != n_new * n_old) throw ShapeError("time_update_dense: TPM size does not match the grids");
    Eigen::Map<const Eigen::MatrixXd> T(tpm.values().data(), ix(n_new), ix(n_old));
    Eigen::Map<const Eigen::VectorXd> w(p.dense().values().data(), ix(n_old));
    Eigen::VectorXd out = T * w;
    PmdEstimate pred{new_grid, DenseTensor(new_grid.shape(), std::vector<double>(out.data(), out.data() + out.size())),
                     PmdKind::predictive};
    if (raw_mass != nullptr) *raw_mass = pmd_mass(pred);
    return normalize(pred);
}

std::function<double(std::span<const std::size_t>)> middle_row_kernel(const StateSpaceModel& model,
                                                                      const Grid& grid) {
    if (!model.F) throw ConfigError("middle_row_kernel: linear dynamics required");
    for (auto n : grid.shape())
        if (n % 2 == 0) throw ShapeError("middle_row_kernel: even grid size");
    auto kernel = std::make_shared<TransitionKernel>(model, grid, grid);
    const std::size_t d = grid.dims();
    MultiIndex mid(d);
    for (std::size_t k = 0; k < d; ++k) mid[k] = (grid.axis(k).size() - 1) / 2;
    const Eigen::VectorXd x_mid = grid.point(mid);
    const Eigen::VectorXd fx_mid = *model.F * x_mid;
    std::vector<double> y_new(fx_mid.data(), fx_mid.data() + d);
    return [kernel, grid, mid, y_new, d](std::span<const std::size_t> idx) {
        std::vector<double> x_old(d);
        for (std::size_t k = 0; k < d; ++k) {
            const auto n = static_cast<std::ptrdiff_t>(grid.axis(k).size());
            auto m = static_cast<std::ptrdiff_t>(idx[k]);
            if (m > (n - 1) / 2) m -= n;
            x_old[k] = grid.axis(k)[static_cast<std::size_t>(static_cast<std::ptrdiff_t>(mid[k]) - m)];
        }
        return kernel->at_points(y_new, x_old);
    };
}

DenseTensor middle_row_kernel_dense(const StateSpaceModel& model, const Grid& grid) {
    auto eval = middle_row_kernel(model, grid);
    const Shape shape = grid.shape();
    DenseTensor k(shape, 0.0);
    MultiIndex idx(shape.size(), 0);
    auto vals = k.values();
    std::size_t lin = 0;
    do {
        vals[lin++] = eval(idx);
    } while (next_index(idx, shape));
    return k;
}

PmdEstimate time_update_fft_dense(const DenseTensor& kernel_mid, const PmdEstimate& p) {
    PmdEstimate out{p.grid, fft_convolve_dense(kernel_mid, p.dense()), PmdKind::predictive};
    return normalize(out);
}

DenseTensor likelihood_dense(const Grid& grid, const StateSpaceModel& model, const Eigen::VectorXd& z) {
    const Likelihood lik(model, z);
    const Shape shape = grid.shape();
    DenseTensor out(shape, 0.0);
    MultiIndex idx(shape.size(), 0);
    auto vals = out.values();
    std::size_t lin = 0;
    do {
        vals[lin++] = lik(grid.point(idx));
    } while (next_index(idx, shape));
    return out;
}

PmdEstimate measurement_update_dense(const PmdEstimate& p, const StateSpaceModel& model, const Eigen::VectorXd& z) {
    const DenseTensor lik = likelihood_dense(p.grid, model, z);
    DenseTensor w = p.dense();
    auto wv = w.values();
    auto lv = lik.values();
    for (std::size_t e = 0; e < wv.size(); ++e) wv[e] *= lv[e];
    return normalize(PmdEstimate{p.grid, std::move(w), PmdKind::filtering});
}

DenseTensor interpolate_dense(const DenseTensor& w, const Grid& old_grid, const Grid& new_grid) {
    if (old_grid.dims() != new_grid.dims() || old_grid.shape() != w.shape())
        throw ShapeError("interpolate_dense: grid mismatch");
    DenseTensor out = w;
    for (std::size_t k = 0; k < old_grid.dims(); ++k)
        out = mode_product(out, k, linear_interpolation_matrix(old_grid.axis(k), new_grid.axis(k)));
    return out;
}

DenseTensor interpolate_mapped_dense(const DenseTensor& w, const Grid& source_grid, const Eigen::MatrixXd& map,
                                     const Grid& new_grid) {
    const std::size_t d = source_grid.dims();
    if (new_grid.dims() != d || source_grid.shape() != w.shape() || map.rows() != ix(d) || map.cols() != ix(d))
        throw ShapeError("interpolate_mapped_dense: dimension mismatch");
    Eigen::FullPivLU<Eigen::MatrixXd> lu(map);
    if (!lu.isInvertible()) throw ConfigError("interpolate_mapped_dense: map is singular");
    const Eigen::MatrixXd inv = lu.inverse();
    const Shape shape = new_grid.shape();
    DenseTensor out(shape, 0.0);
    MultiIndex idx(d, 0);
    std::vector<double> u(d);
    auto vals = out.values();
    std::size_t lin = 0;
    do {
        const Eigen::VectorXd xi = inv * new_grid.point(idx);
        for (std::size_t k = 0; k < d; ++k) u[k] = (xi(ix(k)) - source_grid.lower(k)) / source_grid.step(k);
        vals[lin++] = dense_multilinear(w, u);
    } while (next_index(idx, shape));
    return out;
}

}  // namespace ttpmf
