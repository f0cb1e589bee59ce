#include "ttpmf/filters.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include "ttpmf/errors.hpp"
#include "ttpmf/seed.hpp"
#include "ttpmf/tt_algorithms.hpp"

namespace ttpmf {

namespace {

enum SeedTag : std::uint64_t { kLikelihood = 1, kTransition = 2, kKernel = 3, kInterpolation = 4, kClip = 5, kPrior = 6 };

CrossConfig seeded(const CrossConfig& c, std::uint64_t seed, SeedTag tag) {
    CrossConfig out = c;
    out.rng_seed = derive_seed(seed, tag);
    return out;
}

void note(StepDiagnostics& diag, const CrossReport& r) {
    diag.cross_reports.push_back(r);
    if (r.rank_capped) diag.cross_capped = true;
    diag.cross_error = std::max(diag.cross_error, r.achieved_error);
}

std::vector<std::size_t> counts_for(std::size_t d, const GridConfig& g) {
    return std::vector<std::size_t>(d, g.points_per_axis);
}

PmdEstimate round_and_normalize(const TensorTrain& t, const Grid& grid, PmdKind kind, const TtFilterConfig& cfg) {
    if (cfg.normalize_before_round) {
        PmdEstimate p = normalize(PmdEstimate{grid, t, kind});
        p.weights = tt_round(p.tt(), cfg.round_tol, cfg.round_max_rank);
        return p;
    }
    return normalize(PmdEstimate{grid, tt_round(t, cfg.round_tol, cfg.round_max_rank), kind});
}

const Eigen::MatrixXd& linear_dynamics(const StateSpaceModel& model) {
    if (!model.F) throw ConfigError("the FFT filters need linear dynamics");
    return *model.F;
}

MultiIndex nearest_index(const Grid& grid, const Eigen::VectorXd& x) {
    MultiIndex idx(grid.dims());
    for (std::size_t k = 0; k < grid.dims(); ++k) {
        const double u = std::round((x(static_cast<Eigen::Index>(k)) - grid.lower(k)) / grid.step(k));
        idx[k] = static_cast<std::size_t>(std::clamp(u, 0.0, static_cast<double>(grid.shape()[k] - 1)));
    }
    return idx;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Shared tail of every step: filtering moments and the clipped-mass record.
MomentEstimate filtering_moments(const PmdEstimate& filt, StepDiagnostics& diag) {
    diag.filtering_mass = pmd_mass(filt);
    const MomentResult mr = moments_from_pmd(filt);
    diag.jitter_applied = mr.jitter_applied;
    return mr.moments;
}

void record_negative_mass(const PmdEstimate& p, std::uint64_t seed, StepDiagnostics& diag) {
    const NegativeMass nm = negative_mass(p, seed);
    if (nm.mass >= diag.clipped_mass) {
        diag.clipped_mass = nm.mass;
        diag.clipped_mass_estimated = nm.estimated;
    }
}

PmdEstimate dense_filtering(const PmdEstimate& predictive, const StateSpaceModel& model,
                            const std::optional<Eigen::VectorXd>& z, StepDiagnostics& diag) {
    if (!z) {
        PmdEstimate f = normalize(predictive);
        f.kind = PmdKind::filtering;
        return f;
    }
    try {
        return measurement_update_dense(predictive, model, *z);
    } catch (const DegenerateDensityError&) {
        diag.outlier = true;
        PmdEstimate f = normalize(predictive);
        f.kind = PmdKind::filtering;
        return f;
    }
}

PmdEstimate tt_filtering(const PmdEstimate& predictive, const StateSpaceModel& model,
                         const std::optional<Eigen::VectorXd>& z, const TtFilterConfig& cfg, std::uint64_t seed,
                         StepDiagnostics& diag) {
    if (!z) {
        PmdEstimate f = normalize(predictive);
        f.kind = PmdKind::filtering;
        return f;
    }
    return measurement_update_tt(predictive, model, *z, cfg, seed, diag);
}

std::function<double(std::span<const std::size_t>)> gaussian_on_grid(const MomentEstimate& m, const Grid& grid) {
    Eigen::LLT<Eigen::MatrixXd> llt(m.cov);
    if (llt.info() != Eigen::Success) throw ConfigError("prior covariance is not positive definite");
    const auto n = m.cov.rows();
    Eigen::MatrixXd L = llt.matrixL();
    Eigen::MatrixXd li = L.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(n, n));
    double log_det = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) log_det += 2.0 * std::log(L(i, i));
    const double norm = std::exp(-0.5 * (static_cast<double>(n) * std::log(2.0 * std::numbers::pi) + log_det));
    return [li, norm, mean = m.mean, grid](std::span<const std::size_t> idx) {
        const Eigen::VectorXd r = grid.point(idx) - mean;
        return norm * std::exp(-0.5 * (li * r).squaredNorm());
    };
}

}  // namespace

PmdEstimate initial_pmd_dense(const MomentEstimate& prior, std::size_t dims, const GridConfig& grid_cfg) {
    const auto counts = counts_for(dims, grid_cfg);
    const Grid grid = design_grid(prior, counts, grid_cfg.sigma_mult);
    auto pdf = gaussian_on_grid(prior, grid);
    const Shape shape = grid.shape();
    DenseTensor w(shape, 0.0);
    MultiIndex idx(shape.size(), 0);
    auto vals = w.values();
    std::size_t lin = 0;
    do {
        vals[lin++] = pdf(idx);
    } while (next_index(idx, shape));
    return normalize(PmdEstimate{grid, std::move(w), PmdKind::predictive});
}

PmdEstimate initial_pmd_tt(const MomentEstimate& prior, std::size_t dims, const GridConfig& grid_cfg,
                           const TtFilterConfig& cfg, std::uint64_t seed, CrossReport* report) {
    const auto counts = counts_for(dims, grid_cfg);
    const Grid grid = design_grid(prior, counts, grid_cfg.sigma_mult);
    const CrossResult res = greedy_cross({grid.shape(), gaussian_on_grid(prior, grid)}, seeded(cfg.cross, seed, kPrior));
    if (report != nullptr) *report = res.report;
    return round_and_normalize(res.tt, grid, PmdKind::predictive, cfg);
}

StepResult pmf_step(const PmdEstimate& predictive, const StateSpaceModel& model,
                    const std::optional<Eigen::VectorXd>& z, const GridConfig& grid_cfg) {
    StepResult out;
    out.filtering = dense_filtering(predictive, model, z, out.diag);
    out.filtering_moments = filtering_moments(out.filtering, out.diag);
    const MomentEstimate pred = kalman_predict(out.filtering_moments, model);
    const Grid new_grid = design_grid(pred, counts_for(model.dim_x, grid_cfg), grid_cfg.sigma_mult);
    const DenseTensor tpm = build_tpm_dense(model, new_grid, out.filtering.grid, grid_cfg.dense_guard_elements);
    out.predictive = time_update_dense(out.filtering, tpm, new_grid, &out.diag.raw_predictive_mass);
    out.diag.tpm_bytes = tpm.size() * sizeof(double);
    out.diag.pmd_bytes = out.predictive.storage_bytes();
    out.diag.predictive_mass = pmd_mass(out.predictive);
    return out;
}

GridRedesign grid_redesign(const PmdEstimate& filtering, const MomentEstimate& filtering_moments,
                           const StateSpaceModel& model, const GridConfig& grid_cfg) {
    const Eigen::MatrixXd& F = linear_dynamics(model);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(F);
    if (!lu.isInvertible()) throw ConfigError("grid_redesign: F is singular");
    const Eigen::MatrixXd Finv = lu.inverse();

    const MomentEstimate pred = kalman_predict(filtering_moments, model);
    const auto counts = counts_for(model.dim_x, grid_cfg);
    Grid pred_grid = design_grid(pred, counts, grid_cfg.sigma_mult);
    std::vector<Eigen::VectorXd> corners = pred_grid.corners();
    for (auto& c : corners) c = Finv * c;
    const Grid filt_grid = circumscribing_grid(corners, counts);

    PmdEstimate moved{filt_grid, DenseTensor{}, PmdKind::filtering};
    if (filtering.is_tt())
        moved.weights = tt_interpolate(filtering.tt(), filtering.grid, filt_grid);
    else
        moved.weights = interpolate_dense(filtering.dense(), filtering.grid, filt_grid);
    return {normalize(moved), std::move(pred_grid)};
}

StepResult fft_pmf_step(const PmdEstimate& predictive, const StateSpaceModel& model,
                        const std::optional<Eigen::VectorXd>& z, const GridConfig& grid_cfg) {
    const Eigen::MatrixXd& F = linear_dynamics(model);
    StepResult out;
    out.filtering = dense_filtering(predictive, model, z, out.diag);
    out.filtering_moments = filtering_moments(out.filtering, out.diag);

    auto t0 = std::chrono::steady_clock::now();
    const GridRedesign rd = grid_redesign(out.filtering, out.filtering_moments, model, grid_cfg);
    out.diag.interpolation_seconds += seconds_since(t0);

    const DenseTensor kernel = middle_row_kernel_dense(model, rd.filtering.grid);
    const PmdEstimate lattice = time_update_fft_dense(kernel, rd.filtering);

    t0 = std::chrono::steady_clock::now();
    DenseTensor w = interpolate_mapped_dense(lattice.dense(), lattice.grid, F, rd.predictive_grid);
    out.diag.interpolation_seconds += seconds_since(t0);

    out.predictive = normalize(PmdEstimate{rd.predictive_grid, std::move(w), PmdKind::predictive});
    out.diag.tpm_bytes = kernel.size() * sizeof(double);
    out.diag.pmd_bytes = out.predictive.storage_bytes();
    out.diag.predictive_mass = pmd_mass(out.predictive);
    return out;
}

PmdEstimate measurement_update_tt(const PmdEstimate& predictive, const StateSpaceModel& model,
                                  const Eigen::VectorXd& z, const TtFilterConfig& cfg, std::uint64_t seed,
                                  StepDiagnostics& diag) {
    const Likelihood lik(model, z);
    const Grid& grid = predictive.grid;
    BlackBoxTensor bb{grid.shape(), [&](std::span<const std::size_t> idx) { return lik(grid.point(idx)); }};
    const CrossResult res = greedy_cross(bb, seeded(cfg.cross, seed, kLikelihood));
    note(diag, res.report);
    try {
        return round_and_normalize(tt_hadamard(res.tt, predictive.tt()), grid, PmdKind::filtering, cfg);
    } catch (const DegenerateDensityError&) {
        diag.outlier = true;
        PmdEstimate f = normalize(predictive);
        f.kind = PmdKind::filtering;
        return f;
    }
}

StepResult tt_pmf_step(const PmdEstimate& predictive, const StateSpaceModel& model,
                       const std::optional<Eigen::VectorXd>& z, const GridConfig& grid_cfg,
                       const TtFilterConfig& cfg, std::uint64_t seed) {
    StepResult out;
    out.filtering = tt_filtering(predictive, model, z, cfg, seed, out.diag);
    out.filtering_moments = filtering_moments(out.filtering, out.diag);
    record_negative_mass(out.filtering, derive_seed(seed, kClip), out.diag);

    const MomentEstimate pred = kalman_predict(out.filtering_moments, model);
    const Grid new_grid = design_grid(pred, counts_for(model.dim_x, grid_cfg), grid_cfg.sigma_mult);
    const TransitionKernel kernel(model, new_grid, out.filtering.grid);
    Shape shape = new_grid.shape();
    const Shape old_shape = out.filtering.grid.shape();
    shape.insert(shape.end(), old_shape.begin(), old_shape.end());
    // the kernel peaks where the new point is the image of the old one
    std::vector<MultiIndex> hints;
    const Eigen::VectorXd sd = out.filtering_moments.cov.diagonal().cwiseSqrt();
    for (std::size_t k = 0; k <= 2 * model.dim_x; ++k) {
        Eigen::VectorXd x_old = out.filtering_moments.mean;
        if (k > 0) x_old((k - 1) / 2) += (k % 2 == 1 ? 1.0 : -1.0) * sd((k - 1) / 2);
        MultiIndex hint = nearest_index(new_grid, model.propagate(x_old));
        const MultiIndex old_hint = nearest_index(out.filtering.grid, x_old);
        hint.insert(hint.end(), old_hint.begin(), old_hint.end());
        hints.push_back(std::move(hint));
    }
    const CrossResult T = greedy_cross({shape, [&](std::span<const std::size_t> idx) { return kernel(idx); }, hints},
                                       seeded(cfg.cross, seed, kTransition));
    note(out.diag, T.report);

    const TensorTrain raw = tt_einsum_tpm(T.tt, out.filtering.tt());
    out.diag.raw_predictive_mass = pmd_mass(PmdEstimate{new_grid, raw, PmdKind::predictive});
    out.predictive = round_and_normalize(raw, new_grid, PmdKind::predictive, cfg);
    record_negative_mass(out.predictive, derive_seed(seed, kClip + 16), out.diag);
    out.diag.tpm_bytes = tt_storage_bytes(T.tt);
    out.diag.pmd_bytes = out.predictive.storage_bytes();
    out.diag.predictive_mass = pmd_mass(out.predictive);
    return out;
}

StepResult tt_fft_pmf_step(const PmdEstimate& predictive, const StateSpaceModel& model,
                           const std::optional<Eigen::VectorXd>& z, const GridConfig& grid_cfg,
                           const TtFilterConfig& cfg, std::uint64_t seed) {
    const Eigen::MatrixXd& F = linear_dynamics(model);
    StepResult out;
    out.filtering = tt_filtering(predictive, model, z, cfg, seed, out.diag);
    out.filtering_moments = filtering_moments(out.filtering, out.diag);
    record_negative_mass(out.filtering, derive_seed(seed, kClip), out.diag);

    auto t0 = std::chrono::steady_clock::now();
    const GridRedesign rd = grid_redesign(out.filtering, out.filtering_moments, model, grid_cfg);
    out.diag.interpolation_seconds += seconds_since(t0);
    const Grid& filt_grid = rd.filtering.grid;

    const CrossResult K =
        greedy_cross({filt_grid.shape(), middle_row_kernel(model, filt_grid), {MultiIndex(model.dim_x, 0)}},
                     seeded(cfg.cross, seed, kKernel));
    note(out.diag, K.report);
    const TensorTrain lattice = tt_fft_convolve(K.tt, rd.filtering.tt(), cfg.round_tol, cfg.round_max_rank);

    std::vector<Eigen::VectorXd> corners = filt_grid.corners();
    for (auto& c : corners) c = F * c;
    const Grid pred_grid = circumscribing_grid(corners, counts_for(model.dim_x, grid_cfg));
    t0 = std::chrono::steady_clock::now();
    const CrossResult moved = tt_interpolate_mapped(lattice, filt_grid, F, pred_grid, seeded(cfg.cross, seed, kInterpolation));
    out.diag.interpolation_seconds += seconds_since(t0);
    note(out.diag, moved.report);

    out.diag.raw_predictive_mass = pmd_mass(PmdEstimate{pred_grid, moved.tt, PmdKind::predictive});
    out.predictive = round_and_normalize(moved.tt, pred_grid, PmdKind::predictive, cfg);
    record_negative_mass(out.predictive, derive_seed(seed, kClip + 16), out.diag);
    out.diag.tpm_bytes = tt_storage_bytes(K.tt);
    out.diag.pmd_bytes = out.predictive.storage_bytes();
    out.diag.predictive_mass = pmd_mass(out.predictive);
    return out;
}

}  // namespace ttpmf
