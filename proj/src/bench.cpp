#include "ttpmf/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "ttpmf/errors.hpp"
#include "ttpmf/models.hpp"
#include "ttpmf/particle_filter.hpp"
#include "ttpmf/seed.hpp"

namespace ttpmf {

using nlohmann::json;

namespace {

constexpr std::uint64_t kPriorTag = 1u << 20;
constexpr std::uint64_t kParticleTag = (1u << 20) + 1;

const std::vector<std::pair<FilterKind, const char*>> kFilterNames = {
    {FilterKind::pmf, "pmf"},       {FilterKind::fft_pmf, "fft_pmf"}, {FilterKind::tt_pmf, "tt_pmf"},
    {FilterKind::tt_fft_pmf, "tt_fft_pmf"}, {FilterKind::pf, "pf"},   {FilterKind::kalman, "kalman"}};

// ---- config parsing ----

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + ": expected an object");
    for (const auto& [key, _] : j.items()) {
        if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
            throw ConfigError(where + ": unknown key '" + key + "'");
    }
}

template <class T>
void read(const json& j, const char* key, T& out, const std::string& where) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(where + "." + key + ": " + e.what());
    }
}

Eigen::VectorXd to_vector(const std::vector<double>& v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Eigen::MatrixXd read_matrix(const json& j, const char* key, const std::string& where) {
    std::vector<std::vector<double>> rows;
    read(j, key, rows, where);
    if (rows.empty()) throw ConfigError(where + "." + key + ": empty matrix");
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != rows[0].size()) throw ConfigError(where + "." + key + ": ragged rows");
        for (std::size_t c = 0; c < rows[r].size(); ++c)
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
    return m;
}

void read_scenario(const json& j, RunConfig& cfg) {
    const std::string w = "scenario";
    check_keys(j, {"id", "k_f", "x0_mean", "x0_cov_diag", "F", "Q", "R"}, w);
    read(j, "id", cfg.scenario, w);
    read(j, "k_f", cfg.k_f, w);
    if (j.contains("x0_mean")) {
        std::vector<double> v;
        read(j, "x0_mean", v, w);
        cfg.x0_mean = to_vector(v);
    }
    if (j.contains("x0_cov_diag")) {
        std::vector<double> v;
        read(j, "x0_cov_diag", v, w);
        cfg.x0_cov = to_vector(v).asDiagonal();
    }
    if (j.contains("F")) cfg.F = read_matrix(j, "F", w);
    if (j.contains("Q")) cfg.Q = read_matrix(j, "Q", w);
    if (j.contains("R")) cfg.R = read_matrix(j, "R", w);
}

void read_tt(const json& j, TtFilterConfig& tt) {
    const std::string w = "tt";
    check_keys(j,
               {"cross_tol", "cross_max_rank", "cross_max_sweeps", "cross_initial_rank", "cross_validation_count",
                "cross_random_candidates", "cross_initial_samples", "cross_full_search_elements", "cross_restarts",
                "round_tol", "round_max_rank", "normalize_before_round"},
               w);
    read(j, "cross_tol", tt.cross.tol, w);
    read(j, "cross_max_rank", tt.cross.max_rank, w);
    read(j, "cross_max_sweeps", tt.cross.max_sweeps, w);
    read(j, "cross_initial_rank", tt.cross.initial_rank, w);
    read(j, "cross_validation_count", tt.cross.validation_count, w);
    read(j, "cross_random_candidates", tt.cross.random_candidates, w);
    read(j, "cross_initial_samples", tt.cross.initial_samples, w);
    read(j, "cross_full_search_elements", tt.cross.full_search_elements, w);
    read(j, "cross_restarts", tt.cross.restarts, w);
    read(j, "round_tol", tt.round_tol, w);
    if (j.contains("round_max_rank") && !j.at("round_max_rank").is_null()) read(j, "round_max_rank", tt.round_max_rank, w);
    read(j, "normalize_before_round", tt.normalize_before_round, w);
}

// ---- running filters ----

struct StepRecord {
    Eigen::VectorXd mean;
    Eigen::VectorXd sd;
    double seconds = 0.0;
};

struct FilterRun {
    std::vector<StepRecord> steps;
    std::size_t bytes_tpm = 0;
    std::size_t bytes_pmd = 0;
    double clipped_mass = 0.0;
    double max_mass_error = 0.0;
    double max_cross_error = 0.0;
    std::size_t cross_calls = 0;
    bool cross_capped = false;
    std::size_t outliers = 0;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Eigen::VectorXd sd_of(const Eigen::MatrixXd& cov) { return cov.diagonal().cwiseMax(0.0).cwiseSqrt(); }

void absorb(FilterRun& run, const StepDiagnostics& diag) {
    run.bytes_tpm = std::max(run.bytes_tpm, diag.tpm_bytes);
    run.bytes_pmd = std::max(run.bytes_pmd, diag.pmd_bytes);
    run.clipped_mass = std::max(run.clipped_mass, diag.clipped_mass);
    run.max_mass_error = std::max({run.max_mass_error, std::abs(diag.filtering_mass - 1.0),
                                   std::abs(diag.predictive_mass - 1.0)});
    run.max_cross_error = std::max(run.max_cross_error, diag.cross_error);
    for (const CrossReport& r : diag.cross_reports) run.cross_calls += r.evaluator_calls + r.probe_calls;
    if (diag.cross_capped) run.cross_capped = true;
    if (diag.outlier) ++run.outliers;
}

FilterRun run_grid_filter(FilterKind kind, const Scenario& sc, const Trajectory& traj, const RunConfig& cfg,
                          std::uint64_t seed) {
    const std::size_t d = sc.model.dim_x;
    FilterRun run;
    const bool tt = kind == FilterKind::tt_pmf || kind == FilterKind::tt_fft_pmf;
    CrossReport prior_report;
    PmdEstimate pred = tt ? initial_pmd_tt(sc.prior, d, cfg.grid, cfg.tt, derive_seed(seed, kPriorTag), &prior_report)
                          : initial_pmd_dense(sc.prior, d, cfg.grid);
    run.max_mass_error = std::abs(pmd_mass(pred) - 1.0);
    if (tt) {
        run.max_cross_error = prior_report.achieved_error;
        run.cross_calls = prior_report.evaluator_calls + prior_report.probe_calls;
    }
    const auto k_f = static_cast<std::size_t>(traj.measurements.rows());
    for (std::size_t k = 0; k < k_f; ++k) {
        const Eigen::VectorXd z = traj.measurements.row(static_cast<Eigen::Index>(k)).transpose();
        const std::uint64_t step_seed = derive_seed(seed, k);
        const auto t0 = std::chrono::steady_clock::now();
        StepResult r;
        switch (kind) {
        case FilterKind::pmf: r = pmf_step(pred, sc.model, z, cfg.grid); break;
        case FilterKind::fft_pmf: r = fft_pmf_step(pred, sc.model, z, cfg.grid); break;
        case FilterKind::tt_pmf: r = tt_pmf_step(pred, sc.model, z, cfg.grid, cfg.tt, step_seed); break;
        case FilterKind::tt_fft_pmf: r = tt_fft_pmf_step(pred, sc.model, z, cfg.grid, cfg.tt, step_seed); break;
        default: throw ConfigError("run_grid_filter: not a grid filter");
        }
        const double secs = seconds_since(t0);
        run.steps.push_back({r.filtering_moments.mean, sd_of(r.filtering_moments.cov), secs});
        absorb(run, r.diag);
        pred = std::move(r.predictive);
    }
    return run;
}

FilterRun run_particle_filter(const Scenario& sc, const Trajectory& traj, const RunConfig& cfg, std::uint64_t seed) {
    FilterRun run;
    std::mt19937_64 rng(derive_seed(seed, kParticleTag));
    ParticleSet pred = initial_particles(sc.prior, cfg.particles, rng);
    run.bytes_pmd = pred.size() * (static_cast<std::size_t>(pred.particles.rows()) + 1) * sizeof(double);
    for (Eigen::Index k = 0; k < traj.measurements.rows(); ++k) {
        const Eigen::VectorXd z = traj.measurements.row(k).transpose();
        const auto t0 = std::chrono::steady_clock::now();
        PfStepResult r = bootstrap_pf_step(pred, sc.model, z, rng);
        const double secs = seconds_since(t0);
        const Eigen::MatrixXd centred = r.filtering.particles.colwise() - r.filtering_mean;
        const Eigen::VectorXd var = centred.array().square().matrix() * r.filtering.weights;
        run.steps.push_back({r.filtering_mean, var.cwiseSqrt(), secs});
        run.max_mass_error = std::max(run.max_mass_error, std::abs(r.filtering.weights.sum() - 1.0));
        pred = std::move(r.predictive);
    }
    return run;
}

FilterRun run_kalman(const Scenario& sc, const Trajectory& traj) {
    if (!sc.H) throw ConfigError("kalman: the scenario has no linear measurement");
    FilterRun run;
    const auto d = static_cast<std::size_t>(sc.model.dim_x);
    run.bytes_tpm = d * d * sizeof(double);
    run.bytes_pmd = (d + d * d) * sizeof(double);
    MomentEstimate pred = sc.prior;
    for (Eigen::Index k = 0; k < traj.measurements.rows(); ++k) {
        const Eigen::VectorXd z = traj.measurements.row(k).transpose();
        const auto t0 = std::chrono::steady_clock::now();
        const MomentEstimate filt = kalman_update(pred, *sc.H, sc.model.R, z);
        pred = kalman_predict(filt, sc.model);
        run.steps.push_back({filt.mean, sd_of(filt.cov), seconds_since(t0)});
    }
    return run;
}

FilterRun run_filter(FilterKind kind, const Scenario& sc, const Trajectory& traj, const RunConfig& cfg,
                     std::uint64_t seed) {
    switch (kind) {
    case FilterKind::pf: return run_particle_filter(sc, traj, cfg, seed);
    case FilterKind::kalman: return run_kalman(sc, traj);
    default: return run_grid_filter(kind, sc, traj, cfg, seed);
    }
}

std::string csv_safe(std::string s) {
    std::replace(s.begin(), s.end(), ',', ';');
    std::replace(s.begin(), s.end(), '\n', ' ');
    return s;
}

// Accumulates runs of one filter into a summary.
struct Accumulator {
    FilterSummary summary;
    std::vector<double> sq_err;
    std::size_t samples = 0;
    std::vector<double> step_ms;
    std::vector<TraceRow> trace;

    void add(const FilterRun& run, const Trajectory& traj, std::size_t run_index) {
        const std::size_t d = summary.d;
        if (sq_err.empty()) sq_err.assign(d, 0.0);
        for (std::size_t k = 0; k < run.steps.size(); ++k) {
            const Eigen::VectorXd truth = traj.states.row(static_cast<Eigen::Index>(k)).transpose();
            const Eigen::VectorXd err = run.steps[k].mean - truth;
            for (std::size_t i = 0; i < d; ++i) sq_err[i] += err(static_cast<Eigen::Index>(i)) * err(static_cast<Eigen::Index>(i));
            ++samples;
            step_ms.push_back(1e3 * run.steps[k].seconds);
            trace.push_back({run_index, k, truth, run.steps[k].mean, run.steps[k].sd});
        }
        summary.bytes_tpm = std::max(summary.bytes_tpm, run.bytes_tpm);
        summary.bytes_pmd = std::max(summary.bytes_pmd, run.bytes_pmd);
        summary.clipped_mass = std::max(summary.clipped_mass, run.clipped_mass);
        summary.max_mass_error = std::max(summary.max_mass_error, run.max_mass_error);
        summary.max_cross_error = std::max(summary.max_cross_error, run.max_cross_error);
        summary.cross_calls += run.cross_calls;
        summary.cross_capped = summary.cross_capped || run.cross_capped;
        summary.outliers += run.outliers;
        summary.steps += run.steps.size();
    }

    void finish() {
        summary.rmse.clear();
        for (double s : sq_err) summary.rmse.push_back(samples ? std::sqrt(s / static_cast<double>(samples)) : 0.0);
        if (!step_ms.empty()) {
            std::sort(step_ms.begin(), step_ms.end());
            const std::size_t n = step_ms.size();
            summary.ms_per_step = n % 2 ? step_ms[n / 2] : 0.5 * (step_ms[n / 2 - 1] + step_ms[n / 2]);
        }
    }
};

void fill_relative_differences(RunReport& report) {
    std::vector<const FilterSummary*> bases;
    for (const FilterSummary& s : report.summaries)
        if (s.filter == FilterKind::pmf && s.ok()) bases.push_back(&s);
    for (FilterSummary& s : report.summaries) {
        s.rel_diff_pct.clear();
        if (!s.ok()) continue;
        for (const FilterSummary* b : bases) {
            if (b->d != s.d) continue;
            for (std::size_t i = 0; i < s.rmse.size(); ++i)
                s.rel_diff_pct.push_back(100.0 * std::abs(s.rmse[i] - b->rmse[i]) / b->rmse[i]);
        }
    }
}

RunConfig effective(const RunConfig& cfg) {
    RunConfig c = cfg;
    c.grid.dense_guard_elements = cfg.dense_guard_bytes / sizeof(double);
    return c;
}

std::string number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string joined(const std::vector<double>& v) {
    if (v.empty()) return "NA";
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ";" : "") + number(v[i]);
    return out;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
    f << content;
    f.close();
    if (!f) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace

std::string to_string(FilterKind f) {
    for (const auto& [k, name] : kFilterNames)
        if (k == f) return name;
    return "unknown";
}

FilterKind filter_from_string(const std::string& name) {
    for (const auto& [k, n] : kFilterNames)
        if (name == n) return k;
    throw ConfigError("unknown filter '" + name + "'");
}

bool is_dense(FilterKind f) { return f == FilterKind::pmf || f == FilterKind::fft_pmf; }

bool FilterSummary::ok() const { return status == "ok"; }
bool FilterSummary::failed() const { return status.rfind("failed", 0) == 0; }

bool RunReport::all_ok() const {
    return std::none_of(summaries.begin(), summaries.end(), [](const FilterSummary& s) { return s.failed(); });
}

void RunConfig::validate() const {
    if (runs < 1) throw ConfigError("runs must be at least 1");
    if (k_f < 1) throw ConfigError("k_f must be at least 1");
    if (grid.points_per_axis < 3 || grid.points_per_axis % 2 == 0)
        throw ConfigError("points_per_axis must be odd and at least 3");
    if (scaling_points_per_axis < 3 || scaling_points_per_axis % 2 == 0)
        throw ConfigError("scaling points_per_axis must be odd and at least 3");
    if (!(grid.sigma_mult > 0.0)) throw ConfigError("sigma_mult must be positive");
    if (!(tt.cross.tol > 0.0)) throw ConfigError("cross_tol must be positive");
    if (!(tt.round_tol > 0.0)) throw ConfigError("round_tol must be positive");
    if (tt.cross.max_rank < 1) throw ConfigError("cross_max_rank must be at least 1");
    if (particles < 1) throw ConfigError("particle count must be at least 1");
    if (dense_guard_bytes < sizeof(double)) throw ConfigError("dense_guard_bytes too small");
    for (std::size_t d : dims)
        if (d < 2) throw ConfigError("scaling dims must be at least 2");
    if (scenario != "radar" && scenario != "linear1d" && scenario != "linear2d" && scenario != "linear")
        throw ConfigError("unknown scenario '" + scenario + "'");
    if (scenario == "linear" && (F.size() == 0 || Q.size() == 0 || R.size() == 0))
        throw ConfigError("scenario 'linear' needs F, Q and R");
}

RunConfig parse_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    RunConfig cfg;
    check_keys(j, {"scenario", "filters", "monte_carlo", "grid", "tt", "particles", "scaling", "report"}, "config");
    if (j.contains("scenario")) read_scenario(j.at("scenario"), cfg);
    if (j.contains("filters")) {
        std::vector<std::string> names;
        read(j, "filters", names, "config");
        cfg.filters.clear();
        for (const std::string& n : names) cfg.filters.push_back(filter_from_string(n));
    }
    if (j.contains("monte_carlo")) {
        const json& m = j.at("monte_carlo");
        check_keys(m, {"runs", "seed"}, "monte_carlo");
        read(m, "runs", cfg.runs, "monte_carlo");
        read(m, "seed", cfg.seed, "monte_carlo");
    }
    if (j.contains("grid")) {
        const json& g = j.at("grid");
        check_keys(g, {"points_per_axis", "sigma_mult", "dense_guard_bytes"}, "grid");
        read(g, "points_per_axis", cfg.grid.points_per_axis, "grid");
        read(g, "sigma_mult", cfg.grid.sigma_mult, "grid");
        read(g, "dense_guard_bytes", cfg.dense_guard_bytes, "grid");
    }
    if (j.contains("tt")) read_tt(j.at("tt"), cfg.tt);
    if (j.contains("particles")) {
        const json& p = j.at("particles");
        check_keys(p, {"count"}, "particles");
        read(p, "count", cfg.particles, "particles");
    }
    if (j.contains("scaling")) {
        const json& s = j.at("scaling");
        check_keys(s, {"dims", "points_per_axis", "steps"}, "scaling");
        read(s, "dims", cfg.dims, "scaling");
        read(s, "points_per_axis", cfg.scaling_points_per_axis, "scaling");
        read(s, "steps", cfg.scaling_steps, "scaling");
    }
    if (j.contains("report")) {
        const json& r = j.at("report");
        check_keys(r, {"timing", "out_dir"}, "report");
        read(r, "timing", cfg.timing, "report");
        std::string out = cfg.out_dir.string();
        read(r, "out_dir", out, "report");
        cfg.out_dir = out;
    }
    cfg.validate();
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot read config " + path.string());
    std::stringstream ss;
    ss << f.rdbuf();
    try {
        return parse_config(ss.str());
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

Scenario make_scenario(const RunConfig& cfg) {
    Scenario sc;
    if (cfg.scenario == "radar") {
        sc.model = radar_model();
        sc.prior = radar_prior();
    } else if (cfg.scenario == "linear1d") {
        const Eigen::MatrixXd one = Eigen::MatrixXd::Identity(1, 1);
        sc.model = linear_gaussian_model(0.9 * one, one, one);
        sc.prior = {Eigen::VectorXd::Constant(1, 1.0), 4.0 * one};
    } else if (cfg.scenario == "linear2d") {
        const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(2, 2);
        sc.model = linear_gaussian_model(*radar_model().F, I, I);
        sc.prior = radar_prior();
    } else if (cfg.scenario == "linear") {
        sc.model = linear_gaussian_model(cfg.F, cfg.Q, cfg.R);
        const auto n = cfg.F.rows();
        sc.prior = {Eigen::VectorXd::Zero(n), Eigen::MatrixXd::Identity(n, n)};
    } else {
        throw ConfigError("unknown scenario '" + cfg.scenario + "'");
    }
    if (cfg.scenario != "radar") sc.H = Eigen::MatrixXd::Identity(sc.model.F->rows(), sc.model.F->rows());
    const auto d = static_cast<Eigen::Index>(sc.model.dim_x);
    if (cfg.x0_mean.size() > 0) {
        if (cfg.x0_mean.size() != d) throw ConfigError("x0_mean has the wrong dimension");
        sc.prior.mean = cfg.x0_mean;
    }
    if (cfg.x0_cov.size() > 0) {
        if (cfg.x0_cov.rows() != d) throw ConfigError("x0_cov_diag has the wrong dimension");
        sc.prior.cov = cfg.x0_cov;
    }
    return sc;
}

std::uint64_t trajectory_seed(std::uint64_t master, std::size_t run) { return derive_seed(master, 2 * run); }
std::uint64_t filter_seed(std::uint64_t master, std::size_t run) { return derive_seed(master, 2 * run + 1); }

RunReport run_compare(const RunConfig& cfg_in) {
    cfg_in.validate();
    const RunConfig cfg = effective(cfg_in);
    const Scenario sc = make_scenario(cfg);
    for (FilterKind f : cfg.filters)
        if (f == FilterKind::kalman && !sc.H) throw ConfigError("filter 'kalman' needs a linear scenario");

    std::vector<Accumulator> acc(cfg.filters.size());
    for (std::size_t i = 0; i < cfg.filters.size(); ++i) {
        acc[i].summary.filter = cfg.filters[i];
        acc[i].summary.d = sc.model.dim_x;
    }
    for (std::size_t run = 0; run < cfg.runs; ++run) {
        const Trajectory traj = simulate(sc.model, sc.prior.mean, sc.prior.cov, cfg.k_f, trajectory_seed(cfg.seed, run));
        for (std::size_t i = 0; i < cfg.filters.size(); ++i) {
            if (acc[i].summary.failed()) continue;
            try {
                acc[i].add(run_filter(cfg.filters[i], sc, traj, cfg, filter_seed(cfg.seed, run)), traj, run);
            } catch (const std::exception& e) {
                acc[i].summary.status = "failed in run " + std::to_string(run) + ": " + csv_safe(e.what());
            }
        }
    }
    RunReport report;
    report.scenario = cfg.scenario;
    report.timing = cfg.timing;
    for (Accumulator& a : acc) {
        a.finish();
        report.summaries.push_back(a.summary);
        report.traces.push_back(std::move(a.trace));
    }
    fill_relative_differences(report);
    return report;
}

RunReport run_scaling(const RunConfig& cfg_in) {
    cfg_in.validate();
    RunConfig cfg = effective(cfg_in);
    cfg.grid.points_per_axis = cfg.scaling_points_per_axis;
    for (FilterKind f : cfg.filters)
        if (f == FilterKind::kalman) throw ConfigError("filter 'kalman' is not available for the scaling family");

    RunReport report;
    report.scenario = "scaling";
    report.timing = cfg.timing;
    const auto N = static_cast<double>(cfg.grid.points_per_axis);
    for (std::size_t d : cfg.dims) {
        Scenario sc;
        sc.model = scaling_model(d);
        const auto n = static_cast<Eigen::Index>(d);
        sc.prior = {Eigen::VectorXd::Constant(n, 20.0), 9.0 * Eigen::MatrixXd::Identity(n, n)};
        const Trajectory traj = simulate(sc.model, sc.prior.mean, sc.prior.cov, cfg.scaling_steps,
                                         trajectory_seed(cfg.seed, d));
        const double dense_bytes = sizeof(double) * std::pow(N, 2.0 * static_cast<double>(d));
        for (FilterKind f : cfg.filters) {
            Accumulator a;
            a.summary.filter = f;
            a.summary.d = d;
            if (is_dense(f) && dense_bytes > static_cast<double>(cfg.dense_guard_bytes)) {
                a.summary.status = "skipped: dense guard";
                a.summary.bytes_estimated = true;
                a.summary.bytes_tpm = static_cast<std::size_t>(dense_bytes);
                a.summary.bytes_pmd = static_cast<std::size_t>(sizeof(double) * std::pow(N, static_cast<double>(d)));
                a.summary.rmse.assign(d, 0.0);
                report.summaries.push_back(a.summary);
                report.traces.emplace_back();
                continue;
            }
            try {
                a.add(run_filter(f, sc, traj, cfg, filter_seed(cfg.seed, d)), traj, 0);
            } catch (const std::exception& e) {
                a.summary.status = "failed: " + csv_safe(e.what());
            }
            a.finish();
            if (a.summary.rmse.empty()) a.summary.rmse.assign(d, 0.0);
            report.summaries.push_back(a.summary);
            report.traces.push_back(std::move(a.trace));
        }
    }
    fill_relative_differences(report);
    return report;
}

std::string summary_header() {
    return "filter,d,rmse,rel_diff_pct,bytes_tpm,bytes_pmd,ms_per_step,clipped_mass,status";
}

void emit_csv(const RunReport& report, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw std::runtime_error("cannot create " + dir.string() + ": " + ec.message());

    std::string summary = summary_header() + "\n";
    for (const FilterSummary& s : report.summaries) {
        summary += to_string(s.filter) + "," + std::to_string(s.d) + "," + joined(s.rmse) + "," + joined(s.rel_diff_pct) +
                   "," + std::to_string(s.bytes_tpm) + "," + std::to_string(s.bytes_pmd) + "," +
                   (report.timing && s.steps > 0 ? number(s.ms_per_step) : std::string("NA")) + "," +
                   number(s.clipped_mass) + "," + (s.bytes_estimated ? s.status + " (bytes estimated)" : s.status) +
                   "\n";
    }
    write_file(dir / "summary.csv", summary);

    json js;
    js["scenario"] = report.scenario;
    js["filters"] = json::array();
    for (const FilterSummary& s : report.summaries) {
        json e;
        e["filter"] = to_string(s.filter);
        e["d"] = s.d;
        e["rmse"] = s.rmse;
        e["rel_diff_pct"] = s.rel_diff_pct;
        e["bytes_tpm"] = s.bytes_tpm;
        e["bytes_pmd"] = s.bytes_pmd;
        e["bytes_estimated"] = s.bytes_estimated;
        e["ms_per_step"] = report.timing ? json(s.ms_per_step) : json(nullptr);
        e["clipped_mass"] = s.clipped_mass;
        e["max_mass_error"] = s.max_mass_error;
        e["max_cross_error"] = s.max_cross_error;
        e["cross_calls"] = s.cross_calls;
        e["cross_capped"] = s.cross_capped;
        e["outliers"] = s.outliers;
        e["steps"] = s.steps;
        e["status"] = s.status;
        js["filters"].push_back(e);
    }
    write_file(dir / "summary.json", js.dump(2) + "\n");

    if (report.scenario == "scaling") return;
    for (std::size_t i = 0; i < report.summaries.size() && i < report.traces.size(); ++i) {
        const std::size_t d = report.summaries[i].d;
        std::string out = "run,k";
        for (const char* col : {"true", "est", "err"})
            for (std::size_t c = 1; c <= d; ++c) out += std::string(",") + col + "_" + std::to_string(c);
        out += "\n";
        for (const TraceRow& r : report.traces[i]) {
            out += std::to_string(r.run) + "," + std::to_string(r.k);
            for (Eigen::Index c = 0; c < r.truth.size(); ++c) out += "," + number(r.truth(c));
            for (Eigen::Index c = 0; c < r.estimate.size(); ++c) out += "," + number(r.estimate(c));
            for (Eigen::Index c = 0; c < r.truth.size(); ++c) out += "," + number(r.estimate(c) - r.truth(c));
            out += "\n";
        }
        write_file(dir / ("trace_" + to_string(report.summaries[i].filter) + ".csv"), out);
    }
}

}  // namespace ttpmf
