#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "ttpmf/filters.hpp"
#include "ttpmf/grid.hpp"
#include "ttpmf/state_space.hpp"

namespace ttpmf {

enum class FilterKind { pmf, fft_pmf, tt_pmf, tt_fft_pmf, pf, kalman };

std::string to_string(FilterKind f);
/// Throws ConfigError for unknown names.
FilterKind filter_from_string(const std::string& name);
/// The dense filters, which need the full transition tensor or grid arrays.
bool is_dense(FilterKind f);

struct RunConfig {
    /// radar, linear1d, linear2d, or linear (F, Q, R given explicitly).
    std::string scenario = "radar";
    std::vector<FilterKind> filters = {FilterKind::pmf, FilterKind::fft_pmf, FilterKind::tt_pmf,
                                       FilterKind::tt_fft_pmf, FilterKind::pf};
    std::size_t runs = 50;
    std::uint64_t seed = 1;
    std::size_t k_f = 10;
    /// Empty means the scenario default.
    Eigen::VectorXd x0_mean;
    Eigen::MatrixXd x0_cov;
    /// Only for scenario "linear"; the measurement is the full state.
    Eigen::MatrixXd F, Q, R;

    GridConfig grid;
    std::size_t dense_guard_bytes = std::size_t{1} << 32;
    TtFilterConfig tt;
    std::size_t particles = 10000;

    std::vector<std::size_t> dims = {2, 3, 4, 5};
    std::size_t scaling_points_per_axis = 15;
    std::size_t scaling_steps = 1;

    bool timing = false;
    std::filesystem::path out_dir = "out";

    /// Throws ConfigError on invalid values.
    void validate() const;
};

/// Reads a JSON configuration; keys not present keep their defaults.
/// Throws ConfigError on malformed files or unknown keys.
RunConfig load_config(const std::filesystem::path& path);
RunConfig parse_config(const std::string& json_text);

struct TraceRow {
    std::size_t run = 0;
    std::size_t k = 0;
    Eigen::VectorXd truth;
    Eigen::VectorXd estimate;
    Eigen::VectorXd sd;  ///< posterior standard deviations; empty for the particle filter
};

struct FilterSummary {
    FilterKind filter = FilterKind::pmf;
    std::size_t d = 0;
    std::vector<double> rmse;          ///< per state component
    std::vector<double> rel_diff_pct;  ///< vs the dense standard filter, per component
    std::size_t bytes_tpm = 0;         ///< largest over the steps
    std::size_t bytes_pmd = 0;
    bool bytes_estimated = false;      ///< formula, not a measured structure
    double ms_per_step = 0.0;          ///< median over all steps and runs
    double clipped_mass = 0.0;         ///< largest per step
    double max_mass_error = 0.0;       ///< largest |mass - 1| of any PMD after any step
    double max_cross_error = 0.0;
    bool cross_capped = false;
    std::size_t cross_calls = 0;       ///< evaluator and probe calls, summed
    std::size_t outliers = 0;
    std::size_t steps = 0;
    /// "ok", "skipped: ..." or "failed...".
    std::string status = "ok";
    [[nodiscard]] bool ok() const;
    [[nodiscard]] bool failed() const;
};

struct RunReport {
    std::string scenario;
    bool timing = false;
    std::vector<FilterSummary> summaries;
    /// One entry per summary, same order; compare runs only.
    std::vector<std::vector<TraceRow>> traces;
    /// No summary failed; guard skips are not failures.
    [[nodiscard]] bool all_ok() const;
};

struct Scenario {
    StateSpaceModel model;
    MomentEstimate prior;
    /// Measurement matrix of the linear scenarios.
    std::optional<Eigen::MatrixXd> H;
};
Scenario make_scenario(const RunConfig& cfg);

/// Seed streams: trajectory of run r, filters of run r.
std::uint64_t trajectory_seed(std::uint64_t master, std::size_t run);
std::uint64_t filter_seed(std::uint64_t master, std::size_t run);

/// Runs every configured filter on the same trajectories.
RunReport run_compare(const RunConfig& cfg);

/// One summary per (filter, d) on the synthetic family; dense filters are
/// skipped with estimated storage where 8 * N^(2d) exceeds the guard.
RunReport run_scaling(const RunConfig& cfg);

/// Writes summary.csv, trace_<filter>.csv (compare runs) and summary.json
/// into dir. Throws std::runtime_error with the path on I/O failure.
void emit_csv(const RunReport& report, const std::filesystem::path& dir);

/// The nine summary columns, comma separated.
std::string summary_header();

}  // namespace ttpmf
