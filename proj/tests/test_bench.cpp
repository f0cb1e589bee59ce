#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "ttpmf/bench.hpp"
#include "ttpmf/errors.hpp"

using namespace ttpmf;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

std::size_t columns(const std::string& line) { return static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1; }

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("ttpmf_test_" + name);
    fs::remove_all(p);
    return p;
}

RunConfig small_radar() {
    RunConfig c = parse_config(R"({
      "scenario": {"id": "radar", "k_f": 2},
      "filters": ["pmf", "fft_pmf", "tt_pmf", "tt_fft_pmf", "pf"],
      "monte_carlo": {"runs": 2, "seed": 4},
      "grid": {"points_per_axis": 11},
      "particles": {"count": 500}
    })");
    return c;
}

}  // namespace

TEST(Config, DefaultsAndOverrides) {
    const RunConfig c = parse_config(R"({"monte_carlo": {"runs": 3}, "tt": {"cross_tol": 1e-5, "round_max_rank": null}})");
    EXPECT_EQ(c.runs, 3u);
    EXPECT_EQ(c.scenario, "radar");
    EXPECT_DOUBLE_EQ(c.tt.cross.tol, 1e-5);
    EXPECT_EQ(c.grid.points_per_axis, 33u);
    EXPECT_EQ(c.filters.size(), 5u);
}

TEST(Config, InvalidValuesAreConfigErrors) {
    EXPECT_THROW((void)parse_config(R"({"monte_carlo": {"runs": 0}})"), ConfigError);
    EXPECT_THROW((void)parse_config(R"({"tt": {"round_tol": 0}})"), ConfigError);
    EXPECT_THROW((void)parse_config(R"({"grid": {"points_per_axis": 10}})"), ConfigError);
    EXPECT_THROW((void)parse_config(R"({"grid": {"spacing": 1}})"), ConfigError);
    EXPECT_THROW((void)parse_config(R"({"filters": ["ukf"]})"), ConfigError);
    EXPECT_THROW((void)parse_config(R"({"scenario": {"id": "linear"}})"), ConfigError);
    EXPECT_THROW((void)parse_config("{not json"), ConfigError);
    EXPECT_THROW((void)load_config("/nonexistent/config.json"), ConfigError);
}

TEST(Config, ExplicitLinearScenario) {
    const RunConfig c = parse_config(R"({"scenario": {"id": "linear", "F": [[0.5]], "Q": [[1]], "R": [[2]],
                                         "x0_mean": [1], "x0_cov_diag": [3]}})");
    const Scenario sc = make_scenario(c);
    EXPECT_EQ(sc.model.dim_x, 1u);
    EXPECT_DOUBLE_EQ(sc.model.R(0, 0), 2.0);
    EXPECT_DOUBLE_EQ(sc.prior.cov(0, 0), 3.0);
    ASSERT_TRUE(sc.H.has_value());
}

TEST(Csv, EmptyFilterListGivesHeaderOnly) {
    RunConfig c = small_radar();
    c.filters.clear();
    const fs::path dir = scratch("empty");
    emit_csv(run_compare(c), dir);
    EXPECT_EQ(slurp(dir / "summary.csv"), summary_header() + "\n");
    EXPECT_EQ(columns(summary_header()), 9u);
}

TEST(Csv, CompareRowsAndDeterminism) {
    const RunConfig c = small_radar();
    const RunReport r = run_compare(c);
    ASSERT_TRUE(r.all_ok());
    const fs::path a = scratch("a"), b = scratch("b");
    emit_csv(r, a);
    emit_csv(run_compare(c), b);
    for (const char* f : {"summary.csv", "summary.json", "trace_pmf.csv", "trace_tt_pmf.csv", "trace_pf.csv"})
        EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;

    std::istringstream lines(slurp(a / "summary.csv"));
    std::string line;
    std::size_t rows = 0;
    while (std::getline(lines, line)) {
        EXPECT_EQ(columns(line), 9u) << line;
        ++rows;
    }
    EXPECT_EQ(rows, 6u);
    for (const FilterSummary& s : r.summaries) {
        EXPECT_GT(s.bytes_pmd, 0u);
        for (double e : s.rmse) EXPECT_GE(e, 0.0);
    }
    std::istringstream trace(slurp(a / "trace_tt_fft_pmf.csv"));
    std::getline(trace, line);
    EXPECT_EQ(line, "run,k,true_1,true_2,est_1,est_2,err_1,err_2");
}

TEST(Csv, UnwritablePathReported) {
    const RunReport r;
    try {
        emit_csv(r, "/proc/ttpmf_cannot_write");
        FAIL() << "expected an exception";
    } catch (const std::runtime_error& e) {
        EXPECT_NE(std::string(e.what()).find("/proc/ttpmf_cannot_write"), std::string::npos);
    }
}

TEST(Compare, KalmanNeedsLinearScenario) {
    RunConfig c = small_radar();
    c.filters = {FilterKind::kalman};
    EXPECT_THROW((void)run_compare(c), ConfigError);
}

TEST(Compare, FilterFailureIsRecorded) {
    RunConfig c = small_radar();
    c.filters = {FilterKind::pmf, FilterKind::tt_pmf};
    c.dense_guard_bytes = 1024;  // the 11^4 transition tensor no longer fits
    const RunReport r = run_compare(c);
    EXPECT_FALSE(r.all_ok());
    EXPECT_TRUE(r.summaries[0].failed());
    EXPECT_TRUE(r.summaries[1].ok());
    EXPECT_TRUE(r.summaries[1].rel_diff_pct.empty());
}

TEST(Scaling, DenseSkippedAboveGuardWithEstimate) {
    RunConfig c;
    c.filters = {FilterKind::pmf, FilterKind::fft_pmf};
    c.dims = {4};
    c.scaling_points_per_axis = 15;
    c.dense_guard_bytes = std::size_t{1} << 32;
    const RunReport r = run_scaling(c);
    ASSERT_EQ(r.summaries.size(), 2u);
    for (const FilterSummary& s : r.summaries) {
        EXPECT_FALSE(s.failed());
        EXPECT_FALSE(s.ok());
        EXPECT_TRUE(s.bytes_estimated);
        EXPECT_EQ(s.bytes_tpm, 8ull * 2562890625ull);  // 15^8
    }
    EXPECT_TRUE(r.all_ok());
}

TEST(Scaling, MeasuredDenseBytesAtTwoDimensions) {
    RunConfig c;
    c.filters = {FilterKind::pmf};
    c.dims = {2};
    c.scaling_points_per_axis = 15;
    const RunReport r = run_scaling(c);
    ASSERT_EQ(r.summaries.size(), 1u);
    EXPECT_TRUE(r.summaries[0].ok()) << r.summaries[0].status;
    EXPECT_FALSE(r.summaries[0].bytes_estimated);
    EXPECT_EQ(r.summaries[0].bytes_tpm, 8u * 15 * 15 * 15 * 15);
}
