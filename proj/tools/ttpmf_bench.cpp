// ttpmf_bench: scenario comparisons, dimension sweeps and the oracle self-test.

#include <chrono>
#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include "oracle.hpp"
#include "ttpmf/bench.hpp"
#include "ttpmf/errors.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kFilterFailure = 1;
constexpr int kConfigError = 2;

void print_summary(const ttpmf::RunReport& report) {
    for (const auto& s : report.summaries) {
        std::printf("%-11s d=%zu status=%s", ttpmf::to_string(s.filter).c_str(), s.d, s.status.c_str());
        for (std::size_t i = 0; i < s.rmse.size(); ++i) std::printf(" rmse%zu=%.6g", i + 1, s.rmse[i]);
        for (std::size_t i = 0; i < s.rel_diff_pct.size(); ++i) std::printf(" rel%zu=%.4g%%", i + 1, s.rel_diff_pct[i]);
        std::printf(" tpm=%zuB pmd=%zuB%s\n", s.bytes_tpm, s.bytes_pmd, s.bytes_estimated ? " (estimated)" : "");
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Grid-based Bayesian filters in tensor-train format"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::vector<std::size_t> dims;
    bool timing = false;
    std::size_t runs = 0;
    std::uint64_t seed = 0;

    auto* compare = app.add_subcommand("compare", "Run every configured filter on shared trajectories");
    compare->add_option("--config", config_path, "JSON configuration")->required()->check(CLI::ExistingFile);
    compare->add_option("--out", out_dir, "Output directory (overrides report.out_dir)");
    compare->add_option("--runs", runs, "Monte Carlo runs (overrides monte_carlo.runs)");
    compare->add_option("--seed", seed, "Master seed (overrides monte_carlo.seed)");
    compare->add_flag("--timing", timing, "Write per-step wall-clock times");

    auto* scaling = app.add_subcommand("scaling", "Storage and step time against the state dimension");
    scaling->add_option("--config", config_path, "JSON configuration")->required()->check(CLI::ExistingFile);
    scaling->add_option("--dims", dims, "State dimensions, e.g. 2,3,4,5")->delimiter(',');
    scaling->add_option("--out", out_dir, "Output directory (overrides report.out_dir)");
    scaling->add_option("--seed", seed, "Master seed (overrides monte_carlo.seed)");
    scaling->add_flag("--timing", timing, "Write per-step wall-clock times");

    std::uint64_t selftest_seed = 1;
    auto* selftest = app.add_subcommand("selftest", "Compare every TT operation with brute-force references");
    selftest->add_option("--seed", selftest_seed, "Seed of the random instances");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kOk : kConfigError;
    }

    if (*selftest) {
        const auto t0 = std::chrono::steady_clock::now();
        const auto cases = ttpmf::oracle::run_oracle_suite(selftest_seed);
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        bool all = true;
        for (const auto& c : cases) {
            std::printf("%s %-13s instances=%zu worst_rel_error=%.3g\n", c.pass ? "PASS" : "FAIL", c.op.c_str(),
                        c.instances, c.worst_error);
            all = all && c.pass;
        }
        std::printf("%s selftest (%.2f s)\n", all ? "PASS" : "FAIL", secs);
        return all ? kOk : kFilterFailure;
    }

    ttpmf::RunConfig cfg;
    try {
        cfg = ttpmf::load_config(config_path);
        if (!out_dir.empty()) cfg.out_dir = out_dir;
        if (timing) cfg.timing = true;
        if (runs > 0) cfg.runs = runs;
        if (seed > 0) cfg.seed = seed;
        if (!dims.empty()) cfg.dims = dims;
        cfg.validate();
    } catch (const ttpmf::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfigError;
    }

    try {
        const ttpmf::RunReport report = *compare ? ttpmf::run_compare(cfg) : ttpmf::run_scaling(cfg);
        ttpmf::emit_csv(report, cfg.out_dir);
        print_summary(report);
        std::printf("wrote %s\n", cfg.out_dir.string().c_str());
        return report.all_ok() ? kOk : kFilterFailure;
    } catch (const ttpmf::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfigError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kFilterFailure;
    }
}
