// Blocked cross-validation tuning run driven by a JSON config.

#include <CLI11.hpp>

#include <iostream>

#include "bcv/error.hpp"
#include "bcv/report.hpp"

int main(int argc, char** argv)
{
    CLI::App app{"Grid-search tuning with blocked or repeated cross-validation"};
    std::string config_path;
    std::string out_dir;
    unsigned threads = 0;
    std::uint64_t seed = 0;
    std::size_t perms = 0;
    bool dry = false;
    bool per_setting = false;
    bool quiet = false;

    app.add_option("--config", config_path, "JSON run configuration or a previous run_manifest.json")
        ->required()
        ->check(CLI::ExistingFile);
    auto* out_opt = app.add_option("--out", out_dir, "Output directory (overrides the config)");
    auto* threads_opt = app.add_option("--threads", threads, "Worker threads (else config, BCV_THREADS, hardware)")
                            ->check(CLI::PositiveNumber);
    auto* seed_opt = app.add_option("--seed", seed, "Master seed override");
    auto* perms_opt = app.add_option("--perms", perms, "Permutations per test; 0 skips the tests");
    app.add_flag("--dry-run", dry, "Print the number of settings and runs, then exit");
    app.add_flag("--per-setting-curve", per_setting, "Also write stderr_curve_per_setting.csv");
    app.add_flag("-q,--quiet", quiet, "No progress output");
    CLI11_PARSE(app, argc, argv);

    try {
        bcv::RunControls controls;
        if (*out_opt)
            controls.out = out_dir;
        if (*threads_opt)
            controls.threads = threads;
        if (*seed_opt)
            controls.seed = seed;
        if (*perms_opt)
            controls.permutations = perms;
        controls.per_setting_curve = per_setting;
        controls.log = quiet ? nullptr : &std::cerr;

        const bcv::RunConfig config = bcv::load_config(config_path);
        if (dry) {
            bcv::print_dry_run(std::cout, bcv::dry_run(bcv::apply_controls(config, controls)));
            return 0;
        }
        const auto reports = bcv::run_report(config, controls);
        if (!quiet)
            std::cerr << "wrote " << reports.size() << " design(s) to "
                      << bcv::apply_controls(config, controls).output << '\n';
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "bcv: error: " << e.what() << '\n';
        return 1;
    }
}
