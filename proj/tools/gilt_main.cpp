#include "gilt/experiments.hpp"
#include "gilt/parallel.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <string>

namespace {

int report_rows(const std::vector<gilt::ResultRow>& rows) {
    int failures = 0;
    for (const auto& r : rows) {
        if (!r.pass) ++failures;
        std::printf("[%s] %s/%s %s estimate=%.10g", r.pass ? "pass" : "FAIL", r.scenario.c_str(),
                    r.verifies.c_str(), r.params.c_str(), r.estimate);
        if (r.std_error > 0.0) std::printf(" +- %.3g", r.std_error);
        if (r.oracle) std::printf(" oracle=%.10g", *r.oracle);
        std::printf("\n");
    }
    return failures;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"gilt: Gaussian integrator local-time laboratory"};
    app.require_subcommand(1);

    int threads = 0;
    app.add_option("--threads", threads, "Worker thread cap (affects speed, never results)");

    auto* run_cmd = app.add_subcommand("run", "Run one experiment from a config file");
    std::string config_path;
    run_cmd->add_option("config", config_path, "Path to a JSON config");
    run_cmd->add_option("--config", config_path, "Path to a JSON config");
    std::string out_override;
    run_cmd->add_option("--out", out_override, "Output directory override");
    std::uint64_t seed_override = 0;
    bool seed_set = false;
    run_cmd->add_option_function<std::uint64_t>(
               "--seed", [&](std::uint64_t s) { seed_override = s; seed_set = true; },
               "Master seed override");

    auto* list_cmd = app.add_subcommand("list", "List scenarios");

    auto* selftest_cmd = app.add_subcommand("selftest", "Run every scenario at default settings");
    std::string selftest_out = "results";
    selftest_cmd->add_option("--out", selftest_out, "Output directory");
    std::uint64_t selftest_seed = 20260810;
    selftest_cmd->add_option("--seed", selftest_seed, "Master seed");

    CLI11_PARSE(app, argc, argv);
    if (threads > 0) gilt::parallel::set_max_threads(threads);

    try {
        if (list_cmd->parsed()) {
            for (const auto& s : gilt::list_scenarios())
                std::printf("%-20s %s\n", s.name.c_str(), s.description.c_str());
            return 0;
        }
        if (run_cmd->parsed()) {
            if (config_path.empty()) {
                std::fprintf(stderr, "run: a config path is required\n");
                return 2;
            }
            gilt::ExperimentConfig cfg = gilt::ExperimentConfig::from_file(config_path);
            if (seed_set) cfg.master_seed = seed_override;
            if (!out_override.empty()) cfg.out_dir = out_override;
            auto start = std::chrono::steady_clock::now();
            auto rows = gilt::run_scenario(cfg);
            double wall =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            gilt::write_csv(cfg.out_dir + "/" + cfg.scenario + ".csv", rows, wall);
            int failures = report_rows(rows);
            std::printf("%s: %d/%zu rows passed (%.1fs), CSV in %s\n", cfg.scenario.c_str(),
                        static_cast<int>(rows.size()) - failures, rows.size(), wall,
                        cfg.out_dir.c_str());
            return failures == 0 ? 0 : 1;
        }
        if (selftest_cmd->parsed()) {
            auto result = gilt::selftest(selftest_seed, selftest_out);
            int failures = report_rows(result.rows);
            std::printf("selftest: %d/%zu rows passed in %.1fs, CSVs in %s\n",
                        static_cast<int>(result.rows.size()) - failures, result.rows.size(),
                        result.wall_seconds, selftest_out.c_str());
            return result.all_pass ? 0 : 1;
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 2;
}
