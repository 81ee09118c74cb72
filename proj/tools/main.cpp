// cbound: trace -> miss rates -> dataset -> gated-model sweep -> boundary analysis.

#include "config.hpp"
#include "pipeline.hpp"

#include "cbound/errors.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <thread>

namespace {

// Errors go to stderr as one line: "cbound: <kind> error: <reason>".
int fail(const char* kind, std::string reason, int code) {
    std::replace(reason.begin(), reason.end(), '\n', ' ');
    std::cerr << "cbound: " << kind << " error: " << reason << '\n';
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    using namespace cbound;
    using cli::Stage;

    CLI::App app{"Compression-boundary toolkit for cache miss-rate traces"};
    app.require_subcommand(1, 1);
    std::string config_path;
    std::string out_dir;
    unsigned jobs = std::max(1u, std::thread::hardware_concurrency());
    bool quiet = false;

    struct Command {
        const char* name;
        const char* help;
        std::optional<Stage> stage;
    };
    const Command commands[] = {
        {"simulate", "trace -> missrates.csv", Stage::Simulate},
        {"prepare", "missrates -> dataset.csv", Stage::Prepare},
        {"sweep", "dataset -> boundary.csv and checkpoints/", Stage::Sweep},
        {"analyze", "boundary -> frontier.csv, phases.csv, heatmap.csv, description_length.csv", Stage::Analyze},
        {"all", "run every stage from scratch", std::nullopt},
    };
    for (const auto& c : commands) {
        auto* sub = app.add_subcommand(c.name, c.help);
        sub->add_option("-c,--config", config_path, "JSON run config")->required();
        sub->add_option("-o,--out", out_dir, "output directory (overrides output_dir in the config)");
        sub->add_option("-j,--jobs", jobs, "parallel trainings (default: available cores)")
            ->check(CLI::PositiveNumber);
        sub->add_flag("-q,--quiet", quiet, "no progress output");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return fail("usage", e.what(), 1);
    }

    try {
        const auto cfg = cli::load_config(config_path);
        cli::RunOptions opts;
        opts.out_dir = out_dir.empty() ? cfg.output_dir : std::filesystem::path(out_dir);
        opts.jobs = jobs;
        opts.log = quiet ? nullptr : &std::cout;
        for (const auto& c : commands) {
            if (!app.got_subcommand(c.name)) continue;
            if (c.stage) cli::run_stage(cfg, *c.stage, opts);
            else cli::run_all(cfg, opts);
        }
    } catch (const ConfigError& e) {
        return fail("config", e.what(), 1);
    } catch (const InputError& e) {
        return fail("input", e.what(), 2);
    } catch (const NumericalError& e) {
        return fail("numerical", e.what(), 3);
    } catch (const std::filesystem::filesystem_error& e) {
        return fail("input", e.what(), 2);
    } catch (const std::exception& e) {
        return fail("internal", e.what(), 2);
    }
    return 0;
}
