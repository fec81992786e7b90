// Command-line front end: sweep / scatter / diagnose / bounds over a flat
// key=value config. Exit codes: 0 ok, 1 config error, 2 numeric degeneracy,
// 3 I/O error.

#include "opaug/experiments.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

namespace {

struct CommonArgs {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> output;
    std::optional<int> threads;
};

void attach(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("config", args.config_path, "path to key=value config file")->required();
    cmd->add_option("--seed", args.seed, "override master_seed from the config");
    cmd->add_option("--output", args.output, "override output path from the config");
    cmd->add_option("--threads", args.threads, "worker threads (output is thread-invariant)");
}

opaug::SweepConfig load(const CommonArgs& args) {
    opaug::SweepConfig cfg = opaug::parse_config_file(args.config_path);
    if (args.seed) cfg.master_seed = *args.seed;
    if (args.output) cfg.output_path = *args.output;
    if (args.threads) {
        if (*args.threads < 1) throw opaug::ConfigError("--threads must be >= 1");
        cfg.threads = *args.threads;
    }
    return cfg;
}

// Buffer the full run before touching the filesystem so a failed run never
// leaves a truncated CSV behind.
void write_file(const std::string& path, const std::string& body) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::ios_base::failure("cannot open output file: " + path);
    out << body;
    out.flush();
    if (!out) throw std::ios_base::failure("write failed: " + path);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"operator augmentation experiments"};
    app.require_subcommand(1);

    CommonArgs sweep_args, scatter_args, diag_args, bounds_args;
    auto* sweep_cmd = app.add_subcommand("sweep", "factor and MSE sweep over n");
    attach(sweep_cmd, sweep_args);
    auto* scatter_cmd = app.add_subcommand("scatter", "naive vs augmented normalized MSE pairs");
    attach(scatter_cmd, scatter_args);
    auto* diag_cmd = app.add_subcommand("diagnose", "single-instance factor/bound report");
    attach(diag_cmd, diag_args);
    auto* bounds_cmd = app.add_subcommand("bounds", "sample-size thresholds and bounds");
    attach(bounds_cmd, bounds_args);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        std::ostringstream csv;
        std::string output_path;
        if (sweep_cmd->parsed()) {
            const auto cfg = load(sweep_args);
            opaug::run_sweep(cfg, csv);
            output_path = cfg.output_path;
        } else if (scatter_cmd->parsed()) {
            const auto cfg = load(scatter_args);
            opaug::run_scatter(cfg, csv);
            output_path = cfg.output_path;
        } else if (diag_cmd->parsed()) {
            const auto cfg = load(diag_args);
            opaug::diagnose(cfg, std::cout, csv);
            output_path = cfg.output_path;
        } else {
            const auto cfg = load(bounds_args);
            opaug::bounds_command(cfg, std::cout, csv);
            output_path = cfg.output_path;
        }
        write_file(output_path, csv.str());
        return 0;
    } catch (const opaug::ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const opaug::DegenerateInstance& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const opaug::GuardError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const opaug::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::ios_base::failure& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}
