#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "expstop/expstop.h"

namespace {

struct Options {
    std::string config_path;
    std::vector<std::string> overrides;
    std::string output_dir;
    bool print_config = false;
};

int run(const std::string& command, const Options& opts) {
    expstop_config* config = nullptr;
    expstop_status status =
        opts.config_path.empty() ? expstop_config_default(&config) : expstop_config_load(opts.config_path.c_str(), &config);
    if (status != EXPSTOP_OK) {
        std::fprintf(stderr, "expstop: %s\n", expstop_last_error());
        return status;
    }
    std::vector<std::string> sets = opts.overrides;
    if (!opts.output_dir.empty()) sets.push_back("output_dir=\"" + opts.output_dir + "\"");
    for (const auto& s : sets) {
        status = expstop_config_set(config, s.c_str());
        if (status != EXPSTOP_OK) {
            std::fprintf(stderr, "expstop: %s\n", expstop_last_error());
            expstop_config_free(config);
            return status;
        }
    }
    if (opts.print_config) {
        char* text = nullptr;
        if (expstop_config_to_json(config, &text) == EXPSTOP_OK) {
            std::fprintf(stderr, "%s\n", text);
            expstop_string_free(text);
        }
    }

    char* summary = nullptr;
    status = expstop_run(command.c_str(), config, &summary);
    if (summary) {
        std::printf("%s\n", summary);
        expstop_string_free(summary);
    } else {
        std::fprintf(stderr, "expstop: %s\n", expstop_last_error());
    }
    expstop_config_free(config);
    return status;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Entropy-regularized entry/exit stopping: solver, Monte Carlo checks and offline RL"};
    app.set_version_flag("--version", expstop_version());
    app.require_subcommand(1);

    Options opts;
    const std::vector<std::pair<std::string, std::string>> commands = {
        {"solve", "Solve the HJB system; write v0/v1 grids and free boundaries"},
        {"sweep", "Re-solve over (M, eta), theta and sigma; write one CSV per axis"},
        {"validate", "Estimator equivalence and policy rollouts against the solver"},
        {"train", "Offline policy iteration with two value networks"},
        {"compare", "Compare trained networks with the solver benchmark"},
        {"simulate", "Write sample trajectories under the solved Gibbs policy"},
    };
    for (const auto& [name, help] : commands) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("-c,--config", opts.config_path, "JSON config file")->check(CLI::ExistingFile);
        sub->add_option("-s,--set", opts.overrides, "Override a config key: dotted.key=value")
            ->allow_extra_args(false);
        sub->add_option("-o,--output", opts.output_dir, "Output directory (overrides output_dir)");
        sub->add_flag("--print-config", opts.print_config, "Echo the effective config to stderr");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return e.get_exit_code() == 0 ? 0 : (code == 0 ? 0 : 3);
    }
    for (const auto* sub : app.get_subcommands()) return run(sub->get_name(), opts);
    return 3;
}
