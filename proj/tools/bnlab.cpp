#include <cstdint>
#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "bnlab/error.hpp"
#include "bnlab/harness/commands.hpp"
#include "bnlab/harness/config.hpp"

namespace {

constexpr int kConfigFailure = 1;
constexpr int kRunFailure = 2;

struct Options {
    std::string config;
    std::string out;
    std::uint64_t seed = 0;
};

}  // namespace

int main(int argc, char** argv) {
    using namespace bnlab;
    CLI::App app{"Batch normalization and training-dynamics diagnostics"};
    app.require_subcommand(1);

    const auto& list = harness::commands();
    std::vector<Options> opts(list.size());
    std::vector<CLI::App*> subs;
    std::vector<CLI::Option*> seed_flags;
    for (std::size_t i = 0; i < list.size(); ++i) {
        auto* sub = app.add_subcommand(std::string(list[i].name), std::string(list[i].help));
        sub->add_option("--config", opts[i].config, "configuration file")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", opts[i].out, "output directory (default: output.dir)");
        seed_flags.push_back(sub->add_option("--seed", opts[i].seed, "overrides the configured seed"));
        subs.push_back(sub);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kConfigFailure;
    }

    for (std::size_t i = 0; i < list.size(); ++i) {
        if (!subs[i]->parsed()) continue;
        const auto& cmd = list[i];
        harness::ExperimentConfig cfg;
        try {
            cfg = harness::load_config(opts[i].config, cmd.needs_network);
            if (seed_flags[i]->count()) cfg.set_seed(opts[i].seed);
            if (cmd.needs_network) cfg.validate();
        } catch (const ConfigError& e) {
            std::fprintf(stderr, "config error: %s\n", e.what());
            return kConfigFailure;
        }
        const std::filesystem::path out = opts[i].out.empty() ? cfg.output_dir : std::filesystem::path(opts[i].out);
        try {
            const auto files = cmd.run(cfg, out);
            for (const auto& f : files) std::printf("%s\n", (out / f).string().c_str());
        } catch (const ConfigError& e) {
            std::fprintf(stderr, "config error: %s\n", e.what());
            return kConfigFailure;
        } catch (const std::exception& e) {
            std::fprintf(stderr, "error: %s\n", e.what());
            return kRunFailure;
        }
    }
    return 0;
}
