#include "cli.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv)
{
    using namespace gamenet::cli;

    CLI::App app{"gamenet: multimodal popularity prediction pipeline"};
    app.require_subcommand(1, 1);

    RunOptions opts;
    std::string config;
    std::string workspace = ".";
    std::uint64_t seed = 0;
    std::size_t threads = 1;

    for (const auto& name : subcommands()) {
        CLI::App* sub = app.add_subcommand(name, "run the " + name + " stage");
        sub->add_option("--config", config, "run configuration (JSON)")->required()->envname("GAMENET_CONFIG");
        sub->add_option("--seed", seed, "override the configured seed")->envname("GAMENET_SEED");
        sub->add_option("--workspace", workspace, "root for all relative paths")->envname("GAMENET_WORKSPACE");
        sub->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber)->envname("GAMENET_THREADS");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : static_cast<int>(kUsage);
    }

    CLI::App* sub = app.get_subcommands().front();
    opts.config = config;
    opts.workspace = workspace;
    opts.threads = threads;
    if (sub->count("--seed") > 0 || std::getenv("GAMENET_SEED"))
        opts.seed = seed;

    try {
        const RunContext ctx = load_context(opts);
        run_subcommand(sub->get_name(), ctx, std::cout);
    } catch (const std::exception& e) {
        const int rc = exit_code_for(std::current_exception());
        std::cerr << "gamenet " << sub->get_name() << ": " << e.what() << "\n";
        return rc;
    }
    return 0;
}
