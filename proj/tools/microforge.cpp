#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "microforge/job/run.hpp"

namespace mf = microforge;

int main(int argc, char** argv) {
    CLI::App app{"Synthetic microstructure generator: cracks, Boolean grains, SEM stacks, milled surfaces"};
    app.set_version_flag("--version", std::string("microforge ") + mf::job::tool_version);
    app.require_subcommand(1);

    struct Options {
        std::string config;
        std::optional<std::uint64_t> seed;
        std::optional<std::string> out;
        int threads = 0;
        bool force_large = false;
        std::optional<std::string> match_histogram;
    } opt;

    for (const auto& name : mf::job::task_names()) {
        CLI::App* sub = app.add_subcommand(name, "run the " + name + " task");
        sub->add_option("--config", opt.config, "JSON job file")->required()->check(CLI::ExistingFile);
        sub->add_option("--seed", opt.seed, "master seed (overrides the file)");
        sub->add_option("--out", opt.out, "output directory (overrides the file)");
        sub->add_option("--threads", opt.threads, "worker threads, 0 = all")->check(CLI::NonNegativeNumber);
        sub->add_flag("--force-large", opt.force_large, "allow volumes above 1e9 voxels");
        if (name == "sem") sub->add_option("--match-histogram", opt.match_histogram, "reference PNG for histogram matching");
    }
    app.add_subcommand("defaults", "print the default configuration");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    CLI::App* sub = app.get_subcommands().front();
    if (sub->get_name() == "defaults") {
        std::cout << mf::job::default_config().dump(2) << "\n";
        return 0;
    }

    try {
        mf::set_thread_count(opt.threads);
        mf::job::Overrides o;
        o.task = sub->get_name();
        o.seed = opt.seed;
        if (opt.out) o.output_dir = std::filesystem::path(*opt.out);
        if (opt.force_large) o.force_large = true;
        if (opt.match_histogram) o.match_histogram = std::filesystem::absolute(*opt.match_histogram).string();
        const auto manifest = mf::job::run_job(std::filesystem::path(opt.config), o);
        std::cout << "wrote " << manifest["artifacts"].size() << " artifacts; content hash "
                  << manifest["content_hash"].get<std::string>() << "\n";
        return 0;
    } catch (const mf::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const mf::IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
