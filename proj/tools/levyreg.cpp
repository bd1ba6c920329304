#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "levyreg/cli.hpp"

namespace cli = levyreg::cli;

namespace {

int guarded(const std::function<int()>& body) {
    try {
        return body();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return cli::exit_code(e);
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"levyreg: regulated Levy storage with random inspections"};
    app.require_subcommand(1);

    std::string run_path, validate_path, demo_name, demo_dir = ".";
    auto* run = app.add_subcommand("run", "Run every task listed in a config file");
    run->add_option("config", run_path, "Experiment file (INI)")->required();
    auto* validate = app.add_subcommand("validate", "Parse and check a config file without running it");
    validate->add_option("config", validate_path, "Experiment file (INI)")->required();
    auto* demo = app.add_subcommand("demo", "Write a bundled experiment and run it");
    demo->add_option("name", demo_name, "clearing, tcp or inventory")
        ->required()
        ->check(CLI::IsMember({"clearing", "tcp", "inventory"}));
    demo->add_option("--dir", demo_dir, "Directory for the config and its outputs");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    if (*run)
        return guarded([&] {
            const auto cfg = cli::parse_config(run_path);
            cli::run(cfg, std::cout);
            return 0;
        });
    if (*validate)
        return guarded([&] {
            const auto cfg = cli::parse_config(validate_path);
            std::cout << "ok: " << cfg.tasks.size() << " task(s), output to " << cfg.output_dir.string() << '\n';
            return 0;
        });
    return guarded([&] {
        const std::filesystem::path dir(demo_dir);
        std::filesystem::create_directories(dir);
        const auto path = dir / (demo_name + ".ini");
        std::ofstream(path) << cli::demo_config(demo_name);
        std::cout << "config " << path.string() << '\n';
        cli::run(cli::parse_config(path), std::cout);
        return 0;
    });
}
