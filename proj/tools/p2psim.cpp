// p2psim: scenario runner for the overlay pattern library.
//
// Subcommands: run, validate, print-defaults, list-presets.
// Exit codes: 0 ok, 2 configuration error, 3 invariant violation.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

#include "p2p/errors.hpp"
#include "p2p/runner.hpp"
#include "p2p/scenario.hpp"
#include "p2p/topology.hpp"

namespace {

p2p::Scenario resolve_scenario(const std::string& ref) {
    if (p2p::is_preset(ref))
        return p2p::preset(ref);
    return p2p::load_scenario(ref);
}

void write_text(const std::filesystem::path& path, const std::string& data) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f)
        throw p2p::Error("cannot write " + path.string());
    f.write(data.data(), std::streamsize(data.size()));
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"peer-to-peer overlay pattern simulator"};
    app.require_subcommand(1);

    std::string scenario_ref;
    std::string out_dir = ".";
    std::uint64_t seed_override = 0;
    bool seed_set = false;
    double export_topology_at = 0;
    bool export_set = false;
    std::size_t runs = 1;
    bool parallel = false;

    auto* run_cmd = app.add_subcommand("run", "run a scenario or preset");
    run_cmd->add_option("scenario", scenario_ref, "scenario file or preset name")->required();
    run_cmd->add_option("--seed", seed_override, "override the scenario seed")
        ->each([&](const std::string&) { seed_set = true; });
    run_cmd->add_option("--out", out_dir, "output directory");
    run_cmd->add_option("--export-topology", export_topology_at,
                        "write the snapshot nearest this time as an edge list")
        ->each([&](const std::string&) { export_set = true; });
    run_cmd->add_option("--runs", runs, "number of consecutive seeds to run");
    run_cmd->add_flag("--parallel", parallel, "run independent seeds on threads");

    std::string validate_ref;
    auto* validate_cmd = app.add_subcommand("validate", "parse and validate a scenario");
    validate_cmd->add_option("scenario", validate_ref, "scenario file or preset name")->required();

    auto* defaults_cmd = app.add_subcommand("print-defaults", "print every key with its default");
    auto* presets_cmd = app.add_subcommand("list-presets", "list built-in scenario presets");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) ? 2 : 0;
    }

    try {
        if (defaults_cmd->parsed()) {
            std::cout << p2p::scenario_defaults_text();
            return 0;
        }
        if (presets_cmd->parsed()) {
            for (const std::string& name : p2p::preset_names())
                std::cout << name << "\n";
            return 0;
        }
        if (validate_cmd->parsed()) {
            resolve_scenario(validate_ref);
            std::cout << "ok\n";
            return 0;
        }
        if (run_cmd->parsed()) {
            p2p::Scenario base = resolve_scenario(scenario_ref);
            if (seed_set)
                base.seed = seed_override;
            std::filesystem::create_directories(out_dir);

            std::vector<p2p::Scenario> scenarios;
            for (std::size_t i = 0; i < runs; ++i) {
                p2p::Scenario s = base;
                s.seed = base.seed + i;
                scenarios.push_back(s);
            }

            std::vector<p2p::RunResult> results(scenarios.size());
            auto execute = [&](std::size_t i) { results[i] = p2p::run_scenario(scenarios[i]); };
            if (parallel && scenarios.size() > 1) {
                std::vector<std::thread> pool;
                for (std::size_t i = 0; i < scenarios.size(); ++i)
                    pool.emplace_back(execute, i);
                for (auto& t : pool)
                    t.join();
            } else {
                for (std::size_t i = 0; i < scenarios.size(); ++i)
                    execute(i);
            }

            for (std::size_t i = 0; i < scenarios.size(); ++i) {
                const std::string stem =
                    runs > 1 ? "metrics_" + std::to_string(scenarios[i].seed) : "metrics";
                const auto path = std::filesystem::path(out_dir) / (stem + ".log");
                results[i].log.write_file(path.string());
                std::cout << "# seed " << scenarios[i].seed << " -> " << path.string() << "\n";
                std::cout << p2p::summary_text(results[i]);
                if (export_set) {
                    const auto& snap = p2p::snapshot_at(results[i], export_topology_at);
                    const auto tpath = std::filesystem::path(out_dir) /
                                       (stem + "_topology.edges");
                    write_text(tpath, p2p::to_edge_list(snap));
                    std::cout << "# topology -> " << tpath.string() << "\n";
                }
            }
            return 0;
        }
    } catch (const p2p::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const p2p::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
