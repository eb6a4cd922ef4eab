#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "gpfvm/bench/bench.hpp"

namespace fs = std::filesystem;
using namespace gpfvm;
using namespace gpfvm::bench;

namespace {

struct Overrides {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::optional<int> budget;
    std::optional<std::string> method;
};

void add_common(CLI::App* sub, Overrides& o) {
    sub->add_option("config", o.config, "INI experiment config")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "Problem seed");
    sub->add_option("--out-dir", o.out_dir, "Output directory");
    sub->add_option("--budget", o.budget, "Solver iteration budget")->check(CLI::PositiveNumber);
    sub->add_option("--method", o.method, "Observation method")->check(CLI::IsMember({"fvm", "collocation"}));
}

Config load(const Overrides& o) {
    std::ifstream in(o.config);
    Config c = parse_config(in);
    if (o.seed) c.spec.seed = *o.seed;
    if (o.out_dir) c.out_dir = *o.out_dir;
    if (o.budget) c.spec.solver.budget = *o.budget;
    if (o.method) {
        c.spec.method = parse_observation_method(*o.method);
        c.sweep_methods = {c.spec.method};
    }
    c.spec.validate();
    fs::create_directories(c.out_dir);
    return c;
}

void write_metrics(const fs::path& path, const RunResult& r) {
    nlohmann::ordered_json j;
    j["rmse"] = r.rmse;
    j["mae"] = r.mae;
    j["iterations"] = r.iterations;
    j["final_residual"] = r.final_residual;
    j["wall_time_s"] = r.wall_time_s;
    std::ofstream(path) << j.dump(2) << "\n";
}

int cmd_run(const Overrides& o) {
    const Config c = load(o);
    const fs::path dir(c.out_dir);
    std::ofstream log_file;
    if (c.log) log_file.open(dir / "solver.log");
    const RunOptions ro{.dump = true, .deterministic = c.deterministic, .log = c.log ? &log_file : nullptr};

    if (c.spec.kind == ProblemKind::shallow_water_demo) {
        const auto r = shallow_water_demo(c.spec, ro);
        write_table_csv((dir / "mean_std.csv").string(), r.run);
        write_metrics(dir / "metrics.json", r.run);
        write_actions_csv((dir / "actions.csv").string(), r.action_profile);
        write_residuals_csv((dir / "pde_residuals.csv").string(), r);
        nlohmann::ordered_json j;
        j["observations"] = r.observations;
        j["cg_iterations"] = r.cg_iterations;
        j["targeted_iterations"] = r.targeted_iterations;
        j["kendall_tau"] = r.kendall_tau;
        j["ic_std_ratio"] = r.ic_std_ratio;
        j["ic_mean_error"] = r.ic_mean_error;
        j["target_std_before"] = r.target_std_before;
        j["target_std_after"] = r.target_std_after;
        std::ofstream(dir / "demo_summary.json") << j.dump(2) << "\n";
        std::cout << "shallow_water_demo: " << r.observations << " observations, tau " << r.kendall_tau
                  << ", ic std ratio " << r.ic_std_ratio << ", target std " << r.target_std_before << " -> "
                  << r.target_std_after << "\n";
        return 0;
    }
    const auto r = run_experiment(c.spec, ro);
    write_table_csv((dir / "mean_std.csv").string(), r);
    write_metrics(dir / "metrics.json", r);
    std::cout << to_string(c.spec.kind) << " " << to_string(c.spec.method) << ": rmse " << r.rmse << ", mae " << r.mae
              << "\n";
    return 0;
}

int cmd_sweep(const Overrides& o) {
    const Config c = load(o);
    auto resolutions = c.sweep_n_pde;
    if (resolutions.empty()) resolutions.push_back(c.spec.n_pde);
    const auto rows = sweep(c.spec, c.sweep_methods, resolutions, c.search);
    write_sweep_csv((fs::path(c.out_dir) / "sweep.csv").string(), rows);
    for (const auto& r : rows) std::cout << to_string(r.method) << " " << r.total() << ": rmse " << r.rmse << "\n";
    return 0;
}

int cmd_gridsearch(const Overrides& o) {
    const Config c = load(o);
    if (c.search.empty()) throw ConfigError("gridsearch needs kernel.search_groups and kernel.search_values");
    const auto g = grid_search(c.spec, c.search);
    write_gridsearch_csv((fs::path(c.out_dir) / "gridsearch.csv").string(), g);
    std::cout << "best lengthscale";
    for (double l : g.best.kernel.lengthscale) std::cout << " " << l;
    std::cout << " (rmse " << g.best_score << ")\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"GP-FVM experiment runner"};
    app.require_subcommand(1);
    Overrides run_o, sweep_o, grid_o;
    auto* run = app.add_subcommand("run", "Run one configured experiment");
    auto* sw = app.add_subcommand("sweep", "Sweep observation methods and resolutions");
    auto* gs = app.add_subcommand("gridsearch", "Grid-search kernel lengthscales");
    add_common(run, run_o);
    add_common(sw, sweep_o);
    add_common(gs, grid_o);
    CLI11_PARSE(app, argc, argv);
    try {
        if (*run) return cmd_run(run_o);
        if (*sw) return cmd_sweep(sweep_o);
        return cmd_gridsearch(grid_o);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
