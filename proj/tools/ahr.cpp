// Command-line benchmark harness: `run` a single strategy, `suite` all
// strategies across seeds, `report` to aggregate finished runs into
// mean +/- SEM.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "ahr/ahr.hpp"

namespace fs = std::filesystem;
using namespace ahr;

namespace {

struct DataOptions {
    std::string benchmark = "mnist"; // mnist | synthetic
    std::string data_dir;
    std::size_t tasks = 5;
    std::size_t classes_per_task = 2;
    std::size_t subset = 0; // stratified train-subset size, 0 = all
    // synthetic knobs
    std::size_t input_dim = 16;
    std::size_t samples_per_class = 200;
    double cluster_sep = 10.0;
    std::uint64_t split_seed = 0;
};

std::string resolve_data_dir(const std::string& flag) {
    if (!flag.empty()) return flag;
    if (const char* env = std::getenv("AHR_DATA_DIR")) return env;
    return ".";
}

TaskStream build_stream(const DataOptions& d, std::uint64_t seed) {
    if (d.benchmark == "synthetic") {
        return make_synthetic(d.split_seed ? d.split_seed : seed, d.tasks, d.classes_per_task,
                              d.input_dim, d.samples_per_class, d.cluster_sep);
    }
    require(d.benchmark == "mnist", "unknown benchmark '", d.benchmark,
            "' (expected mnist or synthetic)");
    const std::string dir = resolve_data_dir(d.data_dir);
    LabeledDataset train = load_idx(dir + "/train-images-idx3-ubyte",
                                    dir + "/train-labels-idx1-ubyte");
    LabeledDataset test =
        load_idx(dir + "/t10k-images-idx3-ubyte", dir + "/t10k-labels-idx1-ubyte");
    if (d.subset > 0) train = stratified_subset(train, d.subset, seed);
    std::optional<std::uint64_t> shuffle;
    if (d.split_seed != 0) shuffle = d.split_seed;
    return split_tasks(train, test, d.tasks, d.classes_per_task, shuffle, "mnist");
}

RunConfig load_config(const std::string& path) {
    if (path.empty()) return RunConfig{};
    std::ifstream is(path);
    require(bool(is), "cannot open config file ", path);
    std::stringstream ss;
    ss << is.rdbuf();
    return config_from_json(nlohmann::json::parse(ss.str()));
}

void add_data_options(CLI::App* app, DataOptions& d) {
    app->add_option("--benchmark", d.benchmark, "mnist or synthetic");
    app->add_option("--data-dir", d.data_dir, "directory with IDX files (or $AHR_DATA_DIR)");
    app->add_option("-T,--tasks", d.tasks, "number of tasks");
    app->add_option("-C,--classes-per-task", d.classes_per_task, "classes per task");
    app->add_option("--subset", d.subset, "stratified train subset size (0 = all)");
    app->add_option("--input-dim", d.input_dim, "synthetic: input dimension");
    app->add_option("--samples-per-class", d.samples_per_class, "synthetic: train samples/class");
    app->add_option("--cluster-sep", d.cluster_sep, "synthetic: minimum center separation");
    app->add_option("--split-seed", d.split_seed, "seeded class-order shuffle (0 = natural order)");
}

RunReport run_one(Strategy strategy, const TaskStream& stream, const RunConfig& cfg,
                  std::uint64_t seed, const std::string& out_dir) {
    RunReport report = run_strategy(strategy, stream, cfg, seed);
    fs::create_directories(out_dir);
    std::ostringstream base;
    base << out_dir << '/' << report.strategy << "_seed" << seed;
    emit_report(report, "json", base.str() + ".json");
    emit_report(report, "csv", base.str() + ".csv");
    std::cout << report.strategy << " seed=" << seed << " final="
              << report.final_accuracy * 100.0 << "% wall=" << report.wall_seconds << "s -> "
              << base.str() << ".{json,csv}\n";
    return report;
}

void write_aggregate(const std::map<std::string, std::vector<double>>& finals,
                     const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    require(bool(os), "cannot open ", path);
    os << "strategy,runs,mean,sem\n";
    for (const auto& [name, vals] : finals) {
        const Aggregate a = aggregate_final_accuracy(name, vals);
        os << a.strategy << ',' << a.runs << ',' << detail::fmt_double(a.mean) << ','
           << detail::fmt_double(a.sem) << '\n';
    }
    std::cout << "wrote " << path << "\n";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Autoencoder-based hybrid replay benchmark harness"};
    app.require_subcommand(1);

    DataOptions data;
    std::string config_path, out_dir = "out", strategy_name = "AHR";
    std::uint64_t seed = 1;
    std::vector<std::uint64_t> seeds = {1, 2, 3};

    auto* run = app.add_subcommand("run", "run one strategy once");
    add_data_options(run, data);
    run->add_option("-s,--strategy", strategy_name,
                    "AHR, AHR-lossless, AHR-lossless-mini, AHR-lossy-mini, FT, FT-E, Joint");
    run->add_option("--config", config_path, "JSON config file");
    run->add_option("--seed", seed, "run seed");
    run->add_option("--out-dir", out_dir, "output directory");

    auto* suite = app.add_subcommand("suite", "run every strategy across seeds");
    add_data_options(suite, data);
    suite->add_option("--config", config_path, "JSON config file");
    suite->add_option("--seeds", seeds, "seeds (>= 3 for SEM)")->expected(-1);
    suite->add_option("--out-dir", out_dir, "output directory");

    auto* rep = app.add_subcommand("report", "aggregate run JSONs into mean +/- SEM CSV");
    std::vector<std::string> inputs;
    std::string agg_out = "aggregate.csv";
    rep->add_option("inputs", inputs, "report JSON files")->required();
    rep->add_option("-o,--out", agg_out, "aggregate CSV path");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            const RunConfig cfg = load_config(config_path);
            const TaskStream stream = build_stream(data, seed);
            run_one(strategy_from_string(strategy_name), stream, cfg, seed, out_dir);
        } else if (suite->parsed()) {
            require(seeds.size() >= 3, "suite: need at least 3 seeds for SEM");
            const RunConfig cfg = load_config(config_path);
            std::map<std::string, std::vector<double>> finals;
            for (std::uint64_t s : seeds) {
                const TaskStream stream = build_stream(data, s);
                for (Strategy strat :
                     {Strategy::AHR, Strategy::AHR_lossless, Strategy::AHR_lossless_mini,
                      Strategy::AHR_lossy_mini, Strategy::FT, Strategy::FTE, Strategy::Joint}) {
                    const RunReport r = run_one(strat, stream, cfg, s, out_dir);
                    finals[r.strategy].push_back(r.final_accuracy);
                }
            }
            write_aggregate(finals, out_dir + "/aggregate.csv");
        } else if (rep->parsed()) {
            std::map<std::string, std::vector<double>> finals;
            for (const auto& path : inputs) {
                std::ifstream is(path, std::ios::binary);
                require(bool(is), "cannot open ", path);
                std::stringstream ss;
                ss << is.rdbuf();
                const RunReport r = report_from_json(ss.str());
                finals[r.strategy].push_back(r.final_accuracy);
            }
            write_aggregate(finals, agg_out);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
