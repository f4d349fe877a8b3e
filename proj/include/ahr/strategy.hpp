#pragma once

#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#include <json.hpp>

#include "ahr/report.hpp"
#include "ahr/trainer.hpp"

namespace ahr {

enum class Strategy { AHR, AHR_lossless, AHR_lossless_mini, AHR_lossy_mini, FT, FTE, Joint };

inline const char* to_string(Strategy s) {
    switch (s) {
        case Strategy::AHR: return "AHR";
        case Strategy::AHR_lossless: return "AHR-lossless";
        case Strategy::AHR_lossless_mini: return "AHR-lossless-mini";
        case Strategy::AHR_lossy_mini: return "AHR-lossy-mini";
        case Strategy::FT: return "FT";
        case Strategy::FTE: return "FT-E";
        case Strategy::Joint: return "Joint";
    }
    return "?";
}

inline Strategy strategy_from_string(const std::string& s) {
    for (Strategy v : {Strategy::AHR, Strategy::AHR_lossless, Strategy::AHR_lossless_mini,
                       Strategy::AHR_lossy_mini, Strategy::FT, Strategy::FTE, Strategy::Joint})
        if (s == to_string(v)) return v;
    fail("unknown strategy '", s,
         "' (expected AHR, AHR-lossless, AHR-lossless-mini, AHR-lossy-mini, FT, FT-E, Joint)");
}

struct RunConfig {
    TrainConfig train;
    std::vector<std::size_t> hidden = {400, 400};
    std::size_t latent_dim = 20;
    // FT-E default: raw exemplars under the same BYTE budget as AHR's latents
    // plus decoder. true switches to equal-count parity for ablations.
    bool fte_equal_count = false;
};

inline nlohmann::ordered_json config_to_json(const RunConfig& c) {
    nlohmann::ordered_json j;
    j["epochs"] = c.train.epochs;
    j["minibatch_size"] = c.train.minibatch_size;
    j["lr"] = c.train.lr;
    j["lambda"] = c.train.lambda;
    j["rfa"] = {{"zeta", c.train.rfa.zeta},       {"mass", c.train.rfa.mass},
                {"dt", c.train.rfa.dt},           {"steps", c.train.rfa.steps},
                {"damping", c.train.rfa.damping}, {"charge", c.train.rfa.charge},
                {"bound", c.train.rfa.bound}};
    j["budget_M"] = c.train.budget_M;
    j["ablation"] = to_string(c.train.ablation);
    j["distill_squared"] = c.train.distill.squared;
    j["distill_weight"] = c.train.distill.weight;
    j["hidden"] = c.hidden;
    j["latent_dim"] = c.latent_dim;
    j["fte_equal_count"] = c.fte_equal_count;
    return j;
}

inline RunConfig config_from_json(const nlohmann::json& j) {
    RunConfig c;
    if (j.contains("epochs")) c.train.epochs = j["epochs"].get<std::size_t>();
    if (j.contains("minibatch_size")) c.train.minibatch_size = j["minibatch_size"].get<std::size_t>();
    if (j.contains("lr")) c.train.lr = j["lr"].get<double>();
    if (j.contains("lambda")) c.train.lambda = j["lambda"].get<double>();
    if (j.contains("rfa")) {
        const auto& r = j["rfa"];
        if (r.contains("zeta")) c.train.rfa.zeta = r["zeta"].get<double>();
        if (r.contains("mass")) c.train.rfa.mass = r["mass"].get<double>();
        if (r.contains("dt")) c.train.rfa.dt = r["dt"].get<double>();
        if (r.contains("steps")) c.train.rfa.steps = r["steps"].get<std::size_t>();
        if (r.contains("damping")) c.train.rfa.damping = r["damping"].get<double>();
        if (r.contains("charge")) c.train.rfa.charge = r["charge"].get<double>();
        if (r.contains("bound")) c.train.rfa.bound = r["bound"].get<double>();
    }
    if (j.contains("budget_M")) c.train.budget_M = j["budget_M"].get<std::size_t>();
    if (j.contains("ablation")) {
        const std::string a = j["ablation"].get<std::string>();
        if (a == "standard") c.train.ablation = Ablation::standard;
        else if (a == "lossless") c.train.ablation = Ablation::lossless;
        else if (a == "lossless_mini") c.train.ablation = Ablation::lossless_mini;
        else if (a == "lossy_mini") c.train.ablation = Ablation::lossy_mini;
        else fail("config: unknown ablation '", a, "'");
    }
    if (j.contains("distill_squared")) c.train.distill.squared = j["distill_squared"].get<bool>();
    if (j.contains("distill_weight")) c.train.distill.weight = j["distill_weight"].get<double>();
    if (j.contains("hidden")) c.hidden = j["hidden"].get<std::vector<std::size_t>>();
    if (j.contains("latent_dim")) c.latent_dim = j["latent_dim"].get<std::size_t>();
    if (j.contains("fte_equal_count")) c.fte_equal_count = j["fte_equal_count"].get<bool>();
    return c;
}

inline std::string config_hash(const RunConfig& c) {
    const std::string s = config_to_json(c).dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

namespace detail {

inline TrainConfig strategy_train_config(Strategy strategy, const RunConfig& cfg,
                                         std::size_t latent_dim, std::size_t input_dim,
                                         std::size_t decoder_params) {
    TrainConfig t = cfg.train;
    switch (strategy) {
        case Strategy::AHR: t.ablation = Ablation::standard; break;
        case Strategy::AHR_lossless: t.ablation = Ablation::lossless; break;
        case Strategy::AHR_lossless_mini: t.ablation = Ablation::lossless_mini; break;
        case Strategy::AHR_lossy_mini: t.ablation = Ablation::lossy_mini; break;
        case Strategy::FT:
            t.replay_enabled = false;
            t.distill_enabled = false;
            break;
        case Strategy::FTE: {
            t.distill_enabled = false;
            t.store_raw_override = true;
            if (cfg.fte_equal_count) {
                t.budget_override = t.budget_M;
            } else {
                // same byte budget as AHR: latents plus decoder parameters
                const std::size_t ahr_bytes = (t.budget_M * latent_dim + decoder_params) * 8;
                t.budget_override = std::max<std::size_t>(1, ahr_bytes / (input_dim * 8));
            }
            break;
        }
        case Strategy::Joint:
            t.replay_enabled = false;
            t.distill_enabled = false;
            break;
    }
    return t;
}

inline std::size_t stored_bytes_for(Strategy strategy, const LearnerState& state) {
    if (strategy == Strategy::FT || strategy == Strategy::Joint) return 0;
    std::size_t bytes = state.memory.entries.size() * state.memory.dim() * 8;
    const bool uses_decoder = strategy != Strategy::FTE;
    if (uses_decoder) bytes += state.model.decoder.param_count() * 8;
    return bytes;
}

inline Task merge_tasks(const TaskStream& stream, std::size_t upto) {
    Task merged;
    merged.id = 1;
    std::size_t rows = 0;
    for (std::size_t t = 0; t < upto; ++t) rows += stream.tasks[t].train.size();
    merged.train.x = Matrix(rows, stream.input_dim);
    merged.train.labels.reserve(rows);
    std::size_t r0 = 0;
    for (std::size_t t = 0; t < upto; ++t) {
        const auto& task = stream.tasks[t];
        for (int c : task.classes) merged.classes.push_back(c);
        for (std::size_t r = 0; r < task.train.size(); ++r)
            std::copy(task.train.x.row(r), task.train.x.row(r) + stream.input_dim,
                      merged.train.x.row(r0 + r));
        merged.train.labels.insert(merged.train.labels.end(), task.train.labels.begin(),
                                   task.train.labels.end());
        r0 += task.train.size();
    }
    return merged;
}

} // namespace detail

// Trains `strategy` over the stream, evaluating on the cumulative test union
// at every task boundary.
inline RunReport run_strategy(Strategy strategy, const TaskStream& stream, const RunConfig& cfg,
                              std::uint64_t seed) {
    require(!stream.tasks.empty(), "run_strategy: empty stream");
    stream.check_disjoint();
    const auto t_start = std::chrono::steady_clock::now();

    RunReport report;
    report.strategy = to_string(strategy);
    report.config_hash = config_hash(cfg);
    report.seed = seed;

    Rng init_rng(Rng::derive(seed, 0x494e4954));
    HAEModel initial = HAEModel::make(stream.input_dim, cfg.hidden, cfg.latent_dim, init_rng);

    TrainConfig tcfg = detail::strategy_train_config(strategy, cfg, cfg.latent_dim,
                                                     stream.input_dim,
                                                     initial.decoder.param_count());
    tcfg.seed = seed;

    LearnerState state;
    state.model = initial;

    for (std::size_t t = 0; t < stream.tasks.size(); ++t) {
        TaskTrainStats stats;
        if (strategy == Strategy::Joint) {
            // fresh model on the union of everything seen so far
            Rng fresh_rng(Rng::derive(seed, 0x494e4954));
            state = LearnerState{};
            state.model = HAEModel::make(stream.input_dim, cfg.hidden, cfg.latent_dim, fresh_rng);
            const Task merged = detail::merge_tasks(stream, t + 1);
            stats = learn_task(state, merged, tcfg);
        } else {
            stats = learn_task(state, stream.tasks[t], tcfg);
        }

        std::vector<double> row;
        double correct_weight = 0.0, total_weight = 0.0;
        for (std::size_t o = 0; o <= t; ++o) {
            const double acc = evaluate_accuracy(state.model, state.centroids,
                                                 stream.tasks[o].test);
            row.push_back(acc);
            correct_weight += acc * double(stream.tasks[o].test.size());
            total_weight += double(stream.tasks[o].test.size());
        }
        report.accuracy.push_back(std::move(row));
        report.cumulative_accuracy.push_back(total_weight > 0 ? correct_weight / total_weight
                                                              : 0.0);
        report.stored_bytes.push_back(detail::stored_bytes_for(strategy, state));
        report.samples_processed.push_back(stats.samples_processed);
    }
    report.final_accuracy = report.cumulative_accuracy.back();
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return report;
}

} // namespace ahr
