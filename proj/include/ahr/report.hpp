#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ahr/error.hpp"

namespace ahr {

// Per-run record: accuracy matrix at each task boundary plus memory/compute
// accounting. accuracy[a][o] is the accuracy on task o+1's test set after
// training through task a+1 (lower-triangular).
struct RunReport {
    static constexpr int kSchemaVersion = 1;

    std::string strategy;
    std::string config_hash;
    std::uint64_t seed = 0;
    std::vector<std::vector<double>> accuracy;
    std::vector<double> cumulative_accuracy; // accuracy on union of seen test sets
    double final_accuracy = 0.0;
    std::vector<std::size_t> stored_bytes;      // per task boundary
    std::vector<std::size_t> samples_processed; // per task
    double wall_seconds = 0.0; // measured; excluded from canonical serialization

    std::size_t task_count() const { return accuracy.size(); }
};

namespace detail {
// shortest round-trip representation, deterministic across runs
inline std::string fmt_double(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    std::string s = os.str();
    // prefer the shortest precision that still round-trips
    for (int prec = 1; prec < 17; ++prec) {
        std::ostringstream t;
        t << std::setprecision(prec) << v;
        double back = 0.0;
        std::istringstream(t.str()) >> back;
        if (back == v) return t.str();
    }
    return s;
}
} // namespace detail

// Canonical JSON: field order fixed, floats in shortest round-trip form, no
// timing (so identical seeds produce byte-identical files).
inline std::string report_to_json(const RunReport& r, bool include_timing = false) {
    nlohmann::ordered_json j;
    j["schema_version"] = RunReport::kSchemaVersion;
    j["strategy"] = r.strategy;
    j["config_hash"] = r.config_hash;
    j["seed"] = r.seed;
    j["accuracy"] = r.accuracy;
    j["cumulative_accuracy"] = r.cumulative_accuracy;
    j["final_accuracy"] = r.final_accuracy;
    j["stored_bytes"] = r.stored_bytes;
    j["samples_processed"] = r.samples_processed;
    if (include_timing) j["wall_seconds"] = r.wall_seconds;
    return j.dump(2) + "\n";
}

inline RunReport report_from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    require(j.at("schema_version").get<int>() == RunReport::kSchemaVersion,
            "report_from_json: unsupported schema version");
    RunReport r;
    r.strategy = j.at("strategy").get<std::string>();
    r.config_hash = j.at("config_hash").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.accuracy = j.at("accuracy").get<std::vector<std::vector<double>>>();
    r.cumulative_accuracy = j.at("cumulative_accuracy").get<std::vector<double>>();
    r.final_accuracy = j.at("final_accuracy").get<double>();
    r.stored_bytes = j.at("stored_bytes").get<std::vector<std::size_t>>();
    r.samples_processed = j.at("samples_processed").get<std::vector<std::size_t>>();
    if (j.contains("wall_seconds")) r.wall_seconds = j.at("wall_seconds").get<double>();
    return r;
}

// CSV accuracy matrix: one row per task boundary, blank cells above the
// diagonal, final column = cumulative accuracy at that boundary.
inline std::string report_to_csv(const RunReport& r) {
    std::ostringstream os;
    os << "after_task";
    for (std::size_t o = 0; o < r.task_count(); ++o) os << ",on_task_" << (o + 1);
    os << ",final\n";
    for (std::size_t a = 0; a < r.task_count(); ++a) {
        os << (a + 1);
        for (std::size_t o = 0; o < r.task_count(); ++o) {
            os << ',';
            if (o < r.accuracy[a].size()) os << detail::fmt_double(r.accuracy[a][o]);
        }
        os << ',' << detail::fmt_double(r.cumulative_accuracy[a]) << '\n';
    }
    return os.str();
}

inline void emit_report(const RunReport& r, const std::string& format, const std::string& path) {
    std::string text;
    if (format == "json")
        text = report_to_json(r);
    else if (format == "csv")
        text = report_to_csv(r);
    else
        fail("emit_report: unknown format '", format, "' (expected csv or json)");
    std::ofstream os(path, std::ios::binary);
    require(bool(os), "emit_report: cannot open ", path);
    os << text;
    require(bool(os), "emit_report: write failed for ", path);
}

// Mean and standard error of the mean over runs (sample stddev / sqrt(n)).
struct Aggregate {
    std::string strategy;
    std::size_t runs = 0;
    double mean = 0.0;
    double sem = 0.0;
};

inline Aggregate aggregate_final_accuracy(const std::string& strategy,
                                          const std::vector<double>& finals) {
    require(!finals.empty(), "aggregate: no runs for ", strategy);
    Aggregate a;
    a.strategy = strategy;
    a.runs = finals.size();
    for (double v : finals) a.mean += v;
    a.mean /= double(finals.size());
    if (finals.size() > 1) {
        double ss = 0.0;
        for (double v : finals) ss += (v - a.mean) * (v - a.mean);
        a.sem = std::sqrt(ss / double(finals.size() - 1)) / std::sqrt(double(finals.size()));
    }
    return a;
}

} // namespace ahr
