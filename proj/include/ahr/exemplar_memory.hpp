#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "ahr/cce.hpp"
#include "ahr/hae.hpp"
#include "ahr/rng.hpp"

namespace ahr {

struct StoredExemplar {
    std::vector<double> vec; // latent row (dim m), or a raw row (dim n) in raw mode
    int task = 0;
    int cls = 0;
};

// Fixed-budget exemplar store. The standard mode holds latents; the lossless
// ablations hold raw input rows behind the same interface.
struct LatentMemory {
    std::vector<StoredExemplar> entries;
    std::size_t budget = 0;
    bool raw = false;

    std::size_t dim() const { return entries.empty() ? 0 : entries.front().vec.size(); }

    std::map<std::pair<int, int>, std::vector<std::size_t>> by_class() const {
        std::map<std::pair<int, int>, std::vector<std::size_t>> out;
        for (std::size_t i = 0; i < entries.size(); ++i)
            out[{entries[i].task, entries[i].cls}].push_back(i);
        return out;
    }
};

inline std::size_t per_class_quota(std::size_t budget, std::size_t classes_so_far) {
    require(classes_so_far >= 1, "per_class_quota: zero classes");
    return budget / classes_so_far;
}

// Candidate pool for memory population: raw rows with (task, class) labels.
struct CandidatePool {
    Matrix x; // rows x n
    std::vector<std::pair<int, int>> labels;
};

// Herding-style selection: encode every candidate with the new model, rank by
// L_z = ||z - p||^2 against the class centroid (ascending, ties by original
// candidate index), keep the per-class quota.
inline LatentMemory populate(const HAEModel& new_model, const CandidatePool& pool,
                             const CentroidSet& centroids, std::size_t budget,
                             bool store_raw = false) {
    require(pool.x.rows == pool.labels.size(), "populate: label count mismatch");
    const Matrix z = encode(new_model, pool.x);

    std::map<std::pair<int, int>, std::vector<std::size_t>> classes;
    for (std::size_t i = 0; i < pool.labels.size(); ++i) classes[pool.labels[i]].push_back(i);
    require(!classes.empty(), "populate: empty candidate pool");

    const std::size_t quota = per_class_quota(budget, classes.size());

    LatentMemory mem;
    mem.budget = budget;
    mem.raw = store_raw;
    for (auto& [key, idxs] : classes) {
        const Centroid* p = centroids.find(key.first, key.second);
        require(p != nullptr, "populate: no centroid for task ", key.first, " class ",
                key.second);
        require(!idxs.empty(), "populate: class with zero candidates");
        std::vector<std::pair<double, std::size_t>> ranked;
        ranked.reserve(idxs.size());
        for (std::size_t i : idxs)
            ranked.emplace_back(squared_distance(z.row(i), p->position.data(), z.cols), i);
        std::sort(ranked.begin(), ranked.end()); // ties broken by index (second member)
        const std::size_t keep = std::min(quota, ranked.size());
        for (std::size_t k = 0; k < keep; ++k) {
            const std::size_t i = ranked[k].second;
            StoredExemplar e;
            e.task = key.first;
            e.cls = key.second;
            if (store_raw) {
                e.vec.assign(pool.x.row(i), pool.x.row(i) + pool.x.cols);
            } else {
                e.vec.assign(z.row(i), z.row(i) + z.cols);
            }
            mem.entries.push_back(std::move(e));
        }
    }
    require(mem.entries.size() <= budget, "populate: budget exceeded");
    return mem;
}

// Task-boundary memory update. Entries already stored are never re-encoded:
// each prior class just shrinks to the new per-class quota, ranked by the
// squared distance between the stored vector and its centroid (raw-mode rows
// are encoded first, which is lossless). New-task rows are encoded under the
// new model and ranked the same way. This keeps old latents bit-stable across
// tasks so decoder distillation can anchor them.
inline LatentMemory update_memory(const HAEModel& new_model, const LatentMemory& memory,
                                  const CandidatePool& new_pool, const CentroidSet& centroids,
                                  std::size_t budget, bool store_raw = false) {
    require(new_pool.x.rows == new_pool.labels.size(), "update_memory: label count mismatch");
    require(memory.entries.empty() || memory.raw == store_raw,
            "update_memory: storage mode changed mid-stream");

    const auto prior = memory.by_class();
    std::map<std::pair<int, int>, std::vector<std::size_t>> fresh;
    for (std::size_t i = 0; i < new_pool.labels.size(); ++i)
        fresh[new_pool.labels[i]].push_back(i);
    require(!fresh.empty(), "update_memory: empty candidate pool");
    for (const auto& [key, idxs] : fresh)
        require(!prior.count(key), "update_memory: class ", key.second, " of task ", key.first,
                " already stored");

    const std::size_t quota = per_class_quota(budget, prior.size() + fresh.size());

    LatentMemory out;
    out.budget = budget;
    out.raw = store_raw;

    for (const auto& [key, idxs] : prior) {
        const Centroid* p = centroids.find(key.first, key.second);
        require(p != nullptr, "update_memory: no centroid for task ", key.first, " class ",
                key.second);
        std::vector<std::pair<double, std::size_t>> ranked;
        ranked.reserve(idxs.size());
        if (memory.raw) {
            Matrix x(idxs.size(), memory.dim());
            for (std::size_t r = 0; r < idxs.size(); ++r)
                std::copy(memory.entries[idxs[r]].vec.begin(),
                          memory.entries[idxs[r]].vec.end(), x.row(r));
            const Matrix z = encode(new_model, x);
            for (std::size_t r = 0; r < idxs.size(); ++r)
                ranked.emplace_back(
                    squared_distance(z.row(r), p->position.data(), z.cols), idxs[r]);
        } else {
            for (std::size_t i : idxs)
                ranked.emplace_back(squared_distance(memory.entries[i].vec.data(),
                                                     p->position.data(),
                                                     p->position.size()),
                                    i);
        }
        std::sort(ranked.begin(), ranked.end());
        const std::size_t keep = std::min(quota, ranked.size());
        for (std::size_t k = 0; k < keep; ++k)
            out.entries.push_back(memory.entries[ranked[k].second]);
    }

    const Matrix z = encode(new_model, new_pool.x);
    for (const auto& [key, idxs] : fresh) {
        const Centroid* p = centroids.find(key.first, key.second);
        require(p != nullptr, "update_memory: no centroid for task ", key.first, " class ",
                key.second);
        std::vector<std::pair<double, std::size_t>> ranked;
        ranked.reserve(idxs.size());
        for (std::size_t i : idxs)
            ranked.emplace_back(squared_distance(z.row(i), p->position.data(), z.cols), i);
        std::sort(ranked.begin(), ranked.end());
        const std::size_t keep = std::min(quota, ranked.size());
        for (std::size_t k = 0; k < keep; ++k) {
            const std::size_t i = ranked[k].second;
            StoredExemplar e;
            e.task = key.first;
            e.cls = key.second;
            if (store_raw) {
                e.vec.assign(new_pool.x.row(i), new_pool.x.row(i) + new_pool.x.cols);
            } else {
                e.vec.assign(z.row(i), z.row(i) + z.cols);
            }
            out.entries.push_back(std::move(e));
        }
    }
    require(out.entries.size() <= budget, "update_memory: budget exceeded");
    return out;
}

struct ReplayBatch {
    Matrix x; // decoded (or raw) rows, width n
    std::vector<std::pair<int, int>> labels;
};

// Class-balanced replay draw: round-robin over the stored classes, entries
// within a class cycled through a seeded shuffle. Counts across classes
// differ by at most one.
inline ReplayBatch sample_replay_batch(const LatentMemory& memory, const HAEModel& model,
                                       std::size_t count, std::uint64_t seed) {
    require(count >= 1, "sample_replay_batch: count must be >= 1");
    require(!memory.entries.empty(), "sample_replay_batch: empty memory");

    const auto grouped = memory.by_class();
    std::vector<std::pair<int, int>> class_keys;
    for (const auto& [k, v] : grouped) class_keys.push_back(k);

    // per-class shuffled cyclic order
    std::map<std::pair<int, int>, std::vector<std::size_t>> order;
    for (const auto& k : class_keys) {
        auto idxs = grouped.at(k);
        Rng rng(Rng::derive(seed, std::uint64_t(std::uint32_t(k.first)),
                            std::uint64_t(std::uint32_t(k.second))));
        rng.shuffle(idxs);
        order[k] = std::move(idxs);
    }

    std::vector<std::size_t> chosen;
    chosen.reserve(count);
    std::vector<std::size_t> cursor(class_keys.size(), 0);
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t ci = i % class_keys.size();
        const auto& idxs = order.at(class_keys[ci]);
        chosen.push_back(idxs[cursor[ci] % idxs.size()]);
        ++cursor[ci];
    }

    Matrix stored(chosen.size(), memory.dim());
    ReplayBatch out;
    for (std::size_t r = 0; r < chosen.size(); ++r) {
        const auto& e = memory.entries[chosen[r]];
        std::copy(e.vec.begin(), e.vec.end(), stored.row(r));
        out.labels.emplace_back(e.task, e.cls);
    }
    out.x = memory.raw ? std::move(stored) : decode(model, stored);
    return out;
}

struct FootprintReport {
    std::size_t latent_bytes = 0;
    std::size_t decoder_param_bytes = 0;
    std::size_t equivalent_raw_bytes = 0; // same exemplar count at input dimension
    double compression_ratio = 0.0;       // n / m
};

inline FootprintReport footprint_report(const LatentMemory& memory, const HAEModel& model,
                                        std::size_t input_dim) {
    FootprintReport r;
    const std::size_t m = model.latent_dim;
    r.latent_bytes = memory.entries.size() * (memory.raw ? input_dim : m) * 8;
    r.decoder_param_bytes = model.decoder.param_count() * 8;
    r.equivalent_raw_bytes = memory.entries.size() * input_dim * 8;
    r.compression_ratio = double(input_dim) / double(m);
    return r;
}

// ---------------------------------------------------------------------------
// Snapshot file: header (dim, count, budget, raw flag) + packed records.

namespace detail {
constexpr char kMemMagic[8] = {'A', 'H', 'R', 'M', 'E', 'M', '0', '1'};
}

inline void save_memory(const LatentMemory& memory, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    require(bool(os), "save_memory: cannot open ", path);
    os.write(detail::kMemMagic, 8);
    detail::put_u64(os, memory.dim());
    detail::put_u64(os, memory.entries.size());
    detail::put_u64(os, memory.budget);
    detail::put_u64(os, memory.raw ? 1 : 0);
    for (const auto& e : memory.entries) {
        detail::put_u64(os, std::uint64_t(std::int64_t(e.task)));
        detail::put_u64(os, std::uint64_t(std::int64_t(e.cls)));
        detail::put_doubles(os, e.vec.data(), e.vec.size());
    }
    require(bool(os), "save_memory: write failed for ", path);
}

inline LatentMemory load_memory(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    require(bool(is), "load_memory: cannot open ", path);
    char magic[8];
    is.read(magic, 8);
    require(bool(is) && std::memcmp(magic, detail::kMemMagic, 8) == 0,
            "load_memory: bad magic in ", path);
    LatentMemory mem;
    const std::uint64_t dim = detail::get_u64(is);
    const std::uint64_t count = detail::get_u64(is);
    mem.budget = detail::get_u64(is);
    mem.raw = detail::get_u64(is) == 1;
    for (std::uint64_t i = 0; i < count; ++i) {
        StoredExemplar e;
        e.task = int(std::int64_t(detail::get_u64(is)));
        e.cls = int(std::int64_t(detail::get_u64(is)));
        e.vec.resize(dim);
        detail::get_doubles(is, e.vec.data(), dim);
        mem.entries.push_back(std::move(e));
    }
    return mem;
}

} // namespace ahr
