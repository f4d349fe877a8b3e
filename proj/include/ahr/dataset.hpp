#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ahr/error.hpp"
#include "ahr/matrix.hpp"
#include "ahr/rng.hpp"

namespace ahr {

struct LabeledDataset {
    Matrix x;
    std::vector<int> labels;

    std::size_t size() const { return x.rows; }

    std::set<int> class_set() const { return {labels.begin(), labels.end()}; }
};

// ---------------------------------------------------------------------------
// IDX ingestion (MNIST's on-disk format): big-endian magic 0x803 for images,
// 0x801 for labels, unsigned-byte pixels scaled to [0, 1].

namespace detail {
inline std::uint32_t read_be32(std::istream& is, const std::string& path) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    require(bool(is), "load_idx: truncated header in ", path);
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
           (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}
} // namespace detail

inline LabeledDataset load_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream imgs(images_path, std::ios::binary);
    require(bool(imgs), "load_idx: cannot open ", images_path);
    require(detail::read_be32(imgs, images_path) == 0x00000803u,
            "load_idx: bad image magic in ", images_path);
    const std::uint32_t count = detail::read_be32(imgs, images_path);
    const std::uint32_t h = detail::read_be32(imgs, images_path);
    const std::uint32_t w = detail::read_be32(imgs, images_path);
    const std::size_t dim = std::size_t(h) * w;

    std::ifstream labs(labels_path, std::ios::binary);
    require(bool(labs), "load_idx: cannot open ", labels_path);
    require(detail::read_be32(labs, labels_path) == 0x00000801u,
            "load_idx: bad label magic in ", labels_path);
    const std::uint32_t lcount = detail::read_be32(labs, labels_path);
    require(count == lcount, "load_idx: image count ", count, " != label count ", lcount);

    LabeledDataset ds;
    ds.x = Matrix(count, dim);
    std::vector<unsigned char> row(dim);
    for (std::uint32_t i = 0; i < count; ++i) {
        imgs.read(reinterpret_cast<char*>(row.data()), std::streamsize(dim));
        require(bool(imgs), "load_idx: truncated image data in ", images_path);
        for (std::size_t j = 0; j < dim; ++j) ds.x.at(i, j) = double(row[j]) / 255.0;
    }
    ds.labels.resize(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        unsigned char l;
        labs.read(reinterpret_cast<char*>(&l), 1);
        require(bool(labs), "load_idx: truncated label data in ", labels_path);
        ds.labels[i] = int(l);
    }
    return ds;
}

// ---------------------------------------------------------------------------
// Task streams

struct Task {
    int id = 0; // 1-based task index
    std::vector<int> classes;
    LabeledDataset train;
    LabeledDataset test;
};

struct TaskStream {
    std::vector<Task> tasks;
    std::string provenance;
    std::uint64_t split_seed = 0;
    std::size_t input_dim = 0;

    void check_disjoint() const {
        std::set<int> seen;
        for (const auto& t : tasks) {
            require(!t.train.labels.empty(), "TaskStream: empty task ", t.id);
            for (int c : t.classes) {
                require(!seen.count(c), "TaskStream: class ", c, " appears in multiple tasks");
                seen.insert(c);
            }
        }
    }
};

namespace detail {
inline LabeledDataset select_classes(const LabeledDataset& ds, const std::set<int>& classes) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < ds.labels.size(); ++i)
        if (classes.count(ds.labels[i])) rows.push_back(i);
    LabeledDataset out;
    out.x = Matrix(rows.size(), ds.x.cols);
    out.labels.reserve(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        std::copy(ds.x.row(rows[r]), ds.x.row(rows[r]) + ds.x.cols, out.x.row(r));
        out.labels.push_back(ds.labels[rows[r]]);
    }
    return out;
}
} // namespace detail

// D(T/C) split: T tasks of C classes each, natural label order by default,
// optional seeded shuffle of the class-to-task assignment.
inline TaskStream split_tasks(const LabeledDataset& train, const LabeledDataset& test,
                              std::size_t t_tasks, std::size_t c_per_task,
                              std::optional<std::uint64_t> shuffle_seed = std::nullopt,
                              const std::string& provenance = "dataset") {
    const std::set<int> class_set = train.class_set();
    std::vector<int> classes(class_set.begin(), class_set.end());
    require(classes.size() >= t_tasks * c_per_task, "split_tasks: need ", t_tasks * c_per_task,
            " classes, dataset has ", classes.size());
    if (shuffle_seed) {
        Rng rng(*shuffle_seed);
        rng.shuffle(classes);
    }
    TaskStream stream;
    stream.provenance = provenance;
    stream.split_seed = shuffle_seed.value_or(0);
    stream.input_dim = train.x.cols;
    for (std::size_t t = 0; t < t_tasks; ++t) {
        Task task;
        task.id = int(t) + 1;
        std::set<int> cls;
        for (std::size_t c = 0; c < c_per_task; ++c) {
            task.classes.push_back(classes[t * c_per_task + c]);
            cls.insert(classes[t * c_per_task + c]);
        }
        task.train = detail::select_classes(train, cls);
        task.test = detail::select_classes(test, cls);
        stream.tasks.push_back(std::move(task));
    }
    stream.check_disjoint();
    return stream;
}

// Seeded Gaussian cluster stream: T*C isotropic unit-variance clusters with
// centers at pairwise distance >= cluster_sep. CI stand-in for image data.
inline TaskStream make_synthetic(std::uint64_t seed, std::size_t t_tasks, std::size_t c_per_task,
                                 std::size_t input_dim, std::size_t samples_per_class,
                                 double cluster_sep, std::size_t test_per_class = 0) {
    require(input_dim >= 1 && t_tasks >= 1 && c_per_task >= 1,
            "make_synthetic: invalid dimensions");
    if (test_per_class == 0) test_per_class = std::max<std::size_t>(1, samples_per_class / 4);
    const std::size_t n_classes = t_tasks * c_per_task;

    Rng rng(Rng::derive(seed, 0x53594e54));
    std::vector<std::vector<double>> centers;
    double scale = cluster_sep * std::max(1.0, std::sqrt(double(n_classes)));
    while (centers.size() < n_classes) {
        std::vector<double> cand(input_dim);
        for (auto& v : cand) v = rng.normal() * scale;
        bool ok = true;
        for (const auto& c : centers)
            if (squared_distance(cand.data(), c.data(), input_dim) < cluster_sep * cluster_sep) {
                ok = false;
                break;
            }
        if (ok)
            centers.push_back(std::move(cand));
        else
            scale *= 1.01; // grow the placement radius until rejection stops
    }

    auto draw = [&](int cls, std::size_t count, LabeledDataset& ds, std::size_t row0) {
        for (std::size_t k = 0; k < count; ++k) {
            for (std::size_t d = 0; d < input_dim; ++d)
                ds.x.at(row0 + k, d) = centers[std::size_t(cls)][d] + rng.normal();
            ds.labels[row0 + k] = cls;
        }
    };

    TaskStream stream;
    stream.provenance = "synthetic";
    stream.split_seed = seed;
    stream.input_dim = input_dim;
    for (std::size_t t = 0; t < t_tasks; ++t) {
        Task task;
        task.id = int(t) + 1;
        task.train.x = Matrix(c_per_task * samples_per_class, input_dim);
        task.train.labels.resize(c_per_task * samples_per_class);
        task.test.x = Matrix(c_per_task * test_per_class, input_dim);
        task.test.labels.resize(c_per_task * test_per_class);
        for (std::size_t c = 0; c < c_per_task; ++c) {
            const int cls = int(t * c_per_task + c);
            task.classes.push_back(cls);
            draw(cls, samples_per_class, task.train, c * samples_per_class);
            draw(cls, test_per_class, task.test, c * test_per_class);
        }
        stream.tasks.push_back(std::move(task));
    }
    stream.check_disjoint();
    return stream;
}

// Deterministic stratified subset (used by the reduced-data configs).
inline LabeledDataset stratified_subset(const LabeledDataset& ds, std::size_t total,
                                        std::uint64_t seed) {
    if (total >= ds.size()) return ds;
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < ds.labels.size(); ++i) by_class[ds.labels[i]].push_back(i);
    const std::size_t per_class = total / by_class.size();
    std::vector<std::size_t> rows;
    for (auto& [cls, idxs] : by_class) {
        Rng rng(Rng::derive(seed, std::uint64_t(std::uint32_t(cls)), 0x53554253));
        rng.shuffle(idxs);
        for (std::size_t k = 0; k < std::min(per_class, idxs.size()); ++k)
            rows.push_back(idxs[k]);
    }
    std::sort(rows.begin(), rows.end());
    LabeledDataset out;
    out.x = Matrix(rows.size(), ds.x.cols);
    out.labels.reserve(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        std::copy(ds.x.row(rows[r]), ds.x.row(rows[r]) + ds.x.cols, out.x.row(r));
        out.labels.push_back(ds.labels[rows[r]]);
    }
    return out;
}

} // namespace ahr
