#pragma once

#include <cstddef>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "ahr/hae.hpp"
#include "ahr/matrix.hpp"
#include "ahr/rng.hpp"

namespace ahr {

// One class centroid embedding. Frozen entries never move again once a task's
// placement is done.
struct Centroid {
    int task = 0;
    int cls = 0;
    std::vector<double> position;
    bool frozen = false;
};

struct CentroidSet {
    std::vector<Centroid> entries;

    const Centroid* find(int task, int cls) const {
        for (const auto& c : entries)
            if (c.task == task && c.cls == cls) return &c;
        return nullptr;
    }

    void add(Centroid c) {
        require(find(c.task, c.cls) == nullptr, "CentroidSet: duplicate centroid for task ",
                c.task, " class ", c.cls);
        for (double v : c.position)
            require(std::isfinite(v), "CentroidSet: non-finite centroid position");
        entries.push_back(std::move(c));
    }
};

struct RFAConfig {
    double zeta = 1.0;     // repulsive constant
    double mass = 1.0;     // particle mass
    double dt = 0.01;      // time step
    std::size_t steps = 500;
    double damping = 0.9;  // velocity retention per step, (0, 1]
    double charge = 1.0;   // uniform charge (energy diagnostics only)
    double bound = 1e6;    // divergence guard on |position| coordinates

    void validate() const {
        require(zeta > 0 && mass > 0 && dt > 0, "RFAConfig: zeta, mass, dt must be positive");
        require(damping > 0 && damping <= 1, "RFAConfig: damping must be in (0, 1]");
    }
};

// Inverse-square repulsion on a from b: magnitude zeta/|d|^2 along d = a - b.
inline std::vector<double> pairwise_force(const std::vector<double>& p_a,
                                          const std::vector<double>& p_b, double zeta) {
    require(p_a.size() == p_b.size(), "pairwise_force: dimension mismatch");
    double sq = 0.0;
    for (std::size_t i = 0; i < p_a.size(); ++i) {
        const double d = p_a[i] - p_b[i];
        sq += d * d;
    }
    require(sq > 0.0, "pairwise_force: coincident points");
    const double dist = std::sqrt(sq);
    const double scale = zeta / (sq * dist); // zeta/|d|^2 * 1/|d| applied to d
    std::vector<double> f(p_a.size());
    for (std::size_t i = 0; i < p_a.size(); ++i) f[i] = scale * (p_a[i] - p_b[i]);
    return f;
}

// Coulomb potential of the whole configuration: U = sum_k (q^2/2) sum_{k'!=k} 1/r.
inline double potential_energy(const CentroidSet& set, double charge) {
    double u = 0.0;
    const auto& e = set.entries;
    for (std::size_t k = 0; k < e.size(); ++k) {
        for (std::size_t k2 = 0; k2 < e.size(); ++k2) {
            if (k2 == k) continue;
            const double sq =
                squared_distance(e[k].position.data(), e[k2].position.data(), e[k].position.size());
            require(sq > 0.0, "potential_energy: coincident centroids");
            u += (charge * charge / 2.0) / std::sqrt(sq);
        }
    }
    return u;
}

// Initial centroid per class: mean of that class's encodings under the current
// encoder.
inline std::vector<Centroid> init_new_centroids(const HAEModel& model, const Matrix& batch,
                                                const std::vector<int>& classes, int task) {
    require(batch.rows == classes.size(), "init_new_centroids: label count mismatch");
    const Matrix z = encode(model, batch);
    std::map<int, std::pair<std::vector<double>, std::size_t>> acc; // class -> (sum, count)
    for (std::size_t r = 0; r < z.rows; ++r) {
        auto& [sum, count] = acc[classes[r]];
        if (sum.empty()) sum.assign(z.cols, 0.0);
        for (std::size_t c = 0; c < z.cols; ++c) sum[c] += z.at(r, c);
        ++count;
    }
    std::vector<Centroid> out;
    for (auto& [cls, sc] : acc) {
        require(sc.second > 0, "init_new_centroids: empty class ", cls);
        Centroid cent;
        cent.task = task;
        cent.cls = cls;
        cent.position = sc.first;
        for (double& v : cent.position) v /= double(sc.second);
        out.push_back(std::move(cent));
    }
    return out;
}

// Optional per-step position sink for diagnostics.
using TrajectorySink = std::function<void(std::size_t step, const std::vector<Centroid>&)>;

// Repulsive-force placement: movers repel each other and are repelled by the
// frozen set; frozen positions never change. Velocities start at zero.
// Returns the movers with final positions.
inline std::vector<Centroid> rfa_simulate(std::vector<Centroid> movers, const CentroidSet& frozen,
                                          const RFAConfig& cfg, std::uint64_t jitter_seed = 0,
                                          const TrajectorySink& sink = nullptr) {
    cfg.validate();
    if (movers.empty()) return movers;
    const std::size_t dim = movers.front().position.size();
    for (const auto& m : movers)
        require(m.position.size() == dim, "rfa_simulate: inconsistent mover dimensions");
    for (const auto& f : frozen.entries)
        require(f.position.size() == dim, "rfa_simulate: frozen dimension mismatch");

    Rng jitter_rng(Rng::derive(jitter_seed, 0x52464121));
    std::vector<std::vector<double>> vel(movers.size(), std::vector<double>(dim, 0.0));

    // Near-coincident pairs (possible when class means collide) get a tiny
    // seeded jitter instead of a singular force.
    auto separation = [&](std::vector<double>& a, const std::vector<double>& b) {
        double sq = squared_distance(a.data(), b.data(), dim);
        while (sq < 1e-18) {
            double nsq = 0.0;
            std::vector<double> dir(dim);
            for (auto& v : dir) {
                v = jitter_rng.normal();
                nsq += v * v;
            }
            const double scale = 1e-6 / std::sqrt(nsq);
            for (std::size_t i = 0; i < dim; ++i) a[i] += dir[i] * scale;
            sq = squared_distance(a.data(), b.data(), dim);
        }
    };

    // Forces are accumulated from start-of-step positions and all movers are
    // advanced together, so mirror-symmetric configurations stay symmetric.
    std::vector<std::vector<double>> forces(movers.size());
    for (std::size_t step = 0; step < cfg.steps; ++step) {
        for (std::size_t j = 0; j < movers.size(); ++j) {
            for (std::size_t j2 = j + 1; j2 < movers.size(); ++j2)
                separation(movers[j].position, movers[j2].position);
            for (const auto& fz : frozen.entries) separation(movers[j].position, fz.position);
        }
        for (std::size_t j = 0; j < movers.size(); ++j) {
            forces[j].assign(dim, 0.0);
            auto add_from = [&](const std::vector<double>& other) {
                const auto f = pairwise_force(movers[j].position, other, cfg.zeta);
                for (std::size_t i = 0; i < dim; ++i) forces[j][i] += f[i];
            };
            for (std::size_t j2 = 0; j2 < movers.size(); ++j2)
                if (j2 != j) add_from(movers[j2].position);
            for (const auto& fz : frozen.entries) add_from(fz.position);
        }
        for (std::size_t j = 0; j < movers.size(); ++j) {
            for (std::size_t i = 0; i < dim; ++i) {
                vel[j][i] = cfg.damping * (vel[j][i] + forces[j][i] / cfg.mass * cfg.dt);
                movers[j].position[i] += vel[j][i] * cfg.dt;
                require(std::isfinite(movers[j].position[i]) &&
                            std::abs(movers[j].position[i]) <= cfg.bound,
                        "rfa_simulate: divergence at step ", step, " (|position| > ", cfg.bound,
                        ")");
            }
        }
        if (sink) sink(step, movers);
    }
    return movers;
}

// CSV trajectory writer matching (step, task, class, dim_0..dim_{m-1}).
inline TrajectorySink make_csv_trajectory_sink(std::shared_ptr<std::ofstream> os) {
    return [os](std::size_t step, const std::vector<Centroid>& movers) {
        for (const auto& m : movers) {
            *os << step << ',' << m.task << ',' << m.cls;
            for (double v : m.position) *os << ',' << v;
            *os << '\n';
        }
    };
}

} // namespace ahr
