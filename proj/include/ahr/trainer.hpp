#pragma once

#include <cstdint>
#include <set>
#include <utility>
#include <vector>

#include "ahr/cce.hpp"
#include "ahr/dataset.hpp"
#include "ahr/exemplar_memory.hpp"
#include "ahr/hae.hpp"

namespace ahr {

enum class Ablation { standard, lossless, lossless_mini, lossy_mini };

inline const char* to_string(Ablation a) {
    switch (a) {
        case Ablation::standard: return "standard";
        case Ablation::lossless: return "lossless";
        case Ablation::lossless_mini: return "lossless_mini";
        case Ablation::lossy_mini: return "lossy_mini";
    }
    return "?";
}

struct TrainConfig {
    std::size_t epochs = 40;
    std::size_t minibatch_size = 128;
    double lr = 0.001;
    double lambda = 30.0;
    RFAConfig rfa;
    std::size_t budget_M = 8000;
    std::uint64_t seed = 0;
    Ablation ablation = Ablation::standard;
    DistillConfig distill;

    // Strategy switches (FT disables both, FT-E disables distillation and
    // stores raw exemplars under a byte budget chosen by the harness).
    bool replay_enabled = true;
    bool distill_enabled = true;
    bool store_raw_override = false;     // force raw storage regardless of ablation
    std::size_t budget_override = 0;     // nonzero replaces the effective budget

    bool stores_raw() const {
        return store_raw_override || ablation == Ablation::lossless ||
               ablation == Ablation::lossless_mini;
    }

    // Effective exemplar-count budget. The -mini ablations cap at the
    // raw-equivalent count M*m/n.
    std::size_t effective_budget(std::size_t latent_dim, std::size_t input_dim) const {
        if (budget_override > 0) return budget_override;
        if (ablation == Ablation::lossless_mini || ablation == Ablation::lossy_mini) {
            const std::size_t cap = budget_M * latent_dim / input_dim;
            return cap > 0 ? cap : 1;
        }
        return budget_M;
    }
};

struct LearnerState {
    HAEModel model;
    CentroidSet centroids;
    LatentMemory memory;
    std::size_t tasks_seen = 0;
    std::set<int> seen_classes;
};

struct TaskTrainStats {
    double first_epoch_mean_loss = 0.0;
    double last_epoch_mean_loss = 0.0;
    std::size_t samples_processed = 0; // training rows consumed across all optimizer steps
};

// 1/l of the minibatch (rounded half-up) comes from the new task, the rest is
// decoded replay. Exposed separately for testing; the training loop applies
// the same arithmetic per chunk of the epoch pass.
struct MinibatchSplit {
    std::size_t new_rows = 0;
    std::size_t replay_rows = 0;
};

inline MinibatchSplit build_minibatch_split(std::size_t size, std::size_t task_index) {
    require(task_index >= 1, "build_minibatch_split: task index must be >= 1");
    MinibatchSplit s;
    s.new_rows = (2 * size + task_index) / (2 * task_index); // round(size/l) half-up
    if (s.new_rows > size) s.new_rows = size;
    if (s.new_rows == 0) s.new_rows = 1;
    s.replay_rows = size - s.new_rows;
    return s;
}

namespace detail {

inline Matrix centroid_targets(const CentroidSet& centroids,
                               const std::vector<std::pair<int, int>>& labels, std::size_t m) {
    Matrix t(labels.size(), m);
    for (std::size_t r = 0; r < labels.size(); ++r) {
        const Centroid* c = centroids.find(labels[r].first, labels[r].second);
        require(c != nullptr, "training row without an assigned centroid (task ",
                labels[r].first, " class ", labels[r].second, ")");
        std::copy(c->position.begin(), c->position.end(), t.row(r));
    }
    return t;
}

} // namespace detail

// One optimization step of the composite loss (Eq.-style hybrid loss plus
// optional distillation against the frozen old model) on a mixed batch.
inline LossBreakdown train_step(HAEModel& model, const HAEModel* old_model, const Matrix& batch,
                                const Matrix& targets, const TrainConfig& cfg,
                                AdamState& enc_state, AdamState& dec_state) {
    ForwardCache enc_cache, dec_cache;
    const Matrix z = forward(model.encoder, batch, &enc_cache);
    const Matrix x_hat = forward(model.decoder, z, &dec_cache);

    Matrix grad_x_hat(x_hat.rows, x_hat.cols);
    Matrix grad_z(z.rows, z.cols);
    LossBreakdown loss =
        hybrid_loss(batch, x_hat, z, targets, cfg.lambda, &grad_x_hat, &grad_z);

    if (old_model && cfg.distill_enabled) {
        const DistillTargets t = distill_targets(*old_model, batch);
        auto [enc_l, dec_l] = distill_loss(t, z, x_hat, cfg.distill, &grad_z, &grad_x_hat);
        loss.distill_enc = enc_l;
        loss.distill_dec = dec_l;
    }

    NetGrads dec_grads = NetGrads::zeros_like(model.decoder);
    NetGrads enc_grads = NetGrads::zeros_like(model.encoder);
    const Matrix dz_from_dec = backward(model.decoder, dec_cache, grad_x_hat, dec_grads);
    for (std::size_t i = 0; i < grad_z.size(); ++i) grad_z.data[i] += dz_from_dec.data[i];
    backward(model.encoder, enc_cache, grad_z, enc_grads);

    adam_step(model.encoder, enc_grads, enc_state, cfg.lr);
    adam_step(model.decoder, dec_grads, dec_state, cfg.lr);
    return loss;
}

// Algorithm: place centroids for the new task via RFA, train the copied model
// on mixed minibatches with distillation, repopulate the fixed-budget memory,
// drop the old model.
inline TaskTrainStats learn_task(LearnerState& state, const Task& task, const TrainConfig& cfg) {
    for (int c : task.classes)
        require(!state.seen_classes.count(c), "learn_task: class ", c,
                " overlaps a previously seen task");
    require(cfg.epochs >= 0, "learn_task: bad epoch count");
    const std::size_t ell = state.tasks_seen + 1;
    if (cfg.replay_enabled && ell > 1)
        require(cfg.minibatch_size >= ell,
                "learn_task: minibatch size must be >= task count when replay is active");

    // --- centroid placement (frozen prior centroids repel, never move)
    std::vector<std::pair<int, int>> train_labels;
    train_labels.reserve(task.train.labels.size());
    for (int l : task.train.labels) train_labels.emplace_back(task.id, l);

    std::vector<Centroid> movers =
        init_new_centroids(state.model, task.train.x, task.train.labels, task.id);
    movers = rfa_simulate(std::move(movers), state.centroids, cfg.rfa,
                          Rng::derive(cfg.seed, ell, 0x52464153));
    for (auto& m : movers) {
        m.frozen = true;
        state.centroids.add(m);
    }

    // --- HAE training on mixed minibatches
    const HAEModel old_model = state.model; // frozen copy; also decodes replay rows
    HAEModel new_model = state.model;
    AdamState enc_state = AdamState::make(new_model.encoder);
    AdamState dec_state = AdamState::make(new_model.decoder);

    const bool replay = cfg.replay_enabled && ell > 1;
    if (replay) require(!state.memory.entries.empty(), "learn_task: empty memory with replay");
    const MinibatchSplit split = build_minibatch_split(cfg.minibatch_size, replay ? ell : 1);

    TaskTrainStats stats;
    const std::size_t n_new = task.train.size();
    std::vector<std::size_t> order(n_new);
    for (std::size_t i = 0; i < n_new; ++i) order[i] = i;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng shuffle_rng(Rng::derive(cfg.seed, ell, 0x45504f43, epoch));
        shuffle_rng.shuffle(order);
        double epoch_loss = 0.0;
        std::size_t epoch_batches = 0;

        for (std::size_t start = 0; start < n_new; start += split.new_rows) {
            const std::size_t chunk = std::min(split.new_rows, n_new - start);
            // keep the replay ratio on the final partial chunk
            const std::size_t replay_count =
                replay ? (chunk * split.replay_rows + split.new_rows / 2) / split.new_rows : 0;

            Matrix batch(chunk + replay_count, state.model.input_dim);
            std::vector<std::pair<int, int>> labels;
            labels.reserve(chunk + replay_count);
            for (std::size_t r = 0; r < chunk; ++r) {
                const std::size_t src = order[start + r];
                std::copy(task.train.x.row(src), task.train.x.row(src) + batch.cols,
                          batch.row(r));
                labels.emplace_back(task.id, task.train.labels[src]);
            }
            if (replay_count > 0) {
                const ReplayBatch rb = sample_replay_batch(
                    state.memory, old_model, replay_count,
                    Rng::derive(cfg.seed, ell, epoch * 1000003 + epoch_batches));
                for (std::size_t r = 0; r < replay_count; ++r)
                    std::copy(rb.x.row(r), rb.x.row(r) + batch.cols, batch.row(chunk + r));
                labels.insert(labels.end(), rb.labels.begin(), rb.labels.end());
            }

            const Matrix targets =
                detail::centroid_targets(state.centroids, labels, new_model.latent_dim);
            const LossBreakdown loss =
                train_step(new_model, ell > 1 ? &old_model : nullptr, batch, targets, cfg,
                           enc_state, dec_state);
            require(std::isfinite(loss.total()), "learn_task: non-finite loss at epoch ",
                    epoch + 1, " batch ", epoch_batches + 1);
            epoch_loss += loss.total();
            ++epoch_batches;
            stats.samples_processed += batch.rows;
        }

        const double mean = epoch_batches ? epoch_loss / double(epoch_batches) : 0.0;
        if (epoch == 0) stats.first_epoch_mean_loss = mean;
        stats.last_epoch_mean_loss = mean;
    }

    // --- memory update: prior entries shrink to the new quota untouched, new
    // task rows are encoded under the new model and added
    if (cfg.replay_enabled) {
        CandidatePool pool;
        pool.x = Matrix(n_new, state.model.input_dim);
        for (std::size_t r = 0; r < n_new; ++r) {
            std::copy(task.train.x.row(r), task.train.x.row(r) + pool.x.cols, pool.x.row(r));
            pool.labels.emplace_back(task.id, task.train.labels[r]);
        }
        state.memory =
            update_memory(new_model, state.memory, pool, state.centroids,
                          cfg.effective_budget(state.model.latent_dim, state.model.input_dim),
                          cfg.stores_raw());
    }

    state.model = std::move(new_model); // old copy goes out of scope here
    state.tasks_seen = ell;
    for (int c : task.classes) state.seen_classes.insert(c);
    return stats;
}

// Nearest-centroid prediction over every centroid seen so far; ties broken by
// (task, class) lexicographic order.
inline std::pair<int, int> classify_latent(const CentroidSet& centroids, const double* z_row) {
    require(!centroids.entries.empty(), "classify: no centroids");
    double best = 0.0;
    const Centroid* best_c = nullptr;
    for (const auto& c : centroids.entries) {
        const double d = squared_distance(z_row, c.position.data(), c.position.size());
        if (!best_c || d < best ||
            (d == best && std::make_pair(c.task, c.cls) < std::make_pair(best_c->task, best_c->cls))) {
            best = d;
            best_c = &c;
        }
    }
    return {best_c->task, best_c->cls};
}

inline std::pair<int, int> classify(const HAEModel& model, const CentroidSet& centroids,
                                    const std::vector<double>& x) {
    Matrix row(1, x.size());
    std::copy(x.begin(), x.end(), row.row(0));
    const Matrix z = encode(model, row);
    return classify_latent(centroids, z.row(0));
}

// Accuracy of nearest-centroid classification on a labeled set (class labels
// compared, task identity ignored as in CIL).
inline double evaluate_accuracy(const HAEModel& model, const CentroidSet& centroids,
                                const LabeledDataset& ds) {
    if (ds.size() == 0) return 0.0;
    const Matrix z = encode(model, ds.x);
    std::size_t correct = 0;
    for (std::size_t r = 0; r < z.rows; ++r) {
        const auto [task, cls] = classify_latent(centroids, z.row(r));
        (void)task;
        if (cls == ds.labels[r]) ++correct;
    }
    return double(correct) / double(ds.size());
}

} // namespace ahr
