#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "ahr/net.hpp"

namespace ahr {

// Hybrid autoencoder: encoder (n -> m) and decoder (m -> n). "Hybrid" because
// the latent space serves both classification (nearest centroid) and replay
// (decoding stored latents).
struct HAEModel {
    DenseNet encoder;
    DenseNet decoder;
    std::size_t input_dim = 0;  // n
    std::size_t latent_dim = 0; // m

    static HAEModel make(std::size_t n, const std::vector<std::size_t>& hidden, std::size_t m,
                         Rng& rng) {
        require(m < n, "HAEModel: latent dim ", m, " must be smaller than input dim ", n);
        HAEModel hae;
        std::vector<std::size_t> enc_dims{n};
        enc_dims.insert(enc_dims.end(), hidden.begin(), hidden.end());
        enc_dims.push_back(m);
        std::vector<std::size_t> dec_dims(enc_dims.rbegin(), enc_dims.rend());
        hae.encoder = DenseNet::make(enc_dims, rng);
        hae.decoder = DenseNet::make(dec_dims, rng);
        hae.input_dim = n;
        hae.latent_dim = m;
        return hae;
    }
};

inline Matrix encode(const HAEModel& model, const Matrix& batch, ForwardCache* cache = nullptr) {
    return forward(model.encoder, batch, cache);
}

inline Matrix decode(const HAEModel& model, const Matrix& latents, ForwardCache* cache = nullptr) {
    return forward(model.decoder, latents, cache);
}

struct LossBreakdown {
    double recon = 0.0;       // L_x = sum ||x - x_hat||^2
    double latent_pull = 0.0; // L_z = sum ||z - p||^2
    double distill_enc = 0.0;
    double distill_dec = 0.0;
    double lambda = 1.0;

    double total() const { return recon + lambda * latent_pull + distill_enc + distill_dec; }
};

// Reconstruction + latent-pull loss over a batch (sums, not means).
// targets holds one centroid row per batch row. Gradients w.r.t. x_hat and z
// are accumulated into the provided buffers.
inline LossBreakdown hybrid_loss(const Matrix& x, const Matrix& x_hat, const Matrix& z,
                                 const Matrix& targets, double lambda, Matrix* grad_x_hat,
                                 Matrix* grad_z) {
    require(x.same_shape(x_hat), "hybrid_loss: x and x_hat shapes differ");
    require(z.rows == x.rows, "hybrid_loss: z row count differs from x");
    require(targets.rows == z.rows && targets.cols == z.cols,
            "hybrid_loss: every row needs an assigned centroid of latent width");

    LossBreakdown out;
    out.lambda = lambda;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x_hat.data[i] - x.data[i];
        out.recon += d * d;
        if (grad_x_hat) grad_x_hat->data[i] += 2.0 * d;
    }
    for (std::size_t i = 0; i < z.size(); ++i) {
        const double d = z.data[i] - targets.data[i];
        out.latent_pull += d * d;
        if (grad_z) grad_z->data[i] += 2.0 * lambda * d;
    }
    return out;
}

struct DistillConfig {
    bool squared = true;  // squared L2 (smooth at zero); false = per-row L2 norm
    double weight = 1.0;
};

// Old-model targets for distillation, computed once per batch with the frozen
// model; no gradient ever flows into these.
struct DistillTargets {
    Matrix old_latent;
    Matrix old_recon;
};

inline DistillTargets distill_targets(const HAEModel& old_model, const Matrix& batch) {
    DistillTargets t;
    t.old_latent = encode(old_model, batch);
    t.old_recon = decode(old_model, t.old_latent);
    return t;
}

namespace detail {
// loss = sum over rows of ||a - target||  (or its square, summed elementwise),
// gradient accumulated w.r.t. a.
inline double penalty(const Matrix& a, const Matrix& target, const DistillConfig& cfg,
                      Matrix* grad_a) {
    require(a.same_shape(target), "distill: shape mismatch between new and old outputs");
    double loss = 0.0;
    if (cfg.squared) {
        for (std::size_t i = 0; i < a.size(); ++i) {
            const double d = a.data[i] - target.data[i];
            loss += d * d;
            if (grad_a) grad_a->data[i] += cfg.weight * 2.0 * d;
        }
    } else {
        for (std::size_t r = 0; r < a.rows; ++r) {
            const double sq = squared_distance(a.row(r), target.row(r), a.cols);
            const double norm = std::sqrt(sq);
            loss += norm;
            if (grad_a && norm > 0.0) {
                for (std::size_t c = 0; c < a.cols; ++c)
                    grad_a->at(r, c) += cfg.weight * (a.at(r, c) - target.at(r, c)) / norm;
            }
        }
    }
    return cfg.weight * loss;
}
} // namespace detail

// Encoder + decoder distillation of the new model against a frozen old model.
// Gradients are accumulated w.r.t. the NEW model's latent and reconstruction;
// the old model sees no gradient by construction.
inline std::pair<double, double> distill_loss(const DistillTargets& targets,
                                              const Matrix& new_latent, const Matrix& new_recon,
                                              const DistillConfig& cfg, Matrix* grad_latent,
                                              Matrix* grad_recon) {
    const double enc = detail::penalty(new_latent, targets.old_latent, cfg, grad_latent);
    const double dec = detail::penalty(new_recon, targets.old_recon, cfg, grad_recon);
    return {enc, dec};
}

// Convenience wrapper for tests: evaluates the full distillation penalty
// between two models on a batch.
inline double distill_loss(const HAEModel& old_model, const HAEModel& new_model,
                           const Matrix& batch, const DistillConfig& cfg = {}) {
    require(old_model.encoder.same_architecture(new_model.encoder) &&
                old_model.decoder.same_architecture(new_model.decoder),
            "distill_loss: architecture mismatch");
    const DistillTargets t = distill_targets(old_model, batch);
    const Matrix z = encode(new_model, batch);
    const Matrix xh = decode(new_model, z);
    auto [enc, dec] = distill_loss(t, z, xh, cfg, nullptr, nullptr);
    return enc + dec;
}

// ---------------------------------------------------------------------------
// Checkpoint format: magic, version, dims, then per-net layer table and raw
// little-endian doubles. write -> read -> write is byte-identical.

namespace detail {
constexpr char kCkptMagic[8] = {'A', 'H', 'R', 'C', 'K', 'P', 'T', '1'};

inline void put_u64(std::ostream& os, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = (v >> (8 * i)) & 0xff;
    os.write(reinterpret_cast<const char*>(b), 8);
}
inline std::uint64_t get_u64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    require(bool(is), "checkpoint: truncated file");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(b[i]) << (8 * i);
    return v;
}
inline void put_doubles(std::ostream& os, const double* p, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        std::uint64_t bits;
        std::memcpy(&bits, &p[i], 8);
        put_u64(os, bits);
    }
}
inline void get_doubles(std::istream& is, double* p, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint64_t bits = get_u64(is);
        std::memcpy(&p[i], &bits, 8);
    }
}

inline void write_net(std::ostream& os, const DenseNet& net) {
    put_u64(os, net.layers.size());
    for (const auto& l : net.layers) {
        put_u64(os, l.weight.rows);
        put_u64(os, l.weight.cols);
        put_u64(os, l.act == Activation::ReLU ? 1 : 0);
        put_doubles(os, l.weight.data.data(), l.weight.size());
        put_doubles(os, l.bias.data(), l.bias.size());
    }
}
inline DenseNet read_net(std::istream& is) {
    DenseNet net;
    const std::uint64_t nlayers = get_u64(is);
    for (std::uint64_t i = 0; i < nlayers; ++i) {
        DenseNet::Layer l;
        const std::uint64_t rows = get_u64(is);
        const std::uint64_t cols = get_u64(is);
        l.act = get_u64(is) == 1 ? Activation::ReLU : Activation::Identity;
        l.weight = Matrix(rows, cols);
        l.bias.assign(rows, 0.0);
        get_doubles(is, l.weight.data.data(), l.weight.size());
        get_doubles(is, l.bias.data(), l.bias.size());
        net.layers.push_back(std::move(l));
    }
    return net;
}
} // namespace detail

inline void save_checkpoint(const HAEModel& model, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    require(bool(os), "save_checkpoint: cannot open ", path);
    os.write(detail::kCkptMagic, 8);
    detail::put_u64(os, model.input_dim);
    detail::put_u64(os, model.latent_dim);
    detail::write_net(os, model.encoder);
    detail::write_net(os, model.decoder);
    require(bool(os), "save_checkpoint: write failed for ", path);
}

inline HAEModel load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    require(bool(is), "load_checkpoint: cannot open ", path);
    char magic[8];
    is.read(magic, 8);
    require(bool(is) && std::memcmp(magic, detail::kCkptMagic, 8) == 0,
            "load_checkpoint: bad magic in ", path);
    HAEModel model;
    model.input_dim = detail::get_u64(is);
    model.latent_dim = detail::get_u64(is);
    model.encoder = detail::read_net(is);
    model.decoder = detail::read_net(is);
    return model;
}

} // namespace ahr
