#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "ahr/matrix.hpp"
#include "ahr/rng.hpp"

namespace ahr {

enum class Activation { ReLU, Identity };

// Fully connected feed-forward network. Layer i computes
//   y = act(x * W^T + b),  W: [out x in], b: [out].
// The final layer must be Identity (latents and reconstructions are
// unbounded).
struct DenseNet {
    struct Layer {
        Matrix weight; // out x in
        std::vector<double> bias;
        Activation act = Activation::ReLU;
    };

    std::vector<Layer> layers;

    std::size_t input_dim() const { return layers.front().weight.cols; }
    std::size_t output_dim() const { return layers.back().weight.rows; }

    std::size_t param_count() const {
        std::size_t n = 0;
        for (const auto& l : layers) n += l.weight.size() + l.bias.size();
        return n;
    }

    void for_each_param(const std::function<void(double&)>& fn) {
        for (auto& l : layers) {
            for (double& w : l.weight.data) fn(w);
            for (double& b : l.bias) fn(b);
        }
    }

    bool same_architecture(const DenseNet& o) const {
        if (layers.size() != o.layers.size()) return false;
        for (std::size_t i = 0; i < layers.size(); ++i) {
            if (!layers[i].weight.same_shape(o.layers[i].weight)) return false;
            if (layers[i].act != o.layers[i].act) return false;
        }
        return true;
    }

    // Glorot-uniform weights, zero biases, hidden layers ReLU, final Identity.
    static DenseNet make(const std::vector<std::size_t>& dims, Rng& rng) {
        require(dims.size() >= 2, "DenseNet::make: need at least input and output dims");
        DenseNet net;
        for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
            Layer l;
            const std::size_t in = dims[i], out = dims[i + 1];
            l.weight = Matrix(out, in);
            const double limit = std::sqrt(6.0 / double(in + out));
            for (double& w : l.weight.data) w = rng.uniform(-limit, limit);
            l.bias.assign(out, 0.0);
            l.act = (i + 2 == dims.size()) ? Activation::Identity : Activation::ReLU;
            net.layers.push_back(std::move(l));
        }
        return net;
    }
};

// Per-layer activations retained by forward() for the matching backward().
struct ForwardCache {
    // inputs[i] is the input to layer i; inputs.back() is the network output.
    std::vector<Matrix> inputs;
    // pre[i] is layer i's pre-activation (x*W^T + b).
    std::vector<Matrix> pre;
};

struct NetGrads {
    struct LayerGrad {
        Matrix weight;
        std::vector<double> bias;
    };
    std::vector<LayerGrad> layers;

    static NetGrads zeros_like(const DenseNet& net) {
        NetGrads g;
        for (const auto& l : net.layers) {
            g.layers.push_back({Matrix(l.weight.rows, l.weight.cols),
                                std::vector<double>(l.bias.size(), 0.0)});
        }
        return g;
    }

    void for_each(const std::function<void(double&)>& fn) {
        for (auto& l : layers) {
            for (double& w : l.weight.data) fn(w);
            for (double& b : l.bias) fn(b);
        }
    }
};

inline Matrix forward(const DenseNet& net, const Matrix& batch, ForwardCache* cache = nullptr) {
    require(batch.cols == net.input_dim(), "forward: batch width ", batch.cols,
            " != net input dim ", net.input_dim());
    if (cache) {
        cache->inputs.clear();
        cache->pre.clear();
    }
    Matrix x = batch;
    for (const auto& l : net.layers) {
        if (cache) cache->inputs.push_back(x);
        Matrix z = matmul_nt(x, l.weight);
        for (std::size_t r = 0; r < z.rows; ++r)
            for (std::size_t c = 0; c < z.cols; ++c) z.at(r, c) += l.bias[c];
        if (cache) cache->pre.push_back(z);
        if (l.act == Activation::ReLU) {
            // derivative at exactly 0 is 0 (z<=0 -> clamped)
            for (double& v : z.data)
                if (v <= 0.0) v = 0.0;
        }
        x = std::move(z);
    }
    require(x.all_finite(), "forward: non-finite output");
    if (cache) cache->inputs.push_back(x);
    return x;
}

// Reverse-mode pass. output_grad is dL/d(output); returns parameter grads and
// dL/d(batch). Accumulates into `grads` so several loss terms can share one
// grad buffer.
inline Matrix backward(const DenseNet& net, const ForwardCache& cache, const Matrix& output_grad,
                       NetGrads& grads) {
    require(cache.inputs.size() == net.layers.size() + 1 && cache.pre.size() == net.layers.size(),
            "backward: cache does not match net (stale or from another forward)");
    require(grads.layers.size() == net.layers.size(), "backward: grads shape mismatch");
    require(output_grad.same_shape(cache.inputs.back()),
            "backward: output_grad shape mismatch");

    Matrix delta = output_grad;
    for (std::size_t li = net.layers.size(); li-- > 0;) {
        const auto& l = net.layers[li];
        if (l.act == Activation::ReLU) {
            const Matrix& z = cache.pre[li];
            for (std::size_t i = 0; i < delta.size(); ++i)
                if (z.data[i] <= 0.0) delta.data[i] = 0.0;
        }
        const Matrix& x = cache.inputs[li];
        Matrix dw = matmul_tn(delta, x);
        auto& g = grads.layers[li];
        for (std::size_t i = 0; i < dw.size(); ++i) g.weight.data[i] += dw.data[i];
        for (std::size_t r = 0; r < delta.rows; ++r)
            for (std::size_t c = 0; c < delta.cols; ++c) g.bias[c] += delta.at(r, c);
        delta = matmul(delta, l.weight);
    }
    require(delta.all_finite(), "backward: non-finite input gradient");
    return delta;
}

// Adam with bias correction. Moments are shaped like the parameters.
struct AdamState {
    std::size_t step = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::vector<double> m; // first moment, flat over all params
    std::vector<double> v; // second moment

    static AdamState make(const DenseNet& net, double beta1 = 0.9, double beta2 = 0.999,
                          double eps = 1e-8) {
        AdamState s;
        s.beta1 = beta1;
        s.beta2 = beta2;
        s.eps = eps;
        s.m.assign(net.param_count(), 0.0);
        s.v.assign(net.param_count(), 0.0);
        return s;
    }
};

inline void adam_step(DenseNet& net, const NetGrads& grads, AdamState& state, double lr) {
    require(state.m.size() == net.param_count(), "adam_step: state shaped for a different net");
    require(grads.layers.size() == net.layers.size(), "adam_step: grads shape mismatch");
    state.step += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, double(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, double(state.step));

    std::size_t i = 0;
    auto update = [&](double* p, const double* g, std::size_t n) {
        for (std::size_t k = 0; k < n; ++k, ++i) {
            state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g[k];
            state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g[k] * g[k];
            p[k] -= lr * (state.m[i] / bc1) / (std::sqrt(state.v[i] / bc2) + state.eps);
        }
    };
    for (std::size_t li = 0; li < net.layers.size(); ++li) {
        auto& l = net.layers[li];
        const auto& g = grads.layers[li];
        require(l.weight.same_shape(g.weight) && l.bias.size() == g.bias.size(),
                "adam_step: layer ", li, " grad shape mismatch");
        update(l.weight.data.data(), g.weight.data.data(), l.weight.size());
        update(l.bias.data(), g.bias.data(), l.bias.size());
    }
}

} // namespace ahr
