#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "slucoex/rng.hpp"

namespace slucoex::rl {

enum class Activation : std::uint8_t { Linear = 0, Relu = 1, Tanh = 2 };

inline double activate(Activation a, double z) {
    switch (a) {
    case Activation::Relu: return z > 0.0 ? z : 0.0;
    case Activation::Tanh: return std::tanh(z);
    default: return z;
    }
}

inline double activate_grad(Activation a, double z) {
    switch (a) {
    case Activation::Relu: return z > 0.0 ? 1.0 : 0.0;
    case Activation::Tanh: {
        const double t = std::tanh(z);
        return 1.0 - t * t;
    }
    default: return 1.0;
    }
}

struct AdamParams {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Plain fully connected value network. Weights are row-major (out x in);
// Adam first/second moments ride along with the parameters.
struct QNetwork {
    std::vector<int> dims;              // [input, hidden..., output]
    std::vector<Activation> acts;       // one per weight layer
    std::vector<std::vector<double>> w; // per layer, out*in
    std::vector<std::vector<double>> b; // per layer, out
    std::vector<std::vector<double>> mw, vw, mb, vb;
    std::uint64_t adam_t = 0;
    std::uint64_t train_steps = 0;

    int input_dim() const { return dims.front(); }
    int output_dim() const { return dims.back(); }
    std::size_t layer_count() const { return w.size(); }

    std::vector<double> forward(std::span<const double> x) const {
        if (static_cast<int>(x.size()) != input_dim())
            throw std::invalid_argument("QNetwork::forward: input dimension mismatch");
        std::vector<double> a(x.begin(), x.end()), next;
        for (std::size_t l = 0; l < w.size(); ++l) {
            const int in = dims[l], out = dims[l + 1];
            next.assign(static_cast<std::size_t>(out), 0.0);
            const double* wl = w[l].data();
            for (int o = 0; o < out; ++o) {
                double z = b[l][static_cast<std::size_t>(o)];
                const double* row = wl + static_cast<std::size_t>(o) * in;
                for (int i = 0; i < in; ++i)
                    z += row[i] * a[static_cast<std::size_t>(i)];
                next[static_cast<std::size_t>(o)] = activate(acts[l], z);
            }
            a.swap(next);
        }
        return a;
    }
};

// Hidden layers use the relu/relu/tanh pattern (tanh on the last hidden layer),
// linear output head.
inline std::vector<Activation> default_activations(std::size_t n_hidden) {
    std::vector<Activation> acts;
    for (std::size_t i = 0; i < n_hidden; ++i)
        acts.push_back(i + 1 == n_hidden ? Activation::Tanh : Activation::Relu);
    acts.push_back(Activation::Linear);
    return acts;
}

inline QNetwork make_network(const std::vector<int>& dims,
                             const std::vector<Activation>& acts, Rng& rng) {
    if (dims.size() < 2 || acts.size() != dims.size() - 1)
        throw std::invalid_argument("make_network: dims/activations mismatch");
    QNetwork net;
    net.dims = dims;
    net.acts = acts;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        const int in = dims[l], out = dims[l + 1];
        const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
        std::vector<double> wl(static_cast<std::size_t>(in) * out);
        for (auto& v : wl)
            v = rng.uniform_real(-bound, bound);
        net.w.push_back(std::move(wl));
        net.b.emplace_back(static_cast<std::size_t>(out), 0.0);
        net.mw.emplace_back(static_cast<std::size_t>(in) * out, 0.0);
        net.vw.emplace_back(static_cast<std::size_t>(in) * out, 0.0);
        net.mb.emplace_back(static_cast<std::size_t>(out), 0.0);
        net.vb.emplace_back(static_cast<std::size_t>(out), 0.0);
    }
    return net;
}

inline QNetwork make_q_network(int input, const std::vector<int>& hidden, int output,
                               Rng& rng) {
    std::vector<int> dims;
    dims.push_back(input);
    for (int h : hidden)
        dims.push_back(h);
    dims.push_back(output);
    return make_network(dims, default_activations(hidden.size()), rng);
}

struct TrainSample {
    std::vector<double> input;
    double target = 0.0;
    int action = 0;
};

struct Gradients {
    std::vector<std::vector<double>> w;
    std::vector<std::vector<double>> b;
};

// Gradients of the mean squared error of the taken actions w.r.t. all
// parameters, by plain backpropagation.
inline Gradients compute_gradients(const QNetwork& net, std::span<const TrainSample> batch) {
    const std::size_t layers = net.layer_count();
    Gradients g;
    g.w.resize(layers);
    g.b.resize(layers);
    for (std::size_t l = 0; l < layers; ++l) {
        g.w[l].assign(net.w[l].size(), 0.0);
        g.b[l].assign(net.b[l].size(), 0.0);
    }
    auto& gw = g.w;
    auto& gb = g.b;

    std::vector<std::vector<double>> z(layers), a(layers + 1);
    const double inv_batch = 1.0 / static_cast<double>(batch.size());

    for (const auto& sample : batch) {
        // forward pass, keeping pre-activations
        a[0].assign(sample.input.begin(), sample.input.end());
        for (std::size_t l = 0; l < layers; ++l) {
            const int in = net.dims[l], out = net.dims[l + 1];
            z[l].assign(static_cast<std::size_t>(out), 0.0);
            a[l + 1].assign(static_cast<std::size_t>(out), 0.0);
            for (int o = 0; o < out; ++o) {
                double s = net.b[l][static_cast<std::size_t>(o)];
                const double* row = net.w[l].data() + static_cast<std::size_t>(o) * in;
                for (int i = 0; i < in; ++i)
                    s += row[i] * a[l][static_cast<std::size_t>(i)];
                z[l][static_cast<std::size_t>(o)] = s;
                a[l + 1][static_cast<std::size_t>(o)] = activate(net.acts[l], s);
            }
        }

        // squared error on the taken action only
        const int out_dim = net.output_dim();
        std::vector<double> delta(static_cast<std::size_t>(out_dim), 0.0);
        const double q = a[layers][static_cast<std::size_t>(sample.action)];
        const double dq = 2.0 * (q - sample.target) * inv_batch;
        delta[static_cast<std::size_t>(sample.action)] =
            dq * activate_grad(net.acts[layers - 1], z[layers - 1][static_cast<std::size_t>(sample.action)]);

        for (std::size_t l = layers; l-- > 0;) {
            const int in = net.dims[l], out = net.dims[l + 1];
            for (int o = 0; o < out; ++o) {
                const double d = delta[static_cast<std::size_t>(o)];
                if (d == 0.0)
                    continue;
                double* grow = gw[l].data() + static_cast<std::size_t>(o) * in;
                for (int i = 0; i < in; ++i)
                    grow[i] += d * a[l][static_cast<std::size_t>(i)];
                gb[l][static_cast<std::size_t>(o)] += d;
            }
            if (l == 0)
                break;
            std::vector<double> prev(static_cast<std::size_t>(in), 0.0);
            for (int o = 0; o < out; ++o) {
                const double d = delta[static_cast<std::size_t>(o)];
                if (d == 0.0)
                    continue;
                const double* row = net.w[l].data() + static_cast<std::size_t>(o) * in;
                for (int i = 0; i < in; ++i)
                    prev[static_cast<std::size_t>(i)] += row[i] * d;
            }
            for (int i = 0; i < in; ++i)
                prev[static_cast<std::size_t>(i)] *=
                    activate_grad(net.acts[l - 1], z[l - 1][static_cast<std::size_t>(i)]);
            delta.swap(prev);
        }
    }
    return g;
}

// One Adam step on the mean squared TD error of the taken actions.
inline void net_backward_and_adam(QNetwork& net, std::span<const TrainSample> batch,
                                  const AdamParams& adam = {}) {
    if (batch.empty())
        return;
    const Gradients grads = compute_gradients(net, batch);
    const auto& gw = grads.w;
    const auto& gb = grads.b;
    const std::size_t layers = net.layer_count();

    // Adam
    net.adam_t += 1;
    const double bc1 = 1.0 - std::pow(adam.beta1, static_cast<double>(net.adam_t));
    const double bc2 = 1.0 - std::pow(adam.beta2, static_cast<double>(net.adam_t));
    for (std::size_t l = 0; l < layers; ++l) {
        for (std::size_t k = 0; k < net.w[l].size(); ++k) {
            double& m = net.mw[l][k];
            double& v = net.vw[l][k];
            const double g = gw[l][k];
            m = adam.beta1 * m + (1.0 - adam.beta1) * g;
            v = adam.beta2 * v + (1.0 - adam.beta2) * g * g;
            net.w[l][k] -= adam.lr * (m / bc1) / (std::sqrt(v / bc2) + adam.eps);
        }
        for (std::size_t k = 0; k < net.b[l].size(); ++k) {
            double& m = net.mb[l][k];
            double& v = net.vb[l][k];
            const double g = gb[l][k];
            m = adam.beta1 * m + (1.0 - adam.beta1) * g;
            v = adam.beta2 * v + (1.0 - adam.beta2) * g * g;
            net.b[l][k] -= adam.lr * (m / bc1) / (std::sqrt(v / bc2) + adam.eps);
        }
    }
}

// Copies parameters only; the target keeps no optimizer state of its own.
inline void copy_parameters(const QNetwork& from, QNetwork& to) {
    to.dims = from.dims;
    to.acts = from.acts;
    to.w = from.w;
    to.b = from.b;
    if (to.mw.size() != from.w.size()) {
        to.mw.clear();
        to.vw.clear();
        to.mb.clear();
        to.vb.clear();
        for (std::size_t l = 0; l < from.w.size(); ++l) {
            to.mw.emplace_back(from.w[l].size(), 0.0);
            to.vw.emplace_back(from.w[l].size(), 0.0);
            to.mb.emplace_back(from.b[l].size(), 0.0);
            to.vb.emplace_back(from.b[l].size(), 0.0);
        }
    }
}

inline bool same_parameters(const QNetwork& a, const QNetwork& b) {
    return a.dims == b.dims && a.w == b.w && a.b == b.b;
}

// ---------------------------------------------------------------------------
// Checkpoint format (documented in the README):
//   u32  magic "SLQN" (0x4E514C53, little endian)
//   u32  version (1)
//   u32  layer count L (weight layers)
//   u32  dims[L+1]
//   u8   activation tag per layer (0 linear, 1 relu, 2 tanh)
//   u64  training step counter
//   f64  per layer: weights (row-major out*in), then biases (out)
// All integers and doubles little endian. Loading then saving reproduces the
// file byte for byte.
// ---------------------------------------------------------------------------
inline constexpr std::uint32_t kCheckpointMagic = 0x4E514C53u; // "SLQN"
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

template <typename T>
void write_le(std::ostream& out, T value) {
    unsigned char buf[sizeof(T)];
    std::memcpy(buf, &value, sizeof(T));
    out.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T read_le(std::istream& in) {
    unsigned char buf[sizeof(T)];
    in.read(reinterpret_cast<char*>(buf), sizeof(T));
    if (!in)
        throw std::runtime_error("checkpoint: truncated file");
    T value;
    std::memcpy(&value, buf, sizeof(T));
    return value;
}

} // namespace detail

inline void save_network(const QNetwork& net, std::ostream& out) {
    detail::write_le<std::uint32_t>(out, kCheckpointMagic);
    detail::write_le<std::uint32_t>(out, kCheckpointVersion);
    detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(net.layer_count()));
    for (int d : net.dims)
        detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(d));
    for (Activation a : net.acts)
        detail::write_le<std::uint8_t>(out, static_cast<std::uint8_t>(a));
    detail::write_le<std::uint64_t>(out, net.train_steps);
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        for (double v : net.w[l])
            detail::write_le<double>(out, v);
        for (double v : net.b[l])
            detail::write_le<double>(out, v);
    }
}

inline QNetwork load_network(std::istream& in) {
    if (detail::read_le<std::uint32_t>(in) != kCheckpointMagic)
        throw std::runtime_error("checkpoint: bad magic");
    if (detail::read_le<std::uint32_t>(in) != kCheckpointVersion)
        throw std::runtime_error("checkpoint: unsupported version");
    const auto layers = detail::read_le<std::uint32_t>(in);
    QNetwork net;
    net.dims.resize(layers + 1);
    for (auto& d : net.dims)
        d = static_cast<int>(detail::read_le<std::uint32_t>(in));
    net.acts.resize(layers);
    for (auto& a : net.acts)
        a = static_cast<Activation>(detail::read_le<std::uint8_t>(in));
    net.train_steps = detail::read_le<std::uint64_t>(in);
    for (std::uint32_t l = 0; l < layers; ++l) {
        const std::size_t in_dim = static_cast<std::size_t>(net.dims[l]);
        const std::size_t out_dim = static_cast<std::size_t>(net.dims[l + 1]);
        std::vector<double> wl(in_dim * out_dim);
        for (auto& v : wl)
            v = detail::read_le<double>(in);
        std::vector<double> bl(out_dim);
        for (auto& v : bl)
            v = detail::read_le<double>(in);
        net.w.push_back(std::move(wl));
        net.b.push_back(std::move(bl));
        net.mw.emplace_back(in_dim * out_dim, 0.0);
        net.vw.emplace_back(in_dim * out_dim, 0.0);
        net.mb.emplace_back(out_dim, 0.0);
        net.vb.emplace_back(out_dim, 0.0);
    }
    return net;
}

} // namespace slucoex::rl
