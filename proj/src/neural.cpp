#include "asrc/neural.hpp"

#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>

namespace asrc::neural {

double sigmoid(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

DenseLayer make_layer(int out, int in, Activation act, std::mt19937_64& rng) {
    if (out <= 0 || in <= 0) throw std::invalid_argument("layer dims must be positive");
    DenseLayer layer;
    layer.out = out;
    layer.in = in;
    layer.act = act;
    layer.w.resize(static_cast<std::size_t>(out) * in);
    layer.b.assign(out, 0.0);
    const double bound = std::sqrt(6.0 / in);
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (double& wi : layer.w) wi = dist(rng);
    return layer;
}

static double activate(Activation act, double x) {
    switch (act) {
        case Activation::Identity: return x;
        case Activation::ReLU: return x > 0 ? x : 0.0;
        case Activation::Sigmoid: return sigmoid(x);
    }
    throw std::logic_error("unknown activation");
}

static double activate_grad(Activation act, double pre) {
    switch (act) {
        case Activation::Identity: return 1.0;
        case Activation::ReLU: return pre > 0 ? 1.0 : 0.0;
        case Activation::Sigmoid: {
            const double s = sigmoid(pre);
            return s * (1.0 - s);
        }
    }
    throw std::logic_error("unknown activation");
}

void layer_forward(const DenseLayer& layer, std::span<const double> x,
                   std::vector<double>& y, LayerCache& cache) {
    if (static_cast<int>(x.size()) != layer.in)
        throw std::invalid_argument("layer_forward: input size mismatch");
    cache.input.assign(x.begin(), x.end());
    cache.pre.resize(layer.out);
    y.resize(layer.out);
    for (int o = 0; o < layer.out; ++o) {
        const double* row = layer.w.data() + static_cast<std::size_t>(o) * layer.in;
        double acc = layer.b[o];
        for (int i = 0; i < layer.in; ++i) acc += row[i] * x[i];
        cache.pre[o] = acc;
        y[o] = activate(layer.act, acc);
    }
}

void LayerGrads::match(const DenseLayer& layer) {
    w.assign(layer.w.size(), 0.0);
    b.assign(layer.b.size(), 0.0);
}

void LayerGrads::zero() {
    std::fill(w.begin(), w.end(), 0.0);
    std::fill(b.begin(), b.end(), 0.0);
}

void layer_backward(const DenseLayer& layer, const LayerCache& cache,
                    std::span<const double> dy, LayerGrads& grads,
                    std::vector<double>& dx) {
    if (static_cast<int>(dy.size()) != layer.out)
        throw std::invalid_argument("layer_backward: gradient size mismatch");
    if (static_cast<int>(cache.input.size()) != layer.in ||
        static_cast<int>(cache.pre.size()) != layer.out)
        throw std::invalid_argument("layer_backward: stale cache");
    if (grads.w.size() != layer.w.size()) grads.match(layer);
    dx.assign(layer.in, 0.0);
    for (int o = 0; o < layer.out; ++o) {
        const double dpre = dy[o] * activate_grad(layer.act, cache.pre[o]);
        if (dpre == 0.0) continue;
        grads.b[o] += dpre;
        double* gw = grads.w.data() + static_cast<std::size_t>(o) * layer.in;
        const double* row = layer.w.data() + static_cast<std::size_t>(o) * layer.in;
        for (int i = 0; i < layer.in; ++i) {
            gw[i] += dpre * cache.input[i];
            dx[i] += dpre * row[i];
        }
    }
}

void mlp_forward(const Mlp& net, std::span<const double> x,
                 std::vector<double>& y, MlpCache& cache) {
    cache.resize(net.size());
    std::vector<double> cur(x.begin(), x.end());
    for (std::size_t l = 0; l < net.size(); ++l) {
        layer_forward(net[l], cur, y, cache[l]);
        cur = y;
    }
    y = cur;
}

void mlp_backward(const Mlp& net, const MlpCache& cache,
                  std::span<const double> dy, MlpGrads& grads,
                  std::vector<double>& dx) {
    if (cache.size() != net.size()) throw std::invalid_argument("mlp_backward: stale cache");
    grads.resize(net.size());
    std::vector<double> cur(dy.begin(), dy.end());
    for (std::size_t l = net.size(); l-- > 0;) {
        layer_backward(net[l], cache[l], cur, grads[l], dx);
        cur = dx;
    }
    dx = cur;
}

MlpGrads make_grads(const Mlp& net) {
    MlpGrads g(net.size());
    for (std::size_t l = 0; l < net.size(); ++l) g[l].match(net[l]);
    return g;
}

long count_parameters(const Mlp& net) {
    long n = 0;
    for (const auto& layer : net) n += layer.n_params();
    return n;
}

Adam::Adam(std::vector<std::size_t> block_sizes, AdamParams hp) : hp_(hp) {
    m_.reserve(block_sizes.size());
    v_.reserve(block_sizes.size());
    for (std::size_t n : block_sizes) {
        m_.emplace_back(n, 0.0);
        v_.emplace_back(n, 0.0);
    }
}

void Adam::step(const std::vector<std::span<double>>& params,
                const std::vector<std::span<const double>>& grads, int epoch) {
    if (params.size() != m_.size() || grads.size() != m_.size())
        throw std::invalid_argument("Adam::step: block count mismatch");
    ++t_;
    const double lr = hp_.lr * std::pow(hp_.decay, epoch);
    const double c1 = 1.0 - std::pow(hp_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(hp_.beta2, static_cast<double>(t_));
    for (std::size_t blk = 0; blk < params.size(); ++blk) {
        auto p = params[blk];
        auto g = grads[blk];
        auto& m = m_[blk];
        auto& v = v_[blk];
        if (p.size() != m.size() || g.size() != m.size())
            throw std::invalid_argument("Adam::step: block size mismatch");
        for (std::size_t i = 0; i < p.size(); ++i) {
            double gi = g[i];
            if (hp_.l2_weight_decay != 0.0) gi += hp_.l2_weight_decay * p[i];
            m[i] = hp_.beta1 * m[i] + (1.0 - hp_.beta1) * gi;
            v[i] = hp_.beta2 * v[i] + (1.0 - hp_.beta2) * gi * gi;
            const double mhat = m[i] / c1;
            const double vhat = v[i] / c2;
            p[i] -= lr * mhat / (std::sqrt(vhat) + hp_.eps);
        }
    }
}

namespace {

template <typename T>
void put(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw std::runtime_error("truncated network block");
    return v;
}

}  // namespace

void write_mlp(std::ostream& os, const Mlp& net) {
    put<std::uint32_t>(os, static_cast<std::uint32_t>(net.size()));
    for (const auto& layer : net) {
        put<std::uint32_t>(os, static_cast<std::uint32_t>(layer.out));
        put<std::uint32_t>(os, static_cast<std::uint32_t>(layer.in));
        put<std::uint8_t>(os, static_cast<std::uint8_t>(layer.act));
        os.write(reinterpret_cast<const char*>(layer.w.data()),
                 static_cast<std::streamsize>(layer.w.size() * sizeof(double)));
        os.write(reinterpret_cast<const char*>(layer.b.data()),
                 static_cast<std::streamsize>(layer.b.size() * sizeof(double)));
    }
}

Mlp read_mlp(std::istream& is) {
    const auto n_layers = get<std::uint32_t>(is);
    Mlp net(n_layers);
    for (auto& layer : net) {
        layer.out = static_cast<int>(get<std::uint32_t>(is));
        layer.in = static_cast<int>(get<std::uint32_t>(is));
        const auto act = get<std::uint8_t>(is);
        if (act > 2) throw std::runtime_error("bad activation tag in network block");
        layer.act = static_cast<Activation>(act);
        if (layer.out <= 0 || layer.in <= 0) throw std::runtime_error("bad layer shape");
        layer.w.resize(static_cast<std::size_t>(layer.out) * layer.in);
        layer.b.resize(layer.out);
        is.read(reinterpret_cast<char*>(layer.w.data()),
                static_cast<std::streamsize>(layer.w.size() * sizeof(double)));
        is.read(reinterpret_cast<char*>(layer.b.data()),
                static_cast<std::streamsize>(layer.b.size() * sizeof(double)));
        if (!is) throw std::runtime_error("truncated network block");
    }
    return net;
}

}  // namespace asrc::neural
