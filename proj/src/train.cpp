#include "asrc/train.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <thread>

namespace asrc::models {

AnyModel make_model(ModelKind kind, int n_fix, int n, const ModelSettings& s,
                    std::uint64_t seed) {
    switch (kind) {
        case ModelKind::Linear: return make_linear(n_fix, s.Lx, s.Ly);
        case ModelKind::Aerc: return make_aerc(n_fix, n, s.hidden, s.Lx, s.Ly, seed);
        case ModelKind::Asaerc:
            return make_asaerc(n_fix, n, s.hidden, s.Lx, s.Ly, s.margin_x, s.margin_y, seed,
                               s.kernel, s.kernel_width);
        case ModelKind::DelayMlp: return make_delay_mlp(s.delay_k, s.hidden, seed);
    }
    throw std::logic_error("unknown model kind");
}

ModelKind kind_of(const AnyModel& model) {
    return std::visit(
        [](const auto& m) -> ModelKind {
            using M = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<M, LinearReadout>) return ModelKind::Linear;
            if constexpr (std::is_same_v<M, AercModel>) return ModelKind::Aerc;
            if constexpr (std::is_same_v<M, AsaercModel>) return ModelKind::Asaerc;
            if constexpr (std::is_same_v<M, DelayMlp>) return ModelKind::DelayMlp;
        },
        model);
}

long parameter_count(const AnyModel& model) {
    return std::visit(
        [](const auto& m) -> long {
            using M = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<M, LinearReadout>) {
                return static_cast<long>(m.weights.size());
            } else if constexpr (std::is_same_v<M, AercModel>) {
                return m.backbone.n_params() + m.weight_head.n_params();
            } else if constexpr (std::is_same_v<M, AsaercModel>) {
                return m.backbone.n_params() + m.weight_head.n_params() +
                       m.position_head.n_params();
            } else {
                return neural::count_parameters(m.net);
            }
        },
        model);
}

Checkpoint to_checkpoint(const AnyModel& model, std::uint64_t seed, std::uint32_t epoch) {
    Checkpoint ckpt;
    ckpt.kind = kind_of(model);
    ckpt.seed = seed;
    ckpt.epoch = epoch;
    switch (ckpt.kind) {
        case ModelKind::Linear: ckpt.linear = std::get<LinearReadout>(model); break;
        case ModelKind::Aerc: ckpt.aerc = std::get<AercModel>(model); break;
        case ModelKind::Asaerc: ckpt.asaerc = std::get<AsaercModel>(model); break;
        case ModelKind::DelayMlp: ckpt.delay = std::get<DelayMlp>(model); break;
    }
    return ckpt;
}

AnyModel from_checkpoint(const Checkpoint& ckpt) {
    switch (ckpt.kind) {
        case ModelKind::Linear: return ckpt.linear;
        case ModelKind::Aerc: return ckpt.aerc;
        case ModelKind::Asaerc: return ckpt.asaerc;
        case ModelKind::DelayMlp: return ckpt.delay;
    }
    throw std::logic_error("unknown model kind");
}

}  // namespace asrc::models

namespace asrc::train {

namespace {

using models::AercCache;
using models::AercGrads;
using models::AercModel;
using models::AsaercCache;
using models::AsaercGrads;
using models::AsaercModel;
using models::DelayMlp;
using models::LinearReadout;

struct SampleCtx {
    const dynsys::Dataset& data;
    const reservoir::SnapshotStore& store;
};

struct LinearOps {
    using Model = LinearReadout;
    struct Cache {
        std::vector<double> r;
    };
    struct Grads {
        std::vector<double> w;
    };
    static bool needs_store() { return true; }
    static int window(const Model&) { return 0; }
    static Grads make(const Model& m) { return {std::vector<double>(m.weights.size(), 0.0)}; }
    static void zero(Grads& g) { std::fill(g.w.begin(), g.w.end(), 0.0); }
    static void reduce(Grads& dst, const Grads& src) {
        for (std::size_t i = 0; i < dst.w.size(); ++i) dst.w[i] += src.w[i];
    }
    static double forward(const Model& m, const SampleCtx& ctx, std::size_t idx, Cache& c) {
        c.r.resize(m.points.size());
        reservoir::fixed_measurements(ctx.store.end_frame(idx), m.points,
                                      std::span<double>(c.r));
        return models::linear_forward(m, c.r);
    }
    static void backward(const Model&, const Cache& c, double dy, Grads& g) {
        for (std::size_t i = 0; i < g.w.size(); ++i) g.w[i] += dy * c.r[i];
    }
    static std::vector<std::span<double>> params(Model& m) { return {std::span<double>(m.weights)}; }
    static std::vector<std::span<const double>> grads(const Grads& g) {
        return {std::span<const double>(g.w)};
    }
};

struct AercOps {
    using Model = AercModel;
    using Cache = AercCache;
    using Grads = AercGrads;
    static bool needs_store() { return true; }
    static int window(const Model&) { return 0; }
    static Grads make(const Model& m) {
        Grads g;
        g.match(m);
        return g;
    }
    static void zero(Grads& g) { g.zero(); }
    static void reduce(Grads& dst, const Grads& src) {
        for (std::size_t i = 0; i < dst.backbone.w.size(); ++i) dst.backbone.w[i] += src.backbone.w[i];
        for (std::size_t i = 0; i < dst.backbone.b.size(); ++i) dst.backbone.b[i] += src.backbone.b[i];
        for (std::size_t i = 0; i < dst.weight_head.w.size(); ++i)
            dst.weight_head.w[i] += src.weight_head.w[i];
        for (std::size_t i = 0; i < dst.weight_head.b.size(); ++i)
            dst.weight_head.b[i] += src.weight_head.b[i];
    }
    static double forward(const Model& m, const SampleCtx& ctx, std::size_t idx, Cache& c) {
        const auto frame = ctx.store.end_frame(idx);
        std::vector<double> r_tilde(m.psi.size());
        reservoir::fixed_measurements(frame, m.psi, std::span<double>(r_tilde));
        return models::aerc_forward(m, frame, r_tilde, c);
    }
    static void backward(const Model& m, const Cache& c, double dy, Grads& g) {
        models::aerc_backward(m, c, dy, g);
    }
    static std::vector<std::span<double>> params(Model& m) {
        return {std::span<double>(m.backbone.w), std::span<double>(m.backbone.b),
                std::span<double>(m.weight_head.w), std::span<double>(m.weight_head.b)};
    }
    static std::vector<std::span<const double>> grads(const Grads& g) {
        return {std::span<const double>(g.backbone.w), std::span<const double>(g.backbone.b),
                std::span<const double>(g.weight_head.w), std::span<const double>(g.weight_head.b)};
    }
};

struct AsaercOps {
    using Model = AsaercModel;
    using Cache = AsaercCache;
    using Grads = AsaercGrads;
    static bool needs_store() { return true; }
    static int window(const Model&) { return 0; }
    static Grads make(const Model& m) {
        Grads g;
        g.match(m);
        return g;
    }
    static void zero(Grads& g) { g.zero(); }
    static void reduce(Grads& dst, const Grads& src) {
        auto add = [](std::vector<double>& a, const std::vector<double>& b) {
            for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
        };
        add(dst.backbone.w, src.backbone.w);
        add(dst.backbone.b, src.backbone.b);
        add(dst.weight_head.w, src.weight_head.w);
        add(dst.weight_head.b, src.weight_head.b);
        add(dst.position_head.w, src.position_head.w);
        add(dst.position_head.b, src.position_head.b);
    }
    static double forward(const Model& m, const SampleCtx& ctx, std::size_t idx, Cache& c) {
        std::vector<double> r_tilde(m.psi.size());
        reservoir::fixed_measurements(ctx.store.end_frame(idx), m.psi,
                                      std::span<double>(r_tilde));
        return models::asaerc_forward(m, ctx.store.offset_frame(idx), r_tilde, c);
    }
    static void backward(const Model& m, const Cache& c, double dy, Grads& g) {
        models::asaerc_backward(m, c, dy, g);
    }
    static std::vector<std::span<double>> params(Model& m) {
        return {std::span<double>(m.backbone.w),      std::span<double>(m.backbone.b),
                std::span<double>(m.weight_head.w),   std::span<double>(m.weight_head.b),
                std::span<double>(m.position_head.w), std::span<double>(m.position_head.b)};
    }
    static std::vector<std::span<const double>> grads(const Grads& g) {
        return {std::span<const double>(g.backbone.w),
                std::span<const double>(g.backbone.b),
                std::span<const double>(g.weight_head.w),
                std::span<const double>(g.weight_head.b),
                std::span<const double>(g.position_head.w),
                std::span<const double>(g.position_head.b)};
    }
};

struct DelayOps {
    using Model = DelayMlp;
    struct Cache {
        neural::MlpCache net;
        std::vector<double> window;
    };
    using Grads = neural::MlpGrads;
    static bool needs_store() { return false; }
    static int window(const Model& m) { return m.k; }
    static Grads make(const Model& m) { return neural::make_grads(m.net); }
    static void zero(Grads& g) {
        for (auto& layer : g) layer.zero();
    }
    static void reduce(Grads& dst, const Grads& src) {
        for (std::size_t l = 0; l < dst.size(); ++l) {
            for (std::size_t i = 0; i < dst[l].w.size(); ++i) dst[l].w[i] += src[l].w[i];
            for (std::size_t i = 0; i < dst[l].b.size(); ++i) dst[l].b[i] += src[l].b[i];
        }
    }
    static double forward(const Model& m, const SampleCtx& ctx, std::size_t idx, Cache& c) {
        c.window.resize(m.k + 1);
        for (int j = 0; j <= m.k; ++j) c.window[j] = ctx.data.inputs[idx - j];
        return models::delay_forward(m, c.window, c.net);
    }
    static void backward(const Model& m, const Cache& c, double dy, Grads& g) {
        const double dys[1] = {dy};
        std::vector<double> dx;
        neural::mlp_backward(m.net, c.net, dys, g, dx);
    }
    static std::vector<std::span<double>> params(Model& m) {
        std::vector<std::span<double>> out;
        for (auto& layer : m.net) {
            out.emplace_back(layer.w);
            out.emplace_back(layer.b);
        }
        return out;
    }
    static std::vector<std::span<const double>> grads(const Grads& g) {
        std::vector<std::span<const double>> out;
        for (const auto& layer : g) {
            out.emplace_back(layer.w);
            out.emplace_back(layer.b);
        }
        return out;
    }
};

template <class Ops>
double evaluate_mse(const typename Ops::Model& model, const SampleCtx& ctx,
                    std::span<const std::size_t> pairs, std::vector<double>* per_system,
                    std::vector<std::size_t>* counts) {
    typename Ops::Cache cache;
    double sum = 0;
    if (per_system) {
        per_system->assign(ctx.data.n_systems(), 0.0);
        counts->assign(ctx.data.n_systems(), 0);
    }
    for (std::size_t idx : pairs) {
        const double err = Ops::forward(model, ctx, idx, cache) - ctx.data.targets[idx];
        sum += err * err;
        if (per_system) {
            const int s = ctx.data.system_of(idx);
            (*per_system)[s] += err * err;
            ++(*counts)[s];
        }
    }
    if (per_system) {
        for (std::size_t s = 0; s < per_system->size(); ++s) {
            if ((*counts)[s] > 0) (*per_system)[s] /= static_cast<double>((*counts)[s]);
        }
    }
    if (pairs.empty()) throw std::invalid_argument("evaluate: empty split");
    return sum / static_cast<double>(pairs.size());
}

template <class Ops>
TrainHistory train_impl(typename Ops::Model& model, const dynsys::Dataset& data,
                        const reservoir::SnapshotStore& store, const TrainConfig& cfg) {
    if (cfg.batch_size < 1) throw std::invalid_argument("batch_size must be at least 1");
    if (cfg.max_epochs < 1) throw std::invalid_argument("max_epochs must be at least 1");
    if (cfg.lr < 0) throw std::invalid_argument("learning rate must be nonnegative");
    if (Ops::needs_store() && store.n_samples() != data.inputs.size())
        throw std::invalid_argument("snapshot count does not match the dataset");

    const SampleCtx ctx{data, store};
    auto train_idx = data.train_pairs(Ops::window(model));
    const auto test_idx = data.test_pairs(Ops::window(model));
    if (train_idx.empty()) throw std::invalid_argument("train: empty training split");

    neural::AdamParams hp;
    hp.lr = cfg.lr;
    hp.decay = cfg.decay;
    hp.l2_weight_decay = cfg.l2_weight_decay;
    auto param_spans = Ops::params(model);
    std::vector<std::size_t> block_sizes;
    for (const auto& s : param_spans) block_sizes.push_back(s.size());
    neural::Adam optimizer(block_sizes, hp);

    const int n_threads = std::max(1, cfg.threads);
    std::vector<typename Ops::Grads> thread_grads;
    std::vector<typename Ops::Cache> thread_caches(n_threads);
    std::vector<double> thread_sq(n_threads, 0.0);
    for (int t = 0; t < n_threads; ++t) thread_grads.push_back(Ops::make(model));

    std::mt19937_64 rng(cfg.seed);
    TrainHistory history;
    typename Ops::Model best_model = model;
    double best_test = std::numeric_limits<double>::infinity();
    bool have_best = false;

    const std::size_t n_train = train_idx.size();
    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        const auto tic = std::chrono::steady_clock::now();
        if (cfg.shuffle) std::shuffle(train_idx.begin(), train_idx.end(), rng);

        double epoch_sq = 0;
        std::size_t batch_no = 0;
        for (std::size_t start = 0; start < n_train; start += cfg.batch_size, ++batch_no) {
            const std::size_t end = std::min(n_train, start + cfg.batch_size);
            const std::size_t bsize = end - start;
            const double dscale = 2.0 / static_cast<double>(bsize);

            auto work = [&](int t, std::size_t lo, std::size_t hi) {
                auto& grads = thread_grads[t];
                auto& cache = thread_caches[t];
                double sq = 0;
                for (std::size_t s = lo; s < hi; ++s) {
                    const std::size_t idx = train_idx[s];
                    if (cfg.on_train_sample) cfg.on_train_sample(idx);
                    const double err = Ops::forward(model, ctx, idx, cache) - data.targets[idx];
                    sq += err * err;
                    Ops::backward(model, cache, dscale * err, grads);
                }
                thread_sq[t] = sq;
            };

            if (n_threads == 1 || bsize < 2 * static_cast<std::size_t>(n_threads)) {
                work(0, start, end);
                for (int t = 1; t < n_threads; ++t) thread_sq[t] = 0;
            } else {
                std::vector<std::thread> pool;
                const std::size_t chunk = (bsize + n_threads - 1) / n_threads;
                for (int t = 0; t < n_threads; ++t) {
                    const std::size_t lo = start + t * chunk;
                    const std::size_t hi = std::min(end, lo + chunk);
                    if (lo >= hi) {
                        thread_sq[t] = 0;
                        continue;
                    }
                    pool.emplace_back(work, t, lo, hi);
                }
                for (auto& th : pool) th.join();
            }

            double batch_sq = 0;
            for (int t = 0; t < n_threads; ++t) batch_sq += thread_sq[t];
            if (!std::isfinite(batch_sq))
                throw std::runtime_error("non-finite loss at epoch " + std::to_string(epoch) +
                                         ", batch " + std::to_string(batch_no));
            epoch_sq += batch_sq;

            for (int t = 1; t < n_threads; ++t) {
                Ops::reduce(thread_grads[0], thread_grads[t]);
                Ops::zero(thread_grads[t]);
            }
            optimizer.step(Ops::params(model), Ops::grads(thread_grads[0]), epoch);
            Ops::zero(thread_grads[0]);
        }

        EpochStats stats;
        stats.epoch = epoch;
        stats.train_mse = epoch_sq / static_cast<double>(n_train);
        stats.lr = cfg.lr * std::pow(cfg.decay, epoch);
        const bool eval_now = (cfg.eval_every > 0 && (epoch + 1) % cfg.eval_every == 0) ||
                              epoch + 1 == cfg.max_epochs;
        if (eval_now && !test_idx.empty()) {
            stats.test_mse = evaluate_mse<Ops>(model, ctx, test_idx, nullptr, nullptr);
            if (cfg.keep_best && stats.test_mse < best_test) {
                best_test = stats.test_mse;
                best_model = model;
                have_best = true;
            }
        } else {
            stats.test_mse = std::numeric_limits<double>::quiet_NaN();
        }
        stats.seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - tic).count();
        history.epochs.push_back(stats);
    }

    if (cfg.keep_best && have_best) model = best_model;
    return history;
}

}  // namespace

TrainHistory train(models::AnyModel& model, const dynsys::Dataset& data,
                   const reservoir::SnapshotStore& store, const TrainConfig& cfg) {
    return std::visit(
        [&](auto& m) -> TrainHistory {
            using M = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<M, LinearReadout>)
                return train_impl<LinearOps>(m, data, store, cfg);
            else if constexpr (std::is_same_v<M, AercModel>)
                return train_impl<AercOps>(m, data, store, cfg);
            else if constexpr (std::is_same_v<M, AsaercModel>)
                return train_impl<AsaercOps>(m, data, store, cfg);
            else
                return train_impl<DelayOps>(m, data, store, cfg);
        },
        model);
}

EvalResult evaluate(const models::AnyModel& model, const dynsys::Dataset& data,
                    const reservoir::SnapshotStore& store,
                    std::span<const std::size_t> pair_indices) {
    const SampleCtx ctx{data, store};
    EvalResult result;
    result.mse = std::visit(
        [&](const auto& m) -> double {
            using M = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<M, LinearReadout>)
                return evaluate_mse<LinearOps>(m, ctx, pair_indices, &result.per_system_mse,
                                               &result.per_system_count);
            else if constexpr (std::is_same_v<M, AercModel>)
                return evaluate_mse<AercOps>(m, ctx, pair_indices, &result.per_system_mse,
                                             &result.per_system_count);
            else if constexpr (std::is_same_v<M, AsaercModel>)
                return evaluate_mse<AsaercOps>(m, ctx, pair_indices, &result.per_system_mse,
                                               &result.per_system_count);
            else
                return evaluate_mse<DelayOps>(m, ctx, pair_indices, &result.per_system_mse,
                                              &result.per_system_count);
        },
        model);
    return result;
}

double predict(const models::AnyModel& model, const dynsys::Dataset& data,
               const reservoir::SnapshotStore& store, std::size_t pair_index) {
    const SampleCtx ctx{data, store};
    return std::visit(
        [&](const auto& m) -> double {
            using M = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<M, LinearReadout>) {
                typename LinearOps::Cache c;
                return LinearOps::forward(m, ctx, pair_index, c);
            } else if constexpr (std::is_same_v<M, AercModel>) {
                AercCache c;
                return AercOps::forward(m, ctx, pair_index, c);
            } else if constexpr (std::is_same_v<M, AsaercModel>) {
                AsaercCache c;
                return AsaercOps::forward(m, ctx, pair_index, c);
            } else {
                typename DelayOps::Cache c;
                return DelayOps::forward(m, ctx, pair_index, c);
            }
        },
        model);
}

int model_window(const models::AnyModel& model) {
    if (const auto* delay = std::get_if<models::DelayMlp>(&model)) return delay->k;
    return 0;
}

}  // namespace asrc::train
