#pragma once

// Mini-batch training and evaluation over precomputed reservoir snapshots.

#include "asrc/dynsys.hpp"
#include "asrc/models.hpp"
#include "asrc/reservoir.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <variant>
#include <vector>

namespace asrc::models {

using AnyModel = std::variant<LinearReadout, AercModel, AsaercModel, DelayMlp>;

struct ModelSettings {
    int hidden = 128;
    double Lx = 1.0;
    double Ly = 1.0;
    double margin_x = 0.03;
    double margin_y = 0.03;
    KernelKind kernel = KernelKind::BilinearPoint;
    double kernel_width = 0.03;
    int delay_k = 4;
};

AnyModel make_model(ModelKind kind, int n_fix, int n, const ModelSettings& settings,
                    std::uint64_t seed);
ModelKind kind_of(const AnyModel& model);
long parameter_count(const AnyModel& model);

Checkpoint to_checkpoint(const AnyModel& model, std::uint64_t seed, std::uint32_t epoch);
AnyModel from_checkpoint(const Checkpoint& ckpt);

}  // namespace asrc::models

namespace asrc::train {

struct TrainConfig {
    int batch_size = 1024;
    int max_epochs = 500;
    double lr = 0.002;
    double decay = 0.99;  // per-epoch learning-rate multiplier
    std::uint64_t seed = 0;
    bool shuffle = true;
    int eval_every = 10;  // test MSE cadence; the final epoch always evaluates
    int threads = 1;
    double l2_weight_decay = 0;
    bool keep_best = false;  // return the best-on-test model instead of the final one

    /// Test-only hook: observes every index used for a gradient step.
    /// Called from worker threads; use threads = 1 when tracing.
    std::function<void(std::size_t)> on_train_sample;
};

struct EpochStats {
    int epoch = 0;
    double train_mse = 0;
    double test_mse = 0;  // NaN on epochs without an evaluation pass
    double lr = 0;
    double seconds = 0;
};

struct TrainHistory {
    std::vector<EpochStats> epochs;
};

/// Minimizes mean squared one-step-ahead error over shuffled mini-batches.
/// Throws on non-finite loss with epoch/batch diagnostics.
TrainHistory train(models::AnyModel& model, const dynsys::Dataset& data,
                   const reservoir::SnapshotStore& store, const TrainConfig& cfg);

struct EvalResult {
    double mse = 0;
    std::vector<double> per_system_mse;
    std::vector<std::size_t> per_system_count;
};

EvalResult evaluate(const models::AnyModel& model, const dynsys::Dataset& data,
                    const reservoir::SnapshotStore& store,
                    std::span<const std::size_t> pair_indices);

double predict(const models::AnyModel& model, const dynsys::Dataset& data,
               const reservoir::SnapshotStore& store, std::size_t pair_index);

/// Delay window length (k) for delay models, 0 otherwise.
int model_window(const models::AnyModel& model);

}  // namespace asrc::train
