#pragma once

// Quantitative analyses: readout-contribution correlation distributions,
// weighted query-location histograms, and error-vs-sensor-count sweeps.

#include "asrc/train.hpp"

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace asrc::analysis {

/// Population-convention Pearson correlation; empty when either argument has
/// zero variance.
std::optional<double> pearson(std::span<const double> a, std::span<const double> b);

/// Per step and readout node: sampled value r_i(t), weight w_i(t), and their
/// product.
struct ContributionTrace {
    std::size_t steps = 0;
    int n = 0;
    std::vector<double> values;    // steps x n, row-major
    std::vector<double> weights;
    std::vector<double> products;
    models::ModelKind kind = models::ModelKind::Linear;
};

ContributionTrace trace_contributions(const models::AnyModel& model,
                                      const dynsys::Dataset& data,
                                      const reservoir::SnapshotStore& store,
                                      std::span<const std::size_t> pair_indices);

struct Histogram {
    double lo = -1;
    double hi = 1;
    std::vector<std::size_t> counts;
    std::size_t dropped = 0;  // undefined correlations
    double mean_abs = 0;
    std::size_t total = 0;
};

struct CorrelationReport {
    Histogram values;
    Histogram weights;
    Histogram products;
};

/// All pairwise correlations (i < j) of the three traced quantities. For the
/// linear readout the weight-weight entries are 0 by convention (weights are
/// time-invariant, so the correlation is formally undefined).
CorrelationReport correlation_distributions(const ContributionTrace& trace, int bins = 50);

struct QueryHistogram {
    int bins_x = 64;
    int bins_y = 64;
    double Lx = 1.0;
    double Ly = 1.0;
    std::vector<double> mass;  // bins_x x bins_y, row-major, |weight|-weighted
    double total_mass = 0;
};

/// Query positions over the given steps, each weighted by |attention weight|.
QueryHistogram query_histogram(const models::AsaercModel& model, const dynsys::Dataset& data,
                               const reservoir::SnapshotStore& store,
                               std::span<const std::size_t> pair_indices, int bins = 64);

struct SweepCell {
    models::ModelKind kind = models::ModelKind::Linear;
    int n_fix = 0;
    int n = 0;
    std::uint64_t seed = 0;
    double test_mse = 0;
    long param_count = 0;
    bool ok = false;
    std::string error;
};

struct SweepResult {
    std::vector<SweepCell> cells;
};

struct SweepPlan {
    std::vector<models::ModelKind> kinds;
    std::vector<int> n_fix;
    std::vector<int> n;
    std::vector<std::uint64_t> seeds;
};

/// Trains and evaluates every (model, N_fix, N, seed) cell over the shared
/// snapshot store. Cell failures are recorded and the sweep continues.
SweepResult run_sweep(const SweepPlan& plan, const dynsys::Dataset& data,
                      const reservoir::SnapshotStore& store,
                      const models::ModelSettings& settings,
                      const train::TrainConfig& train_cfg, int parallel_cells = 1);

void write_histogram_csv(std::ostream& os, const Histogram& h);
void write_query_histogram_csv(std::ostream& os, const QueryHistogram& h);
void write_sweep_csv(std::ostream& os, const SweepResult& result);

}  // namespace asrc::analysis
