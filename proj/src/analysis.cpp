#include "asrc/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <ostream>
#include <thread>

namespace asrc::analysis {

std::optional<double> pearson(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size() || a.size() < 2)
        throw std::invalid_argument("pearson: need two equal-length series of length >= 2");
    const double n = static_cast<double>(a.size());
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double cov = 0, va = 0, vb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double da = a[i] - ma;
        const double db = b[i] - mb;
        cov += da * db;
        va += da * da;
        vb += db * db;
    }
    if (va <= 0 || vb <= 0) return std::nullopt;
    return cov / std::sqrt(va * vb);
}

namespace {

// Column extraction into a scratch buffer (the trace is row-major).
void extract_column(const std::vector<double>& grid, std::size_t steps, int n, int node,
                    std::vector<double>& out) {
    out.resize(steps);
    for (std::size_t t = 0; t < steps; ++t) out[t] = grid[t * n + node];
}

}  // namespace

ContributionTrace trace_contributions(const models::AnyModel& model,
                                      const dynsys::Dataset& data,
                                      const reservoir::SnapshotStore& store,
                                      std::span<const std::size_t> pair_indices) {
    (void)data;
    const auto kind = models::kind_of(model);
    if (kind == models::ModelKind::DelayMlp)
        throw std::invalid_argument("trace_contributions: the delay baseline has no readout nodes");
    if (pair_indices.empty()) throw std::invalid_argument("trace_contributions: empty split");

    ContributionTrace trace;
    trace.kind = kind;
    trace.steps = pair_indices.size();

    if (kind == models::ModelKind::Linear) {
        const auto& m = std::get<models::LinearReadout>(model);
        trace.n = m.n();
        trace.values.resize(trace.steps * trace.n);
        trace.weights.resize(trace.steps * trace.n);
        trace.products.resize(trace.steps * trace.n);
        std::vector<double> r(m.points.size());
        for (std::size_t t = 0; t < trace.steps; ++t) {
            reservoir::fixed_measurements(store.end_frame(pair_indices[t]), m.points,
                                          std::span<double>(r));
            for (int i = 0; i < trace.n; ++i) {
                trace.values[t * trace.n + i] = r[i];
                trace.weights[t * trace.n + i] = m.weights[i];
                trace.products[t * trace.n + i] = m.weights[i] * r[i];
            }
        }
        return trace;
    }

    if (kind == models::ModelKind::Aerc) {
        const auto& m = std::get<models::AercModel>(model);
        trace.n = m.n();
        trace.values.resize(trace.steps * trace.n);
        trace.weights.resize(trace.steps * trace.n);
        trace.products.resize(trace.steps * trace.n);
        models::AercCache cache;
        std::vector<double> r_tilde(m.psi.size());
        for (std::size_t t = 0; t < trace.steps; ++t) {
            const auto frame = store.end_frame(pair_indices[t]);
            reservoir::fixed_measurements(frame, m.psi, std::span<double>(r_tilde));
            models::aerc_forward(m, frame, r_tilde, cache);
            for (int i = 0; i < trace.n; ++i) {
                trace.values[t * trace.n + i] = cache.r[i];
                trace.weights[t * trace.n + i] = cache.w[i];
                trace.products[t * trace.n + i] = cache.w[i] * cache.r[i];
            }
        }
        return trace;
    }

    const auto& m = std::get<models::AsaercModel>(model);
    trace.n = m.n();
    trace.values.resize(trace.steps * trace.n);
    trace.weights.resize(trace.steps * trace.n);
    trace.products.resize(trace.steps * trace.n);
    models::AsaercCache cache;
    std::vector<double> r_tilde(m.psi.size());
    for (std::size_t t = 0; t < trace.steps; ++t) {
        reservoir::fixed_measurements(store.end_frame(pair_indices[t]), m.psi,
                                      std::span<double>(r_tilde));
        models::asaerc_forward(m, store.offset_frame(pair_indices[t]), r_tilde, cache);
        for (int i = 0; i < trace.n; ++i) {
            trace.values[t * trace.n + i] = cache.r[i];
            trace.weights[t * trace.n + i] = cache.w[i];
            trace.products[t * trace.n + i] = cache.w[i] * cache.r[i];
        }
    }
    return trace;
}

namespace {

Histogram histogram_of(const std::vector<std::optional<double>>& rhos, int bins) {
    Histogram h;
    h.counts.assign(bins, 0);
    double abs_sum = 0;
    for (const auto& rho : rhos) {
        if (!rho) {
            ++h.dropped;
            continue;
        }
        const double r = std::clamp(*rho, -1.0, 1.0);
        int bin = static_cast<int>((r - h.lo) / (h.hi - h.lo) * bins);
        bin = std::clamp(bin, 0, bins - 1);
        ++h.counts[bin];
        abs_sum += std::abs(r);
        ++h.total;
    }
    h.mean_abs = h.total > 0 ? abs_sum / static_cast<double>(h.total) : 0.0;
    return h;
}

}  // namespace

CorrelationReport correlation_distributions(const ContributionTrace& trace, int bins) {
    if (bins < 1) throw std::invalid_argument("correlation_distributions: bins must be positive");
    const int n = trace.n;
    std::vector<std::optional<double>> rv, rw, rp;
    rv.reserve(n * (n - 1) / 2);
    rw.reserve(rv.capacity());
    rp.reserve(rv.capacity());
    std::vector<double> ci, cj;
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            extract_column(trace.values, trace.steps, n, i, ci);
            extract_column(trace.values, trace.steps, n, j, cj);
            rv.push_back(pearson(ci, cj));
            if (trace.kind == models::ModelKind::Linear) {
                // time-invariant weights: correlation undefined, 0 by convention
                rw.push_back(0.0);
            } else {
                extract_column(trace.weights, trace.steps, n, i, ci);
                extract_column(trace.weights, trace.steps, n, j, cj);
                rw.push_back(pearson(ci, cj));
            }
            extract_column(trace.products, trace.steps, n, i, ci);
            extract_column(trace.products, trace.steps, n, j, cj);
            rp.push_back(pearson(ci, cj));
        }
    }
    CorrelationReport report;
    report.values = histogram_of(rv, bins);
    report.weights = histogram_of(rw, bins);
    report.products = histogram_of(rp, bins);
    return report;
}

QueryHistogram query_histogram(const models::AsaercModel& model, const dynsys::Dataset& data,
                               const reservoir::SnapshotStore& store,
                               std::span<const std::size_t> pair_indices, int bins) {
    (void)data;
    if (bins < 1) throw std::invalid_argument("query_histogram: bins must be positive");
    QueryHistogram h;
    h.bins_x = bins;
    h.bins_y = bins;
    h.Lx = model.Lx;
    h.Ly = model.Ly;
    h.mass.assign(static_cast<std::size_t>(bins) * bins, 0.0);

    models::AsaercCache cache;
    std::vector<double> r_tilde(model.psi.size());
    for (std::size_t idx : pair_indices) {
        reservoir::fixed_measurements(store.end_frame(idx), model.psi,
                                      std::span<double>(r_tilde));
        models::asaerc_forward(model, store.offset_frame(idx), r_tilde, cache);
        for (int i = 0; i < model.n(); ++i) {
            const auto& q = cache.queries[i];
            int bx = static_cast<int>(q.x / h.Lx * bins);
            int by = static_cast<int>(q.y / h.Ly * bins);
            bx = std::clamp(bx, 0, bins - 1);
            by = std::clamp(by, 0, bins - 1);
            const double w = std::abs(cache.w[i]);
            h.mass[static_cast<std::size_t>(bx) * bins + by] += w;
            h.total_mass += w;
        }
    }
    return h;
}

SweepResult run_sweep(const SweepPlan& plan, const dynsys::Dataset& data,
                      const reservoir::SnapshotStore& store,
                      const models::ModelSettings& settings,
                      const train::TrainConfig& train_cfg, int parallel_cells) {
    // Linear cells ignore N (measurement and readout sets coincide); keep one
    // cell per N_fix.
    std::vector<SweepCell> cells;
    for (const auto kind : plan.kinds) {
        for (int n_fix : plan.n_fix) {
            if (kind == models::ModelKind::Linear) {
                for (const auto seed : plan.seeds)
                    cells.push_back({kind, n_fix, n_fix, seed, 0, 0, false, ""});
            } else {
                for (int n : plan.n) {
                    for (const auto seed : plan.seeds)
                        cells.push_back({kind, n_fix, n, seed, 0, 0, false, ""});
                }
            }
        }
    }

    std::mutex next_mutex;
    std::size_t next = 0;
    auto worker = [&]() {
        for (;;) {
            std::size_t mine;
            {
                std::lock_guard<std::mutex> lock(next_mutex);
                if (next >= cells.size()) return;
                mine = next++;
            }
            SweepCell& cell = cells[mine];
            try {
                models::AnyModel model =
                    models::make_model(cell.kind, cell.n_fix, cell.n, settings, cell.seed);
                train::TrainConfig cfg = train_cfg;
                cfg.seed = cell.seed;
                cfg.threads = 1;
                train::train(model, data, store, cfg);
                const auto pairs = data.test_pairs(train::model_window(model));
                cell.test_mse = train::evaluate(model, data, store, pairs).mse;
                cell.param_count = models::parameter_count(model);
                cell.ok = true;
            } catch (const std::exception& e) {
                cell.ok = false;
                cell.error = e.what();
            }
        }
    };

    const int n_workers = std::max(1, parallel_cells);
    if (n_workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < n_workers; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    return {std::move(cells)};
}

namespace {

void print_double(std::ostream& os, double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    os << buf;
}

}  // namespace

void write_histogram_csv(std::ostream& os, const Histogram& h) {
    os << "bin_left,bin_right,count\n";
    const int bins = static_cast<int>(h.counts.size());
    const double width = (h.hi - h.lo) / bins;
    for (int b = 0; b < bins; ++b) {
        print_double(os, h.lo + b * width);
        os << ",";
        print_double(os, h.lo + (b + 1) * width);
        os << "," << h.counts[b] << "\n";
    }
}

void write_query_histogram_csv(std::ostream& os, const QueryHistogram& h) {
    os << "x_left,y_left,mass\n";
    const double wx = h.Lx / h.bins_x;
    const double wy = h.Ly / h.bins_y;
    for (int i = 0; i < h.bins_x; ++i) {
        for (int j = 0; j < h.bins_y; ++j) {
            print_double(os, i * wx);
            os << ",";
            print_double(os, j * wy);
            os << ",";
            print_double(os, h.mass[static_cast<std::size_t>(i) * h.bins_y + j]);
            os << "\n";
        }
    }
}

void write_sweep_csv(std::ostream& os, const SweepResult& result) {
    os << "model,n_fix,n,seed,test_mse,param_count,status,error\n";
    for (const auto& cell : result.cells) {
        os << models::model_kind_name(cell.kind) << "," << cell.n_fix << "," << cell.n << ","
           << cell.seed << ",";
        print_double(os, cell.test_mse);
        os << "," << cell.param_count << "," << (cell.ok ? "ok" : "failed") << ","
           << cell.error << "\n";
    }
}

}  // namespace asrc::analysis
