#include "asrc/pipeline.hpp"

#include "asrc/analysis.hpp"
#include "asrc/series_io.hpp"
#include "asrc/train.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>

namespace fs = std::filesystem;

namespace asrc::pipeline {

int stage_exit_code(Stage stage) {
    switch (stage) {
        case Stage::Config: return 2;
        case Stage::Data: return 3;
        case Stage::Reservoir: return 4;
        case Stage::Train: return 5;
        case Stage::Evaluate: return 6;
        case Stage::Analyze: return 7;
        case Stage::Sweep: return 8;
    }
    return 1;
}

std::string_view stage_name(Stage stage) {
    switch (stage) {
        case Stage::Config: return "config";
        case Stage::Data: return "data";
        case Stage::Reservoir: return "reservoir";
        case Stage::Train: return "train";
        case Stage::Evaluate: return "evaluate";
        case Stage::Analyze: return "analyze";
        case Stage::Sweep: return "sweep";
    }
    return "unknown";
}

config::ExperimentConfig apply_overrides(config::ExperimentConfig cfg, const Options& opt) {
    if (!opt.out_dir_override.empty()) cfg.out_dir = opt.out_dir_override;
    if (opt.threads_override > 0) cfg.train.threads = opt.threads_override;
    if (opt.seed_override >= 0) cfg.train.seed = static_cast<std::uint64_t>(opt.seed_override);
    return cfg;
}

// ---------------------------------------------------------------------------
// Hashes

std::string data_hash_hex(const config::ExperimentConfig& cfg) {
    return hex(sha256(config::canonical_data_section(cfg.data)));
}

Hash256 reservoir_hash(const config::ExperimentConfig& cfg) {
    return sha256("reservoir-stage " + data_hash_hex(cfg) + " | " +
                  reservoir::canonical_config_string(cfg.reservoir));
}

std::string reservoir_hash_hex(const config::ExperimentConfig& cfg) {
    return hex(reservoir_hash(cfg));
}

Hash256 train_hash(const config::ExperimentConfig& cfg) {
    return sha256("train-stage " + reservoir_hash_hex(cfg) + " | " +
                  config::canonical_model_section(cfg.model) + " | " +
                  config::canonical_train_section(cfg.train));
}

std::string train_hash_hex(const config::ExperimentConfig& cfg) {
    return hex(train_hash(cfg));
}

namespace {

std::string evaluate_hash_hex(const config::ExperimentConfig& cfg) {
    return hex(sha256("evaluate-stage " + train_hash_hex(cfg)));
}

std::string analyze_hash_hex(const config::ExperimentConfig& cfg) {
    return hex(sha256("analyze-stage " + train_hash_hex(cfg)));
}

std::string sweep_hash_hex(const config::ExperimentConfig& cfg) {
    return hex(sha256("sweep-stage " + reservoir_hash_hex(cfg) + " | " +
                      config::canonical_model_section(cfg.model) + " | " +
                      config::canonical_train_section(cfg.train) + " | " +
                      config::canonical_sweep_section(cfg.sweep)));
}

bool cache_hit(const fs::path& dir, const std::string& expected_hash,
               const std::vector<std::string>& outputs) {
    const fs::path hash_file = dir / "stage.hash";
    std::ifstream is(hash_file);
    if (!is) return false;
    std::string stored;
    std::getline(is, stored);
    if (stored != expected_hash) return false;
    for (const auto& name : outputs) {
        if (!fs::exists(dir / name)) return false;
    }
    return true;
}

void write_stage_hash(const fs::path& dir, const std::string& hash) {
    std::ofstream os(dir / "stage.hash");
    os << hash << "\n";
}

bool needs_reservoir(const config::ExperimentConfig& cfg) {
    return cfg.model.kind != models::ModelKind::DelayMlp;
}

std::string format_g(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

// ---------------------------------------------------------------------------
// Stages

bool stage_gen_data(const config::ExperimentConfig& cfg, bool force, std::ostream& log) {
    const fs::path dir = fs::path(cfg.out_dir) / "data";
    const std::string hash = data_hash_hex(cfg);
    std::vector<std::string> outputs = {"manifest.json"};
    for (const auto& spec : cfg.data.systems)
        outputs.push_back(std::string(dynsys::kind_name(spec.kind)) + ".series");
    if (!force && cache_hit(dir, hash, outputs)) {
        log << "[data] cache hit (" << hash.substr(0, 12) << ")\n";
        return false;
    }
    fs::create_directories(dir);

    series_io::Manifest manifest;
    manifest.seed = cfg.data.seed;
    manifest.test_fraction = cfg.data.test_fraction;
    manifest.data_hash = hash;
    for (const auto& spec : cfg.data.systems) {
        const dynsys::Series series = dynsys::make_series(spec);
        const std::string file = std::string(dynsys::kind_name(spec.kind)) + ".series";
        series_io::write_series((dir / file).string(), series);
        manifest.specs.push_back(spec);
        manifest.files.push_back(file);
        manifest.means.push_back(series.mean);
        manifest.stdevs.push_back(series.stdev);
        log << "[data] " << dynsys::kind_name(spec.kind) << ": " << spec.n_samples
            << " samples, dt " << format_g(series.sample_dt) << "\n";
    }
    series_io::write_manifest((dir / "manifest.json").string(), manifest);
    write_stage_hash(dir, hash);
    return true;
}

dynsys::Dataset load_dataset(const config::ExperimentConfig& cfg) {
    const fs::path dir = fs::path(cfg.out_dir) / "data";
    const auto manifest = series_io::read_manifest((dir / "manifest.json").string());
    if (manifest.data_hash != data_hash_hex(cfg))
        throw StageError(Stage::Data, "manifest hash does not match the configuration");
    const auto series = series_io::load_series(manifest, dir.string());
    return dynsys::build_dataset(series, manifest.test_fraction);
}

bool stage_run_reservoir(const config::ExperimentConfig& cfg, bool force, std::ostream& log) {
    const fs::path dir = fs::path(cfg.out_dir) / "reservoir";
    const std::string hash = reservoir_hash_hex(cfg);
    if (!force && cache_hit(dir, hash, {"store.bin"})) {
        log << "[reservoir] cache hit (" << hash.substr(0, 12) << ")\n";
        return false;
    }
    const auto dataset = load_dataset(cfg);
    fs::create_directories(dir);
    log << "[reservoir] rolling out " << dataset.inputs.size() << " samples on "
        << cfg.reservoir.nx << "x" << cfg.reservoir.ny << " grid\n";
    const auto store = reservoir::run(dataset.inputs, cfg.reservoir, reservoir_hash(cfg));
    store.save((dir / "store.bin").string());
    write_stage_hash(dir, hash);
    return true;
}

reservoir::SnapshotStore load_store(const config::ExperimentConfig& cfg) {
    const fs::path path = fs::path(cfg.out_dir) / "reservoir" / "store.bin";
    return reservoir::SnapshotStore::load(path.string(), cfg.reservoir, reservoir_hash(cfg));
}

namespace {

void write_history_csv(const fs::path& path, const train::TrainHistory& history,
                       const std::string& hash) {
    std::ofstream os(path);
    os << "# config " << hash << "\n";
    os << "epoch,train_mse,test_mse,lr,seconds\n";
    for (const auto& e : history.epochs) {
        os << e.epoch << "," << format_g(e.train_mse) << "," << format_g(e.test_mse) << ","
           << format_g(e.lr) << "," << format_g(e.seconds) << "\n";
    }
}

}  // namespace

bool stage_train(const config::ExperimentConfig& cfg, bool force, std::ostream& log) {
    const fs::path dir = fs::path(cfg.out_dir) / "train";
    const std::string hash = train_hash_hex(cfg);
    if (!force && cache_hit(dir, hash, {"checkpoint.bin", "history.csv"})) {
        log << "[train] cache hit (" << hash.substr(0, 12) << ")\n";
        return false;
    }
    const auto dataset = load_dataset(cfg);
    reservoir::SnapshotStore store;
    if (needs_reservoir(cfg)) store = load_store(cfg);

    models::AnyModel model = models::make_model(cfg.model.kind, cfg.model.n_fix, cfg.model.n,
                                                cfg.model_settings(), cfg.train.seed);
    log << "[train] " << models::model_kind_name(cfg.model.kind) << ", "
        << models::parameter_count(model) << " parameters, " << cfg.train.max_epochs
        << " epochs\n";
    const auto history = train::train(model, dataset, store, cfg.train);

    fs::create_directories(dir);
    auto ckpt = models::to_checkpoint(model, cfg.train.seed,
                                      static_cast<std::uint32_t>(cfg.train.max_epochs));
    ckpt.config_hash = train_hash(cfg);
    models::save_checkpoint((dir / "checkpoint.bin").string(), ckpt);
    write_history_csv(dir / "history.csv", history, hash);
    write_stage_hash(dir, hash);
    if (!history.epochs.empty()) {
        const auto& last = history.epochs.back();
        log << "[train] final train MSE " << format_g(last.train_mse) << ", test MSE "
            << format_g(last.test_mse) << "\n";
    }
    return true;
}

models::AnyModel load_model(const config::ExperimentConfig& cfg) {
    const fs::path path = fs::path(cfg.out_dir) / "train" / "checkpoint.bin";
    const auto ckpt = models::load_checkpoint(path.string());
    if (ckpt.config_hash != train_hash(cfg))
        throw StageError(Stage::Train, "checkpoint hash does not match the configuration");
    return models::from_checkpoint(ckpt);
}

bool stage_evaluate(const config::ExperimentConfig& cfg, bool force, std::ostream& log) {
    const fs::path dir = fs::path(cfg.out_dir) / "evaluate";
    const std::string hash = evaluate_hash_hex(cfg);
    if (!force && cache_hit(dir, hash, {"metrics.json"})) {
        log << "[evaluate] cache hit (" << hash.substr(0, 12) << ")\n";
        return false;
    }
    const auto dataset = load_dataset(cfg);
    reservoir::SnapshotStore store;
    if (needs_reservoir(cfg)) store = load_store(cfg);
    const auto model = load_model(cfg);

    const auto test_pairs = dataset.test_pairs(train::model_window(model));
    const auto train_pairs = dataset.train_pairs(train::model_window(model));
    const auto test_result = train::evaluate(model, dataset, store, test_pairs);
    const auto train_result = train::evaluate(model, dataset, store, train_pairs);

    nlohmann::json per_system;
    for (std::size_t s = 0; s < dataset.boundaries.size(); ++s) {
        per_system[dataset.boundaries[s].name] = {
            {"test_mse", test_result.per_system_mse[s]},
            {"count", test_result.per_system_count[s]}};
    }
    nlohmann::json j = {{"config_hash", train_hash_hex(cfg)},
                        {"model", std::string(models::model_kind_name(cfg.model.kind))},
                        {"param_count", models::parameter_count(model)},
                        {"train_mse", train_result.mse},
                        {"test_mse", test_result.mse},
                        {"per_system", per_system}};
    fs::create_directories(dir);
    std::ofstream os(dir / "metrics.json");
    os << j.dump(2) << "\n";
    write_stage_hash(dir, hash);
    log << "[evaluate] test MSE " << format_g(test_result.mse) << "\n";
    return true;
}

bool stage_analyze(const config::ExperimentConfig& cfg, bool force, std::ostream& log) {
    const fs::path dir = fs::path(cfg.out_dir) / "analysis";
    const std::string hash = analyze_hash_hex(cfg);
    const bool asaerc = cfg.model.kind == models::ModelKind::Asaerc;
    std::vector<std::string> outputs = {"summary.json"};
    if (cfg.model.kind != models::ModelKind::DelayMlp) {
        outputs.insert(outputs.end(), {"value_corr.csv", "weight_corr.csv", "product_corr.csv"});
        if (asaerc) outputs.push_back("queries.csv");
    }
    if (!force && cache_hit(dir, hash, outputs)) {
        log << "[analyze] cache hit (" << hash.substr(0, 12) << ")\n";
        return false;
    }
    fs::create_directories(dir);

    nlohmann::json summary = {
        {"config_hash", train_hash_hex(cfg)},
        {"correlation_convention",
         "population covariance over the test split; pairs pooled across systems"},
        {"bins", 50}};

    if (cfg.model.kind == models::ModelKind::DelayMlp) {
        summary["note"] = "delay baseline has no readout nodes; correlation analysis skipped";
        std::ofstream os(dir / "summary.json");
        os << summary.dump(2) << "\n";
        write_stage_hash(dir, hash);
        log << "[analyze] skipped (delay baseline)\n";
        return true;
    }

    const auto dataset = load_dataset(cfg);
    const auto store = load_store(cfg);
    const auto model = load_model(cfg);
    const auto pairs = dataset.test_pairs(0);

    const auto trace = analysis::trace_contributions(model, dataset, store, pairs);
    const auto report = analysis::correlation_distributions(trace, 50);
    {
        std::ofstream os(dir / "value_corr.csv");
        analysis::write_histogram_csv(os, report.values);
    }
    {
        std::ofstream os(dir / "weight_corr.csv");
        analysis::write_histogram_csv(os, report.weights);
    }
    {
        std::ofstream os(dir / "product_corr.csv");
        analysis::write_histogram_csv(os, report.products);
    }
    summary["mean_abs_rho"] = {{"values", report.values.mean_abs},
                               {"weights", report.weights.mean_abs},
                               {"products", report.products.mean_abs}};
    summary["dropped_pairs"] = {{"values", report.values.dropped},
                                {"weights", report.weights.dropped},
                                {"products", report.products.dropped}};
    if (cfg.model.kind == models::ModelKind::Linear)
        summary["weight_convention"] = "time-invariant weights: weight-weight correlations set to 0";

    if (asaerc) {
        const auto& m = std::get<models::AsaercModel>(model);
        const auto qh = analysis::query_histogram(m, dataset, store, pairs, 64);
        std::ofstream os(dir / "queries.csv");
        analysis::write_query_histogram_csv(os, qh);
        summary["query_total_mass"] = qh.total_mass;
    }

    std::ofstream os(dir / "summary.json");
    os << summary.dump(2) << "\n";
    write_stage_hash(dir, hash);
    log << "[analyze] mean |rho| products " << format_g(report.products.mean_abs) << "\n";
    return true;
}

bool stage_sweep(const config::ExperimentConfig& cfg, bool force, std::ostream& log) {
    const fs::path dir = fs::path(cfg.out_dir) / "sweep";
    const std::string hash = sweep_hash_hex(cfg);
    if (!force && cache_hit(dir, hash, {"sweep.csv", "summary.json"})) {
        log << "[sweep] cache hit (" << hash.substr(0, 12) << ")\n";
        return false;
    }
    const auto dataset = load_dataset(cfg);
    const auto store = load_store(cfg);
    log << "[sweep] " << cfg.sweep.kinds.size() << " models x " << cfg.sweep.n_fix.size()
        << " n_fix x " << cfg.sweep.n.size() << " n x " << cfg.sweep.seeds.size() << " seeds\n";
    const auto result = analysis::run_sweep(cfg.sweep, dataset, store, cfg.model_settings(),
                                            cfg.train, cfg.train.threads);

    fs::create_directories(dir);
    {
        std::ofstream os(dir / "sweep.csv");
        analysis::write_sweep_csv(os, result);
    }

    // mean +/- spread over seeds per cell
    nlohmann::json aggregates = nlohmann::json::array();
    for (const auto kind : cfg.sweep.kinds) {
        for (int n_fix : cfg.sweep.n_fix) {
            const auto& ns = kind == models::ModelKind::Linear ? std::vector<int>{n_fix}
                                                               : cfg.sweep.n;
            for (int n : ns) {
                double sum = 0, sum2 = 0;
                long count = 0;
                long params = 0;
                for (const auto& cell : result.cells) {
                    if (cell.kind == kind && cell.n_fix == n_fix && cell.n == n && cell.ok) {
                        sum += cell.test_mse;
                        sum2 += cell.test_mse * cell.test_mse;
                        params = cell.param_count;
                        ++count;
                    }
                }
                if (count == 0) continue;
                const double mean = sum / count;
                const double var = std::max(0.0, sum2 / count - mean * mean);
                aggregates.push_back({{"model", std::string(models::model_kind_name(kind))},
                                      {"n_fix", n_fix},
                                      {"n", n},
                                      {"mean_test_mse", mean},
                                      {"std_test_mse", std::sqrt(var)},
                                      {"param_count", params},
                                      {"seeds", count}});
            }
        }
    }
    std::size_t failures = 0;
    for (const auto& cell : result.cells)
        if (!cell.ok) ++failures;
    nlohmann::json summary = {{"config_hash", hash},
                              {"cells", result.cells.size()},
                              {"failures", failures},
                              {"aggregates", aggregates}};
    std::ofstream os(dir / "summary.json");
    os << summary.dump(2) << "\n";
    write_stage_hash(dir, hash);
    log << "[sweep] " << result.cells.size() - failures << "/" << result.cells.size()
        << " cells succeeded\n";
    return true;
}

// ---------------------------------------------------------------------------

void run_pipeline(const config::ExperimentConfig& cfg, const Options& opt, std::ostream& log) {
    const auto run = [&](Stage stage, auto&& fn) -> double {
        const auto tic = std::chrono::steady_clock::now();
        try {
            fn();
        } catch (const StageError&) {
            throw;
        } catch (const std::exception& e) {
            throw StageError(stage, e.what());
        }
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - tic).count();
    };

    nlohmann::json stages;
    const bool reservoir_needed = needs_reservoir(cfg);
    stages["data"] = {{"hash", data_hash_hex(cfg)},
                      {"seconds", run(Stage::Data, [&] { stage_gen_data(cfg, opt.force, log); })}};
    if (reservoir_needed) {
        stages["reservoir"] = {
            {"hash", reservoir_hash_hex(cfg)},
            {"seconds", run(Stage::Reservoir, [&] { stage_run_reservoir(cfg, opt.force, log); })}};
    }
    stages["train"] = {{"hash", train_hash_hex(cfg)},
                       {"seconds", run(Stage::Train, [&] { stage_train(cfg, opt.force, log); })}};
    stages["evaluate"] = {
        {"hash", evaluate_hash_hex(cfg)},
        {"seconds", run(Stage::Evaluate, [&] { stage_evaluate(cfg, opt.force, log); })}};
    stages["analyze"] = {
        {"hash", analyze_hash_hex(cfg)},
        {"seconds", run(Stage::Analyze, [&] { stage_analyze(cfg, opt.force, log); })}};

    const auto now = std::chrono::system_clock::now();
    const auto time = std::chrono::system_clock::to_time_t(now);
    char stamp[32];
    std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&time));

    nlohmann::json manifest = {{"format", "asrc-run"},
                               {"version", 1},
                               {"tool", "asrc 0.1.0"},
                               {"timestamp", stamp},
                               {"config", config::config_to_json(cfg)},
                               {"stages", stages}};
    fs::create_directories(cfg.out_dir);
    std::ofstream os(fs::path(cfg.out_dir) / "run_manifest.json");
    os << manifest.dump(2) << "\n";
    log << "[pipeline] complete; manifest written\n";
}

}  // namespace asrc::pipeline
