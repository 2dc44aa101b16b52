#pragma once

// Stage orchestration: gen-data -> run-reservoir -> train -> evaluate ->
// analyze, with content-hash caching and a run manifest.

#include "asrc/config.hpp"
#include "asrc/hash.hpp"

#include <iosfwd>
#include <stdexcept>
#include <string>

namespace asrc::pipeline {

enum class Stage { Config, Data, Reservoir, Train, Evaluate, Analyze, Sweep };

/// Distinct nonzero exit code per failure class.
int stage_exit_code(Stage stage);
std::string_view stage_name(Stage stage);

struct StageError : std::runtime_error {
    Stage stage;
    StageError(Stage s, const std::string& msg)
        : std::runtime_error(std::string(stage_name(s)) + ": " + msg), stage(s) {}
};

struct Options {
    bool force = false;
    int threads_override = 0;       // 0 keeps the config value
    long long seed_override = -1;   // < 0 keeps the config value (train seed)
    std::string out_dir_override;
};

config::ExperimentConfig apply_overrides(config::ExperimentConfig cfg, const Options& opt);

// Stage content hashes (hex). Downstream hashes chain on upstream ones.
std::string data_hash_hex(const config::ExperimentConfig& cfg);
Hash256 reservoir_hash(const config::ExperimentConfig& cfg);
std::string reservoir_hash_hex(const config::ExperimentConfig& cfg);
Hash256 train_hash(const config::ExperimentConfig& cfg);
std::string train_hash_hex(const config::ExperimentConfig& cfg);

// Each stage returns true when it executed and false on a cache hit.
bool stage_gen_data(const config::ExperimentConfig& cfg, bool force, std::ostream& log);
bool stage_run_reservoir(const config::ExperimentConfig& cfg, bool force, std::ostream& log);
bool stage_train(const config::ExperimentConfig& cfg, bool force, std::ostream& log);
bool stage_evaluate(const config::ExperimentConfig& cfg, bool force, std::ostream& log);
bool stage_analyze(const config::ExperimentConfig& cfg, bool force, std::ostream& log);
bool stage_sweep(const config::ExperimentConfig& cfg, bool force, std::ostream& log);

// Artifact loaders shared by stages, the CLI and tests. Consumption of an
// artifact whose embedded hash does not match the configuration fails.
dynsys::Dataset load_dataset(const config::ExperimentConfig& cfg);
reservoir::SnapshotStore load_store(const config::ExperimentConfig& cfg);
models::AnyModel load_model(const config::ExperimentConfig& cfg);

/// Runs every stage the configured model needs and writes the run manifest.
void run_pipeline(const config::ExperimentConfig& cfg, const Options& opt, std::ostream& log);

}  // namespace asrc::pipeline
