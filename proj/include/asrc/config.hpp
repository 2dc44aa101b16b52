#pragma once

// Declarative experiment configuration: one JSON file fully determines a run.
// Parsing is strict; unknown keys are rejected.

#include "asrc/analysis.hpp"
#include "asrc/dynsys.hpp"
#include "asrc/models.hpp"
#include "asrc/reservoir.hpp"
#include "asrc/train.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace asrc::config {

struct DataSection {
    std::vector<dynsys::SystemSpec> systems;
    std::uint64_t seed = 42;
    double test_fraction = 0.2;
    int n_samples = 7500;
};

struct ModelSection {
    models::ModelKind kind = models::ModelKind::Asaerc;
    int n_fix = 64;
    int n = 64;
    int hidden = 128;
    double margin_cells = 2.0;  // query margin in grid cells
    models::KernelKind kernel = models::KernelKind::BilinearPoint;
    double kernel_width = 0.03;
    int delay_k = 4;
};

struct ExperimentConfig {
    DataSection data;
    reservoir::ReservoirConfig reservoir;
    ModelSection model;
    train::TrainConfig train;
    analysis::SweepPlan sweep;
    std::string out_dir = "out";

    models::ModelSettings model_settings() const;
};

ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);
nlohmann::json config_to_json(const ExperimentConfig& cfg);

/// Canonical section strings for content-hash caching.
std::string canonical_data_section(const DataSection& data);
std::string canonical_model_section(const ModelSection& model);
std::string canonical_train_section(const train::TrainConfig& train);
std::string canonical_sweep_section(const analysis::SweepPlan& sweep);

}  // namespace asrc::config
