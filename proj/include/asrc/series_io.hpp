#pragma once

// Binary series files and the JSON data manifest.

#include "asrc/dynsys.hpp"
#include "asrc/hash.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace asrc::series_io {

// Series file: magic "ASSR", u16 version, u64 length, f64 sample_dt,
// f64 mean, f64 std, then the standardized values as 64-bit little-endian
// floats.
void write_series(const std::string& path, const dynsys::Series& series);

struct SeriesFile {
    std::vector<double> values;
    double sample_dt = 0;
    double mean = 0;
    double stdev = 1;
};

SeriesFile read_series(const std::string& path);

nlohmann::json spec_to_json(const dynsys::SystemSpec& spec);
dynsys::SystemSpec spec_from_json(const nlohmann::json& j);

struct Manifest {
    std::uint64_t seed = 0;
    double test_fraction = 0.2;
    std::vector<dynsys::SystemSpec> specs;
    std::vector<std::string> files;  // relative to the manifest directory
    std::vector<double> means;
    std::vector<double> stdevs;
    std::string data_hash;  // hex identity of the generating data section
};

void write_manifest(const std::string& path, const Manifest& manifest);
Manifest read_manifest(const std::string& path);

/// Loads every series listed in a manifest, validating headers against it.
std::vector<dynsys::Series> load_series(const Manifest& manifest,
                                        const std::string& manifest_dir);

}  // namespace asrc::series_io
