#include "asrc/series_io.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

namespace asrc::series_io {

namespace {

constexpr char kMagic[4] = {'A', 'S', 'S', 'R'};
constexpr std::uint16_t kVersion = 1;

template <typename T>
void put(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw std::runtime_error("series file truncated");
    return v;
}

}  // namespace

void write_series(const std::string& path, const dynsys::Series& series) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + path + " for writing");
    os.write(kMagic, 4);
    put(os, kVersion);
    put<std::uint64_t>(os, series.values.size());
    put(os, series.sample_dt);
    put(os, series.mean);
    put(os, series.stdev);
    os.write(reinterpret_cast<const char*>(series.values.data()),
             static_cast<std::streamsize>(series.values.size() * sizeof(double)));
    if (!os) throw std::runtime_error("failed writing series " + path);
}

SeriesFile read_series(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open series file " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error(path + ": not a series file");
    if (get<std::uint16_t>(is) != kVersion)
        throw std::runtime_error(path + ": unsupported series version");
    SeriesFile f;
    const auto length = get<std::uint64_t>(is);
    f.sample_dt = get<double>(is);
    f.mean = get<double>(is);
    f.stdev = get<double>(is);
    f.values.resize(length);
    is.read(reinterpret_cast<char*>(f.values.data()),
            static_cast<std::streamsize>(length * sizeof(double)));
    if (!is) throw std::runtime_error(path + ": series payload truncated");
    return f;
}

nlohmann::json spec_to_json(const dynsys::SystemSpec& spec) {
    nlohmann::json j;
    j["kind"] = std::string(dynsys::kind_name(spec.kind));
    j["params"] = spec.params;
    j["initial_state"] = spec.initial_state;
    j["observable_index"] = spec.observable_index;
    j["total_time"] = spec.total_time;
    j["n_samples"] = spec.n_samples;
    j["integrator_dt"] = spec.integrator_dt;
    j["transient_fraction"] = spec.transient_fraction;
    return j;
}

dynsys::SystemSpec spec_from_json(const nlohmann::json& j) {
    dynsys::SystemSpec spec = dynsys::default_spec(
        dynsys::kind_from_name(j.at("kind").get<std::string>()),
        j.value("n_samples", 7500));
    if (j.contains("params")) {
        for (const auto& [key, value] : j.at("params").items())
            spec.params[key] = value.get<double>();
    }
    if (j.contains("initial_state"))
        spec.initial_state = j.at("initial_state").get<std::vector<double>>();
    if (j.contains("observable_index")) spec.observable_index = j.at("observable_index").get<int>();
    if (j.contains("total_time")) spec.total_time = j.at("total_time").get<double>();
    if (j.contains("integrator_dt")) spec.integrator_dt = j.at("integrator_dt").get<double>();
    if (j.contains("transient_fraction"))
        spec.transient_fraction = j.at("transient_fraction").get<double>();
    spec.validate();
    return spec;
}

void write_manifest(const std::string& path, const Manifest& manifest) {
    nlohmann::json j;
    j["format"] = "asrc-data";
    j["version"] = 1;
    j["seed"] = manifest.seed;
    j["test_fraction"] = manifest.test_fraction;
    j["data_hash"] = manifest.data_hash;
    nlohmann::json systems = nlohmann::json::array();
    for (std::size_t i = 0; i < manifest.specs.size(); ++i) {
        nlohmann::json entry;
        entry["file"] = manifest.files[i];
        entry["mean"] = manifest.means[i];
        entry["std"] = manifest.stdevs[i];
        entry["spec"] = spec_to_json(manifest.specs[i]);
        systems.push_back(entry);
    }
    j["systems"] = systems;
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path + " for writing");
    os << j.dump(2) << "\n";
    if (!os) throw std::runtime_error("failed writing manifest " + path);
}

Manifest read_manifest(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open manifest " + path);
    nlohmann::json j;
    is >> j;
    if (j.value("format", "") != "asrc-data")
        throw std::runtime_error(path + ": not a data manifest");
    Manifest m;
    m.seed = j.at("seed").get<std::uint64_t>();
    m.test_fraction = j.at("test_fraction").get<double>();
    m.data_hash = j.value("data_hash", "");
    for (const auto& entry : j.at("systems")) {
        m.files.push_back(entry.at("file").get<std::string>());
        m.means.push_back(entry.at("mean").get<double>());
        m.stdevs.push_back(entry.at("std").get<double>());
        m.specs.push_back(spec_from_json(entry.at("spec")));
    }
    return m;
}

std::vector<dynsys::Series> load_series(const Manifest& manifest,
                                        const std::string& manifest_dir) {
    std::vector<dynsys::Series> out;
    for (std::size_t i = 0; i < manifest.files.size(); ++i) {
        const std::string path = manifest_dir + "/" + manifest.files[i];
        SeriesFile f = read_series(path);
        const auto& spec = manifest.specs[i];
        if (static_cast<int>(f.values.size()) != spec.n_samples)
            throw std::runtime_error(path + ": length does not match the manifest");
        if (f.mean != manifest.means[i] || f.stdev != manifest.stdevs[i])
            throw std::runtime_error(path + ": standardization does not match the manifest");
        dynsys::Series s;
        s.values = std::move(f.values);
        s.mean = f.mean;
        s.stdev = f.stdev;
        s.sample_dt = f.sample_dt;
        s.spec = spec;
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace asrc::series_io
