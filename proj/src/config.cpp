#include "asrc/config.hpp"

#include "asrc/series_io.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace asrc::config {

namespace {

void require_keys(const nlohmann::json& j, const std::string& section,
                  const std::set<std::string>& allowed) {
    if (!j.is_object()) throw std::invalid_argument("config: " + section + " must be an object");
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (!allowed.contains(key))
            throw std::invalid_argument("config: unknown key \"" + key + "\" in " + section);
    }
}

DataSection parse_data(const nlohmann::json& j) {
    require_keys(j, "data", {"systems", "seed", "test_fraction", "n_samples"});
    DataSection data;
    data.seed = j.value("seed", data.seed);
    data.test_fraction = j.value("test_fraction", data.test_fraction);
    data.n_samples = j.value("n_samples", data.n_samples);
    if (data.n_samples < 2) throw std::invalid_argument("config: n_samples must exceed 1");
    if (!(data.test_fraction >= 0 && data.test_fraction < 1))
        throw std::invalid_argument("config: test_fraction must lie in [0, 1)");

    if (!j.contains("systems")) {
        data.systems = dynsys::default_suite(data.n_samples);
        return data;
    }
    for (const auto& entry : j.at("systems")) {
        if (entry.is_string()) {
            data.systems.push_back(dynsys::default_spec(
                dynsys::kind_from_name(entry.get<std::string>()), data.n_samples));
        } else {
            require_keys(entry, "data.systems[]",
                         {"kind", "params", "initial_state", "observable_index", "total_time",
                          "n_samples", "integrator_dt", "transient_fraction"});
            nlohmann::json spec = entry;
            if (!spec.contains("n_samples")) spec["n_samples"] = data.n_samples;
            data.systems.push_back(series_io::spec_from_json(spec));
        }
    }
    if (data.systems.empty()) throw std::invalid_argument("config: data.systems is empty");
    for (const auto& spec : data.systems) {
        if (spec.n_samples != data.n_samples)
            throw std::invalid_argument("config: per-system n_samples must match data.n_samples");
    }
    return data;
}

reservoir::ReservoirConfig parse_reservoir(const nlohmann::json& j) {
    require_keys(j, "reservoir",
                 {"nx", "ny", "lx", "ly", "nu", "dt", "dt_fraction", "substeps_per_sample",
                  "t_offset", "injections"});
    reservoir::ReservoirConfig cfg = reservoir::default_config();
    cfg.nx = j.value("nx", cfg.nx);
    cfg.ny = j.value("ny", cfg.ny);
    cfg.Lx = j.value("lx", cfg.Lx);
    cfg.Ly = j.value("ly", cfg.Ly);
    cfg.nu = j.value("nu", cfg.nu);
    cfg.dt = j.value("dt", cfg.dt);
    cfg.dt_fraction = j.value("dt_fraction", cfg.dt_fraction);
    cfg.substeps_per_sample = j.value("substeps_per_sample", cfg.substeps_per_sample);
    cfg.t_offset = j.value("t_offset", cfg.t_offset);
    if (j.contains("injections")) {
        cfg.injections.clear();
        for (const auto& inj : j.at("injections")) {
            require_keys(inj, "reservoir.injections[]", {"x", "y", "width", "gain"});
            cfg.injections.push_back({inj.at("x").get<double>(), inj.at("y").get<double>(),
                                      inj.value("width", 0.05), inj.value("gain", 1.0)});
        }
    }
    cfg.validate();
    return cfg;
}

ModelSection parse_model(const nlohmann::json& j) {
    require_keys(j, "model",
                 {"kind", "n_fix", "n", "hidden", "margin_cells", "kernel", "kernel_width",
                  "delay_k"});
    ModelSection model;
    if (j.contains("kind"))
        model.kind = models::model_kind_from_name(j.at("kind").get<std::string>());
    model.n_fix = j.value("n_fix", model.n_fix);
    model.n = j.value("n", model.n);
    model.hidden = j.value("hidden", model.hidden);
    model.margin_cells = j.value("margin_cells", model.margin_cells);
    if (j.contains("kernel")) {
        const auto name = j.at("kernel").get<std::string>();
        if (name == "bilinear")
            model.kernel = models::KernelKind::BilinearPoint;
        else if (name == "gaussian")
            model.kernel = models::KernelKind::GaussianBump;
        else
            throw std::invalid_argument("config: unknown kernel \"" + name + "\"");
    }
    model.kernel_width = j.value("kernel_width", model.kernel_width);
    model.delay_k = j.value("delay_k", model.delay_k);
    if (model.n_fix < 1 || model.n < 1 || model.hidden < 1 || model.delay_k < 0)
        throw std::invalid_argument("config: model sizes must be positive");
    if (model.margin_cells <= 0) throw std::invalid_argument("config: margin_cells must be positive");
    return model;
}

train::TrainConfig parse_train(const nlohmann::json& j) {
    require_keys(j, "train",
                 {"batch_size", "max_epochs", "lr", "decay", "seed", "shuffle", "eval_every",
                  "threads", "l2_weight_decay", "keep_best"});
    train::TrainConfig cfg;
    cfg.batch_size = j.value("batch_size", cfg.batch_size);
    cfg.max_epochs = j.value("max_epochs", cfg.max_epochs);
    cfg.lr = j.value("lr", cfg.lr);
    cfg.decay = j.value("decay", cfg.decay);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.shuffle = j.value("shuffle", cfg.shuffle);
    cfg.eval_every = j.value("eval_every", cfg.eval_every);
    cfg.threads = j.value("threads", cfg.threads);
    cfg.l2_weight_decay = j.value("l2_weight_decay", cfg.l2_weight_decay);
    cfg.keep_best = j.value("keep_best", cfg.keep_best);
    if (cfg.batch_size < 1) throw std::invalid_argument("config: batch_size must be at least 1");
    if (cfg.lr <= 0) throw std::invalid_argument("config: lr must be positive");
    if (cfg.max_epochs < 1) throw std::invalid_argument("config: max_epochs must be at least 1");
    if (cfg.threads < 1) throw std::invalid_argument("config: threads must be at least 1");
    return cfg;
}

analysis::SweepPlan parse_sweep(const nlohmann::json& j) {
    require_keys(j, "sweep", {"models", "n_fix", "n", "seeds"});
    analysis::SweepPlan plan;
    if (j.contains("models")) {
        for (const auto& name : j.at("models"))
            plan.kinds.push_back(models::model_kind_from_name(name.get<std::string>()));
    } else {
        plan.kinds = {models::ModelKind::Linear, models::ModelKind::Aerc,
                      models::ModelKind::Asaerc};
    }
    plan.n_fix = j.value("n_fix", std::vector<int>{16, 64, 256});
    plan.n = j.value("n", std::vector<int>{16, 64, 256});
    plan.seeds = j.value("seeds", std::vector<std::uint64_t>{1, 2, 3});
    if (plan.kinds.empty() || plan.n_fix.empty() || plan.n.empty() || plan.seeds.empty())
        throw std::invalid_argument("config: sweep lists must be nonempty");
    return plan;
}

}  // namespace

models::ModelSettings ExperimentConfig::model_settings() const {
    models::ModelSettings s;
    s.hidden = model.hidden;
    s.Lx = reservoir.Lx;
    s.Ly = reservoir.Ly;
    s.margin_x = model.margin_cells * reservoir.hx();
    s.margin_y = model.margin_cells * reservoir.hy();
    s.kernel = model.kernel;
    s.kernel_width = model.kernel_width;
    s.delay_k = model.delay_k;
    return s;
}

ExperimentConfig config_from_json(const nlohmann::json& j) {
    require_keys(j, "config", {"data", "reservoir", "model", "train", "sweep", "output"});
    ExperimentConfig cfg;
    cfg.data = parse_data(j.value("data", nlohmann::json::object()));
    cfg.reservoir = parse_reservoir(j.value("reservoir", nlohmann::json::object()));
    cfg.model = parse_model(j.value("model", nlohmann::json::object()));
    cfg.train = parse_train(j.value("train", nlohmann::json::object()));
    cfg.sweep = parse_sweep(j.value("sweep", nlohmann::json::object()));
    if (j.contains("output")) {
        require_keys(j.at("output"), "output", {"dir"});
        cfg.out_dir = j.at("output").value("dir", cfg.out_dir);
    }
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::invalid_argument("cannot open config file " + path);
    nlohmann::json j;
    try {
        is >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw std::invalid_argument(path + ": " + e.what());
    }
    return config_from_json(j);
}

nlohmann::json config_to_json(const ExperimentConfig& cfg) {
    nlohmann::json j;
    nlohmann::json systems = nlohmann::json::array();
    for (const auto& spec : cfg.data.systems) systems.push_back(series_io::spec_to_json(spec));
    j["data"] = {{"systems", systems},
                 {"seed", cfg.data.seed},
                 {"test_fraction", cfg.data.test_fraction},
                 {"n_samples", cfg.data.n_samples}};
    nlohmann::json injections = nlohmann::json::array();
    for (const auto& inj : cfg.reservoir.injections)
        injections.push_back({{"x", inj.x}, {"y", inj.y}, {"width", inj.width}, {"gain", inj.gain}});
    j["reservoir"] = {{"nx", cfg.reservoir.nx},
                      {"ny", cfg.reservoir.ny},
                      {"lx", cfg.reservoir.Lx},
                      {"ly", cfg.reservoir.Ly},
                      {"nu", cfg.reservoir.nu},
                      {"dt", cfg.reservoir.dt},
                      {"dt_fraction", cfg.reservoir.dt_fraction},
                      {"substeps_per_sample", cfg.reservoir.substeps_per_sample},
                      {"t_offset", cfg.reservoir.t_offset},
                      {"injections", injections}};
    j["model"] = {{"kind", std::string(models::model_kind_name(cfg.model.kind))},
                  {"n_fix", cfg.model.n_fix},
                  {"n", cfg.model.n},
                  {"hidden", cfg.model.hidden},
                  {"margin_cells", cfg.model.margin_cells},
                  {"kernel", cfg.model.kernel == models::KernelKind::BilinearPoint ? "bilinear"
                                                                                   : "gaussian"},
                  {"kernel_width", cfg.model.kernel_width},
                  {"delay_k", cfg.model.delay_k}};
    j["train"] = {{"batch_size", cfg.train.batch_size},
                  {"max_epochs", cfg.train.max_epochs},
                  {"lr", cfg.train.lr},
                  {"decay", cfg.train.decay},
                  {"seed", cfg.train.seed},
                  {"shuffle", cfg.train.shuffle},
                  {"eval_every", cfg.train.eval_every},
                  {"threads", cfg.train.threads},
                  {"l2_weight_decay", cfg.train.l2_weight_decay},
                  {"keep_best", cfg.train.keep_best}};
    nlohmann::json kinds = nlohmann::json::array();
    for (const auto kind : cfg.sweep.kinds) kinds.push_back(std::string(models::model_kind_name(kind)));
    j["sweep"] = {{"models", kinds},
                  {"n_fix", cfg.sweep.n_fix},
                  {"n", cfg.sweep.n},
                  {"seeds", cfg.sweep.seeds}};
    j["output"] = {{"dir", cfg.out_dir}};
    return j;
}

std::string canonical_data_section(const DataSection& data) {
    nlohmann::json systems = nlohmann::json::array();
    for (const auto& spec : data.systems) systems.push_back(series_io::spec_to_json(spec));
    nlohmann::json j = {{"systems", systems},
                        {"seed", data.seed},
                        {"test_fraction", data.test_fraction},
                        {"n_samples", data.n_samples}};
    return "data-v1 " + j.dump();
}

std::string canonical_model_section(const ModelSection& model) {
    std::ostringstream os;
    os << "model-v1 kind=" << models::model_kind_name(model.kind) << " n_fix=" << model.n_fix
       << " n=" << model.n << " hidden=" << model.hidden
       << " margin_cells=" << canonical_double(model.margin_cells)
       << " kernel=" << static_cast<int>(model.kernel)
       << " kernel_width=" << canonical_double(model.kernel_width)
       << " delay_k=" << model.delay_k;
    return os.str();
}

std::string canonical_train_section(const train::TrainConfig& train) {
    std::ostringstream os;
    os << "train-v1 batch=" << train.batch_size << " epochs=" << train.max_epochs
       << " lr=" << canonical_double(train.lr) << " decay=" << canonical_double(train.decay)
       << " seed=" << train.seed << " shuffle=" << (train.shuffle ? 1 : 0)
       << " eval_every=" << train.eval_every << " threads=" << train.threads
       << " l2=" << canonical_double(train.l2_weight_decay)
       << " keep_best=" << (train.keep_best ? 1 : 0);
    return os.str();
}

std::string canonical_sweep_section(const analysis::SweepPlan& sweep) {
    std::ostringstream os;
    os << "sweep-v1 kinds=[";
    for (const auto k : sweep.kinds) os << models::model_kind_name(k) << ",";
    os << "] n_fix=[";
    for (int v : sweep.n_fix) os << v << ",";
    os << "] n=[";
    for (int v : sweep.n) os << v << ",";
    os << "] seeds=[";
    for (const auto s : sweep.seeds) os << s << ",";
    os << "]";
    return os.str();
}

}  // namespace asrc::config
