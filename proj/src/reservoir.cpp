#include "asrc/reservoir.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <sstream>

namespace asrc::reservoir {

void GridField::zero_boundary() {
    for (int i = 0; i < nx; ++i) {
        at(i, 0) = 0.0;
        at(i, ny - 1) = 0.0;
    }
    for (int j = 0; j < ny; ++j) {
        at(0, j) = 0.0;
        at(nx - 1, j) = 0.0;
    }
}

GridField make_field(int nx, int ny, double Lx, double Ly) {
    if (nx < 3 || ny < 3) throw std::invalid_argument("grid must be at least 3x3");
    if (Lx <= 0 || Ly <= 0) throw std::invalid_argument("domain lengths must be positive");
    GridField f;
    f.nx = nx;
    f.ny = ny;
    f.Lx = Lx;
    f.Ly = Ly;
    f.values.assign(static_cast<std::size_t>(nx) * ny, 0.0);
    return f;
}

double cfl_max_dt(double nu, double hx, double hy) {
    if (nu <= 0 || hx <= 0 || hy <= 0)
        throw std::invalid_argument("cfl_max_dt: arguments must be positive");
    return 1.0 / (2.0 * nu * (1.0 / (hx * hx) + 1.0 / (hy * hy)));
}

double ReservoirConfig::resolved_dt() const {
    if (dt > 0) return dt;
    return dt_fraction * cfl_max_dt(nu, hx(), hy());
}

void ReservoirConfig::validate() const {
    if (nx < 3 || ny < 3) throw std::invalid_argument("reservoir grid must be at least 3x3");
    if (Lx <= 0 || Ly <= 0) throw std::invalid_argument("domain lengths must be positive");
    if (nu <= 0) throw std::invalid_argument("diffusion coefficient must be positive");
    if (substeps_per_sample < 1) throw std::invalid_argument("substeps_per_sample must be at least 1");
    if (t_offset < 0 || t_offset >= substeps_per_sample)
        throw std::invalid_argument("t_offset must lie in [0, substeps_per_sample)");
    const double bound = cfl_max_dt(nu, hx(), hy());
    const double step = resolved_dt();
    if (!(step > 0) || step >= bound)
        throw std::invalid_argument("explicit step violates the CFL stability bound");
    for (const auto& inj : injections) {
        if (!(inj.x > 0 && inj.x < Lx && inj.y > 0 && inj.y < Ly))
            throw std::invalid_argument("injection center must lie strictly inside the domain");
        if (inj.width <= 0) throw std::invalid_argument("injection width must be positive");
    }
}

ReservoirConfig default_config() {
    ReservoirConfig cfg;
    cfg.injections = {
        {0.30, 0.50, 0.05, 1.0},
        {0.50, 0.70, 0.05, 0.7},
        {0.50, 0.30, 0.05, -0.7},
        {0.70, 0.50, 0.05, -1.0},
    };
    return cfg;
}

GridField laplacian(const GridField& field) {
    if (field.nx < 3 || field.ny < 3) throw std::invalid_argument("laplacian: grid too small");
    GridField out = make_field(field.nx, field.ny, field.Lx, field.Ly);
    const double ihx2 = 1.0 / (field.hx() * field.hx());
    const double ihy2 = 1.0 / (field.hy() * field.hy());
    for (int i = 1; i < field.nx - 1; ++i) {
        for (int j = 1; j < field.ny - 1; ++j) {
            const double c = field.at(i, j);
            out.at(i, j) = (field.at(i - 1, j) + field.at(i + 1, j) - 2.0 * c) * ihx2 +
                           (field.at(i, j - 1) + field.at(i, j + 1) - 2.0 * c) * ihy2;
        }
    }
    return out;
}

namespace {

GridField build_injection_mask(const ReservoirConfig& cfg) {
    GridField mask = make_field(cfg.nx, cfg.ny, cfg.Lx, cfg.Ly);
    for (int i = 0; i < cfg.nx; ++i) {
        const double x = i * cfg.hx();
        for (int j = 0; j < cfg.ny; ++j) {
            const double y = j * cfg.hy();
            double acc = 0;
            for (const auto& inj : cfg.injections) {
                const double dx = x - inj.x;
                const double dy = y - inj.y;
                acc += inj.gain * std::exp(-(dx * dx + dy * dy) / (2.0 * inj.width * inj.width));
            }
            mask.at(i, j) = acc;
        }
    }
    mask.zero_boundary();
    return mask;
}

void step_kernel(GridField& next, const GridField& u, const GridField& mask,
                 double input_value, double nu, double dt) {
    const int nx = u.nx;
    const int ny = u.ny;
    const double ihx2 = 1.0 / (u.hx() * u.hx());
    const double ihy2 = 1.0 / (u.hy() * u.hy());
    for (int i = 1; i < nx - 1; ++i) {
        const double* row = u.values.data() + static_cast<std::size_t>(i) * ny;
        const double* up = row - ny;
        const double* dn = row + ny;
        const double* m = mask.values.data() + static_cast<std::size_t>(i) * ny;
        double* out = next.values.data() + static_cast<std::size_t>(i) * ny;
        for (int j = 1; j < ny - 1; ++j) {
            const double c = row[j];
            const double lap = (up[j] + dn[j] - 2.0 * c) * ihx2 +
                               (row[j - 1] + row[j + 1] - 2.0 * c) * ihy2;
            out[j] = c + dt * (nu * lap + input_value * m[j]);
        }
    }
    next.zero_boundary();
}

}  // namespace

GridField injection_field(const ReservoirConfig& config, double input_value) {
    GridField f = build_injection_mask(config);
    for (double& v : f.values) v *= input_value;
    return f;
}

GridField step(const GridField& field, double input_value, const ReservoirConfig& config) {
    config.validate();
    GridField mask = build_injection_mask(config);
    GridField next = make_field(field.nx, field.ny, field.Lx, field.Ly);
    step_kernel(next, field, mask, input_value, config.nu, config.resolved_dt());
    return next;
}

DiffusionStepper::DiffusionStepper(const ReservoirConfig& config)
    : cfg_(config),
      dt_(config.resolved_dt()),
      u_(make_field(config.nx, config.ny, config.Lx, config.Ly)),
      next_(make_field(config.nx, config.ny, config.Lx, config.Ly)),
      mask_(build_injection_mask(config)) {
    cfg_.validate();
}

void DiffusionStepper::step(double input_value) {
    step_kernel(next_, u_, mask_, input_value, cfg_.nu, dt_);
    std::swap(u_, next_);
}

void DiffusionStepper::advance_sample(double input_value) {
    for (int k = 0; k < cfg_.substeps_per_sample; ++k) step(input_value);
}

// ---------------------------------------------------------------------------
// Snapshot store

SnapshotStore::SnapshotStore(const ReservoirConfig& config, Hash256 config_hash)
    : nx_(config.nx),
      ny_(config.ny),
      Lx_(config.Lx),
      Ly_(config.Ly),
      nu_(config.nu),
      dt_(config.resolved_dt()),
      substeps_(config.substeps_per_sample),
      t_offset_(config.t_offset),
      hash_(config_hash) {}

void SnapshotStore::append(const GridField& end_frame) {
    if (t_offset_ > 0)
        throw std::logic_error("store expects an offset frame for every sample");
    if (end_frame.nx != nx_ || end_frame.ny != ny_)
        throw std::invalid_argument("frame dims mismatch");
    data_.reserve(data_.size() + end_frame.values.size());
    for (double v : end_frame.values) data_.push_back(static_cast<float>(v));
    ++n_frames_;
}

void SnapshotStore::append(const GridField& end_frame, const GridField& offset_frame) {
    if (t_offset_ == 0) {
        append(end_frame);
        return;
    }
    if (end_frame.nx != nx_ || end_frame.ny != ny_ || offset_frame.nx != nx_ ||
        offset_frame.ny != ny_)
        throw std::invalid_argument("frame dims mismatch");
    for (double v : end_frame.values) data_.push_back(static_cast<float>(v));
    for (double v : offset_frame.values) data_.push_back(static_cast<float>(v));
    n_frames_ += 2;
}

std::size_t SnapshotStore::n_samples() const {
    return t_offset_ > 0 ? n_frames_ / 2 : n_frames_;
}

FieldView<float> SnapshotStore::end_frame(std::size_t sample) const {
    if (sample >= n_samples()) throw std::out_of_range("snapshot index out of range");
    const std::size_t frame = t_offset_ > 0 ? 2 * sample : sample;
    return {data_.data() + frame * static_cast<std::size_t>(nx_) * ny_, nx_, ny_, Lx_, Ly_};
}

FieldView<float> SnapshotStore::offset_frame(std::size_t sample) const {
    if (sample >= n_samples()) throw std::out_of_range("snapshot index out of range");
    const std::size_t frame = t_offset_ > 0 ? 2 * sample + 1 : sample;
    return {data_.data() + frame * static_cast<std::size_t>(nx_) * ny_, nx_, ny_, Lx_, Ly_};
}

bool SnapshotStore::operator==(const SnapshotStore& other) const {
    return nx_ == other.nx_ && ny_ == other.ny_ && Lx_ == other.Lx_ && Ly_ == other.Ly_ &&
           nu_ == other.nu_ && dt_ == other.dt_ && substeps_ == other.substeps_ &&
           t_offset_ == other.t_offset_ && n_frames_ == other.n_frames_ &&
           hash_ == other.hash_ &&
           std::memcmp(data_.data(), other.data_.data(), data_.size() * sizeof(float)) == 0;
}

namespace {

constexpr char kMagic[4] = {'A', 'S', 'R', 'C'};
constexpr std::uint16_t kVersion = 1;

template <typename T>
void put(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw std::runtime_error("snapshot file truncated");
    return v;
}

}  // namespace

void SnapshotStore::save(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + path + " for writing");
    os.write(kMagic, 4);
    put(os, kVersion);
    put(os, static_cast<std::uint32_t>(nx_));
    put(os, static_cast<std::uint32_t>(ny_));
    put(os, static_cast<std::uint32_t>(n_frames_));
    put(os, Lx_);
    put(os, Ly_);
    put(os, nu_);
    put(os, dt_);
    put(os, static_cast<std::uint32_t>(substeps_));
    os.write(reinterpret_cast<const char*>(hash_.data()), hash_.size());
    os.write(reinterpret_cast<const char*>(data_.data()),
             static_cast<std::streamsize>(data_.size() * sizeof(float)));
    if (!os) throw std::runtime_error("failed writing snapshot store to " + path);
}

SnapshotStore SnapshotStore::load(const std::string& path, const ReservoirConfig& config,
                                  const Hash256& expected_hash) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open snapshot store " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error(path + ": not a snapshot store");
    if (get<std::uint16_t>(is) != kVersion)
        throw std::runtime_error(path + ": unsupported snapshot version");

    SnapshotStore store(config, expected_hash);
    const auto nx = get<std::uint32_t>(is);
    const auto ny = get<std::uint32_t>(is);
    const auto n_frames = get<std::uint32_t>(is);
    const double Lx = get<double>(is);
    const double Ly = get<double>(is);
    const double nu = get<double>(is);
    const double dt = get<double>(is);
    const auto substeps = get<std::uint32_t>(is);
    Hash256 file_hash;
    is.read(reinterpret_cast<char*>(file_hash.data()), file_hash.size());
    if (!is) throw std::runtime_error(path + ": snapshot header truncated");

    if (static_cast<int>(nx) != store.nx_ || static_cast<int>(ny) != store.ny_ ||
        Lx != store.Lx_ || Ly != store.Ly_ || nu != store.nu_ || dt != store.dt_ ||
        static_cast<int>(substeps) != store.substeps_)
        throw std::runtime_error(path + ": snapshot geometry does not match the configuration");
    if (file_hash != expected_hash)
        throw std::runtime_error(path + ": config hash mismatch");
    if (store.t_offset_ > 0 && n_frames % 2 != 0)
        throw std::runtime_error(path + ": frame count inconsistent with t_offset");

    const std::size_t count = static_cast<std::size_t>(n_frames) * nx * ny;
    store.data_.resize(count);
    store.n_frames_ = n_frames;
    is.read(reinterpret_cast<char*>(store.data_.data()),
            static_cast<std::streamsize>(count * sizeof(float)));
    if (!is) throw std::runtime_error(path + ": snapshot payload truncated");
    char extra;
    if (is.read(&extra, 1)) throw std::runtime_error(path + ": trailing bytes after payload");
    return store;
}

SnapshotStore run(std::span<const double> inputs, const ReservoirConfig& config,
                  const Hash256& config_hash) {
    config.validate();
    DiffusionStepper stepper(config);
    DiffusionStepper latency(config);
    SnapshotStore store(config, config_hash);

    for (std::size_t n = 0; n < inputs.size(); ++n) {
        stepper.advance_sample(inputs[n]);
        double peak = 0;
        for (double v : stepper.field().values) peak = std::max(peak, std::abs(v));
        if (!std::isfinite(peak) || peak > 1e6)
            throw std::runtime_error("reservoir blow-up at sample " + std::to_string(n));
        if (config.t_offset > 0) {
            // processing latency: the field keeps diffusing with no input
            latency.field() = stepper.field();
            for (int k = 0; k < config.t_offset; ++k) latency.step(0.0);
            store.append(stepper.field(), latency.field());
        } else {
            store.append(stepper.field());
        }
    }
    return store;
}

std::string canonical_config_string(const ReservoirConfig& config) {
    std::ostringstream os;
    os << "reservoir-v1"
       << " nx=" << config.nx << " ny=" << config.ny
       << " Lx=" << canonical_double(config.Lx) << " Ly=" << canonical_double(config.Ly)
       << " nu=" << canonical_double(config.nu)
       << " dt=" << canonical_double(config.resolved_dt())
       << " K=" << config.substeps_per_sample << " T=" << config.t_offset
       << " inj=[";
    for (const auto& inj : config.injections) {
        os << "(" << canonical_double(inj.x) << "," << canonical_double(inj.y) << ","
           << canonical_double(inj.width) << "," << canonical_double(inj.gain) << ")";
    }
    os << "]";
    return os.str();
}

}  // namespace asrc::reservoir
