#include "asrc/models.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace asrc::models {

std::string_view model_kind_name(ModelKind kind) {
    switch (kind) {
        case ModelKind::Linear: return "linear";
        case ModelKind::Aerc: return "aerc";
        case ModelKind::Asaerc: return "asaerc";
        case ModelKind::DelayMlp: return "delay-mlp";
    }
    throw std::logic_error("unknown model kind");
}

ModelKind model_kind_from_name(std::string_view name) {
    if (name == "linear") return ModelKind::Linear;
    if (name == "aerc") return ModelKind::Aerc;
    if (name == "asaerc") return ModelKind::Asaerc;
    if (name == "delay-mlp") return ModelKind::DelayMlp;
    throw std::invalid_argument("unknown model kind: " + std::string(name));
}

namespace {

double halton(int index, int base) {
    double f = 1.0;
    double r = 0.0;
    while (index > 0) {
        f /= base;
        r += f * (index % base);
        index /= base;
    }
    return r;
}

}  // namespace

std::vector<Point> uniform_interior_lattice(int n, double Lx, double Ly) {
    if (n < 1) throw std::invalid_argument("need at least one measurement point");
    std::vector<Point> pts;
    pts.reserve(n);
    const int m = static_cast<int>(std::lround(std::sqrt(static_cast<double>(n))));
    if (m * m == n) {
        for (int i = 0; i < m; ++i) {
            for (int j = 0; j < m; ++j) {
                pts.push_back({Lx * (i + 1) / (m + 1), Ly * (j + 1) / (m + 1)});
            }
        }
    } else {
        for (int k = 0; k < n; ++k) {
            pts.push_back({Lx * (0.05 + 0.9 * halton(k + 1, 2)),
                           Ly * (0.05 + 0.9 * halton(k + 1, 3))});
        }
    }
    return pts;
}

// ---------------------------------------------------------------------------
// Linear readout

LinearReadout make_linear(int n_fix, double Lx, double Ly) {
    LinearReadout readout;
    readout.points = uniform_interior_lattice(n_fix, Lx, Ly);
    readout.weights.assign(n_fix, 0.0);
    return readout;
}

double linear_forward(const LinearReadout& readout, std::span<const double> r) {
    if (r.size() != readout.weights.size())
        throw std::invalid_argument("linear_forward: measurement size mismatch");
    double y = 0;
    for (std::size_t i = 0; i < r.size(); ++i) y += readout.weights[i] * r[i];
    return y;
}

std::vector<double> ridge_fit(const std::vector<std::vector<double>>& rows,
                              std::span<const double> y, double lambda) {
    if (rows.empty()) throw std::invalid_argument("ridge_fit: no rows");
    if (rows.size() != y.size()) throw std::invalid_argument("ridge_fit: row/target count mismatch");
    if (lambda < 0) throw std::invalid_argument("ridge_fit: lambda must be nonnegative");
    const std::size_t n = rows.front().size();
    std::vector<double> gram(n * n, 0.0);
    std::vector<double> rhs(n, 0.0);
    for (std::size_t t = 0; t < rows.size(); ++t) {
        const auto& row = rows[t];
        if (row.size() != n) throw std::invalid_argument("ridge_fit: ragged rows");
        for (std::size_t i = 0; i < n; ++i) {
            rhs[i] += row[i] * y[t];
            for (std::size_t j = i; j < n; ++j) gram[i * n + j] += row[i] * row[j];
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        gram[i * n + i] += lambda;
        for (std::size_t j = 0; j < i; ++j) gram[i * n + j] = gram[j * n + i];
    }

    // Cholesky: gram = L L^T
    std::vector<double> chol(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double s = gram[i * n + j];
            for (std::size_t k = 0; k < j; ++k) s -= chol[i * n + k] * chol[j * n + k];
            if (i == j) {
                if (s <= 0)
                    throw std::runtime_error(
                        "ridge_fit: singular normal equations; use lambda > 0");
                chol[i * n + i] = std::sqrt(s);
            } else {
                chol[i * n + j] = s / chol[j * n + j];
            }
        }
    }
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i) {
        double s = rhs[i];
        for (std::size_t k = 0; k < i; ++k) s -= chol[i * n + k] * w[k];
        w[i] = s / chol[i * n + i];
    }
    for (std::size_t ii = n; ii-- > 0;) {
        double s = w[ii];
        for (std::size_t k = ii + 1; k < n; ++k) s -= chol[k * n + ii] * w[k];
        w[ii] = s / chol[ii * n + ii];
    }
    return w;
}

// ---------------------------------------------------------------------------
// AERC

AercModel make_aerc(int n_fix, int n, int hidden, double Lx, double Ly, std::uint64_t seed) {
    AercModel model;
    model.psi = uniform_interior_lattice(n_fix, Lx, Ly);
    model.readout_points = uniform_interior_lattice(n, Lx, Ly);
    std::mt19937_64 rng(seed);
    model.backbone = neural::make_layer(hidden, n_fix, neural::Activation::ReLU, rng);
    model.weight_head = neural::make_layer(n, hidden, neural::Activation::Identity, rng);
    return model;
}

void AercGrads::match(const AercModel& model) {
    backbone.match(model.backbone);
    weight_head.match(model.weight_head);
}

void AercGrads::zero() {
    backbone.zero();
    weight_head.zero();
}

void aerc_backward(const AercModel& model, const AercCache& cache, double dy, AercGrads& grads) {
    const int n = model.n();
    std::vector<double> dw(n);
    for (int i = 0; i < n; ++i) dw[i] = dy * cache.r[i];
    std::vector<double> dh;
    neural::layer_backward(model.weight_head, cache.head_cache, dw, grads.weight_head, dh);
    std::vector<double> dr_tilde;
    neural::layer_backward(model.backbone, cache.backbone_cache, dh, grads.backbone, dr_tilde);
}

// ---------------------------------------------------------------------------
// ASAERC

AsaercModel make_asaerc(int n_fix, int n, int hidden, double Lx, double Ly,
                        double margin_x, double margin_y, std::uint64_t seed,
                        KernelKind kernel, double kernel_width) {
    if (!(margin_x > 0 && margin_x < Lx / 2 && margin_y > 0 && margin_y < Ly / 2))
        throw std::invalid_argument("query margin must lie in (0, L/2)");
    AsaercModel model;
    model.psi = uniform_interior_lattice(n_fix, Lx, Ly);
    std::mt19937_64 rng(seed);
    model.backbone = neural::make_layer(hidden, n_fix, neural::Activation::ReLU, rng);
    model.weight_head = neural::make_layer(n, hidden, neural::Activation::Identity, rng);
    model.position_head = neural::make_layer(2 * n, hidden, neural::Activation::Identity, rng);
    model.Lx = Lx;
    model.Ly = Ly;
    model.margin_x = margin_x;
    model.margin_y = margin_y;
    model.kernel = kernel;
    model.kernel_width = kernel_width;
    return model;
}

void AsaercModel::pin_position_head(std::span<const Point> points) {
    if (static_cast<int>(points.size()) != n())
        throw std::invalid_argument("pin_position_head: point count mismatch");
    std::fill(position_head.w.begin(), position_head.w.end(), 0.0);
    const double span_x = Lx - 2.0 * margin_x;
    const double span_y = Ly - 2.0 * margin_y;
    for (int i = 0; i < n(); ++i) {
        const double px = (points[i].x - margin_x) / span_x;
        const double py = (points[i].y - margin_y) / span_y;
        if (!(px > 0 && px < 1 && py > 0 && py < 1))
            throw std::invalid_argument("pin_position_head: point outside the query box");
        position_head.b[2 * i] = std::log(px / (1.0 - px));
        position_head.b[2 * i + 1] = std::log(py / (1.0 - py));
    }
}

void AsaercGrads::match(const AsaercModel& model) {
    backbone.match(model.backbone);
    weight_head.match(model.weight_head);
    position_head.match(model.position_head);
}

void AsaercGrads::zero() {
    backbone.zero();
    weight_head.zero();
    position_head.zero();
}

void asaerc_backward(const AsaercModel& model, const AsaercCache& cache, double dy,
                     AsaercGrads& grads) {
    const int n = model.n();
    const double span_x = model.Lx - 2.0 * model.margin_x;
    const double span_y = model.Ly - 2.0 * model.margin_y;

    std::vector<double> dw(n);
    std::vector<double> draw(2 * n);
    for (int i = 0; i < n; ++i) {
        dw[i] = dy * cache.r[i];
        const double dr = dy * cache.w[i];
        const double sx = neural::sigmoid(cache.raw[2 * i]);
        const double sy = neural::sigmoid(cache.raw[2 * i + 1]);
        draw[2 * i] = dr * cache.drdx[i] * span_x * sx * (1.0 - sx);
        draw[2 * i + 1] = dr * cache.drdy[i] * span_y * sy * (1.0 - sy);
    }

    std::vector<double> dh_w, dh_p;
    neural::layer_backward(model.weight_head, cache.wh_cache, dw, grads.weight_head, dh_w);
    neural::layer_backward(model.position_head, cache.ph_cache, draw, grads.position_head, dh_p);
    for (std::size_t i = 0; i < dh_w.size(); ++i) dh_w[i] += dh_p[i];
    std::vector<double> dr_tilde;
    neural::layer_backward(model.backbone, cache.backbone_cache, dh_w, grads.backbone, dr_tilde);
}

// ---------------------------------------------------------------------------
// Delay-embedding MLP

DelayMlp make_delay_mlp(int k, int hidden, std::uint64_t seed) {
    if (k < 0) throw std::invalid_argument("delay length must be nonnegative");
    DelayMlp model;
    model.k = k;
    std::mt19937_64 rng(seed);
    model.net.push_back(neural::make_layer(hidden, k + 1, neural::Activation::ReLU, rng));
    model.net.push_back(neural::make_layer(1, hidden, neural::Activation::Identity, rng));
    return model;
}

double delay_forward(const DelayMlp& model, std::span<const double> window,
                     neural::MlpCache& cache) {
    if (static_cast<int>(window.size()) != model.k + 1)
        throw std::invalid_argument("delay_forward: window length mismatch");
    std::vector<double> out;
    neural::mlp_forward(model.net, window, out, cache);
    return out[0];
}

// ---------------------------------------------------------------------------

long model_parameter_count(ModelKind kind, int n_fix, int n, int hidden, int delay_k) {
    const long h = hidden;
    switch (kind) {
        case ModelKind::Linear: return n_fix;
        case ModelKind::Aerc: return h * n_fix + h + h * n + n;
        case ModelKind::Asaerc:
            return model_parameter_count(ModelKind::Aerc, n_fix, n, hidden) + h * 2L * n + 2L * n;
        case ModelKind::DelayMlp: return (delay_k + 1L) * h + h + h + 1;
    }
    throw std::logic_error("unknown model kind");
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr char kMagic[4] = {'A', 'S', 'M', 'D'};
constexpr std::uint16_t kVersion = 1;

template <typename T>
void put(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw std::runtime_error("checkpoint truncated");
    return v;
}

void write_points(std::ostream& os, const std::vector<Point>& pts) {
    put<std::uint32_t>(os, static_cast<std::uint32_t>(pts.size()));
    for (const auto& p : pts) {
        put(os, p.x);
        put(os, p.y);
    }
}

std::vector<Point> read_points(std::istream& is) {
    const auto n = get<std::uint32_t>(is);
    std::vector<Point> pts(n);
    for (auto& p : pts) {
        p.x = get<double>(is);
        p.y = get<double>(is);
    }
    return pts;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + path + " for writing");
    os.write(kMagic, 4);
    put(os, kVersion);
    put<std::uint8_t>(os, static_cast<std::uint8_t>(ckpt.kind));
    put(os, ckpt.seed);
    put(os, ckpt.epoch);
    os.write(reinterpret_cast<const char*>(ckpt.config_hash.data()), ckpt.config_hash.size());
    switch (ckpt.kind) {
        case ModelKind::Linear: {
            write_points(os, ckpt.linear.points);
            os.write(reinterpret_cast<const char*>(ckpt.linear.weights.data()),
                     static_cast<std::streamsize>(ckpt.linear.weights.size() * sizeof(double)));
            break;
        }
        case ModelKind::Aerc: {
            write_points(os, ckpt.aerc.psi);
            write_points(os, ckpt.aerc.readout_points);
            neural::write_mlp(os, {ckpt.aerc.backbone, ckpt.aerc.weight_head});
            break;
        }
        case ModelKind::Asaerc: {
            const auto& m = ckpt.asaerc;
            write_points(os, m.psi);
            put(os, m.Lx);
            put(os, m.Ly);
            put(os, m.margin_x);
            put(os, m.margin_y);
            put<std::uint8_t>(os, static_cast<std::uint8_t>(m.kernel));
            put(os, m.kernel_width);
            neural::write_mlp(os, {m.backbone, m.weight_head, m.position_head});
            break;
        }
        case ModelKind::DelayMlp: {
            put<std::uint32_t>(os, static_cast<std::uint32_t>(ckpt.delay.k));
            neural::write_mlp(os, ckpt.delay.net);
            break;
        }
    }
    if (!os) throw std::runtime_error("failed writing checkpoint " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open checkpoint " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error(path + ": not a model checkpoint");
    if (get<std::uint16_t>(is) != kVersion)
        throw std::runtime_error(path + ": unsupported checkpoint version");
    Checkpoint ckpt;
    ckpt.kind = static_cast<ModelKind>(get<std::uint8_t>(is));
    ckpt.seed = get<std::uint64_t>(is);
    ckpt.epoch = get<std::uint32_t>(is);
    is.read(reinterpret_cast<char*>(ckpt.config_hash.data()), ckpt.config_hash.size());
    if (!is) throw std::runtime_error(path + ": checkpoint truncated");
    switch (ckpt.kind) {
        case ModelKind::Linear: {
            ckpt.linear.points = read_points(is);
            ckpt.linear.weights.resize(ckpt.linear.points.size());
            is.read(reinterpret_cast<char*>(ckpt.linear.weights.data()),
                    static_cast<std::streamsize>(ckpt.linear.weights.size() * sizeof(double)));
            if (!is) throw std::runtime_error(path + ": checkpoint truncated");
            break;
        }
        case ModelKind::Aerc: {
            ckpt.aerc.psi = read_points(is);
            ckpt.aerc.readout_points = read_points(is);
            auto net = neural::read_mlp(is);
            if (net.size() != 2) throw std::runtime_error(path + ": bad layer count");
            ckpt.aerc.backbone = std::move(net[0]);
            ckpt.aerc.weight_head = std::move(net[1]);
            break;
        }
        case ModelKind::Asaerc: {
            auto& m = ckpt.asaerc;
            m.psi = read_points(is);
            m.Lx = get<double>(is);
            m.Ly = get<double>(is);
            m.margin_x = get<double>(is);
            m.margin_y = get<double>(is);
            m.kernel = static_cast<KernelKind>(get<std::uint8_t>(is));
            m.kernel_width = get<double>(is);
            auto net = neural::read_mlp(is);
            if (net.size() != 3) throw std::runtime_error(path + ": bad layer count");
            m.backbone = std::move(net[0]);
            m.weight_head = std::move(net[1]);
            m.position_head = std::move(net[2]);
            break;
        }
        case ModelKind::DelayMlp: {
            ckpt.delay.k = static_cast<int>(get<std::uint32_t>(is));
            ckpt.delay.net = neural::read_mlp(is);
            break;
        }
        default: throw std::runtime_error(path + ": unknown model kind tag");
    }
    return ckpt;
}

}  // namespace asrc::models
