#pragma once

// Readout models over the shared reservoir: linear readout, attention-
// weighted readout (AERC), adaptive-sensing attention readout (ASAERC), and
// a delay-embedding MLP baseline.

#include "asrc/neural.hpp"
#include "asrc/reservoir.hpp"

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

namespace asrc::models {

using reservoir::FieldView;
using reservoir::Point;

enum class ModelKind : std::uint8_t { Linear = 0, Aerc = 1, Asaerc = 2, DelayMlp = 3 };
enum class KernelKind : std::uint8_t { BilinearPoint = 0, GaussianBump = 1 };

std::string_view model_kind_name(ModelKind kind);
ModelKind model_kind_from_name(std::string_view name);

/// n measurement points strictly inside the domain: an m x m lattice at
/// fractions (i+1)/(m+1) when n is a perfect square, a Halton scatter
/// otherwise.
std::vector<Point> uniform_interior_lattice(int n, double Lx, double Ly);

// ---------------------------------------------------------------------------

struct LinearReadout {
    std::vector<Point> points;    // measurement locations, N of them
    std::vector<double> weights;  // 1 x N, no bias

    int n() const { return static_cast<int>(weights.size()); }
};

LinearReadout make_linear(int n_fix, double Lx, double Ly);

double linear_forward(const LinearReadout& readout, std::span<const double> r);

/// (R^T R + lambda I)^-1 R^T y by Cholesky; alternative trainer for the
/// linear baseline only. Throws on a singular system, recommending
/// lambda > 0.
std::vector<double> ridge_fit(const std::vector<std::vector<double>>& rows,
                              std::span<const double> y, double lambda);

// ---------------------------------------------------------------------------

struct AercModel {
    std::vector<Point> psi;             // N_fix attention-input points
    std::vector<Point> readout_points;  // N readout points
    neural::DenseLayer backbone;        // N_fix -> hidden, ReLU
    neural::DenseLayer weight_head;     // hidden -> N, identity

    int n_fix() const { return backbone.in; }
    int n() const { return weight_head.out; }
};

AercModel make_aerc(int n_fix, int n, int hidden, double Lx, double Ly, std::uint64_t seed);

struct AercCache {
    std::vector<double> r_tilde;
    std::vector<double> hidden;
    std::vector<double> w;
    std::vector<double> r;
    neural::LayerCache backbone_cache;
    neural::LayerCache head_cache;
};

/// W_att = head(backbone(r_tilde)); r sampled bilinearly at the readout
/// points of `frame`; prediction = W_att . r.
template <typename T>
double aerc_forward(const AercModel& model, const FieldView<T>& frame,
                    std::span<const double> r_tilde, AercCache& cache);

struct AercGrads {
    neural::LayerGrads backbone;
    neural::LayerGrads weight_head;

    void match(const AercModel& model);
    void zero();
};

void aerc_backward(const AercModel& model, const AercCache& cache, double dy, AercGrads& grads);

// ---------------------------------------------------------------------------

struct AsaercModel {
    std::vector<Point> psi;            // N_fix attention-input points
    neural::DenseLayer backbone;       // N_fix -> hidden, ReLU (shared)
    neural::DenseLayer weight_head;    // hidden -> N, identity
    neural::DenseLayer position_head;  // hidden -> 2N, identity (raw queries)
    double Lx = 1.0;
    double Ly = 1.0;
    double margin_x = 0;  // query coordinates squash into [margin, L - margin]
    double margin_y = 0;
    KernelKind kernel = KernelKind::BilinearPoint;
    double kernel_width = 0.03;

    int n_fix() const { return backbone.in; }
    int n() const { return weight_head.out; }

    /// Zeroes the position-head weights and sets its biases so the squashed
    /// queries land on the given points.
    void pin_position_head(std::span<const Point> points);
};

AsaercModel make_asaerc(int n_fix, int n, int hidden, double Lx, double Ly,
                        double margin_x, double margin_y, std::uint64_t seed,
                        KernelKind kernel = KernelKind::BilinearPoint,
                        double kernel_width = 0.03);

struct AsaercCache {
    std::vector<double> r_tilde;
    std::vector<double> hidden;
    std::vector<double> w;
    std::vector<double> raw;  // 2N pre-squash coordinates
    std::vector<Point> queries;
    std::vector<double> r;
    std::vector<double> drdx;  // kernel spatial gradient at each query
    std::vector<double> drdy;
    neural::LayerCache backbone_cache;
    neural::LayerCache wh_cache;
    neural::LayerCache ph_cache;
};

/// raw = position_head(backbone(r_tilde)); queries squashed into the
/// interior; r_i = kernel sample of frame_T at query i; prediction =
/// weight_head(backbone(r_tilde)) . r.
template <typename T>
double asaerc_forward(const AsaercModel& model, const FieldView<T>& frame_T,
                      std::span<const double> r_tilde, AsaercCache& cache);

struct AsaercGrads {
    neural::LayerGrads backbone;
    neural::LayerGrads weight_head;
    neural::LayerGrads position_head;

    void match(const AsaercModel& model);
    void zero();
};

/// Two gradient paths only: loss -> weight head, and loss -> r -> kernel
/// spatial gradient -> position head; both continue into the shared
/// backbone. The field is a constant.
void asaerc_backward(const AsaercModel& model, const AsaercCache& cache, double dy,
                     AsaercGrads& grads);

// ---------------------------------------------------------------------------

struct DelayMlp {
    int k = 0;            // number of delayed copies
    neural::Mlp net;      // (k+1) -> hidden -> 1
};

DelayMlp make_delay_mlp(int k, int hidden, std::uint64_t seed);

double delay_forward(const DelayMlp& model, std::span<const double> window,
                     neural::MlpCache& cache);

// ---------------------------------------------------------------------------

/// Closed-form trainable-parameter counts; hidden is the shared MLP width.
long model_parameter_count(ModelKind kind, int n_fix, int n, int hidden = 128, int delay_k = 0);

// Checkpoints: versioned binary, round-trip exact. The config hash ties the
// artifact to the run that produced it.
struct Checkpoint {
    ModelKind kind = ModelKind::Linear;
    std::uint64_t seed = 0;
    std::uint32_t epoch = 0;
    Hash256 config_hash{};
    LinearReadout linear;
    AercModel aerc;
    AsaercModel asaerc;
    DelayMlp delay;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

// ---------------------------------------------------------------------------

template <typename T>
double aerc_forward(const AercModel& model, const FieldView<T>& frame,
                    std::span<const double> r_tilde, AercCache& cache) {
    neural::layer_forward(model.backbone, r_tilde, cache.hidden, cache.backbone_cache);
    neural::layer_forward(model.weight_head, cache.hidden, cache.w, cache.head_cache);
    cache.r_tilde.assign(r_tilde.begin(), r_tilde.end());
    const int n = model.n();
    cache.r.resize(n);
    for (int i = 0; i < n; ++i)
        cache.r[i] = reservoir::sample_bilinear(frame, model.readout_points[i].x,
                                                model.readout_points[i].y)
                         .value;
    double y = 0;
    for (int i = 0; i < n; ++i) y += cache.w[i] * cache.r[i];
    return y;
}

template <typename T>
double asaerc_forward(const AsaercModel& model, const FieldView<T>& frame_T,
                      std::span<const double> r_tilde, AsaercCache& cache) {
    neural::layer_forward(model.backbone, r_tilde, cache.hidden, cache.backbone_cache);
    neural::layer_forward(model.weight_head, cache.hidden, cache.w, cache.wh_cache);
    neural::layer_forward(model.position_head, cache.hidden, cache.raw, cache.ph_cache);
    cache.r_tilde.assign(r_tilde.begin(), r_tilde.end());

    const int n = model.n();
    cache.queries.resize(n);
    cache.r.resize(n);
    cache.drdx.resize(n);
    cache.drdy.resize(n);
    const double span_x = model.Lx - 2.0 * model.margin_x;
    const double span_y = model.Ly - 2.0 * model.margin_y;
    for (int i = 0; i < n; ++i) {
        const double qx = model.margin_x + span_x * neural::sigmoid(cache.raw[2 * i]);
        const double qy = model.margin_y + span_y * neural::sigmoid(cache.raw[2 * i + 1]);
        cache.queries[i] = {qx, qy};
        reservoir::PointSample s;
        if (model.kernel == KernelKind::BilinearPoint)
            s = reservoir::sample_bilinear(frame_T, qx, qy);
        else
            s = reservoir::sample_gaussian_kernel(frame_T, qx, qy, model.kernel_width);
        cache.r[i] = s.value;
        cache.drdx[i] = s.ddx;
        cache.drdy[i] = s.ddy;
    }
    double y = 0;
    for (int i = 0; i < n; ++i) y += cache.w[i] * cache.r[i];
    return y;
}

}  // namespace asrc::models
