#pragma once

// 2-D diffusion reservoir: explicit-Euler field evolution under a CFL guard,
// Gaussian input injection, differentiable point sampling, and snapshot
// persistence.

#include "asrc/hash.hpp"

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace asrc::reservoir {

struct GridField {
    int nx = 0;
    int ny = 0;
    double Lx = 1.0;
    double Ly = 1.0;
    std::vector<double> values;  // row-major, u(i,j) = values[i*ny + j]

    double hx() const { return Lx / (nx - 1); }
    double hy() const { return Ly / (ny - 1); }
    double& at(int i, int j) { return values[static_cast<std::size_t>(i) * ny + j]; }
    double at(int i, int j) const { return values[static_cast<std::size_t>(i) * ny + j]; }
    void zero_boundary();
};

GridField make_field(int nx, int ny, double Lx = 1.0, double Ly = 1.0);

struct Injection {
    double x = 0.5;
    double y = 0.5;
    double width = 0.05;  // Gaussian sigma
    double gain = 1.0;
};

struct ReservoirConfig {
    int nx = 64;
    int ny = 64;
    double Lx = 1.0;
    double Ly = 1.0;
    double nu = 0.05;
    double dt = 0;            // explicit substep; 0 derives dt_fraction * CFL bound
    double dt_fraction = 0.8; // used only when dt == 0
    int substeps_per_sample = 10;
    int t_offset = 0;         // input-free substeps before the adaptive snapshot
    std::vector<Injection> injections;

    double hx() const { return Lx / (nx - 1); }
    double hy() const { return Ly / (ny - 1); }
    double resolved_dt() const;

    /// Throws on CFL violation, out-of-domain injection centers, or a
    /// t_offset outside [0, substeps_per_sample).
    void validate() const;
};

/// Four injection sites on an interior diamond with signed gains.
ReservoirConfig default_config();

/// Largest stable explicit step: 1 / (2 nu (1/hx^2 + 1/hy^2)).
double cfl_max_dt(double nu, double hx, double hy);

/// 5-point stencil on interior nodes; boundary nodes zero.
GridField laplacian(const GridField& field);

/// input_value * sum of Gaussian sources, boundary rows and columns zeroed.
GridField injection_field(const ReservoirConfig& config, double input_value);

/// One explicit Euler substep of u' = nu lap(u) + f. Dirichlet re-enforced.
GridField step(const GridField& field, double input_value, const ReservoirConfig& config);

/// Reusable stepper with a precomputed injection mask and double buffering.
class DiffusionStepper {
  public:
    explicit DiffusionStepper(const ReservoirConfig& config);

    void step(double input_value);
    void advance_sample(double input_value);  // substeps_per_sample substeps
    const GridField& field() const { return u_; }
    GridField& field() { return u_; }
    const GridField& injection_mask() const { return mask_; }
    double dt() const { return dt_; }

  private:
    ReservoirConfig cfg_;
    double dt_;
    GridField u_;
    GridField next_;
    GridField mask_;
};

// ---------------------------------------------------------------------------
// Sampling

struct Point {
    double x = 0;
    double y = 0;
};

template <typename T>
struct FieldView {
    const T* values = nullptr;
    int nx = 0;
    int ny = 0;
    double Lx = 1.0;
    double Ly = 1.0;

    double hx() const { return Lx / (nx - 1); }
    double hy() const { return Ly / (ny - 1); }
    double at(int i, int j) const {
        return static_cast<double>(values[static_cast<std::size_t>(i) * ny + j]);
    }
};

inline FieldView<double> view(const GridField& f) {
    return {f.values.data(), f.nx, f.ny, f.Lx, f.Ly};
}

struct PointSample {
    double value = 0;
    double ddx = 0;
    double ddy = 0;
};

/// Bilinear interpolation from the four surrounding nodes, with the exact
/// in-cell spatial gradient. Points on an interior grid line use the
/// lower-index cell. Throws if the point is not strictly inside the domain.
template <typename T>
PointSample sample_bilinear(const FieldView<T>& f, double x, double y);

template <typename T>
double bilinear_value(const FieldView<T>& f, double x, double y) {
    return sample_bilinear(f, x, y).value;
}

/// Discretely normalized truncated Gaussian kernel (support radius 4 sigma)
/// with the analytic gradient with respect to the center.
template <typename T>
PointSample sample_gaussian_kernel(const FieldView<T>& f, double cx, double cy, double width);

template <typename T>
void fixed_measurements(const FieldView<T>& f, std::span<const Point> points,
                        std::span<double> out) {
    if (points.size() != out.size())
        throw std::invalid_argument("fixed_measurements: size mismatch");
    for (std::size_t k = 0; k < points.size(); ++k)
        out[k] = sample_bilinear(f, points[k].x, points[k].y).value;
}

// ---------------------------------------------------------------------------
// Snapshot store

/// Per-sample reservoir snapshots, 32-bit on disk and in the store, sampled
/// in 64-bit arithmetic. When t_offset > 0 each sample keeps two frames: the
/// end-of-sample field and the field after t_offset further input-free
/// substeps.
class SnapshotStore {
  public:
    SnapshotStore() = default;
    SnapshotStore(const ReservoirConfig& config, Hash256 config_hash);

    void append(const GridField& end_frame);
    void append(const GridField& end_frame, const GridField& offset_frame);

    std::size_t n_samples() const;
    std::size_t n_frames() const { return n_frames_; }
    bool interleaved() const { return t_offset_ > 0; }
    int nx() const { return nx_; }
    int ny() const { return ny_; }
    const Hash256& config_hash() const { return hash_; }

    FieldView<float> end_frame(std::size_t sample) const;
    FieldView<float> offset_frame(std::size_t sample) const;

    void save(const std::string& path) const;

    /// Rejects files whose header hash or geometry does not match the
    /// expected configuration.
    static SnapshotStore load(const std::string& path, const ReservoirConfig& config,
                              const Hash256& expected_hash);

    bool operator==(const SnapshotStore& other) const;

  private:
    int nx_ = 0;
    int ny_ = 0;
    double Lx_ = 1.0;
    double Ly_ = 1.0;
    double nu_ = 0;
    double dt_ = 0;
    int substeps_ = 0;
    int t_offset_ = 0;
    std::size_t n_frames_ = 0;
    Hash256 hash_{};
    std::vector<float> data_;
};

/// Drives the PDE over the whole input series from a zero field, recording
/// one (or two, when t_offset > 0) snapshots per sample.
SnapshotStore run(std::span<const double> inputs, const ReservoirConfig& config,
                  const Hash256& config_hash);

/// Canonical text rendering of the reservoir configuration, the basis of the
/// snapshot config hash.
std::string canonical_config_string(const ReservoirConfig& config);

// ---------------------------------------------------------------------------

template <typename T>
PointSample sample_bilinear(const FieldView<T>& f, double x, double y) {
    if (!(x > 0.0 && x < f.Lx && y > 0.0 && y < f.Ly))
        throw std::domain_error("sample_bilinear: point outside the domain");
    const double hx = f.hx();
    const double hy = f.hy();
    const double px = x / hx;
    const double py = y / hy;
    int i = static_cast<int>(std::floor(px));
    int j = static_cast<int>(std::floor(py));
    if (i >= 1 && px == static_cast<double>(i)) --i;  // grid line: lower cell
    if (j >= 1 && py == static_cast<double>(j)) --j;
    i = std::min(i, f.nx - 2);
    j = std::min(j, f.ny - 2);
    const double fx = px - i;
    const double fy = py - j;
    const double u00 = f.at(i, j);
    const double u10 = f.at(i + 1, j);
    const double u01 = f.at(i, j + 1);
    const double u11 = f.at(i + 1, j + 1);
    PointSample s;
    s.value = (1.0 - fx) * (1.0 - fy) * u00 + fx * (1.0 - fy) * u10 +
              (1.0 - fx) * fy * u01 + fx * fy * u11;
    s.ddx = ((1.0 - fy) * (u10 - u00) + fy * (u11 - u01)) / hx;
    s.ddy = ((1.0 - fx) * (u01 - u00) + fx * (u11 - u10)) / hy;
    return s;
}

template <typename T>
PointSample sample_gaussian_kernel(const FieldView<T>& f, double cx, double cy, double width) {
    if (width <= 0) throw std::invalid_argument("sample_gaussian_kernel: width must be positive");
    const double hx = f.hx();
    const double hy = f.hy();
    const double radius = 4.0 * width;
    const int i0 = std::max(0, static_cast<int>(std::ceil((cx - radius) / hx)));
    const int i1 = std::min(f.nx - 1, static_cast<int>(std::floor((cx + radius) / hx)));
    const int j0 = std::max(0, static_cast<int>(std::ceil((cy - radius) / hy)));
    const int j1 = std::min(f.ny - 1, static_cast<int>(std::floor((cy + radius) / hy)));

    const double inv2s2 = 1.0 / (2.0 * width * width);
    const double invs2 = 1.0 / (width * width);
    const double r2max = radius * radius;
    double a = 0, b = 0, dax = 0, day = 0, dbx = 0, dby = 0;
    for (int i = i0; i <= i1; ++i) {
        const double dx = i * hx - cx;
        for (int j = j0; j <= j1; ++j) {
            const double dy = j * hy - cy;
            const double r2 = dx * dx + dy * dy;
            if (r2 > r2max) continue;
            const double g = std::exp(-r2 * inv2s2);
            const double u = f.at(i, j);
            a += g * u;
            b += g;
            // d g / d c = g * (node - c) ... with node - c = (dx, dy)
            dax += g * dx * invs2 * u;
            day += g * dy * invs2 * u;
            dbx += g * dx * invs2;
            dby += g * dy * invs2;
        }
    }
    if (b <= 0)
        throw std::domain_error("sample_gaussian_kernel: kernel support outside the domain");
    PointSample s;
    s.value = a / b;
    s.ddx = (dax * b - a * dbx) / (b * b);
    s.ddy = (day * b - a * dby) / (b * b);
    return s;
}

}  // namespace asrc::reservoir
