#pragma once

// Benchmark chaotic systems: integration, resampling, standardization, and
// assembly into a one-step-ahead prediction dataset.

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace asrc::dynsys {

enum class SystemKind {
    Lorenz,
    Rossler,
    VanDerPol,
    Duffing,
    DoublePendulum,
    Logistic,
    Henon,
    MackeyGlass,
};

std::string_view kind_name(SystemKind kind);
SystemKind kind_from_name(std::string_view name);
bool is_flow(SystemKind kind);
bool is_map(SystemKind kind);

struct SystemSpec {
    SystemKind kind = SystemKind::Lorenz;
    std::map<std::string, double> params;
    std::vector<double> initial_state;
    int observable_index = 0;
    double total_time = 0;
    int n_samples = 7500;
    double integrator_dt = 0;        // 0 = sample_dt / 20 for flows
    double transient_fraction = 0.1; // lead-in discarded before t=0 (flows, DDE)

    double sample_dt() const { return total_time / n_samples; }
    double param(const std::string& name) const;
    void validate() const;
};

/// Canonical chaotic-regime defaults; every value is overridable.
SystemSpec default_spec(SystemKind kind, int n_samples = 7500);

/// The eight benchmark systems in canonical order.
std::vector<SystemSpec> default_suite(int n_samples = 7500);

struct Trajectory {
    double dt = 0;  // uniform fine step; states[k] is at time k * dt
    std::vector<std::vector<double>> states;

    int dim() const { return states.empty() ? 0 : static_cast<int>(states[0].size()); }
};

/// Classical RK4 at a fixed fine step, transient lead-in discarded.
/// Throws on trajectory blow-up (any |component| > 1e6).
Trajectory integrate_flow(const SystemSpec& spec);

/// Logistic and Henon maps; states[0] is the initial state.
Trajectory iterate_map(const SystemSpec& spec);

/// Mackey-Glass delay equation, Euler stepping over a discretized delay
/// buffer with constant pre-history.
Trajectory integrate_mackey_glass(const SystemSpec& spec);

Trajectory generate_trajectory(const SystemSpec& spec);

/// Values of one coordinate at t_k = k * total_time / n_samples, linear
/// interpolation between integrator outputs.
std::vector<double> resample(const Trajectory& traj, int observable_index,
                             int n_samples, double total_time);

struct Standardization {
    double mean = 0;
    double stdev = 1;  // population convention
};

/// In-place z-score; throws on zero variance or length < 2.
Standardization standardize(std::vector<double>& values);

struct Series {
    std::vector<double> values;  // standardized
    double mean = 0;
    double stdev = 1;
    double sample_dt = 0;
    SystemSpec spec;
};

/// generate -> resample -> standardize for one system.
Series make_series(const SystemSpec& spec);

struct SystemRange {
    std::string name;
    std::size_t begin = 0;
    std::size_t end = 0;  // [begin, end) in the concatenated inputs
};

/// One-step-ahead pairs (inputs[n], targets[n] = inputs[n+1]) that never
/// cross a system boundary. Targets without a same-system successor are NaN
/// and excluded from every pair list.
struct Dataset {
    std::vector<double> inputs;
    std::vector<double> targets;
    std::vector<SystemRange> boundaries;
    double test_fraction = 0.2;

    std::size_t n_systems() const { return boundaries.size(); }

    /// Usable pair indices for the split; `window` excludes pairs whose
    /// delay window [n-window, n] would cross a boundary.
    std::vector<std::size_t> train_pairs(int window = 0) const;
    std::vector<std::size_t> test_pairs(int window = 0) const;
    std::vector<std::size_t> all_pairs() const;

    int system_of(std::size_t index) const;
};

Dataset build_dataset(const std::vector<Series>& series_list, double test_fraction);

struct LyapunovEstimate {
    double lambda = 0;
    bool reliable = false;
};

/// Largest Lyapunov exponent: Benettin tangent/renormalization for flows,
/// Henon and Mackey-Glass; analytic log-derivative average for the logistic
/// map.
LyapunovEstimate estimate_largest_lyapunov(const SystemSpec& spec);

}  // namespace asrc::dynsys
