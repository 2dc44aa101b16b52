#include "asrc/dynsys.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace asrc::dynsys {

namespace {

constexpr double kBlowUpLimit = 1e6;

struct KindInfo {
    SystemKind kind;
    std::string_view name;
    int dim;
};

constexpr KindInfo kKinds[] = {
    {SystemKind::Lorenz, "lorenz", 3},
    {SystemKind::Rossler, "rossler", 3},
    {SystemKind::VanDerPol, "van_der_pol", 2},
    {SystemKind::Duffing, "duffing", 2},
    {SystemKind::DoublePendulum, "double_pendulum", 4},
    {SystemKind::Logistic, "logistic", 1},
    {SystemKind::Henon, "henon", 2},
    {SystemKind::MackeyGlass, "mackey_glass", 1},
};

const KindInfo& info(SystemKind kind) {
    for (const auto& k : kKinds)
        if (k.kind == kind) return k;
    throw std::logic_error("unknown system kind");
}

int state_dim(SystemKind kind) { return info(kind).dim; }

}  // namespace

std::string_view kind_name(SystemKind kind) { return info(kind).name; }

SystemKind kind_from_name(std::string_view name) {
    for (const auto& k : kKinds)
        if (k.name == name) return k.kind;
    throw std::invalid_argument("unknown system name: " + std::string(name));
}

bool is_flow(SystemKind kind) {
    switch (kind) {
        case SystemKind::Lorenz:
        case SystemKind::Rossler:
        case SystemKind::VanDerPol:
        case SystemKind::Duffing:
        case SystemKind::DoublePendulum: return true;
        default: return false;
    }
}

bool is_map(SystemKind kind) {
    return kind == SystemKind::Logistic || kind == SystemKind::Henon;
}

double SystemSpec::param(const std::string& name) const {
    auto it = params.find(name);
    if (it == params.end())
        throw std::invalid_argument(std::string(kind_name(kind)) + ": missing parameter " + name);
    return it->second;
}

void SystemSpec::validate() const {
    if (n_samples <= 1) throw std::invalid_argument("n_samples must exceed 1");
    if (total_time <= 0) throw std::invalid_argument("total_time must be positive");
    if (!is_flow(kind) && std::abs(total_time - n_samples) > 1e-9 * n_samples)
        throw std::invalid_argument("maps and the delay system use step size 1: total_time must equal n_samples");
    const int dim = state_dim(kind);
    if (observable_index < 0 || observable_index >= dim)
        throw std::invalid_argument("observable_index out of range");
    if (static_cast<int>(initial_state.size()) != dim)
        throw std::invalid_argument("initial_state has wrong dimension");
    if (is_flow(kind) && integrator_dt > 0 && integrator_dt > sample_dt() / 10 + 1e-15)
        throw std::invalid_argument("integrator_dt must be at most sample_dt / 10");
    if (transient_fraction < 0) throw std::invalid_argument("transient_fraction must be nonnegative");
}

SystemSpec default_spec(SystemKind kind, int n_samples) {
    SystemSpec spec;
    spec.kind = kind;
    spec.n_samples = n_samples;
    const double scale = static_cast<double>(n_samples) / 7500.0;
    switch (kind) {
        case SystemKind::Lorenz:
            spec.params = {{"sigma", 10.0}, {"rho", 28.0}, {"beta", 8.0 / 3.0}};
            spec.initial_state = {1.0, 1.0, 1.0};
            spec.total_time = 375.0 * scale;
            break;
        case SystemKind::Rossler:
            spec.params = {{"a", 0.2}, {"b", 0.2}, {"c", 5.7}};
            spec.initial_state = {1.0, 1.0, 1.0};
            spec.total_time = 2000.0 * scale;
            break;
        case SystemKind::VanDerPol:
            spec.params = {{"mu", 5.0}};
            spec.initial_state = {2.0, 0.0};
            spec.total_time = 1500.0 * scale;
            break;
        case SystemKind::Duffing:
            spec.params = {{"delta", 0.3}, {"alpha", -1.0}, {"beta", 1.0},
                           {"gamma", 0.5}, {"omega", 1.2}};
            spec.initial_state = {1.0, 0.0};
            spec.total_time = 825.0 * scale;
            break;
        case SystemKind::DoublePendulum:
            spec.params = {{"m1", 1.0}, {"m2", 1.0}, {"l1", 1.0}, {"l2", 1.0}, {"g", 9.81}};
            spec.initial_state = {M_PI / 2, M_PI / 2, 0.0, 0.0};
            spec.total_time = 2000.0 * scale;
            break;
        case SystemKind::Logistic:
            spec.params = {{"r", 4.0}};
            spec.initial_state = {0.2};
            spec.total_time = n_samples;
            break;
        case SystemKind::Henon:
            spec.params = {{"a", 1.4}, {"b", 0.3}};
            spec.initial_state = {0.0, 0.0};
            spec.total_time = n_samples;
            break;
        case SystemKind::MackeyGlass:
            spec.params = {{"beta", 0.2}, {"gamma", 0.1}, {"n", 10.0},
                           {"tau", 17.0}, {"substep", 0.1}};
            spec.initial_state = {1.2};
            spec.total_time = n_samples;
            break;
    }
    return spec;
}

std::vector<SystemSpec> default_suite(int n_samples) {
    std::vector<SystemSpec> suite;
    for (const auto& k : kKinds) suite.push_back(default_spec(k.kind, n_samples));
    return suite;
}

// ---------------------------------------------------------------------------
// Flows

namespace {

struct FlowDef {
    SystemKind kind;
    int dim = 0;
    double p[5] = {0, 0, 0, 0, 0};

    void rhs(double t, const double* x, double* dx) const {
        switch (kind) {
            case SystemKind::Lorenz: {
                const double sigma = p[0], rho = p[1], beta = p[2];
                dx[0] = sigma * (x[1] - x[0]);
                dx[1] = x[0] * (rho - x[2]) - x[1];
                dx[2] = x[0] * x[1] - beta * x[2];
                return;
            }
            case SystemKind::Rossler: {
                const double a = p[0], b = p[1], c = p[2];
                dx[0] = -x[1] - x[2];
                dx[1] = x[0] + a * x[1];
                dx[2] = b + x[2] * (x[0] - c);
                return;
            }
            case SystemKind::VanDerPol: {
                const double mu = p[0];
                dx[0] = x[1];
                dx[1] = mu * (1.0 - x[0] * x[0]) * x[1] - x[0];
                return;
            }
            case SystemKind::Duffing: {
                const double delta = p[0], alpha = p[1], beta = p[2], gamma = p[3], omega = p[4];
                dx[0] = x[1];
                dx[1] = -delta * x[1] - alpha * x[0] - beta * x[0] * x[0] * x[0] +
                        gamma * std::cos(omega * t);
                return;
            }
            case SystemKind::DoublePendulum: {
                const double m1 = p[0], m2 = p[1], l1 = p[2], l2 = p[3], g = p[4];
                const double th1 = x[0], th2 = x[1], w1 = x[2], w2 = x[3];
                const double delta = th1 - th2;
                const double den = 2.0 * m1 + m2 - m2 * std::cos(2.0 * delta);
                dx[0] = w1;
                dx[1] = w2;
                dx[2] = (-g * (2.0 * m1 + m2) * std::sin(th1) - m2 * g * std::sin(th1 - 2.0 * th2) -
                         2.0 * std::sin(delta) * m2 *
                             (w2 * w2 * l2 + w1 * w1 * l1 * std::cos(delta))) /
                        (l1 * den);
                dx[3] = (2.0 * std::sin(delta) *
                         (w1 * w1 * l1 * (m1 + m2) + g * (m1 + m2) * std::cos(th1) +
                          w2 * w2 * l2 * m2 * std::cos(delta))) /
                        (l2 * den);
                return;
            }
            default: throw std::logic_error("rhs: not a flow");
        }
    }

    // Jacobian-vector product: analytic where the Jacobian is simple, central
    // differences for the double pendulum.
    void jac_vec(double t, const double* x, const double* v, double* jv) const {
        switch (kind) {
            case SystemKind::Lorenz: {
                const double sigma = p[0], rho = p[1], beta = p[2];
                jv[0] = sigma * (v[1] - v[0]);
                jv[1] = (rho - x[2]) * v[0] - v[1] - x[0] * v[2];
                jv[2] = x[1] * v[0] + x[0] * v[1] - beta * v[2];
                return;
            }
            case SystemKind::Rossler: {
                const double a = p[0], c = p[2];
                jv[0] = -v[1] - v[2];
                jv[1] = v[0] + a * v[1];
                jv[2] = x[2] * v[0] + (x[0] - c) * v[2];
                return;
            }
            case SystemKind::VanDerPol: {
                const double mu = p[0];
                jv[0] = v[1];
                jv[1] = (-2.0 * mu * x[0] * x[1] - 1.0) * v[0] + mu * (1.0 - x[0] * x[0]) * v[1];
                return;
            }
            case SystemKind::Duffing: {
                const double delta = p[0], alpha = p[1], beta = p[2];
                jv[0] = v[1];
                jv[1] = (-alpha - 3.0 * beta * x[0] * x[0]) * v[0] - delta * v[1];
                return;
            }
            case SystemKind::DoublePendulum: {
                double norm2 = 0;
                double xmax = 0;
                for (int i = 0; i < dim; ++i) {
                    norm2 += v[i] * v[i];
                    xmax = std::max(xmax, std::abs(x[i]));
                }
                const double norm = std::sqrt(norm2);
                if (norm == 0) {
                    std::fill(jv, jv + dim, 0.0);
                    return;
                }
                const double eps = 1e-7 * (1.0 + xmax);
                double xp[4], xm[4], fp[4], fm[4];
                for (int i = 0; i < dim; ++i) {
                    const double dv = eps * v[i] / norm;
                    xp[i] = x[i] + dv;
                    xm[i] = x[i] - dv;
                }
                rhs(t, xp, fp);
                rhs(t, xm, fm);
                for (int i = 0; i < dim; ++i) jv[i] = norm * (fp[i] - fm[i]) / (2.0 * eps);
                return;
            }
            default: throw std::logic_error("jac_vec: not a flow");
        }
    }
};

FlowDef make_flow(const SystemSpec& spec) {
    FlowDef def;
    def.kind = spec.kind;
    def.dim = state_dim(spec.kind);
    switch (spec.kind) {
        case SystemKind::Lorenz:
            def.p[0] = spec.param("sigma");
            def.p[1] = spec.param("rho");
            def.p[2] = spec.param("beta");
            break;
        case SystemKind::Rossler:
            def.p[0] = spec.param("a");
            def.p[1] = spec.param("b");
            def.p[2] = spec.param("c");
            break;
        case SystemKind::VanDerPol: def.p[0] = spec.param("mu"); break;
        case SystemKind::Duffing:
            def.p[0] = spec.param("delta");
            def.p[1] = spec.param("alpha");
            def.p[2] = spec.param("beta");
            def.p[3] = spec.param("gamma");
            def.p[4] = spec.param("omega");
            break;
        case SystemKind::DoublePendulum:
            def.p[0] = spec.param("m1");
            def.p[1] = spec.param("m2");
            def.p[2] = spec.param("l1");
            def.p[3] = spec.param("l2");
            def.p[4] = spec.param("g");
            break;
        default: throw std::invalid_argument("not a continuous-time system");
    }
    return def;
}

void check_finite(const double* x, int dim, double t) {
    for (int i = 0; i < dim; ++i) {
        if (!std::isfinite(x[i]) || std::abs(x[i]) > kBlowUpLimit)
            throw std::runtime_error("trajectory blow-up at t = " + std::to_string(t));
    }
}

void rk4_step(const FlowDef& sys, double t, double h, double* x) {
    const int d = sys.dim;
    double k1[4] = {0}, k2[4] = {0}, k3[4] = {0}, k4[4] = {0}, tmp[4] = {0};
    sys.rhs(t, x, k1);
    for (int i = 0; i < d; ++i) tmp[i] = x[i] + 0.5 * h * k1[i];
    sys.rhs(t + 0.5 * h, tmp, k2);
    for (int i = 0; i < d; ++i) tmp[i] = x[i] + 0.5 * h * k2[i];
    sys.rhs(t + 0.5 * h, tmp, k3);
    for (int i = 0; i < d; ++i) tmp[i] = x[i] + h * k3[i];
    sys.rhs(t + h, tmp, k4);
    for (int i = 0; i < d; ++i)
        x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
}

// One RK4 step of the augmented system (x, v) with v' = J(x(t)) v.
void rk4_tangent_step(const FlowDef& sys, double t, double h, double* x, double* v) {
    const int d = sys.dim;
    double k1[4] = {0}, k2[4] = {0}, k3[4] = {0}, k4[4] = {0};
    double kv1[4] = {0}, kv2[4] = {0}, kv3[4] = {0}, kv4[4] = {0};
    double xs[4] = {0}, vs[4] = {0};
    sys.rhs(t, x, k1);
    sys.jac_vec(t, x, v, kv1);
    for (int i = 0; i < d; ++i) {
        xs[i] = x[i] + 0.5 * h * k1[i];
        vs[i] = v[i] + 0.5 * h * kv1[i];
    }
    sys.rhs(t + 0.5 * h, xs, k2);
    sys.jac_vec(t + 0.5 * h, xs, vs, kv2);
    for (int i = 0; i < d; ++i) {
        xs[i] = x[i] + 0.5 * h * k2[i];
        vs[i] = v[i] + 0.5 * h * kv2[i];
    }
    sys.rhs(t + 0.5 * h, xs, k3);
    sys.jac_vec(t + 0.5 * h, xs, vs, kv3);
    for (int i = 0; i < d; ++i) {
        xs[i] = x[i] + h * k3[i];
        vs[i] = v[i] + h * kv3[i];
    }
    sys.rhs(t + h, xs, k4);
    sys.jac_vec(t + h, xs, vs, kv4);
    for (int i = 0; i < d; ++i) {
        x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        v[i] += h / 6.0 * (kv1[i] + 2.0 * kv2[i] + 2.0 * kv3[i] + kv4[i]);
    }
}

}  // namespace

Trajectory integrate_flow(const SystemSpec& spec) {
    spec.validate();
    if (!is_flow(spec.kind)) throw std::invalid_argument("integrate_flow: not a continuous-time system");
    const double h = spec.integrator_dt > 0 ? spec.integrator_dt : spec.sample_dt() / 20.0;
    const double lead = spec.transient_fraction * spec.total_time;
    const long n_lead = static_cast<long>(std::ceil(lead / h - 1e-9));
    const long n_main = static_cast<long>(std::ceil(spec.total_time / h - 1e-9));

    FlowDef sys = make_flow(spec);
    const int d = sys.dim;
    double x[4] = {0, 0, 0, 0};
    std::copy(spec.initial_state.begin(), spec.initial_state.end(), x);

    const double t0 = -static_cast<double>(n_lead) * h;
    for (long k = 0; k < n_lead; ++k) {
        rk4_step(sys, t0 + k * h, h, x);
        check_finite(x, d, t0 + (k + 1) * h);
    }

    Trajectory traj;
    traj.dt = h;
    traj.states.reserve(n_main + 1);
    traj.states.emplace_back(x, x + d);
    for (long k = 0; k < n_main; ++k) {
        rk4_step(sys, k * h, h, x);
        check_finite(x, d, (k + 1) * h);
        traj.states.emplace_back(x, x + d);
    }
    return traj;
}

Trajectory iterate_map(const SystemSpec& spec) {
    spec.validate();
    if (!is_map(spec.kind)) throw std::invalid_argument("iterate_map: not a map");
    Trajectory traj;
    traj.dt = 1.0;
    traj.states.reserve(spec.n_samples);
    if (spec.kind == SystemKind::Logistic) {
        const double r = spec.param("r");
        double x = spec.initial_state[0];
        if (x <= 0.0 || x >= 1.0)
            throw std::invalid_argument("logistic initial state must lie in (0, 1)");
        traj.states.push_back({x});
        for (int k = 1; k < spec.n_samples; ++k) {
            x = r * x * (1.0 - x);
            if (!std::isfinite(x) || std::abs(x) > kBlowUpLimit)
                throw std::runtime_error("map divergence at iterate " + std::to_string(k));
            traj.states.push_back({x});
        }
    } else {
        const double a = spec.param("a");
        const double b = spec.param("b");
        double x = spec.initial_state[0];
        double y = spec.initial_state[1];
        traj.states.push_back({x, y});
        for (int k = 1; k < spec.n_samples; ++k) {
            const double xn = 1.0 - a * x * x + y;
            const double yn = b * x;
            x = xn;
            y = yn;
            if (!std::isfinite(x) || std::abs(x) > kBlowUpLimit)
                throw std::runtime_error("map divergence at iterate " + std::to_string(k));
            traj.states.push_back({x, y});
        }
    }
    return traj;
}

namespace {

long delay_buffer_length(double tau, double substep) {
    const double exact = tau / substep;
    const long rounded = static_cast<long>(std::llround(exact));
    if (rounded < 1 || std::abs(exact - rounded) > 1e-9)
        throw std::invalid_argument("mackey_glass: delay must be an integer multiple of the Euler substep");
    return rounded;
}

}  // namespace

Trajectory integrate_mackey_glass(const SystemSpec& spec) {
    spec.validate();
    if (spec.kind != SystemKind::MackeyGlass)
        throw std::invalid_argument("integrate_mackey_glass: wrong system kind");
    const double beta = spec.param("beta");
    const double gamma = spec.param("gamma");
    const double n = spec.param("n");
    const double tau = spec.param("tau");
    const double h = spec.param("substep");
    if (tau <= 0) throw std::invalid_argument("mackey_glass: tau must be positive");
    if (h <= 0) throw std::invalid_argument("mackey_glass: substep must be positive");
    const long d = delay_buffer_length(tau, h);

    const long n_lead = static_cast<long>(std::ceil(spec.transient_fraction * spec.total_time / h - 1e-9));
    const long n_main = static_cast<long>(std::ceil(spec.total_time / h - 1e-9));
    const double history = spec.initial_state[0];

    // ring buffer of the last d values; x(t - tau) is the oldest entry
    std::vector<double> ring(d, history);
    long head = 0;
    double x = history;

    Trajectory traj;
    traj.dt = h;
    traj.states.reserve(n_main + 1);
    for (long k = 0; k < n_lead + n_main; ++k) {
        if (k == n_lead) traj.states.push_back({x});
        const double x_del = ring[head];
        const double xn = std::pow(x_del, n);
        const double next = x + h * (beta * x_del / (1.0 + xn) - gamma * x);
        ring[head] = x;
        head = (head + 1) % d;
        x = next;
        if (!std::isfinite(x) || std::abs(x) > kBlowUpLimit)
            throw std::runtime_error("trajectory blow-up at t = " + std::to_string((k + 1 - n_lead) * h));
        if (k >= n_lead) traj.states.push_back({x});
    }
    if (traj.states.empty()) traj.states.push_back({x});
    return traj;
}

Trajectory generate_trajectory(const SystemSpec& spec) {
    if (is_flow(spec.kind)) return integrate_flow(spec);
    if (is_map(spec.kind)) return iterate_map(spec);
    return integrate_mackey_glass(spec);
}

std::vector<double> resample(const Trajectory& traj, int observable_index,
                             int n_samples, double total_time) {
    if (traj.states.size() < 2) throw std::invalid_argument("resample: trajectory too short");
    if (observable_index < 0 || observable_index >= traj.dim())
        throw std::invalid_argument("resample: observable index out of range");
    const double duration = (traj.states.size() - 1) * traj.dt;
    const double sample_dt = total_time / n_samples;
    const double needed = (n_samples - 1) * sample_dt;
    if (duration < needed - 1e-9 * total_time)
        throw std::invalid_argument("resample: trajectory shorter than total_time");

    std::vector<double> out(n_samples);
    const long last_node = static_cast<long>(traj.states.size()) - 1;
    for (int k = 0; k < n_samples; ++k) {
        const double pos = (k * sample_dt) / traj.dt;
        if (pos <= 0) {
            out[k] = traj.states[0][observable_index];
            continue;
        }
        if (pos >= static_cast<double>(last_node)) {
            out[k] = traj.states[last_node][observable_index];
            continue;
        }
        const long j = static_cast<long>(std::floor(pos));
        const double frac = pos - j;
        const double a = traj.states[j][observable_index];
        if (frac == 0.0) {
            out[k] = a;
        } else {
            const double b = traj.states[j + 1][observable_index];
            out[k] = a + frac * (b - a);
        }
    }
    return out;
}

Standardization standardize(std::vector<double>& values) {
    if (values.size() < 2) throw std::invalid_argument("standardize: need at least 2 values");
    double mean = 0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double var = 0;
    for (double v : values) var += (v - mean) * (v - mean);
    var /= static_cast<double>(values.size());
    if (var <= 0) throw std::invalid_argument("standardize: zero variance");
    const double stdev = std::sqrt(var);
    for (double& v : values) v = (v - mean) / stdev;
    return {mean, stdev};
}

Series make_series(const SystemSpec& spec) {
    spec.validate();
    const Trajectory traj = generate_trajectory(spec);
    Series series;
    series.values = resample(traj, spec.observable_index, spec.n_samples, spec.total_time);
    for (double v : series.values) {
        if (!std::isfinite(v)) throw std::runtime_error("series contains non-finite values");
    }
    const Standardization st = standardize(series.values);
    series.mean = st.mean;
    series.stdev = st.stdev;
    series.sample_dt = spec.sample_dt();
    series.spec = spec;
    return series;
}

// ---------------------------------------------------------------------------
// Dataset

Dataset build_dataset(const std::vector<Series>& series_list, double test_fraction) {
    if (series_list.empty()) throw std::invalid_argument("build_dataset: no series");
    if (test_fraction < 0 || test_fraction >= 1)
        throw std::invalid_argument("build_dataset: test_fraction must lie in [0, 1)");
    const std::size_t len = series_list.front().values.size();
    for (const auto& s : series_list) {
        if (s.values.size() != len)
            throw std::invalid_argument("build_dataset: series lengths differ");
    }

    Dataset ds;
    ds.test_fraction = test_fraction;
    ds.inputs.reserve(series_list.size() * len);
    for (const auto& s : series_list) {
        SystemRange range;
        range.name = std::string(kind_name(s.spec.kind));
        range.begin = ds.inputs.size();
        ds.inputs.insert(ds.inputs.end(), s.values.begin(), s.values.end());
        range.end = ds.inputs.size();
        ds.boundaries.push_back(range);
    }
    ds.targets.assign(ds.inputs.size(), std::numeric_limits<double>::quiet_NaN());
    for (const auto& r : ds.boundaries) {
        for (std::size_t n = r.begin; n + 1 < r.end; ++n) ds.targets[n] = ds.inputs[n + 1];
    }
    return ds;
}

namespace {

std::vector<std::size_t> collect_pairs(const Dataset& ds, int window, bool train, bool test) {
    std::vector<std::size_t> out;
    for (const auto& r : ds.boundaries) {
        const std::size_t n_pairs = r.end - r.begin - 1;
        const auto n_test = static_cast<std::size_t>(
            std::ceil(ds.test_fraction * static_cast<double>(n_pairs) - 1e-12));
        const std::size_t split = r.begin + (n_pairs - n_test);
        const std::size_t lo = r.begin + static_cast<std::size_t>(window);
        if (train) {
            for (std::size_t n = lo; n < split; ++n) out.push_back(n);
        }
        if (test) {
            for (std::size_t n = std::max(lo, split); n + 1 < r.end; ++n) out.push_back(n);
        }
    }
    return out;
}

}  // namespace

std::vector<std::size_t> Dataset::train_pairs(int window) const {
    return collect_pairs(*this, window, true, false);
}

std::vector<std::size_t> Dataset::test_pairs(int window) const {
    return collect_pairs(*this, window, false, true);
}

std::vector<std::size_t> Dataset::all_pairs() const {
    return collect_pairs(*this, 0, true, true);
}

int Dataset::system_of(std::size_t index) const {
    for (std::size_t s = 0; s < boundaries.size(); ++s) {
        if (index >= boundaries[s].begin && index < boundaries[s].end) return static_cast<int>(s);
    }
    throw std::out_of_range("system_of: index outside every system range");
}

// ---------------------------------------------------------------------------
// Lyapunov exponents

namespace {

LyapunovEstimate lyapunov_logistic(const SystemSpec& spec) {
    const double r = spec.param("r");
    double x = spec.initial_state[0];
    for (int k = 0; k < 100; ++k) x = r * x * (1.0 - x);
    const int m = std::max(spec.n_samples, 7500);
    double sum = 0;
    double half = 0;
    for (int k = 0; k < m; ++k) {
        sum += std::log(std::abs(r * (1.0 - 2.0 * x)));
        if (k == m / 2) half = sum / (m / 2);
        x = r * x * (1.0 - x);
    }
    const double lambda = sum / m;
    return {lambda, std::isfinite(lambda) && std::abs(lambda - half) <= std::max(0.01, 0.1 * std::abs(lambda))};
}

LyapunovEstimate lyapunov_henon(const SystemSpec& spec) {
    const double a = spec.param("a");
    const double b = spec.param("b");
    double x = spec.initial_state[0];
    double y = spec.initial_state[1];
    for (int k = 0; k < 1000; ++k) {
        const double xn = 1.0 - a * x * x + y;
        y = b * x;
        x = xn;
    }
    const long m = 100000;
    double vx = 1.0, vy = 1.0;
    double sum = 0;
    double half = 0;
    for (long k = 0; k < m; ++k) {
        const double jx = -2.0 * a * x * vx + vy;
        const double jy = b * vx;
        const double norm = std::hypot(jx, jy);
        sum += std::log(norm);
        vx = jx / norm;
        vy = jy / norm;
        if (k == m / 2) half = sum / (m / 2);
        const double xn = 1.0 - a * x * x + y;
        y = b * x;
        x = xn;
    }
    const double lambda = sum / m;
    return {lambda, std::isfinite(lambda) && std::abs(lambda - half) <= std::max(0.01, 0.1 * std::abs(lambda))};
}

LyapunovEstimate lyapunov_flow(const SystemSpec& spec) {
    FlowDef sys = make_flow(spec);
    const int d = sys.dim;
    const double h = 0.005;
    const double settle = 100.0;
    const double horizon = std::max(1000.0, spec.total_time);

    double x[4] = {0, 0, 0, 0};
    std::copy(spec.initial_state.begin(), spec.initial_state.end(), x);
    const long n_settle = static_cast<long>(settle / h);
    for (long k = 0; k < n_settle; ++k) {
        rk4_step(sys, k * h, h, x);
        check_finite(x, d, k * h);
    }

    double v[4];
    for (int i = 0; i < d; ++i) v[i] = 1.0 / std::sqrt(static_cast<double>(d));
    const long n_steps = static_cast<long>(horizon / h);
    const double t_base = n_settle * h;
    double sum = 0;
    double half = 0;
    for (long k = 0; k < n_steps; ++k) {
        rk4_tangent_step(sys, t_base + k * h, h, x, v);
        check_finite(x, d, t_base + k * h);
        double norm2 = 0;
        for (int i = 0; i < d; ++i) norm2 += v[i] * v[i];
        const double norm = std::sqrt(norm2);
        sum += std::log(norm);
        for (int i = 0; i < d; ++i) v[i] /= norm;
        if (k == n_steps / 2) half = sum / ((n_steps / 2) * h);
    }
    const double lambda = sum / (n_steps * h);
    return {lambda, std::isfinite(lambda) && std::abs(lambda - half) <= std::max(0.02, 0.1 * std::abs(lambda))};
}

LyapunovEstimate lyapunov_mackey_glass(const SystemSpec& spec) {
    const double beta = spec.param("beta");
    const double gamma = spec.param("gamma");
    const double n = spec.param("n");
    const double tau = spec.param("tau");
    const double h = std::min(spec.param("substep"), 0.05);
    const long d = delay_buffer_length(tau, h);
    const double history = spec.initial_state[0];

    std::vector<double> ring(d, history);
    long head = 0;
    double x = history;
    const long n_settle = static_cast<long>(500.0 / h);
    for (long k = 0; k < n_settle; ++k) {
        const double x_del = ring[head];
        const double xn = std::pow(x_del, n);
        const double next = x + h * (beta * x_del / (1.0 + xn) - gamma * x);
        ring[head] = x;
        head = (head + 1) % d;
        x = next;
    }

    // tangent dynamics: v' = beta g'(x(t - tau)) v(t - tau) - gamma v
    std::vector<double> vring(d, 0.0);
    double v = 1.0;
    const double horizon = 30000.0;
    const long n_steps = static_cast<long>(horizon / h);
    const long renorm_every = 100;
    double sum = 0;
    double half = 0;
    for (long k = 0; k < n_steps; ++k) {
        const double x_del = ring[head];
        const double v_del = vring[head];
        const double xn = std::pow(x_del, n);
        const double gprime = (1.0 + (1.0 - n) * xn) / ((1.0 + xn) * (1.0 + xn));
        const double x_next = x + h * (beta * x_del / (1.0 + xn) - gamma * x);
        const double v_next = v + h * (beta * gprime * v_del - gamma * v);
        ring[head] = x;
        vring[head] = v;
        head = (head + 1) % d;
        x = x_next;
        v = v_next;
        if ((k + 1) % renorm_every == 0) {
            double scale = std::abs(v);
            for (double w : vring) scale = std::max(scale, std::abs(w));
            if (scale > 0) {
                sum += std::log(scale);
                v /= scale;
                for (double& w : vring) w /= scale;
            }
        }
        if (k == n_steps / 2) half = sum / ((n_steps / 2) * h);
    }
    const double lambda = sum / (n_steps * h);
    return {lambda, std::isfinite(lambda) && std::abs(lambda - half) <= std::max(0.004, 0.5 * std::abs(lambda))};
}

}  // namespace

LyapunovEstimate estimate_largest_lyapunov(const SystemSpec& spec) {
    spec.validate();
    switch (spec.kind) {
        case SystemKind::Logistic: return lyapunov_logistic(spec);
        case SystemKind::Henon: return lyapunov_henon(spec);
        case SystemKind::MackeyGlass: return lyapunov_mackey_glass(spec);
        default: return lyapunov_flow(spec);
    }
}

}  // namespace asrc::dynsys
