#include "asrc/dynsys.hpp"

#include <doctest.h>

#include <cmath>
#include <set>
#include <stdexcept>

using namespace asrc::dynsys;

TEST_CASE("kind names round-trip and the suite is in canonical order") {
    const auto suite = default_suite();
    REQUIRE(suite.size() == 8);
    const char* expected[] = {"lorenz",          "rossler",  "van_der_pol", "duffing",
                              "double_pendulum", "logistic", "henon",       "mackey_glass"};
    for (std::size_t i = 0; i < suite.size(); ++i) {
        CHECK(kind_name(suite[i].kind) == expected[i]);
        CHECK(kind_from_name(expected[i]) == suite[i].kind);
        CHECK(suite[i].n_samples == 7500);
    }
}

TEST_CASE("sample steps match the benchmark table") {
    CHECK(default_spec(SystemKind::Lorenz).sample_dt() == 0.05);
    CHECK(default_spec(SystemKind::VanDerPol).sample_dt() == 0.2);
    CHECK(default_spec(SystemKind::Duffing).sample_dt() == 0.11);
    CHECK(default_spec(SystemKind::Logistic).sample_dt() == 1.0);
    CHECK(default_spec(SystemKind::Henon).sample_dt() == 1.0);
    CHECK(default_spec(SystemKind::MackeyGlass).sample_dt() == 1.0);
    // 2000/7500 rounds to the tabulated 0.27
    CHECK(std::abs(default_spec(SystemKind::Rossler).sample_dt() - 0.27) <= 0.005);
    CHECK(std::abs(default_spec(SystemKind::DoublePendulum).sample_dt() - 0.27) <= 0.005);
}

TEST_CASE("lorenz origin is a fixed point") {
    SystemSpec spec = default_spec(SystemKind::Lorenz, 100);
    spec.initial_state = {0.0, 0.0, 0.0};
    spec.transient_fraction = 0;
    const Trajectory traj = integrate_flow(spec);
    for (const auto& state : traj.states) {
        for (double x : state) CHECK(x == 0.0);
    }
}

TEST_CASE("van der pol settles onto a bounded limit cycle") {
    SystemSpec spec = default_spec(SystemKind::VanDerPol, 750);
    const Trajectory traj = integrate_flow(spec);
    double tail_max = 0;
    for (std::size_t k = traj.states.size() / 2; k < traj.states.size(); ++k)
        tail_max = std::max(tail_max, std::abs(traj.states[k][0]));
    CHECK(tail_max < 3.0);

    // fine-step reference agrees on the amplitude
    SystemSpec fine = spec;
    fine.n_samples = 150;
    fine.total_time = 30.0;
    fine.integrator_dt = 1e-4;
    fine.transient_fraction = 0;
    const Trajectory ref = integrate_flow(fine);
    double ref_max = 0;
    for (std::size_t k = ref.states.size() / 2; k < ref.states.size(); ++k)
        ref_max = std::max(ref_max, std::abs(ref.states[k][0]));
    CHECK(ref_max < 3.0);
}

TEST_CASE("rk4 shows fourth-order convergence on a smooth lorenz segment") {
    auto final_state = [](double dt) {
        SystemSpec spec = default_spec(SystemKind::Lorenz, 2);
        spec.total_time = 1.0;
        spec.n_samples = 2;
        spec.integrator_dt = dt;
        spec.transient_fraction = 0;
        return integrate_flow(spec).states.back();
    };
    const auto ref = final_state(0.000125);
    const auto c1 = final_state(0.004);
    const auto c2 = final_state(0.002);
    double e1 = 0, e2 = 0;
    for (int i = 0; i < 3; ++i) {
        e1 = std::max(e1, std::abs(c1[i] - ref[i]));
        e2 = std::max(e2, std::abs(c2[i] - ref[i]));
    }
    const double ratio = e1 / e2;
    CHECK(ratio > 12.0);
    CHECK(ratio < 20.0);
}

TEST_CASE("flow blow-up raises an error with the failing time") {
    SystemSpec spec = default_spec(SystemKind::Lorenz, 100);
    spec.params["rho"] = 1e9;  // forces divergence
    spec.initial_state = {1e5, 1e5, 1e5};
    spec.transient_fraction = 0;
    CHECK_THROWS_WITH_AS(integrate_flow(spec), doctest::Contains("blow-up"), std::runtime_error);
}

TEST_CASE("logistic map iterates exactly") {
    SystemSpec spec = default_spec(SystemKind::Logistic, 10);
    spec.initial_state = {0.5};
    const Trajectory traj = iterate_map(spec);
    CHECK(traj.states[0][0] == 0.5);
    CHECK(traj.states[1][0] == 1.0);
    CHECK(traj.states[2][0] == 0.0);
    for (const auto& s : traj.states) {
        CHECK(s[0] >= 0.0);
        CHECK(s[0] <= 1.0);
    }
}

TEST_CASE("henon map first iterate") {
    SystemSpec spec = default_spec(SystemKind::Henon, 10);
    const Trajectory traj = iterate_map(spec);
    CHECK(traj.states[1][0] == 1.0);
    CHECK(traj.states[1][1] == 0.0);
}

TEST_CASE("map divergence is detected") {
    SystemSpec spec = default_spec(SystemKind::Henon, 2000);
    spec.params["a"] = 3.0;  // escapes the trapping region
    spec.initial_state = {2.0, 2.0};
    CHECK_THROWS_WITH_AS(iterate_map(spec), doctest::Contains("divergence"), std::runtime_error);
}

TEST_CASE("logistic initial state must be interior") {
    SystemSpec spec = default_spec(SystemKind::Logistic, 10);
    spec.initial_state = {0.0};
    CHECK_THROWS_AS(iterate_map(spec), std::invalid_argument);
}

TEST_CASE("mackey-glass decays exponentially without production") {
    SystemSpec spec = default_spec(SystemKind::MackeyGlass, 100);
    spec.params["beta"] = 0.0;
    spec.params["substep"] = 0.01;
    spec.initial_state = {1.0};
    spec.transient_fraction = 0;
    const Trajectory traj = integrate_mackey_glass(spec);
    const double at10 = traj.states[1000][0];
    CHECK(std::abs(at10 - std::exp(-1.0)) < 5e-3);
}

TEST_CASE("mackey-glass stationary point stays constant") {
    // beta c / (1 + c^n) = gamma c at c = 1 for beta = 2 gamma
    SystemSpec spec = default_spec(SystemKind::MackeyGlass, 200);
    spec.initial_state = {1.0};
    spec.transient_fraction = 0;
    const Trajectory traj = integrate_mackey_glass(spec);
    for (const auto& s : traj.states) CHECK(s[0] == 1.0);
}

TEST_CASE("mackey-glass rejects a non-integral delay buffer") {
    SystemSpec spec = default_spec(SystemKind::MackeyGlass, 100);
    spec.params["substep"] = 0.3;
    CHECK_THROWS_AS(integrate_mackey_glass(spec), std::invalid_argument);
}

TEST_CASE("resampling an already-uniform trajectory is the identity") {
    Trajectory traj;
    traj.dt = 0.5;
    for (int k = 0; k < 10; ++k) traj.states.push_back({std::sin(0.7 * k)});
    const auto out = resample(traj, 0, 10, 5.0);  // sample_dt = 0.5
    REQUIRE(out.size() == 10);
    for (int k = 0; k < 10; ++k) CHECK(out[k] == traj.states[k][0]);
}

TEST_CASE("linear interpolation is exact on linear functions") {
    Trajectory traj;
    traj.dt = 0.37;
    for (int k = 0; k < 40; ++k) traj.states.push_back({0.37 * k});
    const auto out = resample(traj, 0, 25, 13.0);
    for (int k = 0; k < 25; ++k)
        CHECK(out[k] == doctest::Approx(k * 13.0 / 25.0).epsilon(1e-12));
}

TEST_CASE("standardize zero variance and two-point case") {
    std::vector<double> constant = {1.0, 1.0, 1.0};
    CHECK_THROWS_AS(standardize(constant), std::invalid_argument);

    std::vector<double> two = {0.0, 2.0};
    const auto st = standardize(two);
    CHECK(two[0] == doctest::Approx(-1.0));
    CHECK(two[1] == doctest::Approx(1.0));
    CHECK(st.mean == doctest::Approx(1.0));
    CHECK(st.stdev == doctest::Approx(1.0));
}

TEST_CASE("standardize is idempotent") {
    std::vector<double> values;
    for (int k = 0; k < 100; ++k) values.push_back(std::cos(0.3 * k) + 0.2 * k);
    standardize(values);
    std::vector<double> again = values;
    standardize(again);
    for (std::size_t k = 0; k < values.size(); ++k)
        CHECK(std::abs(again[k] - values[k]) < 1e-12);
}

TEST_CASE("series are standardized and deterministic") {
    SystemSpec spec = default_spec(SystemKind::Lorenz, 500);
    const Series a = make_series(spec);
    const Series b = make_series(spec);
    CHECK(a.values == b.values);

    double mean = 0;
    for (double v : a.values) mean += v;
    mean /= a.values.size();
    double var = 0;
    for (double v : a.values) var += (v - mean) * (v - mean);
    var /= a.values.size();
    CHECK(std::abs(mean) < 1e-9);
    CHECK(std::abs(std::sqrt(var) - 1.0) < 1e-9);
    CHECK(a.sample_dt == spec.sample_dt());
}

TEST_CASE("dataset pairs never cross boundaries") {
    SystemSpec l = default_spec(SystemKind::Logistic, 50);
    SystemSpec h = default_spec(SystemKind::Henon, 50);
    const auto ds = build_dataset({make_series(l), make_series(h)}, 0.2);
    REQUIRE(ds.inputs.size() == 100);
    REQUIRE(ds.boundaries.size() == 2);

    for (const auto& r : ds.boundaries) {
        for (std::size_t n = r.begin; n + 1 < r.end; ++n)
            CHECK(ds.targets[n] == ds.inputs[n + 1]);
        CHECK(std::isnan(ds.targets[r.end - 1]));
    }

    const auto train = ds.train_pairs();
    const auto test = ds.test_pairs();
    CHECK(train.size() + test.size() == 2 * 49);
    std::set<std::size_t> train_set(train.begin(), train.end());
    for (auto idx : test) CHECK(train_set.count(idx) == 0);
    // test tail size is ceil(0.2 * 49) = 10 per system
    CHECK(test.size() == 20);
    // boundary pair (index 49 -> 50) never appears
    for (auto idx : train) CHECK(idx != 49);
    for (auto idx : test) CHECK(idx != 49);
}

TEST_CASE("usable pair count for the full suite is 8 x 7499") {
    // counting argument only; use short series with the same structure
    std::vector<Series> series;
    for (const auto& spec : default_suite(100)) {
        SystemSpec s = spec;
        series.push_back(make_series(s));
    }
    const auto ds = build_dataset(series, 0.0);
    CHECK(ds.all_pairs().size() == 8 * 99);
}

TEST_CASE("delay windows respect boundaries") {
    SystemSpec l = default_spec(SystemKind::Logistic, 30);
    SystemSpec h = default_spec(SystemKind::Henon, 30);
    const auto ds = build_dataset({make_series(l), make_series(h)}, 0.2);
    const auto k0 = ds.train_pairs(0);
    const auto k3 = ds.train_pairs(3);
    CHECK(k0.size() == k3.size() + 2 * 3);
    for (auto idx : k3) {
        const int sys = ds.system_of(idx);
        CHECK(idx - 3 >= ds.boundaries[sys].begin);
    }
}

TEST_CASE("lyapunov estimates match the tabulated exponents") {
    const auto logistic = estimate_largest_lyapunov(default_spec(SystemKind::Logistic));
    CHECK(logistic.reliable);
    CHECK(std::abs(logistic.lambda - std::log(2.0)) <= 0.01);

    const auto henon = estimate_largest_lyapunov(default_spec(SystemKind::Henon));
    CHECK(henon.reliable);
    CHECK(std::abs(henon.lambda - 0.419) <= 0.03);

    const auto lorenz = estimate_largest_lyapunov(default_spec(SystemKind::Lorenz));
    CHECK(lorenz.reliable);
    CHECK(std::abs(lorenz.lambda - 0.905) <= 0.05);
}

TEST_CASE("mackey-glass lyapunov estimate is small and positive") {
    const auto mg = estimate_largest_lyapunov(default_spec(SystemKind::MackeyGlass));
    CHECK(std::abs(mg.lambda - 0.006) <= 0.004);
}
