#include <cmath>
#include <complex>
#include <memory>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "onode/blocks.hpp"
#include "onode/errors.hpp"
#include "onode/odeflow.hpp"
#include "onode/rng.hpp"
#include "onode/train.hpp"

using namespace onode;

namespace {

constexpr double kPi = std::numbers::pi;

DynamicsSpec scale_dynamics(cdouble gain, int ports) {
    DynamicsSpec dyn;
    dyn.chain.push_back(std::make_unique<ScaleBlock>(gain, ports));
    return dyn;
}

// Small trainable net: mesh followed by the electro-optic nonlinearity.
DynamicsSpec mesh_act_dynamics(int ports, SplitMix64& rng, double alpha = 0.2,
                               double bias = 0.9) {
    DynamicsSpec dyn;
    auto mesh = std::make_unique<MZIMeshBlock>(MZIMeshParams::rectangular(ports));
    mesh->init_params(rng);
    dyn.chain.push_back(std::move(mesh));
    ActivationParams act;
    act.alpha = alpha;
    act.gain = 1.3;
    act.phase_bias = bias;
    dyn.chain.push_back(std::make_unique<EOActivationBlock>(act, ports));
    return dyn;
}

cvec random_cvec(SplitMix64& rng, int n, double scale = 1.0) {
    cvec v(static_cast<std::size_t>(n));
    for (auto& z : v) z = cdouble(rng.uniform(-scale, scale), rng.uniform(-scale, scale));
    return v;
}

double loss_through_solve(const DynamicsSpec& dyn, const cvec& h0, const ODESolveConfig& config,
                          const cvec& w) {
    const SolveRecord rec = solve_ivp(dyn, OpticalState(h0), config);
    double loss = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i)
        loss += std::real(std::conj(w[i]) * rec.final_state[static_cast<int>(i)]);
    return loss;
}

double rel_err(double got, double want) {
    return std::abs(got - want) / std::max(std::abs(want), 1e-9);
}

}  // namespace

// ---------------------------------------------------------------------------
// Right-hand side evaluation

TEST_CASE("empty chain evaluates to the identity map") {
    DynamicsSpec dyn;
    const OpticalState in({cdouble(0.4, -0.2), cdouble(1, 1)});
    const OpticalState out = eval_rhs(dyn, in, 0.7);
    CHECK(out.amplitudes() == in.amplitudes());
}

TEST_CASE("zero-phase metaline over zero distance is the identity") {
    DiffractiveStackParams params = DiffractiveStackParams::zeros(6, 1);
    params.propagation.layer_distance = 0.0;
    DynamicsSpec dyn;
    dyn.chain.push_back(std::make_unique<DiffractiveStackBlock>(params));
    SplitMix64 rng(41);
    const cvec in = random_cvec(rng, 6);
    const OpticalState out = eval_rhs(dyn, OpticalState(in), 0.0);
    for (int i = 0; i < 6; ++i) CHECK(std::abs(out[i] - in[static_cast<std::size_t>(i)]) <= 1e-12);
}

TEST_CASE("bar-state mesh chain composes per the 2x2 matrices") {
    MZIMeshParams params = MZIMeshParams::rectangular(2);
    params.units[0].theta = kPi;  // bar: diag(-1, 1)
    DynamicsSpec dyn;
    dyn.chain.push_back(std::make_unique<MZIMeshBlock>(params));
    const OpticalState out = eval_rhs(dyn, OpticalState({cdouble(0.8, 0.1), cdouble(-0.3, 0.55)}), 0.0);
    CHECK(std::abs(out[0] - cdouble(-0.8, -0.1)) <= 1e-12);
    CHECK(std::abs(out[1] - cdouble(-0.3, 0.55)) <= 1e-12);
    CHECK(total_energy(out) == doctest::Approx(0.8 * 0.8 + 0.1 * 0.1 + 0.3 * 0.3 + 0.55 * 0.55)
                                   .epsilon(1e-12));
}

TEST_CASE("time-injected policy rotates the input by the global phase") {
    DynamicsSpec dyn;  // empty chain isolates the injection
    dyn.time_policy = TimePolicy::time_injected;
    dyn.omega0 = 2.5;
    const cdouble z(0.6, -0.4);
    const double t = 0.9;
    const OpticalState out = eval_rhs(dyn, OpticalState({z}), t);
    CHECK(std::abs(out[0] - std::exp(cdouble(0, 2.5 * t)) * z) <= 1e-12);

    DynamicsSpec autonomous;
    const OpticalState same = eval_rhs(autonomous, OpticalState({z}), t);
    CHECK(same[0] == z);
}

// ---------------------------------------------------------------------------
// Fixed-step solving

TEST_CASE("zero dynamics leaves the state bitwise unchanged") {
    const OpticalState h0({cdouble(0.12, -0.89), cdouble(3, 4)});
    for (SolverMethod m : {SolverMethod::euler, SolverMethod::midpoint, SolverMethod::rk4}) {
        ODESolveConfig config;
        config.method = m;
        config.steps = 7;
        const SolveRecord rec = solve_ivp(scale_dynamics(0.0, 2), h0, config);
        CHECK(rec.final_state.amplitudes() == h0.amplitudes());
        CHECK(rec.evaluations == 7 * stage_count(m));
    }
}

TEST_CASE("single euler step of dh/dt = -h lands on zero") {
    ODESolveConfig config;
    config.method = SolverMethod::euler;
    config.steps = 1;
    const SolveRecord rec =
        solve_ivp(scale_dynamics(cdouble(-1, 0), 1), OpticalState({cdouble(1, 0)}), config);
    CHECK(rec.final_state[0] == cdouble(0, 0));
}

TEST_CASE("rk4 reproduces the damped rotation closed form") {
    ODESolveConfig config;
    config.steps = 100;
    const SolveRecord rec = solve_ivp(scale_dynamics(cdouble(-0.1, 1.0), 1),
                                      OpticalState({cdouble(0.6, 0.3)}), config);
    // e^{-0.1+i} * (0.6+0.3i), evaluated independently
    const cdouble expected(0.06491311606663577, 0.6035023829676327);
    CHECK(std::abs(rec.final_state[0] - expected) <= 1e-8);
}

TEST_CASE("measured convergence orders match euler, midpoint and rk4") {
    const cdouble gain(-0.1, 1.0);
    const cdouble z0(0.6, 0.3);
    const cdouble exact = std::exp(gain) * z0;
    const auto error_at = [&](SolverMethod m, int steps) {
        ODESolveConfig config;
        config.method = m;
        config.steps = steps;
        const SolveRecord rec = solve_ivp(scale_dynamics(gain, 1), OpticalState({z0}), config);
        return std::abs(rec.final_state[0] - exact);
    };
    const auto measured_order = [&](SolverMethod m, int steps) {
        return std::log2(error_at(m, steps) / error_at(m, 2 * steps));
    };
    CHECK(measured_order(SolverMethod::euler, 64) == doctest::Approx(1.0).epsilon(0.3));
    CHECK(measured_order(SolverMethod::midpoint, 32) == doctest::Approx(2.0).epsilon(0.15));
    CHECK(measured_order(SolverMethod::rk4, 8) == doctest::Approx(4.0).epsilon(0.075));
}

TEST_CASE("solving is deterministic") {
    SplitMix64 rng(43);
    const DynamicsSpec dyn = mesh_act_dynamics(4, rng);
    const cvec h0 = random_cvec(rng, 4);
    ODESolveConfig config;
    const SolveRecord a = solve_ivp(dyn, OpticalState(h0), config);
    const SolveRecord b = solve_ivp(dyn, OpticalState(h0), config);
    CHECK(a.final_state.amplitudes() == b.final_state.amplitudes());
}

TEST_CASE("solve config validation") {
    ODESolveConfig config;
    config.t1 = config.t0;
    CHECK_THROWS_AS(config.validate(), ConfigError);
    config.t1 = 1.0;
    config.steps = 0;
    CHECK_THROWS_AS(config.validate(), ConfigError);
    config.steps = 4;
    CHECK_NOTHROW(config.validate());

    CHECK(ODESolveConfig{}.resolved_gradient_mode() == GradientMode::discretize);  // steps 4
    ODESolveConfig deep;
    deep.steps = 9;
    CHECK(deep.resolved_gradient_mode() == GradientMode::adjoint);
    deep.gradient_mode = GradientMode::discretize;
    CHECK(deep.resolved_gradient_mode() == GradientMode::discretize);
}

// ---------------------------------------------------------------------------
// Trajectory sampling

TEST_CASE("sampling at the start time returns the initial state") {
    SplitMix64 rng(47);
    const DynamicsSpec dyn = mesh_act_dynamics(3, rng);
    const cvec h0 = random_cvec(rng, 3);
    const auto samples = sample_trajectory(dyn, OpticalState(h0), {0.0}, ODESolveConfig{});
    REQUIRE(samples.size() == 1);
    CHECK(samples[0].amplitudes() == h0);
}

TEST_CASE("sampling zero dynamics repeats the initial state") {
    const cvec h0 = {cdouble(0.5, -1.5), cdouble(0, 2)};
    const auto samples =
        sample_trajectory(scale_dynamics(0.0, 2), OpticalState(h0), {0.0, 0.4, 1.1, 2.0},
                          ODESolveConfig{});
    REQUIRE(samples.size() == 4);
    for (const OpticalState& s : samples) CHECK(s.amplitudes() == h0);
}

TEST_CASE("sampling the damped rotation one revolution out") {
    const cdouble z0(0.6, 0.3);
    ODESolveConfig config;
    config.steps = 128;  // sub-steps per inter-sample interval
    const auto samples = sample_trajectory(scale_dynamics(cdouble(-0.1, 1.0), 1),
                                           OpticalState({z0}), {0.0, 2 * kPi}, config);
    REQUIRE(samples.size() == 2);
    // e^{-0.2 pi} = 0.5334880910911033; a full turn restores the phase.
    CHECK(std::abs(samples[1][0] - 0.5334880910911033 * z0) <= 1e-6);
}

TEST_CASE("sampling rejects non-ascending times") {
    CHECK_THROWS_AS(sample_trajectory(scale_dynamics(0.0, 1), OpticalState({cdouble(1, 0)}),
                                      {0.0, 0.5, 0.4}, ODESolveConfig{}),
                    ConfigError);
}

// ---------------------------------------------------------------------------
// Residual (discrete) mode

TEST_CASE("zero-output residual layers leave the input unchanged") {
    std::vector<DynamicsSpec> layers;
    layers.push_back(scale_dynamics(0.0, 2));
    layers.push_back(scale_dynamics(0.0, 2));
    const OpticalState h0({cdouble(1, 2), cdouble(-0.5, 0)});
    CHECK(residual_forward(layers, h0).amplitudes() == h0.amplitudes());
}

TEST_CASE("one residual layer equals a single euler step bitwise") {
    SplitMix64 rng(53);
    std::vector<DynamicsSpec> layers;
    layers.push_back(mesh_act_dynamics(4, rng));
    const cvec h0 = random_cvec(rng, 4);

    ODESolveConfig config;
    config.method = SolverMethod::euler;
    config.steps = 1;
    const SolveRecord rec = solve_ivp(layers[0], OpticalState(h0), config);
    const OpticalState res = residual_forward(layers, OpticalState(h0));
    CHECK(rec.final_state.amplitudes() == res.amplitudes());
}

TEST_CASE("two residual layers compose as repeated h + f(h)") {
    SplitMix64 rng(59);
    std::vector<DynamicsSpec> layers;
    layers.push_back(mesh_act_dynamics(3, rng));
    layers.push_back(mesh_act_dynamics(3, rng, 0.4, 1.7));
    const cvec h0 = random_cvec(rng, 3);

    cvec f0, f1;
    layers[0].eval(0.0, h0, f0);
    cvec h1(3);
    for (int i = 0; i < 3; ++i)
        h1[static_cast<std::size_t>(i)] = h0[static_cast<std::size_t>(i)] + f0[static_cast<std::size_t>(i)];
    layers[1].eval(1.0, h1, f1);

    const OpticalState out = residual_forward(layers, OpticalState(h0));
    for (int i = 0; i < 3; ++i) {
        const cdouble manual =
            h1[static_cast<std::size_t>(i)] + f1[static_cast<std::size_t>(i)];
        CHECK(out[i] == manual);
    }
}

// ---------------------------------------------------------------------------
// Backprop through the solver

TEST_CASE("zero loss cotangent yields zero gradients in both modes") {
    SplitMix64 rng(61);
    const DynamicsSpec dyn = mesh_act_dynamics(4, rng);
    const cvec h0 = random_cvec(rng, 4);
    const cvec zero(4, cdouble(0, 0));
    ODESolveConfig config;

    for (GradientMode mode : {GradientMode::discretize, GradientMode::adjoint}) {
        config.gradient_mode = mode;
        const GradientResult g = mode == GradientMode::discretize
                                     ? discretize_gradients(dyn, OpticalState(h0), config, zero)
                                     : adjoint_gradients(dyn, OpticalState(h0), config, zero);
        for (const cdouble& c : g.h0_cotangent) CHECK(std::abs(c) == 0.0);
        for (double v : g.param_gradient) CHECK(v == 0.0);
    }
}

TEST_CASE("zero dynamics passes the cotangent straight through") {
    SplitMix64 rng(67);
    // Trainable mesh whose output is annihilated: f = 0 * mesh(h).
    DynamicsSpec dyn;
    auto mesh = std::make_unique<MZIMeshBlock>(MZIMeshParams::rectangular(3));
    mesh->init_params(rng);
    dyn.chain.push_back(std::move(mesh));
    dyn.chain.push_back(std::make_unique<ScaleBlock>(cdouble(0, 0), 3));

    const cvec cot = random_cvec(rng, 3);
    const GradientResult g =
        discretize_gradients(dyn, OpticalState(random_cvec(rng, 3)), ODESolveConfig{}, cot);
    CHECK(g.h0_cotangent == cot);
    for (double v : g.param_gradient) CHECK(v == 0.0);
}

TEST_CASE("discrete-solve gradients match finite differences") {
    SplitMix64 rng(71);
    DynamicsSpec dyn = mesh_act_dynamics(8, rng);
    const cvec h0 = random_cvec(rng, 8, 0.5);
    const cvec w = random_cvec(rng, 8);
    ODESolveConfig config;  // rk4, 4 steps

    std::vector<double> params;
    dyn.get_params(params);
    const GradientResult g = discretize_gradients(dyn, OpticalState(h0), config, w);

    const auto loss = [&](const std::vector<double>& p) {
        DynamicsSpec probe = dyn;
        probe.set_params(p);
        return loss_through_solve(probe, h0, config, w);
    };
    const std::vector<double> fd = fd_gradient_oracle(loss, params);
    REQUIRE(fd.size() == g.param_gradient.size());
    double worst = 0.0;
    for (std::size_t i = 0; i < fd.size(); ++i)
        worst = std::max(worst, std::abs(g.param_gradient[i] - fd[i]) /
                                    std::max(std::abs(fd[i]), 1e-6));
    CHECK(worst <= 1e-5);
}

TEST_CASE("adjoint of linear decay recovers the analytic sensitivity") {
    ODESolveConfig config;
    config.steps = 64;
    config.gradient_mode = GradientMode::adjoint;
    // L = Re h(1) for dh/dt = -0.5 h: dL/dRe(h0) = e^{-0.5}.
    const GradientResult g = adjoint_gradients(scale_dynamics(cdouble(-0.5, 0), 1),
                                               OpticalState({cdouble(1, 0)}), config,
                                               {cdouble(1, 0)});
    CHECK(g.h0_cotangent[0].real() == doctest::Approx(0.6065306597126334).epsilon(1e-6));
    CHECK(std::abs(g.h0_cotangent[0].imag()) <= 1e-9);
}

TEST_CASE("adjoint, discrete replay and finite differences agree three ways") {
    SplitMix64 rng(73);
    DynamicsSpec dyn = mesh_act_dynamics(8, rng);
    const cvec h0 = random_cvec(rng, 8, 0.5);
    const cvec w = random_cvec(rng, 8);
    ODESolveConfig config;
    config.steps = 32;

    std::vector<double> params;
    dyn.get_params(params);
    const GradientResult adj = adjoint_gradients(dyn, OpticalState(h0), config, w);
    const GradientResult dis = discretize_gradients(dyn, OpticalState(h0), config, w);
    REQUIRE(adj.param_gradient.size() == dis.param_gradient.size());

    const auto loss = [&](const std::vector<double>& p) {
        DynamicsSpec probe = dyn;
        probe.set_params(p);
        return loss_through_solve(probe, h0, config, w);
    };
    const std::vector<double> fd = fd_gradient_oracle(loss, params);

    for (std::size_t i = 0; i < fd.size(); ++i) {
        CHECK(rel_err(adj.param_gradient[i], dis.param_gradient[i]) <= 1e-3);
        CHECK(rel_err(dis.param_gradient[i], fd[i]) <= 1e-4);
        CHECK(rel_err(adj.param_gradient[i], fd[i]) <= 1e-4);
    }
    for (std::size_t i = 0; i < h0.size(); ++i)
        CHECK(std::abs(adj.h0_cotangent[i] - dis.h0_cotangent[i]) /
                  std::max(std::abs(dis.h0_cotangent[i]), 1e-9) <=
              1e-3);
}

TEST_CASE("adjoint workspace does not grow with the step count") {
    SplitMix64 rng(79);
    const DynamicsSpec dyn = mesh_act_dynamics(4, rng);
    const cvec h0 = random_cvec(rng, 4);
    const cvec w = random_cvec(rng, 4);

    const auto run = [&](GradientMode mode, int steps) {
        ODESolveConfig config;
        config.steps = steps;
        config.gradient_mode = mode;
        return mode == GradientMode::adjoint
                   ? adjoint_gradients(dyn, OpticalState(h0), config, w)
                   : discretize_gradients(dyn, OpticalState(h0), config, w);
    };
    const GradientResult small = run(GradientMode::adjoint, 16);
    const GradientResult large = run(GradientMode::adjoint, 256);
    CHECK(small.workspace_doubles == large.workspace_doubles);

    // The discrete replay, by contrast, stores every stage.
    CHECK(run(GradientMode::discretize, 256).workspace_doubles >
          run(GradientMode::discretize, 16).workspace_doubles);
}

TEST_CASE("gradients from a record require saved states") {
    const DynamicsSpec dyn = scale_dynamics(cdouble(-0.5, 0.2), 2);
    const OpticalState h0({cdouble(1, 0), cdouble(0, 1)});
    const SolveRecord bare = solve_ivp(dyn, h0, ODESolveConfig{}, false);
    CHECK_THROWS_AS(discretize_gradients(dyn, bare, ODESolveConfig{}, cvec(2, cdouble(1, 0))),
                    StateError);
    const SolveRecord saved = solve_ivp(dyn, h0, ODESolveConfig{}, true);
    CHECK_NOTHROW(discretize_gradients(dyn, saved, ODESolveConfig{}, cvec(2, cdouble(1, 0))));
}

// ---------------------------------------------------------------------------
// Per-step renormalization (ablation flag)

TEST_CASE("renormalized solve ends at unit energy") {
    SplitMix64 rng(83);
    const DynamicsSpec dyn = mesh_act_dynamics(4, rng);
    ODESolveConfig config;
    config.renormalize = true;
    const SolveRecord rec = solve_ivp(dyn, OpticalState(random_cvec(rng, 4)), config);
    CHECK(total_energy(rec.final_state) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("renormalized discrete gradients still match finite differences") {
    SplitMix64 rng(89);
    DynamicsSpec dyn = mesh_act_dynamics(4, rng);
    const cvec h0 = random_cvec(rng, 4);
    const cvec w = random_cvec(rng, 4);
    ODESolveConfig config;
    config.renormalize = true;

    std::vector<double> params;
    dyn.get_params(params);
    const GradientResult g = discretize_gradients(dyn, OpticalState(h0), config, w);
    const auto loss = [&](const std::vector<double>& p) {
        DynamicsSpec probe = dyn;
        probe.set_params(p);
        return loss_through_solve(probe, h0, config, w);
    };
    const std::vector<double> fd = fd_gradient_oracle(loss, params);
    for (std::size_t i = 0; i < fd.size(); ++i)
        CHECK(rel_err(g.param_gradient[i], fd[i]) <= 1e-4);
}

TEST_CASE("renormalization cannot be combined with the adjoint mode") {
    ODESolveConfig config;
    config.renormalize = true;
    config.gradient_mode = GradientMode::adjoint;
    CHECK_THROWS_AS(adjoint_gradients(scale_dynamics(0.0, 2), OpticalState::zeros(2), config,
                                      cvec(2, cdouble(1, 0))),
                    ConfigError);
}

// ---------------------------------------------------------------------------
// Gradients through sampled trajectories

TEST_CASE("trajectory gradients match finite differences in both modes") {
    SplitMix64 rng(97);
    DynamicsSpec dyn = mesh_act_dynamics(4, rng);
    const cvec h0 = random_cvec(rng, 4, 0.5);
    const std::vector<double> times = {0.0, 0.7, 1.3};
    std::vector<cvec> cots;
    for (int i = 0; i < 3; ++i) cots.push_back(random_cvec(rng, 4));

    std::vector<double> params;
    dyn.get_params(params);
    const auto loss = [&](const std::vector<double>& p) {
        DynamicsSpec probe = dyn;
        probe.set_params(p);
        ODESolveConfig config;
        config.steps = 6;
        const auto samples = sample_trajectory(probe, OpticalState(h0), times, config);
        double total = 0.0;
        for (std::size_t s = 0; s < samples.size(); ++s)
            for (int i = 0; i < 4; ++i)
                total += std::real(std::conj(cots[s][static_cast<std::size_t>(i)]) * samples[s][i]);
        return total;
    };
    const std::vector<double> fd = fd_gradient_oracle(loss, params);

    // The discrete replay differentiates the computation exactly; the
    // continuous adjoint carries its own O(h^4) discretization error.
    for (GradientMode mode : {GradientMode::discretize, GradientMode::adjoint}) {
        ODESolveConfig config;
        config.steps = 6;
        config.gradient_mode = mode;
        const GradientResult g = trajectory_gradients(dyn, OpticalState(h0), times, cots, config);
        for (std::size_t i = 0; i < fd.size(); ++i)
            CHECK(rel_err(g.param_gradient[i], fd[i]) <= (mode == GradientMode::adjoint ? 2e-4 : 1e-5));
    }
}

TEST_CASE("trajectory gradients validate the cotangent shapes") {
    const DynamicsSpec dyn = scale_dynamics(cdouble(0, 1), 3);
    const std::vector<double> times = {0.0, 1.0};
    const std::vector<cvec> bad = {cvec(3, cdouble(1, 0)), cvec(2, cdouble(1, 0))};
    CHECK_THROWS_AS(
        trajectory_gradients(dyn, OpticalState::zeros(3), times, bad, ODESolveConfig{}),
        ShapeError);
}

// ---------------------------------------------------------------------------
// Residual-stack gradients

TEST_CASE("residual gradients match finite differences") {
    SplitMix64 rng(101);
    std::vector<DynamicsSpec> layers;
    layers.push_back(mesh_act_dynamics(4, rng));
    layers.push_back(mesh_act_dynamics(4, rng, 0.3, 1.1));
    const cvec h0 = random_cvec(rng, 4, 0.5);
    const cvec w = random_cvec(rng, 4);

    std::vector<double> params;
    std::vector<double> p0, p1;
    layers[0].get_params(p0);
    layers[1].get_params(p1);
    params = p0;
    params.insert(params.end(), p1.begin(), p1.end());

    const GradientResult g = residual_gradients(layers, OpticalState(h0), w);
    REQUIRE(g.param_gradient.size() == params.size());

    const auto loss = [&](const std::vector<double>& p) {
        std::vector<DynamicsSpec> probe;
        probe.push_back(layers[0]);
        probe.push_back(layers[1]);
        const std::vector<double> first(p.begin(), p.begin() + static_cast<long>(p0.size()));
        const std::vector<double> second(p.begin() + static_cast<long>(p0.size()), p.end());
        probe[0].set_params(first);
        probe[1].set_params(second);
        const OpticalState out = residual_forward(probe, OpticalState(h0));
        double total = 0.0;
        for (int i = 0; i < 4; ++i)
            total += std::real(std::conj(w[static_cast<std::size_t>(i)]) * out[i]);
        return total;
    };
    const std::vector<double> fd = fd_gradient_oracle(loss, params);
    for (std::size_t i = 0; i < fd.size(); ++i) CHECK(rel_err(g.param_gradient[i], fd[i]) <= 1e-5);
}
