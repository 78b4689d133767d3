#pragma once

#include <memory>
#include <vector>

#include "onode/blocks.hpp"
#include "onode/field.hpp"

namespace onode {

class SplitMix64;

enum class TimePolicy { autonomous, time_injected };

// Right-hand side f(h, t, theta): the composition of a block chain.  Under the
// time-injected policy the input is first rotated by the global phase
// e^{i omega0 t}; under the autonomous policy t is ignored.
struct DynamicsSpec {
    std::vector<std::unique_ptr<Block>> chain;
    TimePolicy time_policy = TimePolicy::autonomous;
    double omega0 = 1.0;

    DynamicsSpec() = default;
    DynamicsSpec(const DynamicsSpec& other);
    DynamicsSpec& operator=(const DynamicsSpec& other);
    DynamicsSpec(DynamicsSpec&&) noexcept = default;
    DynamicsSpec& operator=(DynamicsSpec&&) noexcept = default;

    void validate() const;
    int port_count() const { return chain.empty() ? 0 : chain.front()->port_count(); }
    int param_count() const;
    // Cumulative parameter offsets per block, chain order; size chain.size()+1.
    std::vector<int> param_offsets() const;
    void get_params(std::vector<double>& out) const;
    void set_params(const std::vector<double>& in);
    void init_params(SplitMix64& rng);

    // Engine-level evaluation on raw amplitude vectors (out must not alias in).
    void eval(double t, const cvec& in, cvec& out) const;
    // Reverse-mode step: in_cotangent = (df/dh)^T upstream; pg accumulates
    // (df/dtheta)^T upstream in chain parameter layout.  When f_out is non-null
    // it receives f(in, t) from the same replay.
    void vjp(double t, const cvec& in, const cvec& upstream, cvec& in_cotangent, double* pg,
             cvec* f_out) const;
};

OpticalState eval_rhs(const DynamicsSpec& dynamics, const OpticalState& state, double t);

enum class SolverMethod { euler, midpoint, rk4 };
enum class GradientMode { automatic, discretize, adjoint };

int stage_count(SolverMethod method);

struct ODESolveConfig {
    SolverMethod method = SolverMethod::rk4;
    double t0 = 0.0;
    double t1 = 1.0;
    int steps = 4;
    GradientMode gradient_mode = GradientMode::automatic;
    // Optional per-step unit-energy renormalization (ablation flag; forward and
    // discretize gradients only).
    bool renormalize = false;

    void validate() const;
    GradientMode resolved_gradient_mode() const;
};

struct SolveRecord {
    OpticalState final_state;
    // Stage inputs in evaluation order, steps*stage_count entries when saved.
    std::vector<cvec> saved_states;
    // Pre-renormalization step results (renormalize runs only).
    std::vector<cvec> saved_prenorm;
    long evaluations = 0;
    bool saved = false;
};

SolveRecord solve_ivp(const DynamicsSpec& dynamics, const OpticalState& h0,
                      const ODESolveConfig& config, bool save_states = false);

// States at each requested time, one forward sweep, config.steps sub-steps per
// inter-sample interval.
std::vector<OpticalState> sample_trajectory(const DynamicsSpec& dynamics, const OpticalState& h0,
                                            const std::vector<double>& times,
                                            const ODESolveConfig& config);

// Optical ResNet: h <- h + f_T(h) for T = 0..layers-1, each layer its own
// parameters.  The layer index is passed as t.
OpticalState residual_forward(const std::vector<DynamicsSpec>& layers, const OpticalState& h0);

struct GradientResult {
    cvec h0_cotangent;
    std::vector<double> param_gradient;
    // Chain evaluations consumed (forward evals plus VJP replays).
    long rhs_evaluations = 0;
    // Peak per-call gradient bookkeeping in doubles; for adjoint mode this is
    // independent of the step count.
    std::size_t workspace_doubles = 0;
};

// Exact reverse-mode gradient of the discrete solve.  The first form runs its
// own stage-saving forward pass; the second replays an existing record and
// throws StateError if the record lacks saved states.
GradientResult discretize_gradients(const DynamicsSpec& dynamics, const OpticalState& h0,
                                    const ODESolveConfig& config, const cvec& loss_cotangent);
GradientResult discretize_gradients(const DynamicsSpec& dynamics, const SolveRecord& record,
                                    const ODESolveConfig& config, const cvec& loss_cotangent);

// Continuous adjoint: integrates (h, a, dL/dtheta) backward from t1 with the
// configured method; storage independent of the step count.
GradientResult adjoint_gradients(const DynamicsSpec& dynamics, const OpticalState& h0,
                                 const ODESolveConfig& config, const cvec& loss_cotangent);

// Gradients through sample_trajectory: one cotangent per sampled state,
// accumulated in a single backward sweep (mode per config).
GradientResult trajectory_gradients(const DynamicsSpec& dynamics, const OpticalState& h0,
                                    const std::vector<double>& times,
                                    const std::vector<cvec>& sample_cotangents,
                                    const ODESolveConfig& config);

// Reverse-mode gradient of residual_forward; param gradient is the
// concatenation of per-layer gradients in layer order.
GradientResult residual_gradients(const std::vector<DynamicsSpec>& layers, const OpticalState& h0,
                                  const cvec& loss_cotangent);

} // namespace onode
