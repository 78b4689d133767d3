#pragma once

#include <memory>
#include <string>
#include <vector>

#include "onode/field.hpp"

namespace onode {

class SplitMix64;

// ---------------------------------------------------------------------------
// Parameter records

struct MZIUnit {
    int top_port = 0; // couples ports (top_port, top_port+1)
    double theta = 0.0;
    double phi = 0.0;
};

struct MZIMeshParams {
    int port_count = 0;
    std::vector<MZIUnit> units;        // applied in order
    std::vector<double> output_phases; // diagonal screen after the mesh, size port_count

    // Full rectangular arrangement: port_count columns alternating between
    // even and odd adjacent pairs, port_count*(port_count-1)/2 units total.
    // All phases zero.
    static MZIMeshParams rectangular(int port_count);

    void validate() const;
    int param_count() const { return 2 * static_cast<int>(units.size()) + port_count; }
};

struct ActivationParams {
    double alpha = 0.1;      // tapped power fraction, in [0, 1)
    double gain = 3.141592653589793;       // radians per unit tapped power
    double phase_bias = 3.141592653589793; // radians

    void validate() const;
};

struct PropagationSpec {
    double wavelength = 1.55e-6;     // meters
    double effective_index = 2.85;   // slab effective index
    double pitch = 0.5e-6;           // sample spacing, meters
    double layer_distance = 50e-6;   // metaline-to-metaline spacing, meters

    void validate() const;
};

struct DiffractiveStackParams {
    int sample_count = 400;
    int layer_count = 4;
    std::vector<std::vector<double>> phases; // layer_count vectors of sample_count radians
    PropagationSpec propagation;

    static DiffractiveStackParams zeros(int sample_count, int layer_count,
                                        const PropagationSpec& prop = {});
    void validate() const;
    int param_count() const { return layer_count * sample_count; }
};

// Gradient transport bundle returned by block_vjp. state_cotangent packs
// dL/dRe(a) + i*dL/dIm(a) per input amplitude; param_gradient follows the
// owning block's parameter layout.
struct Cotangents {
    cvec state_cotangent;
    std::vector<double> param_gradient;
};

struct Mat2 {
    cdouble t00, t01, t10, t11;
};

// Single-MZI 2x2 transfer:
//   T(theta,phi) = i*e^{i theta/2} [[e^{i phi} sin(theta/2), cos(theta/2)],
//                                   [e^{i phi} cos(theta/2), -sin(theta/2)]]
Mat2 mzi_transfer(double theta, double phi);

// ---------------------------------------------------------------------------
// Block interface
//
// A block is a differentiable map on port amplitude vectors with a flat real
// parameter segment. vjp() accumulates (+=) parameter gradients into pg and
// writes the input-state cotangent; if fwd_out is non-null it also receives
// forward(in), which every implementation computes anyway while replaying.

class Block {
public:
    virtual ~Block() = default;
    virtual std::unique_ptr<Block> clone() const = 0;
    virtual std::string kind() const = 0;
    virtual int port_count() const = 0;
    virtual int param_count() const = 0;
    virtual void get_params(double* out) const = 0;
    virtual void set_params(const double* in) = 0;
    virtual void init_params(SplitMix64& rng) = 0; // draw trainable phases
    virtual void forward(const cvec& in, cvec& out) const = 0;
    virtual void vjp(const cvec& in, const cvec& upstream, cvec& in_cotangent, double* pg,
                     cvec* fwd_out) const = 0;
};

// Unitary linear layer: the ordered MZI cascade plus output phase screen.
// Per-unit transfer entries are cached after every parameter change so the
// hot path carries no trig.
class MZIMeshBlock final : public Block {
public:
    explicit MZIMeshBlock(MZIMeshParams params);

    const MZIMeshParams& params() const { return params_; }

    std::unique_ptr<Block> clone() const override { return std::make_unique<MZIMeshBlock>(*this); }
    std::string kind() const override { return "mzi_mesh"; }
    int port_count() const override { return params_.port_count; }
    // Layout: theta_0, phi_0, theta_1, phi_1, ..., then output phases.
    int param_count() const override { return params_.param_count(); }
    void get_params(double* out) const override;
    void set_params(const double* in) override;
    void init_params(SplitMix64& rng) override;
    void forward(const cvec& in, cvec& out) const override;
    void vjp(const cvec& in, const cvec& upstream, cvec& in_cotangent, double* pg,
             cvec* fwd_out) const override;

private:
    struct UnitCache {
        cdouble t00, t01, t10, t11; // transfer entries
        cdouble dth00, dth01, dth10, dth11; // d/dtheta entries
    };
    void rebuild_cache();

    MZIMeshParams params_;
    std::vector<UnitCache> cache_;
    cvec screen_; // e^{i * output_phases}
};

// Elementwise electro-optic nonlinearity:
//   f(z) = i*sqrt(1-alpha) * e^{-i d/2} * cos(d/2) * z,  d = gain*alpha*|z|^2 + phase_bias
class EOActivationBlock final : public Block {
public:
    EOActivationBlock(ActivationParams params, int port_count);

    const ActivationParams& params() const { return params_; }

    std::unique_ptr<Block> clone() const override {
        return std::make_unique<EOActivationBlock>(*this);
    }
    std::string kind() const override { return "eo_activation"; }
    int port_count() const override { return port_count_; }
    int param_count() const override { return 3; } // alpha, gain, phase_bias
    void get_params(double* out) const override;
    void set_params(const double* in) override;
    void init_params(SplitMix64&) override {} // constants, not drawn
    void forward(const cvec& in, cvec& out) const override;
    void vjp(const cvec& in, const cvec& upstream, cvec& in_cotangent, double* pg,
             cvec* fwd_out) const override;

private:
    ActivationParams params_;
    int port_count_;
};

// Cascade of phase-only metalines separated by slab propagation, with one
// final propagation to the readout plane.
class DiffractiveStackBlock final : public Block {
public:
    explicit DiffractiveStackBlock(DiffractiveStackParams params);

    const DiffractiveStackParams& params() const { return params_; }

    std::unique_ptr<Block> clone() const override {
        return std::make_unique<DiffractiveStackBlock>(*this);
    }
    std::string kind() const override { return "diffractive_stack"; }
    int port_count() const override { return params_.sample_count; }
    // Layout: layer 0 phases, layer 1 phases, ...
    int param_count() const override { return params_.param_count(); }
    void get_params(double* out) const override;
    void set_params(const double* in) override;
    void init_params(SplitMix64& rng) override;
    void forward(const cvec& in, cvec& out) const override;
    void vjp(const cvec& in, const cvec& upstream, cvec& in_cotangent, double* pg,
             cvec* fwd_out) const override;

private:
    void rebuild_cache();

    DiffractiveStackParams params_;
    std::vector<cvec> modulation_; // e^{i phases} per layer
    cvec kernel_;                  // propagation transfer for layer_distance
};

// Fixed elementwise complex gain z -> g*z. Not a photonic device; used to
// embed known linear dynamics (reference solutions, solver-order checks).
class ScaleBlock final : public Block {
public:
    ScaleBlock(cdouble gain, int port_count) : gain_(gain), port_count_(port_count) {}

    cdouble gain() const { return gain_; }

    std::unique_ptr<Block> clone() const override { return std::make_unique<ScaleBlock>(*this); }
    std::string kind() const override { return "scale"; }
    int port_count() const override { return port_count_; }
    int param_count() const override { return 0; }
    void get_params(double*) const override {}
    void set_params(const double*) override {}
    void init_params(SplitMix64&) override {}
    void forward(const cvec& in, cvec& out) const override;
    void vjp(const cvec& in, const cvec& upstream, cvec& in_cotangent, double* pg,
             cvec* fwd_out) const override;

private:
    cdouble gain_;
    int port_count_;
};

// ---------------------------------------------------------------------------
// Spec-surface operations on parameter records

OpticalState mesh_forward(const MZIMeshParams& params, const OpticalState& state);
OpticalState eo_activation(const ActivationParams& params, const OpticalState& state);
OpticalState metaline_modulate(const std::vector<double>& phases, const OpticalState& state);
OpticalState angular_spectrum_propagate(const PropagationSpec& spec, double distance,
                                        const OpticalState& state);
OpticalState dpu_forward(const DiffractiveStackParams& params, const OpticalState& state);
Cotangents block_vjp(const Block& block, const OpticalState& input, const cvec& upstream);

// Internal helper shared by DiffractiveStackBlock and the free op: fills the
// per-frequency transfer H(q) for one propagation distance.
void propagation_kernel(const PropagationSpec& spec, double distance, int sample_count,
                        cvec& kernel);

} // namespace onode
