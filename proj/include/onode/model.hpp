#pragma once

#include <string>
#include <utility>
#include <vector>

#include "onode/blocks.hpp"
#include "onode/field.hpp"
#include "onode/odeflow.hpp"

namespace onode {

enum class ModelMode { onode, resnet };
enum class Backend { mzi, dpu };

struct ModelConfig {
    ModelMode mode = ModelMode::onode;
    Backend backend = Backend::mzi;
    // Mesh ports (mzi) or field samples (dpu).
    int port_count = 72;
    // onode: hidden layers inside the chain f; resnet: residual blocks (one
    // hidden layer each).
    int layers = 1;
    ODESolveConfig solve;
    ActivationParams activation;
    PropagationSpec propagation;
    int dpu_metalines = 4;
    bool train_activation = false;
    TimePolicy time_policy = TimePolicy::autonomous;
    double omega0 = 1.0;

    void validate() const;
};

// A classification/trajectory model: either one dynamics chain integrated as
// an ODE, or a stack of residual layers (Eq. 3 form).
struct Model {
    ModelConfig config;
    DynamicsSpec dynamics;                     // onode mode
    std::vector<DynamicsSpec> residual_layers; // resnet mode

    int param_count() const;
    void get_params(std::vector<double>& out) const;
    void set_params(const std::vector<double>& in);
    // False where the parameter belongs to a frozen activation block.
    std::vector<bool> trainable_mask() const;

    // Projects box-constrained parameters (the activation tap fraction) back
    // into their valid range; phases are unconstrained.  Called by the
    // training loops after each optimizer step.
    void project_params(std::vector<double>& params) const;

    // Block walk in parameter order: (segment name, block pointer).
    std::vector<std::pair<std::string, const Block*>> named_blocks() const;

    OpticalState forward(const OpticalState& input) const;

    // Forward pass that keeps whatever the configured reverse mode can reuse.
    struct ForwardRecord {
        OpticalState output;
        SolveRecord record;
        bool has_record = false;
    };
    ForwardRecord forward_for_training(const OpticalState& input) const;
    GradientResult backward_from(const ForwardRecord& fwd, const OpticalState& input,
                                 const cvec& loss_cotangent) const;
};

// Builds the block structure and draws initial parameters from rng (phases
// uniform in [0, 2pi), chain order).
Model make_model(const ModelConfig& config, SplitMix64& rng);

} // namespace onode
