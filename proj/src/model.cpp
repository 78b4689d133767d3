#include "onode/model.hpp"

#include <algorithm>

#include "onode/errors.hpp"
#include "onode/rng.hpp"

namespace onode {

void ModelConfig::validate() const {
    if (port_count < 1) throw ConfigError("ModelConfig: port count must be >= 1");
    if (layers < 1) throw ConfigError("ModelConfig: layers must be >= 1");
    solve.validate();
    activation.validate();
    if (backend == Backend::dpu) {
        propagation.validate();
        if (dpu_metalines < 1) throw ConfigError("ModelConfig: dpu_metalines must be >= 1");
    }
}

namespace {

DynamicsSpec make_chain(const ModelConfig& config, int hidden_layers) {
    DynamicsSpec dyn;
    dyn.time_policy = config.time_policy;
    dyn.omega0 = config.omega0;
    for (int l = 0; l < hidden_layers; ++l) {
        if (config.backend == Backend::mzi) {
            dyn.chain.push_back(
                std::make_unique<MZIMeshBlock>(MZIMeshParams::rectangular(config.port_count)));
        } else {
            DiffractiveStackParams p = DiffractiveStackParams::zeros(
                config.port_count, config.dpu_metalines, config.propagation);
            dyn.chain.push_back(std::make_unique<DiffractiveStackBlock>(std::move(p)));
        }
        dyn.chain.push_back(
            std::make_unique<EOActivationBlock>(config.activation, config.port_count));
    }
    return dyn;
}

} // namespace

Model make_model(const ModelConfig& config, SplitMix64& rng) {
    config.validate();
    Model model;
    model.config = config;
    if (config.mode == ModelMode::onode) {
        model.dynamics = make_chain(config, config.layers);
        model.dynamics.init_params(rng);
    } else {
        model.residual_layers.reserve(static_cast<std::size_t>(config.layers));
        for (int l = 0; l < config.layers; ++l) {
            model.residual_layers.push_back(make_chain(config, 1));
            model.residual_layers.back().init_params(rng);
        }
    }
    return model;
}

int Model::param_count() const {
    if (config.mode == ModelMode::onode) return dynamics.param_count();
    int total = 0;
    for (const auto& layer : residual_layers) total += layer.param_count();
    return total;
}

void Model::get_params(std::vector<double>& out) const {
    out.resize(static_cast<std::size_t>(param_count()));
    std::size_t at = 0;
    for (const auto& [name, block] : named_blocks()) {
        block->get_params(out.data() + at);
        at += static_cast<std::size_t>(block->param_count());
    }
}

void Model::set_params(const std::vector<double>& in) {
    if (in.size() != static_cast<std::size_t>(param_count()))
        throw ShapeError("Model::set_params: expected " + std::to_string(param_count()) +
                         " parameters, got " + std::to_string(in.size()));
    if (config.mode == ModelMode::onode) {
        dynamics.set_params(in);
        return;
    }
    std::size_t at = 0;
    for (auto& layer : residual_layers) {
        const std::size_t n = static_cast<std::size_t>(layer.param_count());
        std::vector<double> slice(in.begin() + static_cast<std::ptrdiff_t>(at),
                                  in.begin() + static_cast<std::ptrdiff_t>(at + n));
        layer.set_params(slice);
        at += n;
    }
}

std::vector<bool> Model::trainable_mask() const {
    std::vector<bool> mask(static_cast<std::size_t>(param_count()), true);
    if (config.train_activation) return mask;
    std::size_t at = 0;
    for (const auto& [name, block] : named_blocks()) {
        const std::size_t n = static_cast<std::size_t>(block->param_count());
        if (block->kind() == "eo_activation")
            for (std::size_t i = 0; i < n; ++i) mask[at + i] = false;
        at += n;
    }
    return mask;
}

void Model::project_params(std::vector<double>& params) const {
    if (params.size() != static_cast<std::size_t>(param_count()))
        throw ShapeError("Model::project_params: parameter count mismatch");
    std::size_t at = 0;
    for (const auto& [name, block] : named_blocks()) {
        if (block->kind() == "eo_activation")
            params[at] = std::clamp(params[at], 0.0, 1.0 - 1e-9);
        at += static_cast<std::size_t>(block->param_count());
    }
}

std::vector<std::pair<std::string, const Block*>> Model::named_blocks() const {
    std::vector<std::pair<std::string, const Block*>> out;
    if (config.mode == ModelMode::onode) {
        for (std::size_t i = 0; i < dynamics.chain.size(); ++i)
            out.emplace_back("dyn/" + std::to_string(i) + "/" + dynamics.chain[i]->kind(),
                             dynamics.chain[i].get());
    } else {
        for (std::size_t l = 0; l < residual_layers.size(); ++l)
            for (std::size_t i = 0; i < residual_layers[l].chain.size(); ++i)
                out.emplace_back("layer" + std::to_string(l) + "/" + std::to_string(i) + "/" +
                                     residual_layers[l].chain[i]->kind(),
                                 residual_layers[l].chain[i].get());
    }
    return out;
}

OpticalState Model::forward(const OpticalState& input) const {
    if (config.mode == ModelMode::onode)
        return solve_ivp(dynamics, input, config.solve).final_state;
    return residual_forward(residual_layers, input);
}

Model::ForwardRecord Model::forward_for_training(const OpticalState& input) const {
    if (config.mode == ModelMode::onode) {
        const bool save = config.solve.resolved_gradient_mode() == GradientMode::discretize;
        SolveRecord rec = solve_ivp(dynamics, input, config.solve, save);
        OpticalState out = rec.final_state;
        return ForwardRecord{std::move(out), std::move(rec), save};
    }
    SolveRecord empty{OpticalState::zeros(1), {}, {}, 0, false};
    return ForwardRecord{residual_forward(residual_layers, input), std::move(empty), false};
}

GradientResult Model::backward_from(const ForwardRecord& fwd, const OpticalState& input,
                                    const cvec& loss_cotangent) const {
    if (config.mode == ModelMode::onode) {
        if (config.solve.resolved_gradient_mode() == GradientMode::discretize) {
            if (!fwd.has_record)
                throw StateError("Model::backward_from: forward record lacks saved states");
            return discretize_gradients(dynamics, fwd.record, config.solve, loss_cotangent);
        }
        return adjoint_gradients(dynamics, input, config.solve, loss_cotangent);
    }
    return residual_gradients(residual_layers, input, loss_cotangent);
}

} // namespace onode
